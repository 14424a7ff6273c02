#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "gammasim/csv.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"
#include "gammasim/walk.hpp"

using namespace gammasim;

namespace {

struct RunResult {
    int exit_code;
    std::string out;  // stdout only; stderr goes to the terminal
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(GAMMASIM_CLI_PATH) + " " + args;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, out};
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string temp_dir() {
    static std::string dir = [] {
        char tmpl[] = "/tmp/gammasim_cli_XXXXXX";
        char* d = mkdtemp(tmpl);
        REQUIRE(d != nullptr);
        return std::string(d);
    }();
    return dir;
}

}  // namespace

TEST_CASE("seventeen-digit formatting round-trips every double", "[cli]") {
    CHECK(fmt17(0.1) == "0.10000000000000001");
    CHECK(fmt17(1.0) == "1");
    CHECK(fmt17(65.0) == "65");
    CHECK(fmt17(-0.00065933333333333328) == "-0.00065933333333333328");
    for (double x : {0.0084674117394037598, 3.14159, 1e-300, -2.5e17}) {
        double back = std::strtod(fmt17(x).c_str(), nullptr);
        CHECK(std::memcmp(&back, &x, sizeof x) == 0);
    }
}

TEST_CASE("trajectory CSV writes and reads back bitwise", "[cli]") {
    Trajectory traj;
    traj.times = {0.0, 0.1, 0.2, 0.3};
    traj.states = {{0.1, 0.2}, {0.11, 0.21}, {0.3333333333333333, 1e-17}, {5e-324, 0.4}};
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream is(os.str());
    Trajectory back = read_time_series_csv(is);
    REQUIRE(back.size() == traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(std::memcmp(&back.times[i], &traj.times[i], sizeof(double)) == 0);
        CHECK(std::memcmp(&back.states[i].u, &traj.states[i].u, sizeof(double)) == 0);
        CHECK(std::memcmp(&back.states[i].v, &traj.states[i].v, sizeof(double)) == 0);
    }
    CHECK(os.str().substr(0, 9) == "t_ms,u,v\n");
}

TEST_CASE("reader follows the header, ignores extras, rejects damage", "[cli]") {
    // Shuffled column order with an extra column.
    std::istringstream shuffled("v,K,u,t_ms\n0.2,65,0.1,0\n0.21,64,0.11,0.1\n");
    Trajectory t = read_time_series_csv(shuffled);
    REQUIRE(t.size() == 2);
    CHECK(t.times[1] == 0.1);
    CHECK(t.states[0].u == 0.1);
    CHECK(t.states[0].v == 0.2);

    std::istringstream missing("t_ms,u\n0,0.1\n0.1,0.2\n");
    CHECK_THROWS_AS(read_time_series_csv(missing), io_error);
    std::istringstream garbage("t_ms,u,v\n0,0.1,0.2\n0.1,zebra,0.3\n");
    CHECK_THROWS_AS(read_time_series_csv(garbage), io_error);
    std::istringstream short_row("t_ms,u,v\n0,0.1,0.2\n0.1,0.3\n");
    CHECK_THROWS_AS(read_time_series_csv(short_row), io_error);
    std::istringstream one_row("t_ms,u,v\n0,0.1,0.2\n");
    CHECK_THROWS_AS(read_time_series_csv(one_row), io_error);
}

TEST_CASE("writer schemas", "[cli]") {
    StochasticTrajectory sto;
    sto.times = {0.0, 0.1};
    sto.states = {{0.1, 0.2}, {0.11, 0.21}};
    sto.K_trace = {65, 64};
    sto.eps_trace = {0.07, 0.071};
    sto.gamma_trace = {5, 5.1};
    std::ostringstream os;
    write_stochastic_csv(os, sto);
    CHECK(os.str().substr(0, 22) == "t_ms,u,v,K,eps,gamma\n0");

    std::ostringstream oc;
    write_conductance_csv(oc, conductance_outputs(sto));
    CHECK(oc.str().substr(0, 30) == "t_ms,u_bar,e_current_3p5,v\n0,0");

    PsdResult psd;
    psd.freqs_hz = {0.0, 5.0};
    psd.power = {1.0, 2.0};
    psd.n_windows = 1;
    std::ostringstream op;
    write_psd_csv(op, psd);
    CHECK(op.str() == "freq_hz,power\n0,1\n5,2\n");
}

TEST_CASE("missing required option exits 2 with a usage message", "[cli]") {
    CHECK(run("fixed-points 2>/dev/null").exit_code == 2);
    CHECK(run("simulate 2>/dev/null").exit_code == 2);
    CHECK(run("period 2>/dev/null").exit_code == 2);
    CHECK(run("canard 2>/dev/null").exit_code == 2);
    CHECK(run("no-such-command 2>/dev/null").exit_code == 2);
    CHECK(run("period --model.K 60 --bogus-flag 1 2>/dev/null").exit_code == 2);
    CHECK(run("--help").exit_code == 0);
    CHECK(run("period --help").exit_code == 0);
}

TEST_CASE("domain failures exit 3, runtime failures 4, io failures 5", "[cli]") {
    CHECK(run("fixed-points --model.K -5 2>/dev/null").exit_code == 3);
    CHECK(run("fixed-points --model.K 200 2>/dev/null").exit_code == 3);
    // Above the oscillation threshold there is no cycle to time.
    CHECK(run("period --model.K 60 --model.eps 0.39 2>/dev/null").exit_code == 3);
    // Horizon too short for the exit crossing.
    CHECK(run("canard --model.K 60 --eps-list 1e-3 --t-end 1e-4 2>/dev/null").exit_code == 4);
    CHECK(run("simulate --model.K 60 --model.eps 0.1 -o /nonexistent_dir/x.csv 2>/dev/null")
              .exit_code == 5);
    CHECK(run("psd --input /nonexistent_file.csv 2>/dev/null").exit_code == 5);
}

TEST_CASE("fixed-points formats", "[cli]") {
    RunResult table = run("fixed-points --model.K 60 --model.eps 0.1");
    CHECK(table.exit_code == 0);
    CHECK(table.out.find("kind") != std::string::npos);
    CHECK(table.out.find("source") != std::string::npos);
    RunResult csv = run("fixed-points --model.K 60 --model.eps 0.1 --format csv");
    CHECK(csv.exit_code == 0);
    CHECK(csv.out.substr(0, 38) == "u,v,kind,re_l1,im_l1,re_l2,im_l2\n0,0,s");
    CHECK(csv.out.find("0.0084674117394037598") != std::string::npos);
}

TEST_CASE("period agrees between direct call and CLI", "[cli]") {
    RunResult r = run("period --model.K 60 --model.eps 0.1 2>/dev/null");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("period_ms=46.149246873684") != std::string::npos);
}

TEST_CASE("hopf curve CSV", "[cli]") {
    RunResult r = run("hopf --k-min 30 --k-max 100 --samples 8 2>/dev/null");
    CHECK(r.exit_code == 0);
    CHECK(r.out.substr(0, 9) == "K,eps_h\n3");
    CHECK(r.out.find("30,0.20733210593463869") != std::string::npos);
}

TEST_CASE("sweep keeps the spread verdict when the window is short", "[cli]") {
    RunResult r = run(
        "sweep --k-min 60 --k-max 60 --k-samples 1 --eps-min 0.2 --eps-max 0.41 "
        "--eps-samples 2 --t-end 300 2>/dev/null");
    CHECK(r.exit_code == 0);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);  // header
    // 300 ms holds only a few 49 ms cycles; the kind must not flip on that.
    REQUIRE(std::getline(is, line));
    std::stringstream ls(line);
    std::vector<std::string> f;
    for (std::string c; std::getline(ls, c, ',');) f.push_back(c);
    REQUIRE(f.size() >= 8);
    CHECK(f[2] == "limit_cycle");
    CHECK(std::stod(f[3]) == Catch::Approx(49.47).margin(0.5));
    // Above threshold the row is a sink and the period column stays blank.
    REQUIRE(std::getline(is, line));
    CHECK(line.find("sink,,") != std::string::npos);
}

TEST_CASE("seeded runs are byte-identical and distinct seeds differ", "[cli]") {
    std::string d = temp_dir();
    std::string common = "stochastic --seed 11 --t-end 300 -o ";
    REQUIRE(run(common + d + "/s11a.csv 2>/dev/null").exit_code == 0);
    REQUIRE(run(common + d + "/s11b.csv 2>/dev/null").exit_code == 0);
    std::string a = slurp(d + "/s11a.csv");
    CHECK(a == slurp(d + "/s11b.csv"));
    REQUIRE(run("stochastic --seed 12 --t-end 300 -o " + d + "/s12.csv 2>/dev/null")
                .exit_code == 0);
    CHECK(a != slurp(d + "/s12.csv"));
    CHECK(a.substr(0, 21) == "t_ms,u,v,K,eps,gamma\n");

    // The manifest records the run recipe next to the data.
    std::string man = slurp(d + "/s11a.csv.manifest.json");
    CHECK(man.find("\"command\": \"stochastic\"") != std::string::npos);
    CHECK(man.find("\"walk.seed\": \"11\"") != std::string::npos);
    CHECK(man.find("\"version\"") != std::string::npos);
}

TEST_CASE("conductance output doubles as spectral input", "[cli]") {
    std::string d = temp_dir();
    REQUIRE(run("stochastic --seed 5 --t-end 400 --conductance -o " + d +
                "/cond.csv 2>/dev/null")
                .exit_code == 0);
    std::string head = slurp(d + "/cond.csv").substr(0, 27);
    CHECK(head == "t_ms,u_bar,e_current_3p5,v\n");
}

TEST_CASE("stochastic pipes into psd", "[cli]") {
    std::string d = temp_dir();
    std::string cmd = std::string(GAMMASIM_CLI_PATH) +
                      " stochastic --seed 1 --t-end 900 2>/dev/null | " + GAMMASIM_CLI_PATH +
                      " psd --spectral.t0 300 --spectral.t1 900 --spectral.shift 10 "
                      "--band 30 90 -o " +
                      d + "/piped.csv 2>/dev/null";
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    std::string psd = slurp(d + "/piped.csv");
    CHECK(psd.substr(0, 14) == "freq_hz,power\n");
    // 200 ms windows over [300, 900]: 5 Hz bins up to the sampling limit.
    CHECK(psd.find("\n65,") != std::string::npos);
}

TEST_CASE("config file fills options, flags override, env fills gaps", "[cli]") {
    std::string d = temp_dir();
    {
        std::ofstream cfg(d + "/run.toml");
        cfg << "[period]\n\"model.K\" = 60\n\"model.eps\" = 0.1\n";
    }
    RunResult from_file = run("--config " + d + "/run.toml period 2>/dev/null");
    CHECK(from_file.exit_code == 0);
    CHECK(from_file.out.find("period_ms=46.1492") != std::string::npos);

    // A flag on the command line beats the file's value for the same key.
    RunResult flag_wins = run("--config " + d + "/run.toml period --model.eps 0.2 2>/dev/null");
    CHECK(flag_wins.exit_code == 0);
    CHECK(flag_wins.out.find("period_ms=46.1492") == std::string::npos);
    RunResult direct = run("period --model.K 60 --model.eps 0.2 2>/dev/null");
    CHECK(flag_wins.out == direct.out);

    // Environment variables fill what neither file nor flags set.
    setenv("GAMMASIM_MODEL_K", "60", 1);
    RunResult from_env = run("period --model.eps 0.1 2>/dev/null");
    unsetenv("GAMMASIM_MODEL_K");
    CHECK(from_env.exit_code == 0);
    CHECK(from_env.out == from_file.out);

    // Unknown keys in the file are an error, not a silent skip.
    {
        std::ofstream cfg(d + "/bad.toml");
        cfg << "[period]\n\"model.K\" = 60\nmystery = 1\n";
    }
    CHECK(run("--config " + d + "/bad.toml period 2>/dev/null").exit_code == 2);
}

TEST_CASE("simulate writes the documented schema with full precision", "[cli]") {
    std::string d = temp_dir();
    REQUIRE(run("simulate --model.K 60 --model.eps 0.1 --t-end 2 -o " + d +
                "/sim.csv 2>/dev/null")
                .exit_code == 0);
    std::string csv = slurp(d + "/sim.csv");
    CHECK(csv.substr(0, 9) == "t_ms,u,v\n");
    // 17-significant-digit payload: the probe start is 1.05x the rest point.
    CHECK(csv.find("0.0088907823263739486") != std::string::npos);
}
