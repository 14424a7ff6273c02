// Command-line front end: every analysis as a subcommand with dotted-key
// flags, optional config file, seeded reproducibility, CSV outputs and a
// JSON manifest next to every file output.
//
// Exit codes: 0 success, 2 usage/config, 3 invalid domain (bad parameters or
// non-oscillatory regime), 4 runtime failure (blow-up, missing crossing,
// redraw exhaustion), 5 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "gammasim/canard.hpp"
#include "gammasim/csv.hpp"
#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"
#include "gammasim/spectral.hpp"
#include "gammasim/walk.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using gammasim::fmt17;

// ---------------------------------------------------------------- plumbing

struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void set(const std::string& key, double v) { config[key] = fmt17(v); }
    void set(const std::string& key, const std::string& v) { config[key] = v; }
    void set(const std::string& key, std::uint64_t v) { config[key] = std::to_string(v); }
    void set(const std::string& key, std::int64_t v) { config[key] = std::to_string(v); }
};

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Written next to every file output; the seed and effective config make any
// run reproducible from its artifacts alone.
void write_manifest(const std::string& out_path, const Manifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["version"] = kVersion;
    j["config"] = m.config;
    j["output"] = out_path;
    j["generated_utc"] = utc_now();
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - m.started).count();
    j["wall_time_s"] = wall;
    std::string path = out_path + ".manifest.json";
    std::ofstream os(path);
    if (!os) throw gammasim::io_error("cannot write manifest " + path);
    os << j.dump(2) << "\n";
    if (!os.good()) throw gammasim::io_error("failed writing manifest " + path);
}

// Primary data goes to -o (or stdout without it); the one-line summary goes
// to the other stream so piping CSVs stays clean.
struct OutputTarget {
    std::string path;  // empty = stdout

    template <typename WriteFn>
    void write(WriteFn&& fn) const {
        if (path.empty()) {
            fn(std::cout);
            std::cout.flush();
            if (!std::cout.good()) throw gammasim::io_error("failed writing to stdout");
        } else {
            std::ofstream os(path);
            if (!os) throw gammasim::io_error("cannot open output file " + path);
            fn(os);
            if (!os.good()) throw gammasim::io_error("failed writing " + path);
        }
    }

    std::ostream& summary_stream() const { return path.empty() ? std::cerr : std::cout; }

    void finish(const Manifest& m) const {
        if (!path.empty()) write_manifest(path, m);
    }
};

// ------------------------------------------------------------ shared flags

struct ModelFlags {
    double K = 0.0, eps = 0.1, gamma = 1.0;
    double a1 = -0.01, a2 = 0.1, b = 11.9, c = 6.6e-4;

    gammasim::ModelParams params() const {
        gammasim::ModelParams p;
        p.a1 = a1; p.a2 = a2; p.b = b; p.c = c;
        p.K = K; p.epsilon = eps; p.gamma = gamma;
        return p;
    }
    void fill(Manifest& m) const {
        m.set("model.K", K); m.set("model.eps", eps); m.set("model.gamma", gamma);
        m.set("model.a1", a1); m.set("model.a2", a2); m.set("model.b", b);
        m.set("model.c", c);
    }
};

void add_model_options(CLI::App* cmd, ModelFlags& mf, bool require_K) {
    auto* k = cmd->add_option("--model.K", mf.K, "coupling strength K")
                  ->envname("GAMMASIM_MODEL_K");
    if (require_K) k->required();
    cmd->add_option("--model.eps", mf.eps, "time-scale separation epsilon")
        ->envname("GAMMASIM_MODEL_EPS");
    cmd->add_option("--model.gamma", mf.gamma, "slow-equation rate gamma")
        ->envname("GAMMASIM_MODEL_GAMMA");
    cmd->add_option("--model.a1", mf.a1, "lower root of the fast nullcline");
    cmd->add_option("--model.a2", mf.a2, "upper root of the fast nullcline");
    cmd->add_option("--model.b", mf.b, "slow nullcline slope");
    cmd->add_option("--model.c", mf.c, "slow nullcline intercept");
}

struct IntegrationFlags {
    double dt = 0.0;  // 0 = auto: min(0.01, eps/10)
    double t_end = 2000.0;
    double transient = 500.0;
    std::int64_t stride = 1;
    double floor = 1e-12;
    CLI::Option* transient_opt = nullptr;

    gammasim::IntegrationConfig config(const gammasim::ModelParams& p) const {
        gammasim::IntegrationConfig c;
        c.dt = dt > 0.0 ? dt : gammasim::default_dt(p);
        c.t_end = t_end;
        // Keep the default discard sensible when the run is shorter than it.
        bool transient_set = transient_opt && transient_opt->count() > 0;
        c.transient_discard = transient_set ? transient : std::min(transient, 0.25 * t_end);
        c.record_stride = stride;
        c.state_floor = floor;
        return c;
    }
    void fill(Manifest& m, const gammasim::IntegrationConfig& c) const {
        m.set("integrate.dt", c.dt); m.set("integrate.t-end", c.t_end);
        m.set("integrate.transient", c.transient_discard);
        m.set("integrate.stride", c.record_stride);
        m.set("integrate.floor", c.state_floor);
    }
};

void add_integration_options(CLI::App* cmd, IntegrationFlags& f, double t_end_default) {
    f.t_end = t_end_default;
    cmd->add_option("--integrate.dt,--dt", f.dt, "step size in ms (0 = min(0.01, eps/10))");
    cmd->add_option("--integrate.t-end,--t-end", f.t_end, "run length in ms")
        ->envname("GAMMASIM_T_END");
    f.transient_opt = cmd->add_option("--integrate.transient", f.transient, "discard window in ms");
    cmd->add_option("--integrate.stride", f.stride, "record every n-th step");
    cmd->add_option("--integrate.floor", f.floor, "positivity floor for state components");
}

struct WalkFlags {
    gammasim::WalkConfig cfg;
    std::string preset;
    CLI::Option* kmin_opt = nullptr;
    CLI::Option* kmax_opt = nullptr;

    gammasim::WalkConfig resolve() const {
        gammasim::WalkConfig w = cfg;
        if (preset == "narrow-k") {
            if (kmin_opt->count() == 0) w.K_min = 30.0;
            if (kmax_opt->count() == 0) w.K_max = 50.0;
        }
        return w;
    }
    void fill(Manifest& m, const gammasim::WalkConfig& w) const {
        m.set("walk.k-min", w.K_min); m.set("walk.k-max", w.K_max);
        m.set("walk.eps-min", w.eps_min); m.set("walk.eps-max", w.eps_max);
        m.set("walk.f-min", w.f_min); m.set("walk.f-max", w.f_max);
        m.set("walk.interval", w.update_interval);
        m.set("walk.k-step", w.K_step); m.set("walk.eps-step", w.eps_step);
        m.set("walk.gamma-step", w.gamma_step);
        m.set("walk.max-redraws", std::int64_t(w.max_redraws));
        m.set("walk.seed", std::uint64_t(w.seed));
    }
};

void add_walk_options(CLI::App* cmd, WalkFlags& f) {
    f.kmin_opt = cmd->add_option("--walk.k-min", f.cfg.K_min, "lower K bound");
    f.kmax_opt = cmd->add_option("--walk.k-max", f.cfg.K_max, "upper K bound");
    cmd->add_option("--walk.eps-min", f.cfg.eps_min, "lower eps bound");
    cmd->add_option("--walk.eps-max", f.cfg.eps_max, "upper eps bound");
    cmd->add_option("--walk.f-min", f.cfg.f_min, "lower eps*gamma bound");
    cmd->add_option("--walk.f-max", f.cfg.f_max, "upper eps*gamma bound");
    cmd->add_option("--walk.interval", f.cfg.update_interval, "parameter update interval, ms");
    cmd->add_option("--walk.k-step", f.cfg.K_step, "multiplicative K step");
    cmd->add_option("--walk.eps-step", f.cfg.eps_step, "additive eps step");
    cmd->add_option("--walk.gamma-step", f.cfg.gamma_step, "additive gamma step");
    cmd->add_option("--walk.max-redraws", f.cfg.max_redraws, "gamma redraw budget");
    cmd->add_option("--walk.seed,--seed", f.cfg.seed, "random walk seed")
        ->envname("GAMMASIM_WALK_SEED");
    cmd->add_option("--preset", f.preset, "named range preset")
        ->check(CLI::IsMember({"narrow-k"}));
}

struct SpectralFlags {
    gammasim::SpectralConfig cfg;
    std::string channel = "v";
    std::vector<double> band{20.0, 120.0};

    gammasim::Channel chan() const {
        if (channel == "u") return gammasim::Channel::u;
        if (channel == "v") return gammasim::Channel::v;
        if (channel == "u_bar") return gammasim::Channel::u_bar;
        return gammasim::Channel::e_current_3p5;
    }
    void fill(Manifest& m) const {
        m.set("spectral.window", cfg.T_window); m.set("spectral.shift", cfg.shift);
        m.set("spectral.t0", cfg.t0); m.set("spectral.t1", cfg.t1);
        m.set("spectral.sample-dt", cfg.sample_dt);
        m.set("channel", channel);
        m.set("band", fmt17(band[0]) + ".." + fmt17(band[1]));
    }
};

void add_spectral_options(CLI::App* cmd, SpectralFlags& f) {
    cmd->add_option("--spectral.window,-T", f.cfg.T_window, "window length, ms");
    cmd->add_option("--spectral.shift", f.cfg.shift, "window shift, ms");
    cmd->add_option("--spectral.t0", f.cfg.t0, "analysis start, ms");
    cmd->add_option("--spectral.t1", f.cfg.t1, "analysis end, ms");
    cmd->add_option("--spectral.sample-dt", f.cfg.sample_dt, "expected signal sampling, ms");
    cmd->add_option("--channel", f.channel, "signal channel")
        ->check(CLI::IsMember({"u", "v", "u_bar", "e3p5"}));
    cmd->add_option("--band", f.band, "peak search band in Hz, two values")
        ->expected(2);
}

// ------------------------------------------------------------- subcommands

int cmd_fixed_points(const ModelFlags& mf, const OutputTarget& out, const std::string& format) {
    Manifest man;
    man.command = "fixed-points";
    mf.fill(man);
    man.set("format", format);
    gammasim::ModelParams p = mf.params();
    std::vector<gammasim::FixedPoint> fps = gammasim::fixed_points(p);
    out.write([&](std::ostream& os) {
        if (format == "csv") {
            gammasim::write_fixed_points_csv(os, fps);
        } else {
            os << "      u                        v                        kind        "
                  "eigenvalues\n";
            for (const auto& fp : fps) {
                char line[256];
                std::snprintf(line, sizeof line, "%-24.17g %-24.17g %-11s %.6g%+.6gi, %.6g%+.6gi\n",
                              fp.location.u, fp.location.v, gammasim::to_string(fp.kind),
                              fp.lambda1.real(), fp.lambda1.imag(), fp.lambda2.real(),
                              fp.lambda2.imag());
                os << line;
            }
        }
    });
    out.finish(man);
    return 0;
}

int cmd_simulate(const ModelFlags& mf, const IntegrationFlags& icf, double u0, double v0,
                 const OutputTarget& out) {
    Manifest man;
    man.command = "simulate";
    mf.fill(man);
    gammasim::ModelParams p = mf.params();
    gammasim::IntegrationConfig icfg = icf.config(p);
    icf.fill(man, icfg);
    gammasim::State s0 = (std::isnan(u0) || std::isnan(v0))
                             ? gammasim::default_probe_start(p)
                             : gammasim::State{u0, v0};
    man.set("u0", s0.u);
    man.set("v0", s0.v);
    gammasim::Trajectory traj = gammasim::integrate(s0, p, icfg);
    out.write([&](std::ostream& os) { gammasim::write_trajectory_csv(os, traj); });
    out.summary_stream() << "simulate: samples=" << traj.size() << " t_end_ms=" << icfg.t_end
                         << " floored=" << (traj.floored ? "yes" : "no") << "\n";
    out.finish(man);
    return 0;
}

int cmd_period(const ModelFlags& mf, const IntegrationFlags& icf, const OutputTarget& out) {
    Manifest man;
    man.command = "period";
    mf.fill(man);
    gammasim::ModelParams p = mf.params();
    gammasim::IntegrationConfig icfg = icf.config(p);
    icf.fill(man, icfg);
    double period = gammasim::limit_cycle_period(p, icfg);
    if (!out.path.empty())
        out.write([&](std::ostream& os) { os << "period_ms\n" << fmt17(period) << "\n"; });
    // The scalar answer is the primary output, so it always lands on stdout.
    std::cout << "period_ms=" << fmt17(period) << "\n";
    out.finish(man);
    return 0;
}

int cmd_hopf(const ModelFlags& mf, double k_min, double k_max, std::int64_t samples,
             const OutputTarget& out) {
    Manifest man;
    man.command = "hopf";
    mf.fill(man);
    man.set("k-min", k_min);
    man.set("k-max", k_max);
    man.set("samples", samples);
    if (samples < 2) throw gammasim::domain_error("need at least 2 samples");
    auto curve = gammasim::hopf_curve(k_min, k_max, std::size_t(samples), mf.params());
    out.write([&](std::ostream& os) { gammasim::write_hopf_csv(os, curve); });
    out.summary_stream() << "hopf: samples=" << samples << " eps_h[K=" << fmt17(k_min)
                         << "]=" << fmt17(curve.front().second) << " eps_h[K=" << fmt17(k_max)
                         << "]=" << fmt17(curve.back().second) << "\n";
    out.finish(man);
    return 0;
}

int cmd_sweep(const ModelFlags& mf, const IntegrationFlags& icf, double k_min, double k_max,
              std::int64_t k_samples, double eps_min, double eps_max, std::int64_t eps_samples,
              std::int64_t threads, const OutputTarget& out) {
    Manifest man;
    man.command = "sweep";
    mf.fill(man);
    man.set("k-min", k_min); man.set("k-max", k_max); man.set("k-samples", k_samples);
    man.set("eps-min", eps_min); man.set("eps-max", eps_max);
    man.set("eps-samples", eps_samples);
    if (k_samples < 1 || eps_samples < 1) throw gammasim::domain_error("samples must be >= 1");
    if (k_samples > 1 && !(k_min < k_max)) throw gammasim::domain_error("need k-min < k-max");
    if (eps_samples > 1 && !(eps_min < eps_max))
        throw gammasim::domain_error("need eps-min < eps-max");

    std::vector<std::pair<double, double>> grid;
    for (std::int64_t i = 0; i < k_samples; ++i) {
        double K = k_samples == 1 ? k_min
                                  : k_min + (k_max - k_min) * double(i) / double(k_samples - 1);
        for (std::int64_t j = 0; j < eps_samples; ++j) {
            double eps = eps_samples == 1
                             ? eps_min
                             : eps_min + (eps_max - eps_min) * double(j) / double(eps_samples - 1);
            grid.emplace_back(K, eps);
        }
    }

    std::vector<gammasim::SweepRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            try {
                gammasim::ModelParams p = mf.params();
                p.K = grid[i].first;
                p.epsilon = grid[i].second;
                gammasim::IntegrationConfig icfg = icf.config(p);
                gammasim::Trajectory traj =
                    gammasim::integrate(gammasim::default_probe_start(p), p, icfg);
                gammasim::SweepRow row;
                row.K = p.K;
                row.eps = p.epsilon;
                double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
                double tail = 0.75 * icfg.t_end;
                for (std::size_t s = 0; s < traj.size(); ++s) {
                    if (traj.times[s] < tail) continue;
                    lo_u = std::min(lo_u, traj.states[s].u);
                    hi_u = std::max(hi_u, traj.states[s].u);
                    lo_v = std::min(lo_v, traj.states[s].v);
                    hi_v = std::max(hi_v, traj.states[s].v);
                }
                row.u_min = lo_u; row.u_max = hi_u; row.v_min = lo_v; row.v_max = hi_v;
                row.kind = (hi_u - lo_u < 1e-6) ? gammasim::AttractorKind::sink
                                                : gammasim::AttractorKind::limit_cycle;
                if (row.kind == gammasim::AttractorKind::limit_cycle) {
                    gammasim::State fp = gammasim::interior_fixed_point(p);
                    auto events = gammasim::detect_events(
                        traj, gammasim::EventSpec::v_crosses(fp.v, gammasim::EventSpec::Direction::up));
                    std::vector<double> ts;
                    for (const auto& e : events)
                        if (e.t >= icfg.transient_discard) ts.push_back(e.t);
                    // A spiral draining into the sink can still out-swing the
                    // spread tolerance at panorama horizons. Whole-cycle
                    // amplitudes tell it apart: they shrink every turn on a
                    // drain and hold steady (or grow) on a cycle.
                    std::vector<double> amp;
                    std::size_t si = 0;
                    for (std::size_t ci = 0; ci + 1 < ts.size(); ++ci) {
                        while (si < traj.size() && traj.times[si] < ts[ci]) ++si;
                        double alo = 1e300, ahi = -1e300;
                        std::size_t sj = si;
                        for (; sj < traj.size() && traj.times[sj] < ts[ci + 1]; ++sj) {
                            alo = std::min(alo, traj.states[sj].u);
                            ahi = std::max(ahi, traj.states[sj].u);
                        }
                        if (sj > si) amp.push_back(ahi - alo);
                        si = sj;
                    }
                    if (amp.size() >= 2 && amp.back() < 0.9 * amp.front()) {
                        row.kind = gammasim::AttractorKind::sink;
                    } else if (ts.size() >= 2) {
                        // Period averaged over the cycles the window holds, up
                        // to ten. A window too short for two crossings leaves
                        // it blank; the spread already settled the kind.
                        std::size_t m = std::min<std::size_t>(10, ts.size() - 1);
                        row.period_ms = (ts.back() - ts[ts.size() - 1 - m]) / double(m);
                    }
                }
                rows[i] = row;
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(grid.size());
                return;
            }
        }
    };
    std::int64_t n_threads = threads > 0 ? threads : std::int64_t(std::thread::hardware_concurrency());
    n_threads = std::max<std::int64_t>(1, std::min<std::int64_t>(n_threads, std::int64_t(grid.size())));
    std::vector<std::thread> pool;
    for (std::int64_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    std::size_t oscillatory = 0;
    for (const auto& r : rows)
        if (r.kind == gammasim::AttractorKind::limit_cycle) ++oscillatory;
    out.write([&](std::ostream& os) { gammasim::write_sweep_csv(os, rows); });
    out.summary_stream() << "sweep: cells=" << rows.size() << " oscillatory=" << oscillatory
                         << " threads=" << n_threads << "\n";
    out.finish(man);
    return 0;
}

gammasim::StochasticTrajectory run_walk(const gammasim::WalkConfig& walk, double t_end,
                                        double dt_flag, double floor_flag) {
    gammasim::ModelParams p0;
    p0.K = walk.initial_K();
    p0.epsilon = walk.initial_eps();
    p0.gamma = walk.initial_gamma();
    gammasim::IntegrationConfig icfg;
    icfg.dt = dt_flag > 0.0 ? dt_flag : 0.01;
    icfg.t_end = t_end;
    icfg.transient_discard = std::min(500.0, 0.25 * t_end);
    icfg.state_floor = floor_flag;
    return gammasim::simulate_stochastic(gammasim::default_probe_start(p0), p0.K, p0.epsilon,
                                         p0.gamma, walk, icfg);
}

int cmd_stochastic(const WalkFlags& wf, const IntegrationFlags& icf, bool conductance,
                   std::int64_t n_seeds, std::int64_t threads, const OutputTarget& out) {
    gammasim::WalkConfig base = wf.resolve();
    if (n_seeds < 1) throw gammasim::domain_error("--seeds must be >= 1");
    if (n_seeds > 1 && out.path.empty())
        throw CLI::ValidationError("--seeds > 1 requires -o/--output");

    auto one = [&](std::uint64_t seed, const OutputTarget& tgt) {
        Manifest man;
        man.command = "stochastic";
        gammasim::WalkConfig walk = base;
        walk.seed = seed;
        wf.fill(man, walk);
        man.set("t-end", icf.t_end);
        man.set("schema", conductance ? "conductance" : "stochastic");
        gammasim::StochasticTrajectory traj = run_walk(walk, icf.t_end, icf.dt, icf.floor);
        if (conductance) {
            gammasim::ConductanceTable tab = gammasim::conductance_outputs(traj);
            tgt.write([&](std::ostream& os) { gammasim::write_conductance_csv(os, tab); });
        } else {
            tgt.write([&](std::ostream& os) { gammasim::write_stochastic_csv(os, traj); });
        }
        std::ostringstream summary;
        double corr = gammasim::ei_balance_correlation(traj, std::min(500.0, 0.25 * icf.t_end));
        summary << "stochastic: seed=" << seed << " samples=" << traj.size()
                << " corr_3p5ubar_v=" << fmt17(corr)
                << " clamps(K/eps/gamma)=" << traj.counters.K_clamps << "/"
                << traj.counters.eps_clamps << "/" << traj.counters.gamma_clamps
                << " gamma_redraws=" << traj.counters.gamma_redraws << "\n";
        tgt.finish(man);
        return summary.str();
    };

    if (n_seeds == 1) {
        std::string summary = one(base.seed, out);
        out.summary_stream() << summary;
        return 0;
    }

    // Seed fan-out: seeds base..base+n-1, one file per seed, summaries merged
    // in seed order.
    std::string stem = out.path;
    std::string ext;
    std::size_t dot = stem.find_last_of('.');
    std::size_t slash = stem.find_last_of('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        ext = stem.substr(dot);
        stem = stem.substr(0, dot);
    }
    std::vector<std::string> summaries(static_cast<std::size_t>(n_seeds));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&]() {
        for (;;) {
            std::int64_t i = next.fetch_add(1);
            if (i >= n_seeds) return;
            try {
                OutputTarget tgt{stem + "_seed" + std::to_string(base.seed + std::uint64_t(i)) + ext};
                summaries[std::size_t(i)] = one(base.seed + std::uint64_t(i), tgt);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n_seeds);
                return;
            }
        }
    };
    std::int64_t n_threads = threads > 0 ? threads : std::int64_t(std::thread::hardware_concurrency());
    n_threads = std::max<std::int64_t>(1, std::min<std::int64_t>(n_threads, n_seeds));
    std::vector<std::thread> pool;
    for (std::int64_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    for (const std::string& s : summaries) out.summary_stream() << s;
    return 0;
}

// Shared input path for the two spectral commands: --seed runs the walk
// inline, --input reads a CSV, otherwise the CSV comes from stdin.
gammasim::Signal spectral_input(const WalkFlags& wf, const SpectralFlags& sf,
                                const std::string& input, bool seed_given, double dt_flag,
                                Manifest& man) {
    if (seed_given) {
        gammasim::WalkConfig walk = wf.resolve();
        wf.fill(man, walk);
        man.set("source", "inline stochastic run");
        gammasim::StochasticTrajectory traj =
            run_walk(walk, sf.cfg.t1, dt_flag, 1e-12);
        return gammasim::extract_channel(traj, sf.chan());
    }
    if (!input.empty()) {
        man.set("source", input);
        std::ifstream is(input);
        if (!is) throw gammasim::io_error("cannot open input file " + input);
        gammasim::Trajectory traj = gammasim::read_time_series_csv(is);
        return gammasim::extract_channel(traj, sf.chan());
    }
    if (isatty(fileno(stdin)))
        throw CLI::ValidationError("need --input, --seed, or a piped CSV on stdin");
    man.set("source", "stdin");
    gammasim::Trajectory traj = gammasim::read_time_series_csv(std::cin);
    return gammasim::extract_channel(traj, sf.chan());
}

int cmd_psd(const WalkFlags& wf, const SpectralFlags& sf, const std::string& input,
            bool seed_given, double dt_flag, const OutputTarget& out) {
    Manifest man;
    man.command = "psd";
    sf.fill(man);
    gammasim::Signal sig = spectral_input(wf, sf, input, seed_given, dt_flag, man);
    gammasim::PsdResult psd = gammasim::averaged_psd(sig, sf.cfg);
    double peak = gammasim::peak_frequency(psd, sf.band[0], sf.band[1]);
    out.write([&](std::ostream& os) { gammasim::write_psd_csv(os, psd); });
    out.summary_stream() << "psd: n_windows=" << psd.n_windows << " peak_hz=" << fmt17(peak)
                         << " band=[" << fmt17(sf.band[0]) << "," << fmt17(sf.band[1])
                         << "] channel=" << sf.channel << "\n";
    out.finish(man);
    return 0;
}

int cmd_spectrogram(const WalkFlags& wf, const SpectralFlags& sf, const std::string& input,
                    bool seed_given, double dt_flag, const OutputTarget& out) {
    Manifest man;
    man.command = "spectrogram";
    sf.fill(man);
    gammasim::Signal sig = spectral_input(wf, sf, input, seed_given, dt_flag, man);
    std::int64_t n_windows = 0;
    out.write([&](std::ostream& os) {
        os << "window_start_ms,freq_hz,power\n";
        std::vector<double> freqs =
            gammasim::frequency_axis(sf.cfg.window_samples(), sf.cfg.T_window);
        gammasim::for_each_window(sig, sf.cfg,
                                  [&](std::int64_t, double t, const std::vector<double>& power) {
                                      ++n_windows;
                                      for (std::size_t k = 0; k < power.size(); ++k)
                                          os << fmt17(t) << ',' << fmt17(freqs[k]) << ','
                                             << fmt17(power[k]) << '\n';
                                  });
    });
    out.summary_stream() << "spectrogram: n_windows=" << n_windows
                         << " bins=" << sf.cfg.window_samples() << "\n";
    out.finish(man);
    return 0;
}

int cmd_canard(const ModelFlags& mf, const IntegrationFlags& icf, std::vector<double> eps_list,
               double entry_k, const OutputTarget& out) {
    Manifest man;
    man.command = "canard";
    mf.fill(man);
    std::string eps_str;
    for (double e : eps_list) eps_str += (eps_str.empty() ? "" : ",") + fmt17(e);
    man.set("eps-list", eps_str);
    man.set("entry-k", entry_k);
    man.set("t-end", icf.t_end);
    gammasim::ModelParams p = mf.params();
    gammasim::IntegrationConfig icfg;
    icfg.dt = icf.dt > 0.0 ? icf.dt : 0.01;
    icfg.t_end = icf.t_end;
    std::vector<gammasim::CanardMeasurement> ms =
        gammasim::measure_canard(p, eps_list, entry_k, icfg);
    out.write([&](std::ostream& os) { gammasim::write_canard_csv(os, ms); });
    out.summary_stream() << "canard: entries=" << ms.size() << " prediction="
                         << fmt17(ms.back().prediction) << " final_abs_error="
                         << fmt17(ms.back().abs_error) << "\n";
    out.finish(man);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slow-fast conductance oscillator: simulation and analysis toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a config file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_version_flag("--version", kVersion);

    std::string output;
    auto add_output = [&output](CLI::App* cmd) {
        cmd->add_option("-o,--output", output, "write primary CSV here (default: stdout)");
    };

    // fixed-points
    ModelFlags fp_model;
    std::string fp_format = "table";
    auto* fp_cmd = app.add_subcommand("fixed-points", "stationary states with classification");
    add_model_options(fp_cmd, fp_model, true);
    fp_cmd->add_option("--format", fp_format, "output format")
        ->check(CLI::IsMember({"table", "csv"}));
    add_output(fp_cmd);

    // simulate
    ModelFlags sim_model;
    IntegrationFlags sim_icf;
    double sim_u0 = std::nan(""), sim_v0 = std::nan("");
    auto* sim_cmd = app.add_subcommand("simulate", "fixed-parameter trajectory CSV");
    add_model_options(sim_cmd, sim_model, true);
    add_integration_options(sim_cmd, sim_icf, 2000.0);
    sim_cmd->add_option("--u0", sim_u0, "initial u (default: 1.05x rest point)");
    sim_cmd->add_option("--v0", sim_v0, "initial v (default: 1.05x rest point)");
    add_output(sim_cmd);

    // period
    ModelFlags per_model;
    IntegrationFlags per_icf;
    auto* per_cmd = app.add_subcommand("period", "limit-cycle period from section crossings");
    add_model_options(per_cmd, per_model, true);
    add_integration_options(per_cmd, per_icf, 2000.0);
    add_output(per_cmd);

    // hopf
    ModelFlags hopf_model;
    double hopf_kmin = 30.0, hopf_kmax = 100.0;
    std::int64_t hopf_samples = 71;
    auto* hopf_cmd = app.add_subcommand("hopf", "oscillation-threshold curve eps_H(K)");
    add_model_options(hopf_cmd, hopf_model, false);
    hopf_cmd->add_option("--k-min", hopf_kmin, "lowest K");
    hopf_cmd->add_option("--k-max", hopf_kmax, "highest K");
    hopf_cmd->add_option("--samples", hopf_samples, "number of K samples");
    add_output(hopf_cmd);

    // sweep
    ModelFlags sweep_model;
    IntegrationFlags sweep_icf;
    double sweep_kmin = 30.0, sweep_kmax = 100.0, sweep_emin = 0.05, sweep_emax = 0.45;
    std::int64_t sweep_ks = 8, sweep_es = 9, sweep_threads = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "attractor kind, period and amplitude per (K, eps)");
    add_model_options(sweep_cmd, sweep_model, false);
    add_integration_options(sweep_cmd, sweep_icf, 2000.0);
    sweep_cmd->add_option("--k-min", sweep_kmin, "lowest K");
    sweep_cmd->add_option("--k-max", sweep_kmax, "highest K");
    sweep_cmd->add_option("--k-samples", sweep_ks, "K samples");
    sweep_cmd->add_option("--eps-min", sweep_emin, "lowest eps");
    sweep_cmd->add_option("--eps-max", sweep_emax, "highest eps");
    sweep_cmd->add_option("--eps-samples", sweep_es, "eps samples");
    sweep_cmd->add_option("--threads", sweep_threads, "worker threads (0 = hardware)");
    add_output(sweep_cmd);

    // stochastic
    WalkFlags sto_walk;
    IntegrationFlags sto_icf;
    bool sto_conductance = false;
    std::int64_t sto_seeds = 1, sto_threads = 0;
    auto* sto_cmd = app.add_subcommand("stochastic", "wandering-parameter run CSV");
    add_walk_options(sto_cmd, sto_walk);
    add_integration_options(sto_cmd, sto_icf, 2500.0);
    sto_cmd->add_flag("--conductance", sto_conductance,
                      "emit scaled conductance columns instead of raw traces");
    sto_cmd->add_option("--seeds", sto_seeds, "number of consecutive seeds to fan out");
    sto_cmd->add_option("--threads", sto_threads, "worker threads (0 = hardware)");
    add_output(sto_cmd);

    // psd
    WalkFlags psd_walk;
    SpectralFlags psd_sf;
    std::string psd_input;
    double psd_dt = 0.0;
    auto* psd_cmd = app.add_subcommand("psd", "averaged sliding-window power spectrum");
    add_walk_options(psd_cmd, psd_walk);
    add_spectral_options(psd_cmd, psd_sf);
    psd_cmd->add_option("--input", psd_input, "trajectory CSV (default: stdin)");
    psd_cmd->add_option("--dt", psd_dt, "inline-run step cap in ms");
    add_output(psd_cmd);

    // spectrogram
    WalkFlags spg_walk;
    SpectralFlags spg_sf;
    std::string spg_input;
    double spg_dt = 0.0;
    auto* spg_cmd = app.add_subcommand("spectrogram", "per-window power, long-form CSV");
    add_walk_options(spg_cmd, spg_walk);
    add_spectral_options(spg_cmd, spg_sf);
    spg_cmd->add_option("--input", spg_input, "trajectory CSV (default: stdin)");
    spg_cmd->add_option("--dt", spg_dt, "inline-run step cap in ms");
    add_output(spg_cmd);

    // canard
    ModelFlags can_model;
    IntegrationFlags can_icf;
    std::vector<double> can_eps{1e-3, 1e-4, 1e-5};
    double can_entry_k = 1.0;
    auto* can_cmd = app.add_subcommand("canard", "entry-line exit ordinates vs prediction");
    add_model_options(can_cmd, can_model, true);
    can_cmd->add_option("--eps-list", can_eps, "decreasing epsilons")
        ->delimiter(',');
    can_cmd->add_option("--entry-k", can_entry_k, "entry coefficient");
    can_cmd->add_option("--integrate.dt,--dt", can_icf.dt, "step cap (default eps/100)");
    can_cmd->add_option("--integrate.t-end,--t-end", can_icf.t_end, "search horizon, ms");
    can_icf.t_end = 50.0;
    add_output(can_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // one usage-error code regardless of CLI11's subtype
    }

    const char* stage = "cli";
    try {
        OutputTarget out{output};
        if (fp_cmd->parsed()) { stage = "fixed-points"; return cmd_fixed_points(fp_model, out, fp_format); }
        if (sim_cmd->parsed()) { stage = "simulate"; return cmd_simulate(sim_model, sim_icf, sim_u0, sim_v0, out); }
        if (per_cmd->parsed()) { stage = "period"; return cmd_period(per_model, per_icf, out); }
        if (hopf_cmd->parsed()) { stage = "hopf"; return cmd_hopf(hopf_model, hopf_kmin, hopf_kmax, hopf_samples, out); }
        if (sweep_cmd->parsed()) {
            stage = "sweep";
            return cmd_sweep(sweep_model, sweep_icf, sweep_kmin, sweep_kmax, sweep_ks, sweep_emin,
                             sweep_emax, sweep_es, sweep_threads, out);
        }
        if (sto_cmd->parsed()) {
            stage = "stochastic";
            return cmd_stochastic(sto_walk, sto_icf, sto_conductance, sto_seeds, sto_threads, out);
        }
        if (psd_cmd->parsed()) {
            stage = "psd";
            return cmd_psd(psd_walk, psd_sf, psd_input, psd_cmd->count("--seed") > 0, psd_dt, out);
        }
        if (spg_cmd->parsed()) {
            stage = "spectrogram";
            return cmd_spectrogram(spg_walk, spg_sf, spg_input, spg_cmd->count("--seed") > 0,
                                   spg_dt, out);
        }
        if (can_cmd->parsed()) {
            stage = "canard";
            return cmd_canard(can_model, can_icf, can_eps, can_entry_k, out);
        }
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error in " << stage << ": " << e.what() << "\n";
        return 2;
    } catch (const gammasim::io_error& e) {
        std::cerr << "io error in " << stage << ": " << e.what() << "\n";
        return 5;
    } catch (const gammasim::blowup_error& e) {
        std::cerr << "runtime error in " << stage << ": " << e.what() << "\n";
        return 4;
    } catch (const gammasim::no_crossing_error& e) {
        std::cerr << "runtime error in " << stage << ": " << e.what() << "\n";
        return 4;
    } catch (const gammasim::redraw_exhausted_error& e) {
        std::cerr << "runtime error in " << stage << ": " << e.what() << "\n";
        return 4;
    } catch (const gammasim::not_oscillating_error& e) {
        std::cerr << "domain error in " << stage << ": " << e.what() << "\n";
        return 3;
    } catch (const gammasim::domain_error& e) {
        std::cerr << "domain error in " << stage << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error in " << stage << ": " << e.what() << "\n";
        return 4;
    }
}
