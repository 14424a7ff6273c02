#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"

using namespace gammasim;

namespace {

ModelParams params(double K, double eps = 0.1, double gamma = 1.0) {
    ModelParams p;
    p.K = K;
    p.epsilon = eps;
    p.gamma = gamma;
    return p;
}

// Endpoint state after integrating to t_end with a given step.
State endpoint(const ModelParams& p, double dt, double t_end) {
    IntegrationConfig cfg;
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.transient_discard = 0.0;
    Trajectory traj = integrate(default_probe_start(p), p, cfg);
    return traj.states.back();
}

// Synthetic sine trajectory: the crossing oracle, since its zero times are
// known in closed form.
Trajectory sine_trajectory(double T, double dt, double t_end) {
    Trajectory traj;
    for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
        traj.times.push_back(t);
        traj.states.push_back({std::sin(2.0 * M_PI * t / T), std::cos(2.0 * M_PI * t / T)});
    }
    return traj;
}

}  // namespace

TEST_CASE("step error shrinks at fourth order", "[integrate]") {
    // Richardson: successive halvings of dt must cut the endpoint gap by
    // about 2^4. Short horizon keeps the orbit smooth.
    ModelParams p = params(60.0);
    State a = endpoint(p, 0.02, 1.0);
    State b = endpoint(p, 0.01, 1.0);
    State c = endpoint(p, 0.005, 1.0);
    double gap_ab = std::hypot(a.u - b.u, a.v - b.v);
    double gap_bc = std::hypot(b.u - c.u, b.v - c.v);
    REQUIRE(gap_bc > 0.0);
    double order = std::log2(gap_ab / gap_bc);
    CAPTURE(gap_ab, gap_bc, order);
    CHECK(order > 3.7);
    CHECK(order < 4.5);
}

TEST_CASE("self-convergence at a fixed horizon", "[integrate]") {
    ModelParams p = params(60.0);
    State a = endpoint(p, 0.01, 100.0);
    State b = endpoint(p, 0.005, 100.0);
    CHECK(std::hypot(a.u - b.u, a.v - b.v) < 1e-6);
}

TEST_CASE("crossing detection against the sine oracle", "[integrate]") {
    double T = 7.0, dt = 0.01;
    Trajectory traj = sine_trajectory(T, dt, 50.0);
    auto ups = detect_events(traj, EventSpec::u_crosses(0.0, EventSpec::Direction::up));
    REQUIRE(ups.size() >= 6);
    // Up-crossings of sin at t = kT; the sample sitting exactly on zero at
    // t = 0 is not a crossing. Interpolation error is O(dt^2).
    for (std::size_t k = 0; k < ups.size(); ++k) {
        double expected = double(k + 1) * T;
        CAPTURE(k, ups[k].t);
        CHECK(std::abs(ups[k].t - expected) < 1e-4);
    }
    auto downs = detect_events(traj, EventSpec::u_crosses(0.0, EventSpec::Direction::down));
    auto both = detect_events(traj, EventSpec::u_crosses(0.0, EventSpec::Direction::both));
    CHECK(both.size() == ups.size() + downs.size());
    // Downs sit half a period after ups.
    CHECK(std::abs(downs.front().t - T / 2.0) < 1e-4);
}

TEST_CASE("default step cap", "[integrate]") {
    CHECK(default_dt(params(60.0, 0.5)) == Catch::Approx(0.01));
    CHECK(default_dt(params(60.0, 0.05)) == Catch::Approx(0.005));
    CHECK(default_dt(params(60.0, 1e-3)) == Catch::Approx(1e-4));
}

TEST_CASE("configuration validation", "[integrate]") {
    IntegrationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), domain_error);
    cfg.dt = 0.01;
    cfg.record_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), domain_error);
    cfg.record_stride = 1;
    cfg.transient_discard = 3000.0;  // exceeds t_end
    CHECK_THROWS_AS(cfg.validate(), domain_error);
}

TEST_CASE("record stride thins samples without changing the path", "[integrate]") {
    ModelParams p = params(60.0);
    IntegrationConfig c1;
    c1.dt = 0.01;
    c1.t_end = 10.0;
    c1.transient_discard = 0.0;
    IntegrationConfig c5 = c1;
    c5.record_stride = 5;
    Trajectory t1 = integrate(default_probe_start(p), p, c1);
    Trajectory t5 = integrate(default_probe_start(p), p, c5);
    REQUIRE(t5.size() >= 2);
    CHECK(t5.times[1] - t5.times[0] == Catch::Approx(0.05).epsilon(1e-12));
    for (std::size_t i = 0; i < t5.size(); ++i) {
        REQUIRE(5 * i < t1.size());
        CHECK(t5.states[i].u == t1.states[5 * i].u);  // same steps, thinner record
        CHECK(t5.states[i].v == t1.states[5 * i].v);
    }
}

TEST_CASE("time-scale split: halving eps and doubling gamma retraces the path",
          "[integrate]") {
    // With the product eps*gamma held fixed the field just doubles, so RK4
    // with half the step retraces the same states bit for bit; only the
    // clock differs. Scalings by powers of two commute with rounding.
    ModelParams p1 = params(60.0, 0.1, 1.0);
    ModelParams p2 = params(60.0, 0.05, 2.0);
    IntegrationConfig c1;
    c1.dt = 0.01;
    c1.t_end = 200.0;
    c1.transient_discard = 0.0;
    IntegrationConfig c2 = c1;
    c2.dt = 0.005;
    c2.t_end = 100.0;
    State s0 = default_probe_start(p1);
    Trajectory t1 = integrate(s0, p1, c1);
    Trajectory t2 = integrate(s0, p2, c2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); i += 97) {  // spot-check across the run
        CAPTURE(i);
        CHECK(std::memcmp(&t1.states[i].u, &t2.states[i].u, sizeof(double)) == 0);
        CHECK(std::memcmp(&t1.states[i].v, &t2.states[i].v, sizeof(double)) == 0);
        CHECK(t2.times[i] == Catch::Approx(0.5 * t1.times[i]).epsilon(1e-15).margin(0.0));
    }
}

TEST_CASE("cycle period and its clock scaling", "[integrate]") {
    ModelParams p = params(60.0, 0.1, 1.0);
    IntegrationConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 2000.0;
    double period = limit_cycle_period(p, cfg);
    CHECK(period == Catch::Approx(46.149246873684753).epsilon(1e-9));  // regression pin
    CHECK(period > 44.0 * 0.9);
    CHECK(period < 44.0 * 1.1);

    // Same product eps*gamma: the period divides exactly by the rate factor.
    ModelParams p2 = params(60.0, 0.05, 2.0);
    IntegrationConfig cfg2 = cfg;
    cfg2.dt = 0.005;
    cfg2.t_end = 1000.0;
    cfg2.transient_discard = 250.0;
    double period2 = limit_cycle_period(p2, cfg2);
    CHECK(period2 == Catch::Approx(0.5 * period).epsilon(1e-9));
}

TEST_CASE("period rejects the non-oscillatory regime", "[integrate]") {
    ModelParams p = params(60.0, 0.40, 1.0);  // above the threshold: spiral sink
    IntegrationConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 2000.0;
    CHECK_THROWS_AS(limit_cycle_period(p, cfg), not_oscillating_error);
}

TEST_CASE("cycle is steady: section crossings agree and intervals barely vary",
          "[integrate]") {
    ModelParams p = params(60.0);
    IntegrationConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 2000.0;
    Trajectory traj = integrate(default_probe_start(p), p, cfg);
    State fp = interior_fixed_point(p);

    auto mean_interval = [&](const EventSpec& spec) {
        auto events = detect_events(traj, spec);
        std::vector<double> ts;
        for (const auto& e : events)
            if (e.t >= cfg.transient_discard) ts.push_back(e.t);
        REQUIRE(ts.size() >= 11);
        std::vector<double> gaps;
        for (std::size_t i = ts.size() - 10; i < ts.size(); ++i) gaps.push_back(ts[i] - ts[i - 1]);
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= double(gaps.size());
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        var /= double(gaps.size());
        return std::pair<double, double>{mean, std::sqrt(var) / mean};
    };

    auto [pv, cv_v] = mean_interval(EventSpec::v_crosses(fp.v, EventSpec::Direction::up));
    auto [pu, cv_u] = mean_interval(EventSpec::u_crosses(fp.u, EventSpec::Direction::up));
    CHECK(cv_v < 1e-3);
    CHECK(cv_u < 1e-3);
    // Two independent sections measure the same clock.
    CHECK(std::abs(pu - pv) / pv < 1e-3);
}

TEST_CASE("attractor classification flips at the threshold", "[integrate]") {
    double eps_h = hopf_epsilon(60.0);
    IntegrationConfig cfg;
    cfg.dt = 0.005;
    // Just above threshold the spiral drains with rate ~2.6e-3/ms, so the
    // final-quarter amplitude only falls below tolerance on a long horizon.
    cfg.t_end = 6000.0;
    ModelParams below = params(60.0, eps_h - 0.02);
    ModelParams above = params(60.0, eps_h + 0.02);
    CHECK(classify_attractor(below, cfg) == AttractorKind::limit_cycle);
    CHECK(classify_attractor(above, cfg) == AttractorKind::sink);
}

TEST_CASE("positivity floor engages on the invariant axis", "[integrate]") {
    // v = 0 is flow-invariant; the floor lifts it and records the touch.
    ModelParams p = params(60.0);
    IntegrationConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 5.0;
    cfg.transient_discard = 0.0;
    Trajectory traj = integrate({0.05, 0.0}, p, cfg);
    CHECK(traj.floored);
    for (const State& s : traj.states) {
        CHECK(s.v >= cfg.state_floor);
        CHECK(s.u >= cfg.state_floor);
    }
}

TEST_CASE("divergence raises a blow-up error carrying time and state", "[integrate]") {
    ModelParams p = params(60.0, 1e-4);  // stiff: dt far above the stable step
    IntegrationConfig cfg;
    cfg.dt = 0.5;
    cfg.t_end = 50.0;
    cfg.transient_discard = 0.0;
    bool thrown = false;
    try {
        integrate({5.0, 0.2}, p, cfg);
    } catch (const blowup_error& e) {
        thrown = true;
        CHECK(e.t >= 0.0);
        CHECK(e.t <= cfg.t_end);
        CHECK(std::string(e.what()).find("blew up") != std::string::npos);
    }
    CHECK(thrown);
}

TEST_CASE("one step changes the radial energy by dt times its derivative",
          "[integrate]") {
    ModelParams p = params(60.0, 0.1, 2.0);
    auto energy = [&](const State& s) { return p.epsilon * s.u * s.u + s.v * s.v; };
    for (State s : {State{0.05, 0.3}, State{0.02, 0.15}}) {
        double dt = 1e-5;
        State next = rk4_step(s, p, dt);
        double fd = (energy(next) - energy(s)) / dt;
        CAPTURE(s.u, s.v);
        CHECK(fd == Catch::Approx(radial_derivative(s, p)).epsilon(1e-4));
    }
}

TEST_CASE("distance to the singular orbit ignores its polyline resolution",
          "[integrate]") {
    // Segment and arc distances are exact, so refining the sampling of the
    // orbit must not move the answer.
    ModelParams p = params(60.0, 0.01);
    IntegrationConfig cfg;
    cfg.dt = 0.001;
    cfg.t_end = 300.0;
    cfg.transient_discard = 0.0;
    Trajectory traj = integrate(default_probe_start(p), p, cfg);
    // Exit at the axis ordinate where u = 0 loses stability.
    double y_exit = -p.K * p.a1 * p.a2;
    SingularOrbit coarse = singular_orbit(p, y_exit, 256);
    SingularOrbit fine = singular_orbit(p, y_exit, 4096);
    double d1 = orbit_distance_to_singular(traj, coarse, 0.02);
    double d2 = orbit_distance_to_singular(traj, fine, 0.02);
    CHECK(std::abs(d1 - d2) < 1e-9);
}

TEST_CASE("relaxation orbit tightens as the time-scale split widens", "[integrate]") {
    // The smaller eps, the closer the attractor hugs the slow skeleton.
    auto distance_at = [&](double eps) {
        ModelParams q = params(60.0, eps);
        IntegrationConfig cfg;
        cfg.dt = std::min(0.01, eps / 10.0);
        cfg.t_end = 500.0;
        cfg.transient_discard = 0.0;
        Trajectory traj = integrate(default_probe_start(q), q, cfg);
        Trajectory tail = traj.tail_from(250.0);
        SingularOrbit orb = singular_orbit(q, -q.K * q.a1 * q.a2, 2048);
        return orbit_distance_to_singular(tail, orb, 0.02);
    };
    double d_coarse = distance_at(1e-2);
    double d_fine = distance_at(1e-3);
    CAPTURE(d_coarse, d_fine);
    CHECK(d_fine < d_coarse);
}

TEST_CASE("random starts stay positive and settle into a bounded band", "[integrate]") {
    ModelParams p = params(60.0);
    IntegrationConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 300.0;
    cfg.transient_discard = 0.0;
    RadialReport rep = radial_boundedness_check(p, 200, cfg);
    CHECK(rep.n_starts == 200);
    CHECK(rep.min_component_pre_floor >= 0.0);
    CHECK(rep.max_final < rep.max_initial);
    CHECK(rep.max_final < 1.0);  // the attractor lives well inside the unit ball
}

TEST_CASE("trajectory tail selection", "[integrate]") {
    Trajectory traj = sine_trajectory(5.0, 0.1, 20.0);
    Trajectory tail = traj.tail_from(10.0);
    REQUIRE(!tail.times.empty());
    CHECK(tail.times.front() >= 10.0);
    CHECK(tail.size() < traj.size());
    CHECK(tail.times.back() == traj.times.back());
}
