#pragma once

// Fixed-step integration of the model with event detection, period
// measurement, attractor classification, and the boundedness/closeness
// harnesses used by the property suite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gammasim/errors.hpp"
#include "gammasim/model.hpp"
#include "gammasim/rng.hpp"

namespace gammasim {

struct IntegrationConfig {
    double dt = 0.01;              // ms
    double t_end = 2000.0;         // ms
    std::int64_t record_stride = 1;
    double transient_discard = 500.0;  // ms
    double state_floor = 1e-12;

    void validate() const {
        if (!(dt > 0.0)) throw domain_error("dt must be > 0");
        if (!(t_end >= 0.0)) throw domain_error("t_end must be >= 0");
        if (!(transient_discard >= 0.0)) throw domain_error("transient_discard must be >= 0");
        if (t_end > 0.0 && !(t_end > transient_discard))
            throw domain_error("t_end must exceed transient_discard");
        if (record_stride < 1) throw domain_error("record_stride must be >= 1");
        if (!(state_floor >= 0.0)) throw domain_error("state_floor must be >= 0");
    }
};

// Step cap that keeps the fast fiber resolved: dt = min(0.01, epsilon/10).
inline double default_dt(const ModelParams& p) {
    return std::min(0.01, p.epsilon / 10.0);
}

struct Trajectory {
    std::vector<double> times;   // ms, uniformly spaced
    std::vector<State> states;
    ModelParams params_used;
    bool floored = false;        // set when any component was lifted to the floor

    std::size_t size() const { return times.size(); }

    // Copy of the samples with t >= t_from.
    Trajectory tail_from(double t_from) const {
        Trajectory out;
        out.params_used = params_used;
        out.floored = floored;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] >= t_from) {
                out.times.push_back(times[i]);
                out.states.push_back(states[i]);
            }
        }
        return out;
    }
};

// One classical Runge-Kutta step.
inline State rk4_step(const State& s, const ModelParams& p, double dt) {
    auto [k1u, k1v] = vector_field(s, p);
    auto [k2u, k2v] = vector_field({s.u + 0.5 * dt * k1u, s.v + 0.5 * dt * k1v}, p);
    auto [k3u, k3v] = vector_field({s.u + 0.5 * dt * k2u, s.v + 0.5 * dt * k2v}, p);
    auto [k4u, k4v] = vector_field({s.u + dt * k3u, s.v + dt * k3v}, p);
    return {s.u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

// Step plus the floor that keeps components off the invariant axes, where the
// dynamics would pin them forever. Lifting is recorded in *floored.
inline State rk4_step(const State& s, const ModelParams& p, double dt, double floor,
                      bool* floored) {
    State n = rk4_step(s, p, dt);
    if (n.u < floor) { n.u = floor; if (floored) *floored = true; }
    if (n.v < floor) { n.v = floor; if (floored) *floored = true; }
    return n;
}

namespace detail {

inline void check_finite(const State& s, double t) {
    if (!std::isfinite(s.u) || !std::isfinite(s.v))
        throw blowup_error("integration blew up at t=" + std::to_string(t) +
                           " ms, state (" + std::to_string(s.u) + ", " +
                           std::to_string(s.v) + ")",
                           t, s.u, s.v);
}

}  // namespace detail

inline Trajectory integrate(const State& s0, const ModelParams& p,
                            const IntegrationConfig& cfg) {
    p.validate();
    cfg.validate();
    Trajectory traj;
    traj.params_used = p;
    std::int64_t n_steps = (std::int64_t)std::ceil(cfg.t_end / cfg.dt - 1e-9);
    if (n_steps < 0) n_steps = 0;
    double rec_h = cfg.dt * double(cfg.record_stride);
    traj.times.reserve(std::size_t(n_steps / cfg.record_stride) + 2);
    traj.states.reserve(std::size_t(n_steps / cfg.record_stride) + 2);
    State s = s0;
    // The floor applies to the initial sample as well, so every recorded
    // state honours it.
    if (s.u < cfg.state_floor) { s.u = cfg.state_floor; traj.floored = true; }
    if (s.v < cfg.state_floor) { s.v = cfg.state_floor; traj.floored = true; }
    traj.times.push_back(0.0);
    traj.states.push_back(s);
    for (std::int64_t k = 1; k <= n_steps; ++k) {
        s = rk4_step(s, p, cfg.dt, cfg.state_floor, &traj.floored);
        detail::check_finite(s, double(k) * cfg.dt);
        if (k % cfg.record_stride == 0) {
            traj.times.push_back(double(k / cfg.record_stride) * rec_h);
            traj.states.push_back(s);
        }
    }
    return traj;
}

struct EventSpec {
    enum class Channel { u, v };
    enum class Direction { up, down, both };
    Channel channel = Channel::u;
    double value = 0.0;
    Direction direction = Direction::both;

    static EventSpec u_crosses(double value, Direction d = Direction::both) {
        return {Channel::u, value, d};
    }
    static EventSpec v_crosses(double value, Direction d = Direction::both) {
        return {Channel::v, value, d};
    }
};

struct Event {
    double t;
    State state;
};

// Linear-interpolated section crossings between consecutive samples.
inline std::vector<Event> detect_events(const Trajectory& traj, const EventSpec& spec) {
    if (!std::isfinite(spec.value)) throw domain_error("event section value must be finite");
    std::vector<Event> out;
    auto chan = [&](const State& s) {
        return spec.channel == EventSpec::Channel::u ? s.u : s.v;
    };
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        double x0 = chan(traj.states[i]) - spec.value;
        double x1 = chan(traj.states[i + 1]) - spec.value;
        bool up = x0 < 0.0 && x1 >= 0.0;
        bool down = x0 > 0.0 && x1 <= 0.0;
        bool want = (spec.direction == EventSpec::Direction::up && up) ||
                    (spec.direction == EventSpec::Direction::down && down) ||
                    (spec.direction == EventSpec::Direction::both && (up || down));
        if (!want) continue;
        double theta = x0 / (x0 - x1);  // in [0, 1)
        const State& a = traj.states[i];
        const State& b = traj.states[i + 1];
        Event e;
        e.t = traj.times[i] + theta * (traj.times[i + 1] - traj.times[i]);
        e.state = {a.u + theta * (b.u - a.u), a.v + theta * (b.v - a.v)};
        out.push_back(e);
    }
    return out;
}

// Start slightly off the interior fixed point; used by the period and
// attractor probes below.
inline State default_probe_start(const ModelParams& p) {
    State fp = interior_fixed_point(p);
    return {1.05 * fp.u, 1.05 * fp.v};
}

// Mean interval between the last m upward crossings of v = v*.
inline double limit_cycle_period(const ModelParams& p, const IntegrationConfig& cfg,
                                 std::size_t m = 10) {
    p.validate();
    double eps_h = hopf_epsilon(p.K, p);
    if (!(p.epsilon < eps_h))
        throw not_oscillating_error("epsilon " + std::to_string(p.epsilon) +
                                    " is not below the oscillation threshold " +
                                    std::to_string(eps_h));
    State fp = interior_fixed_point(p);
    Trajectory traj = integrate(default_probe_start(p), p, cfg);
    auto events = detect_events(traj, EventSpec::v_crosses(fp.v, EventSpec::Direction::up));
    std::vector<double> ts;
    for (const Event& e : events)
        if (e.t >= cfg.transient_discard) ts.push_back(e.t);
    if (ts.size() < m + 1)
        throw not_oscillating_error("only " + std::to_string(ts.size()) +
                                    " section crossings after the transient; need " +
                                    std::to_string(m + 1));
    return (ts.back() - ts[ts.size() - 1 - m]) / double(m);
}

enum class AttractorKind { sink, limit_cycle };

inline const char* to_string(AttractorKind k) {
    return k == AttractorKind::sink ? "sink" : "limit_cycle";
}

// Peak-to-peak u over the final quarter of the run decides the dichotomy.
inline AttractorKind classify_attractor(const ModelParams& p, const IntegrationConfig& cfg,
                                        double amplitude_tol = 1e-6) {
    Trajectory traj = integrate(default_probe_start(p), p, cfg);
    double t_from = 0.75 * cfg.t_end;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] < t_from) continue;
        lo = std::min(lo, traj.states[i].u);
        hi = std::max(hi, traj.states[i].u);
    }
    return (hi - lo < amplitude_tol) ? AttractorKind::sink : AttractorKind::limit_cycle;
}

namespace detail {

inline double dist2_point_segment(const State& pt, const State& a, const State& b) {
    double abx = b.u - a.u, aby = b.v - a.v;
    double apx = pt.u - a.u, apy = pt.v - a.v;
    double len2 = abx * abx + aby * aby;
    double t = len2 > 0.0 ? std::clamp((apx * abx + apy * aby) / len2, 0.0, 1.0) : 0.0;
    double dx = apx - t * abx, dy = apy - t * aby;
    return dx * dx + dy * dy;
}

// Exact distance from a point to the arc v = f(u), u in [u_lo, u_hi].
// Grid-scan plus Newton polish on the stationarity condition keeps the result
// independent of how densely the arc was sampled elsewhere.
inline double dist_point_parabola_arc(const State& pt, const ModelParams& p,
                                      double u_lo, double u_hi) {
    auto d2 = [&](double u) {
        double dv = nullcline_f(u, p) - pt.v;
        double du = u - pt.u;
        return du * du + dv * dv;
    };
    auto refine = [&](double u) {
        for (int it = 0; it < 60; ++it) {
            double f = nullcline_f(u, p);
            double fp1 = -p.K * (2.0 * u - p.root_sum());
            double fp2 = -2.0 * p.K;
            double g = (u - pt.u) + (f - pt.v) * fp1;           // d/du of d2 / 2
            double gp = 1.0 + fp1 * fp1 + (f - pt.v) * fp2;
            if (gp <= 0.0) break;
            double step = g / gp;
            u -= step;
            u = std::clamp(u, u_lo, u_hi);
            if (std::abs(step) < 1e-16 * (1.0 + std::abs(u))) break;
        }
        return std::clamp(u, u_lo, u_hi);
    };
    const int M = 128;
    double best = std::min(d2(u_lo), d2(u_hi));
    double prev = d2(u_lo);
    double here = d2(u_lo + (u_hi - u_lo) / M);
    for (int i = 1; i < M; ++i) {
        double next = d2(u_lo + (u_hi - u_lo) * double(i + 1) / M);
        if (here <= prev && here <= next) {
            double u0 = u_lo + (u_hi - u_lo) * double(i) / M;
            best = std::min(best, d2(refine(u0)));
        }
        prev = here;
        here = next;
    }
    return std::sqrt(best);
}

}  // namespace detail

// Max over samples of the distance to the singular orbit, skipping samples
// near the two points where the true trajectory necessarily detaches from it
// (the vertex jump and the axis exit).
inline double orbit_distance_to_singular(const Trajectory& traj, const SingularOrbit& orbit,
                                         double exclusion_radius) {
    const ModelParams& p = orbit.params;
    double f0 = nullcline_f(0.0, p);
    State fold{0.0, f0};
    double u_lo = 0.5 * p.root_sum();
    double u_hi = orbit.D.u;
    double worst = 0.0;
    for (const State& s : traj.states) {
        double dfold = std::hypot(s.u - fold.u, s.v - fold.v);
        double djump = std::hypot(s.u - orbit.A.u, s.v - orbit.A.v);
        if (dfold < exclusion_radius || djump < exclusion_radius) continue;
        double d2 = detail::dist2_point_segment(s, orbit.A, orbit.B);
        d2 = std::min(d2, detail::dist2_point_segment(s, orbit.B, orbit.C));
        d2 = std::min(d2, detail::dist2_point_segment(s, orbit.C, orbit.D));
        double d = std::min(std::sqrt(d2),
                            detail::dist_point_parabola_arc(s, p, u_lo, u_hi));
        worst = std::max(worst, d);
    }
    return worst;
}

struct RadialReport {
    std::size_t n_starts = 0;
    double max_initial = 0.0;            // max over runs of epsilon*u0^2 + v0^2
    double max_final = 0.0;              // max over runs, final 10% of each run
    double min_component_pre_floor = 0.0;
    std::size_t floored_runs = 0;
};

namespace detail {

// Conservative Jacobian row-sum bound used to pick a stable step for states
// far outside the absorbing set, where the nominal dt would explode RK4.
inline double stiffness_bound(const State& s, const ModelParams& p) {
    double u = std::abs(s.u), v = std::abs(s.v);
    double row1 = (3.0 * p.K * u * u + 2.0 * p.K * std::abs(p.root_sum()) * u +
                   p.K * std::abs(p.a1 * p.a2) + v + u) / p.epsilon;
    double row2 = p.gamma * (p.b * v + p.b * u + 2.0 * v + p.c);
    return std::max(row1, row2);
}

}  // namespace detail

// Integrates a batch of random starts in [0, 20]^2 and reports how the
// weighted radius settles. Far starts are integrated with a step chosen from
// the stiffness bound until the nominal step is stable again.
inline RadialReport radial_boundedness_check(const ModelParams& p, std::size_t n_starts,
                                             const IntegrationConfig& cfg,
                                             std::uint64_t seed = 0x9A7E57ULL) {
    p.validate();
    cfg.validate();
    SplitMix64 rng(seed);
    RadialReport rep;
    rep.n_starts = n_starts;
    rep.min_component_pre_floor = std::numeric_limits<double>::infinity();
    auto radius = [&](const State& s) { return p.epsilon * s.u * s.u + s.v * s.v; };
    for (std::size_t i = 0; i < n_starts; ++i) {
        State s{20.0 * rng.uniform01(), 20.0 * rng.uniform01()};
        rep.max_initial = std::max(rep.max_initial, radius(s));
        bool floored = false;
        double t = 0.0;
        double tail_from = 0.9 * cfg.t_end;
        double tail_max = 0.0;
        while (t < cfg.t_end) {
            double dt = std::min(cfg.dt, 1.0 / detail::stiffness_bound(s, p));
            State n = rk4_step(s, p, dt);
            detail::check_finite(n, t + dt);
            rep.min_component_pre_floor =
                std::min({rep.min_component_pre_floor, n.u, n.v});
            if (n.u < cfg.state_floor) { n.u = cfg.state_floor; floored = true; }
            if (n.v < cfg.state_floor) { n.v = cfg.state_floor; floored = true; }
            s = n;
            t += dt;
            if (t >= tail_from) tail_max = std::max(tail_max, radius(s));
        }
        rep.max_final = std::max(rep.max_final, tail_max);
        if (floored) ++rep.floored_runs;
    }
    return rep;
}

}  // namespace gammasim
