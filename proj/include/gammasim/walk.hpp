#pragma once

// Random walk on (K, epsilon, gamma) with reflecting range constraints and a
// rejection-sampled gamma step keeping epsilon*gamma inside a target band.
// Parameters are piecewise constant between updates.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"
#include "gammasim/rng.hpp"

namespace gammasim {

struct WalkConfig {
    double K_min = 30.0, K_max = 100.0;
    double eps_min = 0.04, eps_max = 0.1;
    double f_min = 0.2, f_max = 0.5;   // band for the product epsilon*gamma
    double update_interval = 0.1;      // ms
    double K_step = 0.1;               // multiplicative
    double eps_step = 0.01;            // additive
    double gamma_step = 0.1;           // additive
    int max_redraws = 1000;
    std::uint64_t seed = 0;

    // Narrower K band quoted for the conductance figure.
    static WalkConfig narrow_K_preset() {
        WalkConfig cfg;
        cfg.K_min = 30.0;
        cfg.K_max = 50.0;
        return cfg;
    }

    double initial_K() const { return 0.5 * (K_min + K_max); }
    double initial_eps() const { return 0.5 * (eps_min + eps_max); }
    double initial_gamma() const { return 0.5 * (f_min + f_max) / initial_eps(); }

    void validate() const {
        if (!(K_min < K_max)) throw domain_error("K range must have min < max");
        if (!(eps_min < eps_max)) throw domain_error("eps range must have min < max");
        if (!(f_min < f_max)) throw domain_error("f range must have min < max");
        if (!(eps_min > 0.0)) throw domain_error("eps range must be positive");
        if (!(f_min > 0.0)) throw domain_error("f range must be positive");
        if (!(K_min > 0.0)) throw domain_error("K range must be positive");
        if (!(update_interval > 0.0)) throw domain_error("update_interval must be > 0");
        if (K_step < 0.0 || eps_step < 0.0 || gamma_step < 0.0)
            throw domain_error("step sizes must be >= 0");
        if (max_redraws < 1) throw domain_error("max_redraws must be >= 1");
    }
};

struct WalkCounters {
    std::uint64_t K_clamps = 0;
    std::uint64_t eps_clamps = 0;
    std::uint64_t gamma_clamps = 0;   // band out of reach, gamma snapped to its edge
    std::uint64_t gamma_redraws = 0;  // rejected draws across the whole run
};

// Multiplicative step with reflection: candidate K(1+s*u); if it escapes the
// range, K(1-s*u); if that escapes too, clamp and count.
inline double update_K(double K, double u_draw, const WalkConfig& cfg,
                       WalkCounters* log = nullptr) {
    double cand = K * (1.0 + cfg.K_step * u_draw);
    if (cand < cfg.K_min || cand > cfg.K_max) cand = K * (1.0 - cfg.K_step * u_draw);
    if (cand < cfg.K_min || cand > cfg.K_max) {
        cand = std::clamp(cand, cfg.K_min, cfg.K_max);
        if (log) ++log->K_clamps;
    }
    return cand;
}

// Additive analogue of the K rule.
inline double update_eps(double eps, double u_draw, const WalkConfig& cfg,
                         WalkCounters* log = nullptr) {
    double cand = eps + cfg.eps_step * u_draw;
    if (cand < cfg.eps_min || cand > cfg.eps_max) cand = eps - cfg.eps_step * u_draw;
    if (cand < cfg.eps_min || cand > cfg.eps_max) {
        cand = std::clamp(cand, cfg.eps_min, cfg.eps_max);
        if (log) ++log->eps_clamps;
    }
    return cand;
}

// Rejection-sampled additive step: accept gamma + s*u iff eps*(gamma + s*u)
// stays in [f_min, f_max]. When the eps update has moved the feasible gamma
// band out of reach of any draw, no amount of redrawing can succeed, so gamma
// is snapped to the nearest band edge instead (counted). The redraw budget
// only guards the reachable-but-thin case.
template <typename Rng>
// Rejection sampling keeps the product eps*gamma inside its band. The band
// edges move with eps faster than gamma's bounded step can follow, so the
// proposal window and the band routinely lose contact; rejection alone would
// then spin forever and kill essentially every long run. When no proposal
// can land in the band, gamma snaps to the nearest band point and the event
// is logged, mirroring the clamp-and-log fallback of the K and eps rules.
// The redraw budget still guards the reachable-but-thin case with a hard
// error rather than an unbounded loop.
inline double update_gamma(double gamma, double eps, Rng& rng, const WalkConfig& cfg,
                           WalkCounters* log = nullptr) {
    double lo = cfg.f_min / eps;
    double hi = cfg.f_max / eps;
    if (gamma + cfg.gamma_step < lo || gamma - cfg.gamma_step > hi ||
        (cfg.gamma_step == 0.0 && (gamma < lo || gamma > hi))) {
        if (log) ++log->gamma_clamps;
        return std::clamp(gamma, lo, hi);
    }
    for (int i = 0; i < cfg.max_redraws; ++i) {
        double cand = gamma + cfg.gamma_step * rng.uniform_pm1();
        if (cand >= lo && cand <= hi) return cand;
        if (log) ++log->gamma_redraws;
    }
    throw redraw_exhausted_error(
        "gamma redraw budget (" + std::to_string(cfg.max_redraws) +
        ") exhausted at eps=" + std::to_string(eps) + ": feasible gamma interval [" +
        std::to_string(lo) + ", " + std::to_string(hi) + "] barely overlaps proposals [" +
        std::to_string(gamma - cfg.gamma_step) + ", " +
        std::to_string(gamma + cfg.gamma_step) + "]");
}

struct StochasticTrajectory {
    std::vector<double> times;  // update-interval grid, ms
    std::vector<State> states;
    std::vector<double> K_trace, eps_trace, gamma_trace;
    WalkCounters counters;
    bool floored = false;

    std::size_t size() const { return times.size(); }
};

// Piecewise-constant-parameter integration. Sample k carries the parameters
// that were in force on (t_{k-1}, t_k]; the walk advances after each sample,
// so freshly drawn values first act on the following interval.
inline StochasticTrajectory simulate_stochastic(const State& s0, double K0, double eps0,
                                                double gamma0, const WalkConfig& walk,
                                                const IntegrationConfig& icfg) {
    walk.validate();
    icfg.validate();
    if (K0 < walk.K_min || K0 > walk.K_max) throw domain_error("initial K outside range");
    if (eps0 < walk.eps_min || eps0 > walk.eps_max)
        throw domain_error("initial eps outside range");
    double f0 = eps0 * gamma0;
    if (f0 < walk.f_min || f0 > walk.f_max)
        throw domain_error("initial eps*gamma outside f range");

    SplitMix64 master(walk.seed);
    SplitMix64 rng_K(master.next());
    SplitMix64 rng_eps(master.next());
    SplitMix64 rng_gamma(master.next());

    ModelParams p;
    p.K = K0;
    p.epsilon = eps0;
    p.gamma = gamma0;
    p.validate();

    StochasticTrajectory traj;
    std::size_t n_intervals = (std::size_t)std::ceil(icfg.t_end / walk.update_interval - 1e-9);
    traj.times.reserve(n_intervals + 1);
    traj.states.reserve(n_intervals + 1);
    traj.K_trace.reserve(n_intervals + 1);
    traj.eps_trace.reserve(n_intervals + 1);
    traj.gamma_trace.reserve(n_intervals + 1);

    auto record = [&](double t, const State& s) {
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.K_trace.push_back(p.K);
        traj.eps_trace.push_back(p.epsilon);
        traj.gamma_trace.push_back(p.gamma);
    };

    State s = s0;
    record(0.0, s);
    for (std::size_t k = 1; k <= n_intervals; ++k) {
        double t0 = double(k - 1) * walk.update_interval;
        // Every full interval integrates over exactly the same span; only a
        // truncated final interval differs. Recomputing the span from the
        // rounded clock would wiggle the substep in its last bits.
        double t1 = double(k) * walk.update_interval;
        double span = walk.update_interval;
        if (t1 > icfg.t_end) {
            t1 = icfg.t_end;
            span = icfg.t_end - t0;
        }
        double cap = std::min(icfg.dt, p.epsilon / 10.0);
        int n_sub = (int)std::ceil(span / cap - 1e-9);
        if (n_sub < 1) n_sub = 1;
        double h = span / n_sub;
        for (int j = 0; j < n_sub; ++j) {
            s = rk4_step(s, p, h, icfg.state_floor, &traj.floored);
            detail::check_finite(s, t0 + double(j + 1) * h);
        }
        record(t1, s);
        p.K = update_K(p.K, rng_K.uniform_pm1(), walk, &traj.counters);
        p.epsilon = update_eps(p.epsilon, rng_eps.uniform_pm1(), walk, &traj.counters);
        p.gamma = update_gamma(p.gamma, p.epsilon, rng_gamma, walk, &traj.counters);
    }
    return traj;
}

// Range-midpoint start for both the parameters and the state (5% off the
// interior rest point of the initial parameter set).
inline StochasticTrajectory simulate_stochastic(const WalkConfig& walk,
                                                const IntegrationConfig& icfg) {
    ModelParams p;
    p.K = walk.initial_K();
    p.epsilon = walk.initial_eps();
    p.gamma = walk.initial_gamma();
    return simulate_stochastic(default_probe_start(p), p.K, p.epsilon, p.gamma, walk, icfg);
}

struct ConductanceTable {
    std::vector<double> t_ms;
    std::vector<double> u_bar;           // 1.96*u + 0.00672
    std::vector<double> e_current_3p5;   // 3.5*u_bar
    std::vector<double> v;
};

inline ConductanceTable conductance_outputs(const StochasticTrajectory& traj) {
    ConductanceTable tab;
    tab.t_ms = traj.times;
    tab.u_bar.reserve(traj.size());
    tab.e_current_3p5.reserve(traj.size());
    tab.v.reserve(traj.size());
    for (const State& s : traj.states) {
        double ub = 1.96 * s.u + 0.00672;
        tab.u_bar.push_back(ub);
        tab.e_current_3p5.push_back(3.5 * ub);
        tab.v.push_back(s.v);
    }
    return tab;
}

// Pearson correlation between the scaled E-current proxy and v after the
// transient.
inline double ei_balance_correlation(const StochasticTrajectory& traj,
                                     double transient_ms = 500.0) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] < transient_ms) continue;
        double x = 3.5 * (1.96 * traj.states[i].u + 0.00672);
        double y = traj.states[i].v;
        sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
        ++n;
    }
    if (n < 2) throw domain_error("need at least two post-transient samples");
    double vx = sxx - sx * sx / double(n);
    double vy = syy - sy * sy / double(n);
    if (!(vx > 0.0) || !(vy > 0.0))
        throw domain_error("zero-variance signal in correlation");
    return (sxy - sx * sy / double(n)) / std::sqrt(vx * vy);
}

}  // namespace gammasim
