#pragma once

// Fold-point machinery: translated coordinates at the left nullcline vertex,
// the cube-root blow-up rescaling, the closed-form orbit of the r=0 limit
// system with its horizontal asymptote, the exit-ordinate prediction, and a
// harness that integrates real canard entries against that prediction.
//
// The fold-frame field is derived from the model field algebraically (fast
// time, so epsilon multiplies the y-component) and pinned in tests rather
// than transcribed.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"

namespace gammasim {

struct FoldFrame {
    double x = 0.0;  // = u
    double y = 0.0;  // = v - f(0), vertical offset from the fold ordinate
};

struct BlowupCoords {
    double x2 = 0.0;
    double y2 = 0.0;
    double r = 0.0;  // epsilon^(1/3)
};

struct CanardMeasurement {
    double epsilon = 0.0;
    double k_measured = 0.0;  // u(0)/epsilon on the entry line y=0
    double y_bar = 0.0;       // fold-frame ordinate at the exit abscissa
    double prediction = 0.0;
    double abs_error = 0.0;
};

inline FoldFrame to_fold_frame(const State& s, const ModelParams& p) {
    return {s.u, s.v + p.K * p.a1 * p.a2};
}

inline State from_fold_frame(const FoldFrame& ff, const ModelParams& p) {
    return {ff.x, ff.y - p.K * p.a1 * p.a2};
}

// Fast-time field in fold coordinates:
//   x' = x(K(a1+a2)x - Kx^2 - y)
//   y' = eps*gamma*(y - Ka1a2)(bx + c + Ka1a2 - y)
// equal to epsilon * vector_field pushed through the translation.
inline std::pair<double, double> fold_frame_field(const FoldFrame& ff, const ModelParams& p) {
    double ka = p.K * p.a1 * p.a2;
    double dx = ff.x * (p.K * p.root_sum() * ff.x - p.K * ff.x * ff.x - ff.y);
    double dy = p.epsilon * p.gamma * (ff.y - ka) * (p.b * ff.x + p.c + ka - ff.y);
    return {dx, dy};
}

inline BlowupCoords blowup(const FoldFrame& ff, double epsilon) {
    if (!(epsilon > 0.0)) throw domain_error("blowup needs epsilon > 0");
    double r = std::cbrt(epsilon);
    return {ff.x / r, ff.y / (r * r), r};
}

inline FoldFrame blowdown(const BlowupCoords& bc) {
    if (!(bc.r > 0.0)) throw domain_error("blowdown needs r > 0");
    return {bc.r * bc.x2, bc.r * bc.r * bc.y2};
}

// The x2 equation of the r=0 system is a pure Riccati x2' = K(a1+a2)x2^2;
// solutions from x2_0 > 0 escape in finite time.
inline double blowup_time(double x2_0, const ModelParams& p) {
    if (x2_0 == 0.0) throw domain_error("x2_0 must be nonzero");
    if (x2_0 < 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (p.K * p.root_sum() * x2_0);
}

inline std::pair<double, double> r0_solution(double x2_0, double y2_0, double t,
                                             const ModelParams& p) {
    if (x2_0 == 0.0) throw domain_error("x2_0 must be nonzero");
    if (t >= blowup_time(x2_0, p))
        throw domain_error("r0_solution evaluated at or past the blow-up time " +
                           std::to_string(blowup_time(x2_0, p)));
    double ka = p.K * p.a1 * p.a2;
    double x2 = 1.0 / (1.0 / x2_0 - p.K * p.root_sum() * t);
    double y2 = y2_0 - ka * (p.c + ka) * t;
    return {x2, y2};
}

// Height of the orbit's horizontal asymptote (the y2 level approached as
// |x2| grows; for x2_0 > 0 it is attained exactly at the blow-up time).
inline double r0_asymptote(double x2_0, double y2_0, const ModelParams& p) {
    if (x2_0 == 0.0) throw domain_error("x2_0 must be nonzero");
    double ka = p.K * p.a1 * p.a2;
    return y2_0 - (p.a1 * p.a2 * (p.c + ka) / p.root_sum()) / x2_0;
}

// Limiting exit ordinate for an entry crossing y=0 at x(0) = k*eps.
inline double canard_prediction(double k, const ModelParams& p) {
    if (k == 0.0) throw domain_error("entry coefficient k must be nonzero");
    double ka = p.K * p.a1 * p.a2;
    return -p.a1 * p.a2 * (p.c + ka) / (k * p.root_sum());
}

// Integrates entries x(0) = entry_k * eps on the fold line for each epsilon
// (gamma pinned to 1, dt capped at eps/100) up to the first crossing of
// x = a2/2 and compares the interpolated ordinate with the prediction.
inline std::vector<CanardMeasurement> measure_canard(const ModelParams& params,
                                                     const std::vector<double>& epsilon_list,
                                                     double entry_k,
                                                     const IntegrationConfig& icfg) {
    if (!(entry_k > 0.0)) throw domain_error("entry_k must be > 0");
    if (epsilon_list.empty()) throw domain_error("epsilon_list must be nonempty");
    for (std::size_t i = 0; i < epsilon_list.size(); ++i) {
        if (!(epsilon_list[i] > 0.0)) throw domain_error("epsilons must be positive");
        if (i > 0 && !(epsilon_list[i] < epsilon_list[i - 1]))
            throw domain_error("epsilon_list must be strictly decreasing");
    }
    std::vector<CanardMeasurement> out;
    out.reserve(epsilon_list.size());
    for (double eps : epsilon_list) {
        ModelParams p = params;
        p.epsilon = eps;
        p.gamma = 1.0;
        p.validate();
        double ka = p.K * p.a1 * p.a2;
        double x_bar = 0.5 * p.a2;
        State s{entry_k * eps, -ka};
        double dt = std::min(icfg.dt, eps / 100.0);
        std::int64_t n_steps = (std::int64_t)std::ceil(icfg.t_end / dt - 1e-9);
        CanardMeasurement m;
        m.epsilon = eps;
        m.k_measured = s.u / eps;
        m.prediction = canard_prediction(entry_k, p);
        bool crossed = false;
        for (std::int64_t k = 1; k <= n_steps && !crossed; ++k) {
            State n = rk4_step(s, p, dt);
            detail::check_finite(n, double(k) * dt);
            if (s.u < x_bar && n.u >= x_bar) {
                double theta = (x_bar - s.u) / (n.u - s.u);
                double v_cross = s.v + theta * (n.v - s.v);
                m.y_bar = v_cross + ka;
                crossed = true;
            }
            s = n;
        }
        if (!crossed)
            throw no_crossing_error("no crossing of u = " + std::to_string(x_bar) +
                                    " within " + std::to_string(icfg.t_end) +
                                    " ms at epsilon " + std::to_string(eps));
        m.abs_error = std::abs(m.y_bar - m.prediction);
        out.push_back(m);
    }
    return out;
}

}  // namespace gammasim
