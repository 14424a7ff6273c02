#pragma once

// Core model definitions: the two-variable conductance vector field, its
// nullclines, fixed points with stability classification, the Hopf threshold
// in epsilon, and the singular (slow-fast skeleton) orbit. Everything here is
// a pure function of its arguments; integration and randomness live elsewhere.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gammasim/errors.hpp"

namespace gammasim {

// Time is interpreted in milliseconds throughout.
struct ModelParams {
    double a1 = -0.01;
    double a2 = 0.1;
    double b = 11.9;
    double c = 6.6e-4;
    double K = 0.0;
    double epsilon = 0.0;
    double gamma = 1.0;

    // Sum of the quadratic's roots, used all over.
    double root_sum() const { return a1 + a2; }

    void validate() const {
        if (!(epsilon > 0.0)) throw domain_error("epsilon must be > 0");
        if (!(gamma > 0.0)) throw domain_error("gamma must be > 0");
        if (!(K > 0.0)) throw domain_error("K must be > 0");
        if (!(a1 < 0.0 && 0.0 < a2)) throw domain_error("need a1 < 0 < a2");
        if (!(b > 0.0)) throw domain_error("b must be > 0");
        if (!(c > 0.0)) throw domain_error("c must be > 0");
        // Guarantees a unique interior intersection of the two nullclines
        // (with the default a/b/c values this bounds K below roughly 177).
        double lhs = b * 0.5 * (a1 + a2) + c;
        double rhs = 0.25 * K * (a2 - a1) * (a2 - a1);
        if (!(lhs > rhs))
            throw domain_error("nullclines must intersect exactly once in u > 0 "
                               "(b*(a1+a2)/2 + c must exceed K*(a2-a1)^2/4)");
    }
};

struct State {
    double u = 0.0;
    double v = 0.0;
};

enum class StabilityKind { source, sink, saddle, non_hyperbolic };

inline const char* to_string(StabilityKind k) {
    switch (k) {
        case StabilityKind::source: return "source";
        case StabilityKind::sink: return "sink";
        case StabilityKind::saddle: return "saddle";
        case StabilityKind::non_hyperbolic: return "non_hyperbolic";
    }
    return "?";
}

struct FixedPoint {
    State location;
    std::complex<double> lambda1;
    std::complex<double> lambda2;
    StabilityKind kind;
};

struct Jacobian {
    double j11, j12, j21, j22;
    double trace() const { return j11 + j22; }
    double det() const { return j11 * j22 - j12 * j21; }
};

// du/dt, dv/dt of the full system.
inline std::pair<double, double> vector_field(const State& s, const ModelParams& p) {
    double fu = -p.K * (s.u - p.a1) * (s.u - p.a2);
    double du = s.u * (fu - s.v) / p.epsilon;
    double dv = p.gamma * s.v * (p.b * s.u - s.v + p.c);
    return {du, dv};
}

// Fast nullcline branch v = f(u) (the parabola through a1 and a2).
inline double nullcline_f(double u, const ModelParams& p) {
    return -p.K * (u - p.a1) * (u - p.a2);
}

// Slow nullcline v = g(u).
inline double nullcline_g(double u, const ModelParams& p) {
    return p.b * u + p.c;
}

namespace detail {

// Roots of A·u² + B·u + C via the cancellation-safe branch.
inline std::pair<double, double> stable_quadratic_roots(double A, double B, double C) {
    double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) throw domain_error("quadratic has no real roots");
    double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
    double r1 = q / A;
    double r2 = (q != 0.0) ? C / q : -B / A - r1;
    return {r1, r2};
}

}  // namespace detail

// The interior intersection of the two nullclines, selected in (0, a2).
inline State interior_fixed_point(const ModelParams& p) {
    p.validate();
    // K(u-a1)(u-a2) + b u + c = 0, expanded.
    double A = p.K;
    double B = p.b - p.K * p.root_sum();
    double C = p.K * p.a1 * p.a2 + p.c;
    // The bracket that pins down which root we want: the residual is negative
    // at u=0 and positive at u=a2.
    if (!(C < 0.0) || !(p.b * p.a2 + p.c > 0.0))
        throw domain_error("interior fixed point bracket (0, a2) failed");
    auto [r1, r2] = detail::stable_quadratic_roots(A, B, C);
    double u_star;
    bool in1 = (r1 > 0.0 && r1 < p.a2);
    bool in2 = (r2 > 0.0 && r2 < p.a2);
    if (in1 == in2) throw domain_error("no unique root in (0, a2)");
    u_star = in1 ? r1 : r2;
    return {u_star, p.b * u_star + p.c};
}

// Jacobian of the vector field at an arbitrary state.
inline Jacobian jacobian(const State& s, const ModelParams& p) {
    double u = s.u, v = s.v;
    Jacobian J;
    J.j11 = (-3.0 * p.K * u * u + 2.0 * p.K * p.root_sum() * u - p.K * p.a1 * p.a2 - v) / p.epsilon;
    J.j12 = -u / p.epsilon;
    J.j21 = p.gamma * p.b * v;
    J.j22 = p.gamma * (p.b * u - 2.0 * v + p.c);
    return J;
}

inline std::pair<std::complex<double>, std::complex<double>> eigenvalues(const Jacobian& J) {
    double tr = J.trace();
    double disc = 0.25 * tr * tr - J.det();
    if (disc >= 0.0) {
        double s = std::sqrt(disc);
        return {std::complex<double>(0.5 * tr + s, 0.0),
                std::complex<double>(0.5 * tr - s, 0.0)};
    }
    double w = std::sqrt(-disc);
    return {std::complex<double>(0.5 * tr, w), std::complex<double>(0.5 * tr, -w)};
}

// Classification by eigenvalue real parts; |Re| <= tol counts as degenerate
// so the result is deterministic next to the Hopf threshold.
inline StabilityKind classify(const Jacobian& J, double tol = 1e-9) {
    auto [l1, l2] = eigenvalues(J);
    double r1 = l1.real(), r2 = l2.real();
    if (std::abs(r1) <= tol || std::abs(r2) <= tol) return StabilityKind::non_hyperbolic;
    if (r1 * r2 < 0.0) return StabilityKind::saddle;
    return (r1 > 0.0) ? StabilityKind::source : StabilityKind::sink;
}

// The four stationary points: (0,0), (0,c), (a2,0), and the interior one.
inline std::vector<FixedPoint> fixed_points(const ModelParams& p) {
    p.validate();
    std::vector<State> locs = {
        {0.0, 0.0},
        {0.0, p.c},
        {p.a2, 0.0},
        interior_fixed_point(p),
    };
    std::vector<FixedPoint> out;
    out.reserve(locs.size());
    for (const State& s : locs) {
        Jacobian J = jacobian(s, p);
        auto [l1, l2] = eigenvalues(J);
        out.push_back({s, l1, l2, classify(J)});
    }
    return out;
}

// Epsilon value at which the interior fixed point loses stability for the
// given K (trace of the Jacobian vanishes there). Scales as 1/gamma.
inline double hopf_epsilon(double K, const ModelParams& base = ModelParams{}) {
    ModelParams p = base;
    p.K = K;
    if (!(p.epsilon > 0.0)) p.epsilon = 1.0;  // placeholder; u* does not depend on it
    State fp = interior_fixed_point(p);
    double u = fp.u;
    return K * u * (p.root_sum() - 2.0 * u) / (p.gamma * (p.b * u + p.c));
}

inline std::vector<std::pair<double, double>> hopf_curve(double K_min, double K_max,
                                                         std::size_t n_samples,
                                                         const ModelParams& base = ModelParams{}) {
    if (n_samples < 2) throw domain_error("hopf_curve needs at least 2 samples");
    if (!(K_min < K_max)) throw domain_error("hopf_curve needs K_min < K_max");
    std::vector<std::pair<double, double>> out;
    out.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        double K = K_min + (K_max - K_min) * double(i) / double(n_samples - 1);
        out.emplace_back(K, hopf_epsilon(K, base));
    }
    return out;
}

// Closed slow-fast skeleton: fall from the parabola vertex A to the v-axis,
// slide down the v-axis to the exit ordinate y_C, jump to the parabola at D,
// and return along the parabola arc to A.
struct SingularOrbit {
    std::vector<State> polyline;  // A, B, C, then the arc from D back to A
    State A, B, C, D;
    double y_C = 0.0;
    ModelParams params;
};

inline SingularOrbit singular_orbit(const ModelParams& p, double y_C,
                                    std::size_t zeta_resolution = 512) {
    p.validate();
    if (zeta_resolution < 2) throw domain_error("zeta resolution must be >= 2");
    double f0 = nullcline_f(0.0, p);  // = -K a1 a2, the fold-height on the v-axis
    if (!(y_C > 0.0 && y_C <= f0))
        throw domain_error("exit ordinate must lie in (0, f(0)]");
    double um = 0.5 * p.root_sum();
    double fmax = nullcline_f(um, p);

    SingularOrbit orb;
    orb.params = p;
    orb.y_C = y_C;
    orb.A = {um, fmax};
    orb.B = {0.0, fmax};
    orb.C = {0.0, y_C};
    // Larger root of f(u) = y_C; the discriminant is exact when y_C = f(0).
    double disc = p.root_sum() * p.root_sum() - 4.0 * (p.a1 * p.a2 + y_C / p.K);
    if (disc < 0.0) throw domain_error("exit ordinate above the parabola vertex");
    double u_D = 0.5 * (p.root_sum() + std::sqrt(disc));
    orb.D = {u_D, nullcline_f(u_D, p)};

    orb.polyline.reserve(3 + zeta_resolution);
    orb.polyline.push_back(orb.A);
    orb.polyline.push_back(orb.B);
    orb.polyline.push_back(orb.C);
    for (std::size_t i = 0; i < zeta_resolution; ++i) {
        double s = double(i) / double(zeta_resolution - 1);
        double u = u_D + (um - u_D) * s;
        if (i + 1 == zeta_resolution) u = um;  // close exactly at A
        orb.polyline.push_back({u, nullcline_f(u, p)});
    }
    return orb;
}

// d/dt of the weighted radius epsilon*u^2 + v^2, expanded in closed form.
inline double radial_derivative(const State& s, const ModelParams& p) {
    double u = s.u, v = s.v;
    double u2 = u * u;
    return 2.0 * (-p.K * u2 * u2 + p.K * p.root_sum() * u2 * u - p.K * p.a1 * p.a2 * u2 -
                  u2 * v + p.b * p.gamma * u * v * v - p.gamma * v * v * v +
                  p.c * p.gamma * v * v);
}

}  // namespace gammasim
