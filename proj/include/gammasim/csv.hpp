#pragma once

// CSV writers (17 significant digits throughout) and a small header-driven
// reader for time-series inputs.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gammasim/canard.hpp"
#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/model.hpp"
#include "gammasim/spectral.hpp"
#include "gammasim/walk.hpp"

namespace gammasim {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t_ms,u,v\n";
    for (std::size_t i = 0; i < traj.size(); ++i)
        os << fmt17(traj.times[i]) << ',' << fmt17(traj.states[i].u) << ','
           << fmt17(traj.states[i].v) << '\n';
}

inline void write_stochastic_csv(std::ostream& os, const StochasticTrajectory& traj) {
    os << "t_ms,u,v,K,eps,gamma\n";
    for (std::size_t i = 0; i < traj.size(); ++i)
        os << fmt17(traj.times[i]) << ',' << fmt17(traj.states[i].u) << ','
           << fmt17(traj.states[i].v) << ',' << fmt17(traj.K_trace[i]) << ','
           << fmt17(traj.eps_trace[i]) << ',' << fmt17(traj.gamma_trace[i]) << '\n';
}

inline void write_conductance_csv(std::ostream& os, const ConductanceTable& tab) {
    os << "t_ms,u_bar,e_current_3p5,v\n";
    for (std::size_t i = 0; i < tab.t_ms.size(); ++i)
        os << fmt17(tab.t_ms[i]) << ',' << fmt17(tab.u_bar[i]) << ','
           << fmt17(tab.e_current_3p5[i]) << ',' << fmt17(tab.v[i]) << '\n';
}

inline void write_psd_csv(std::ostream& os, const PsdResult& psd) {
    os << "freq_hz,power\n";
    for (std::size_t k = 0; k < psd.freqs_hz.size(); ++k)
        os << fmt17(psd.freqs_hz[k]) << ',' << fmt17(psd.power[k]) << '\n';
}

inline void write_spectrogram_csv(std::ostream& os, const Spectrogram& sp) {
    os << "window_start_ms,freq_hz,power\n";
    for (std::size_t w = 0; w < sp.window_starts_ms.size(); ++w)
        for (std::size_t k = 0; k < sp.freqs_hz.size(); ++k)
            os << fmt17(sp.window_starts_ms[w]) << ',' << fmt17(sp.freqs_hz[k]) << ','
               << fmt17(sp.power[w][k]) << '\n';
}

// Long-form spectrogram rows written window by window, never materializing
// the full matrix.
inline void write_spectrogram_csv(std::ostream& os, const Signal& sig,
                                  const SpectralConfig& cfg) {
    os << "window_start_ms,freq_hz,power\n";
    std::vector<double> freqs = frequency_axis(cfg.window_samples(), cfg.T_window);
    for_each_window(sig, cfg, [&](std::int64_t, double t, const std::vector<double>& power) {
        for (std::size_t k = 0; k < power.size(); ++k)
            os << fmt17(t) << ',' << fmt17(freqs[k]) << ',' << fmt17(power[k]) << '\n';
    });
}

inline void write_fixed_points_csv(std::ostream& os, const std::vector<FixedPoint>& fps) {
    os << "u,v,kind,re_l1,im_l1,re_l2,im_l2\n";
    for (const FixedPoint& fp : fps)
        os << fmt17(fp.location.u) << ',' << fmt17(fp.location.v) << ','
           << to_string(fp.kind) << ',' << fmt17(fp.lambda1.real()) << ','
           << fmt17(fp.lambda1.imag()) << ',' << fmt17(fp.lambda2.real()) << ','
           << fmt17(fp.lambda2.imag()) << '\n';
}

inline void write_hopf_csv(std::ostream& os,
                           const std::vector<std::pair<double, double>>& curve) {
    os << "K,eps_h\n";
    for (const auto& [K, eps_h] : curve)
        os << fmt17(K) << ',' << fmt17(eps_h) << '\n';
}

struct SweepRow {
    double K = 0.0;
    double eps = 0.0;
    AttractorKind kind = AttractorKind::sink;
    double period_ms = 0.0;  // meaningful only for limit cycles
    double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "K,eps,kind,period_ms,u_min,u_max,v_min,v_max\n";
    for (const SweepRow& r : rows) {
        os << fmt17(r.K) << ',' << fmt17(r.eps) << ',' << to_string(r.kind) << ',';
        if (r.kind == AttractorKind::limit_cycle && r.period_ms > 0.0) os << fmt17(r.period_ms);
        os << ',' << fmt17(r.u_min) << ',' << fmt17(r.u_max) << ',' << fmt17(r.v_min)
           << ',' << fmt17(r.v_max) << '\n';
    }
}

inline void write_canard_csv(std::ostream& os, const std::vector<CanardMeasurement>& ms) {
    os << "epsilon,k,y_bar,prediction,abs_error\n";
    for (const CanardMeasurement& m : ms)
        os << fmt17(m.epsilon) << ',' << fmt17(m.k_measured) << ',' << fmt17(m.y_bar)
           << ',' << fmt17(m.prediction) << ',' << fmt17(m.abs_error) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Reads any CSV whose header names t_ms, u and v columns (extra columns are
// ignored), e.g. the trajectory and stochastic schemas above.
inline Trajectory read_time_series_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw io_error("empty CSV input");
    std::vector<std::string> header = detail::split_csv_line(line);
    int it = -1, iu = -1, iv = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t_ms") it = int(i);
        else if (header[i] == "u") iu = int(i);
        else if (header[i] == "v") iv = int(i);
    }
    if (it < 0 || iu < 0 || iv < 0)
        throw io_error("CSV header must contain t_ms, u and v columns");
    Trajectory traj;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() < header.size())
            throw io_error("CSV row " + std::to_string(lineno) + " has too few columns");
        // strtod rather than stod: subnormal values parse fine but stod
        // reports them as out of range.
        auto cell = [&](int col) {
            const std::string& s = cells[std::size_t(col)];
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw io_error("CSV row " + std::to_string(lineno) + " is not numeric");
            return v;
        };
        traj.times.push_back(cell(it));
        traj.states.push_back({cell(iu), cell(iv)});
    }
    if (traj.times.size() < 2) throw io_error("CSV input needs at least two samples");
    return traj;
}

}  // namespace gammasim
