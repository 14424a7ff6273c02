#pragma once

// Sliding-window Fourier analysis: plain rectangular windows, coefficients
// normalized by 1/N, frequency axis in Hz for signals timed in ms.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "gammasim/errors.hpp"
#include "gammasim/integrate.hpp"
#include "gammasim/walk.hpp"

namespace gammasim {

struct SpectralConfig {
    double T_window = 200.0;  // ms
    double shift = 0.1;       // ms
    double t0 = 500.0;        // ms
    double t1 = 2500.0;       // ms
    double sample_dt = 0.1;   // ms

    // All placement arithmetic runs on integer sample counts; deriving them
    // from the raw ratios keeps 0.1 ms grids from losing a window to round-off.
    std::int64_t window_samples() const {
        std::int64_t n = (std::int64_t)std::llround(T_window / sample_dt);
        if (n < 1 || std::abs(double(n) * sample_dt - T_window) > 1e-9 * std::max(1.0, T_window))
            throw domain_error("T_window must be a positive integer multiple of sample_dt");
        return n;
    }
    std::int64_t shift_samples() const {
        std::int64_t n = (std::int64_t)std::llround(shift / sample_dt);
        if (n < 1 || std::abs(double(n) * sample_dt - shift) > 1e-9 * std::max(1.0, shift))
            throw domain_error("shift must be a positive integer multiple of sample_dt");
        return n;
    }

    void validate() const {
        if (!(sample_dt > 0.0)) throw domain_error("sample_dt must be > 0");
        (void)window_samples();
        (void)shift_samples();
        if (!(t1 - t0 >= T_window)) throw domain_error("t1 - t0 must cover one window");
    }
};

// Uniformly sampled scalar signal.
struct Signal {
    double t_start = 0.0;  // ms
    double dt = 0.1;       // ms
    std::vector<double> values;
};

enum class Channel { u, v, u_bar, e_current_3p5 };

inline const char* to_string(Channel ch) {
    switch (ch) {
        case Channel::u: return "u";
        case Channel::v: return "v";
        case Channel::u_bar: return "u_bar";
        default: return "e_current_3p5";
    }
}

inline double channel_value(const State& s, Channel ch) {
    switch (ch) {
        case Channel::u: return s.u;
        case Channel::v: return s.v;
        case Channel::u_bar: return 1.96 * s.u + 0.00672;
        default: return 3.5 * (1.96 * s.u + 0.00672);
    }
}

namespace detail {

template <typename Traj>
Signal extract_channel_impl(const Traj& traj, Channel ch) {
    if (traj.times.size() < 2) throw domain_error("signal needs at least two samples");
    Signal sig;
    sig.t_start = traj.times.front();
    sig.dt = traj.times[1] - traj.times[0];
    sig.values.reserve(traj.times.size());
    for (const State& s : traj.states) sig.values.push_back(channel_value(s, ch));
    return sig;
}

}  // namespace detail

inline Signal extract_channel(const Trajectory& traj, Channel ch) {
    return detail::extract_channel_impl(traj, ch);
}
inline Signal extract_channel(const StochasticTrajectory& traj, Channel ch) {
    return detail::extract_channel_impl(traj, ch);
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Reusable forward c2c transform of fixed length. fftw's planner is not
// thread-safe, so plan bookkeeping is serialized; execution is not.
class DftPlan {
  public:
    explicit DftPlan(std::int64_t n) : n_(n) {
        if (n < 1) throw domain_error("transform length must be >= 1");
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        in_ = fftw_alloc_complex(std::size_t(n));
        out_ = fftw_alloc_complex(std::size_t(n));
        plan_ = fftw_plan_dft_1d(int(n), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    DftPlan(const DftPlan&) = delete;
    DftPlan& operator=(const DftPlan&) = delete;
    ~DftPlan() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }

    // Coefficients (1/N) sum_j x_j exp(-2 pi i j k / N), k = 0..N-1.
    void execute(const double* x, std::complex<double>* coeffs) {
        for (std::int64_t j = 0; j < n_; ++j) {
            in_[j][0] = x[j];
            in_[j][1] = 0.0;
        }
        fftw_execute(plan_);
        double scale = 1.0 / double(n_);
        for (std::int64_t k = 0; k < n_; ++k)
            coeffs[k] = std::complex<double>(out_[k][0] * scale, out_[k][1] * scale);
    }

  private:
    std::int64_t n_;
    fftw_complex* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

struct WindowGeometry {
    std::int64_t first_sample;  // index of t0 in the signal
    std::int64_t n;             // samples per window
    std::int64_t stride;        // samples per shift
    std::int64_t n_windows;
};

inline WindowGeometry window_geometry(const Signal& sig, const SpectralConfig& cfg) {
    cfg.validate();
    if (std::abs(sig.dt - cfg.sample_dt) > 1e-9 * std::max(1.0, cfg.sample_dt))
        throw domain_error("signal sampling does not match sample_dt");
    WindowGeometry g;
    g.n = cfg.window_samples();
    g.stride = cfg.shift_samples();
    g.first_sample = (std::int64_t)std::llround((cfg.t0 - sig.t_start) / sig.dt);
    if (g.first_sample < 0 ||
        std::abs(sig.t_start + double(g.first_sample) * sig.dt - cfg.t0) > 1e-6)
        throw domain_error("t0 is not on the signal's sample grid");
    std::int64_t last = (std::int64_t)std::llround((cfg.t1 - sig.t_start) / sig.dt);
    last = std::min(last, std::int64_t(sig.values.size()) - 1);
    std::int64_t span = last - g.first_sample;
    if (span < g.n) throw domain_error("window longer than the available data");
    g.n_windows = (span - g.n) / g.stride + 1;
    return g;
}

}  // namespace detail

// Single-window transform matching the direct-summation definition to 1e-12.
inline std::vector<std::complex<double>> window_dft(const std::vector<double>& samples) {
    if (samples.empty()) throw domain_error("window_dft needs at least one sample");
    detail::DftPlan plan(std::int64_t(samples.size()));
    std::vector<std::complex<double>> out(samples.size());
    plan.execute(samples.data(), out.data());
    return out;
}

struct PsdResult {
    std::vector<double> freqs_hz;
    std::vector<double> power;
    std::int64_t n_windows = 0;
};

struct Spectrogram {
    std::vector<double> window_starts_ms;
    std::vector<double> freqs_hz;
    std::vector<std::vector<double>> power;  // [window][bin]
};

inline std::vector<double> frequency_axis(std::int64_t n, double T_window_ms) {
    std::vector<double> f(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t k = 0; k < n; ++k) f[std::size_t(k)] = 1000.0 * double(k) / T_window_ms;
    return f;
}

// Visits each window in start order with its per-bin power |f_hat(k)|^2.
template <typename Fn>
void for_each_window(const Signal& sig, const SpectralConfig& cfg, Fn&& fn) {
    detail::WindowGeometry g = detail::window_geometry(sig, cfg);
    detail::DftPlan plan(g.n);
    std::vector<std::complex<double>> coeffs(std::size_t(g.n));
    std::vector<double> power(std::size_t(g.n));
    for (std::int64_t w = 0; w < g.n_windows; ++w) {
        std::int64_t j0 = g.first_sample + w * g.stride;
        plan.execute(sig.values.data() + j0, coeffs.data());
        for (std::int64_t k = 0; k < g.n; ++k) power[std::size_t(k)] = std::norm(coeffs[std::size_t(k)]);
        fn(w, sig.t_start + double(j0) * sig.dt, power);
    }
}

// Per-bin mean power across all windows, accumulated with compensated sums so
// the result agrees with the spectrogram mean at full precision.
inline PsdResult averaged_psd(const Signal& sig, const SpectralConfig& cfg) {
    detail::WindowGeometry g = detail::window_geometry(sig, cfg);
    std::vector<double> sum(std::size_t(g.n), 0.0), comp(std::size_t(g.n), 0.0);
    for_each_window(sig, cfg, [&](std::int64_t, double, const std::vector<double>& power) {
        for (std::size_t k = 0; k < power.size(); ++k) {
            double y = power[k] - comp[k];
            double t = sum[k] + y;
            comp[k] = (t - sum[k]) - y;
            sum[k] = t;
        }
    });
    PsdResult res;
    res.n_windows = g.n_windows;
    res.freqs_hz = frequency_axis(g.n, cfg.T_window);
    res.power.resize(std::size_t(g.n));
    for (std::size_t k = 0; k < res.power.size(); ++k)
        res.power[k] = sum[k] / double(g.n_windows);
    return res;
}

inline Spectrogram spectrogram(const Signal& sig, const SpectralConfig& cfg) {
    detail::WindowGeometry g = detail::window_geometry(sig, cfg);
    Spectrogram sp;
    sp.freqs_hz = frequency_axis(g.n, cfg.T_window);
    sp.window_starts_ms.reserve(std::size_t(g.n_windows));
    sp.power.reserve(std::size_t(g.n_windows));
    for_each_window(sig, cfg, [&](std::int64_t, double t, const std::vector<double>& power) {
        sp.window_starts_ms.push_back(t);
        sp.power.push_back(power);
    });
    return sp;
}

// Same compensated reduction as averaged_psd, over the stored rows.
inline std::vector<double> mean_power(const Spectrogram& sp) {
    if (sp.power.empty()) throw domain_error("empty spectrogram");
    std::size_t n = sp.power.front().size();
    std::vector<double> sum(n, 0.0), comp(n, 0.0);
    for (const auto& row : sp.power) {
        for (std::size_t k = 0; k < n; ++k) {
            double y = row[k] - comp[k];
            double t = sum[k] + y;
            comp[k] = (t - sum[k]) - y;
            sum[k] = t;
        }
    }
    for (std::size_t k = 0; k < n; ++k) sum[k] /= double(sp.power.size());
    return sum;
}

// Frequency of the strongest bin inside [lo_hz, hi_hz], never bin 0; ties go
// to the lower frequency.
inline double peak_frequency(const PsdResult& psd, double lo_hz, double hi_hz) {
    if (!(lo_hz <= hi_hz)) throw domain_error("band must have lo <= hi");
    double best_f = -1.0;
    double best_p = -1.0;
    for (std::size_t k = 1; k < psd.freqs_hz.size(); ++k) {
        double f = psd.freqs_hz[k];
        if (f < lo_hz || f > hi_hz) continue;
        if (psd.power[k] > best_p) {
            best_p = psd.power[k];
            best_f = f;
        }
    }
    if (best_f < 0.0) throw domain_error("band contains no frequency bins");
    return best_f;
}

}  // namespace gammasim
