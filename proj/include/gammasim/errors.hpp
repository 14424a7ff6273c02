#pragma once

#include <stdexcept>
#include <string>

namespace gammasim {

// Base for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid parameters or precondition violations (domain errors).
struct domain_error : error {
    using error::error;
};

// Numerical integration produced a non-finite state.
struct blowup_error : error {
    double t;
    double u;
    double v;
    blowup_error(const std::string& msg, double t_, double u_, double v_)
        : error(msg), t(t_), u(u_), v(v_) {}
};

// A run expected to oscillate did not produce enough section crossings.
struct not_oscillating_error : error {
    using error::error;
};

// Rejection sampling for the gamma update ran out of redraws.
struct redraw_exhausted_error : error {
    using error::error;
};

// An event (section crossing) expected by a measurement never occurred.
struct no_crossing_error : error {
    using error::error;
};

// File or stream I/O failure.
struct io_error : error {
    using error::error;
};

}  // namespace gammasim
