#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bud {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Outcome type does not match the posterior family, or a metric was asked to
// evaluate a design family it does not support.
struct family_error : error {
    using error::error;
};

// Invalid scenario / metric / policy configuration.
struct config_error : error {
    using error::error;
};

// A lattice or Monte Carlo budget was exceeded.
struct budget_error : error {
    using error::error;
};

// MC estimate unusable (e.g. empty region mass).
struct diagnostic_error : error {
    using error::error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw config_error(msg);
}

inline bool is_probability(double p) { return p >= 0.0 && p <= 1.0 && std::isfinite(p); }

// True when a stored real is an exact integer (used to route Beta comparisons
// through the finite-sum formula).
inline bool is_integral_value(double x) {
    return std::isfinite(x) && x == std::floor(x) && x >= 0.0 && x < 1e15;
}

inline double clamp01(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }

inline double sq(double x) { return x * x; }

}  // namespace bud
