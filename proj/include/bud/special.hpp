#pragma once

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bud/common.hpp"

namespace bud {

// log n! for integer n, table-backed.
inline double log_factorial(int64_t n) {
    static const std::vector<double> table = [] {
        std::vector<double> t(16384);
        t[0] = 0.0;
        for (size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
        return t;
    }();
    if (n < 0) return 0.0;
    if (static_cast<size_t>(n) < table.size()) return table[static_cast<size_t>(n)];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_binomial(int64_t n, int64_t k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double log_beta_fn(double a, double b) {
    if (is_integral_value(a) && is_integral_value(b) && a >= 1.0 && b >= 1.0) {
        auto ia = static_cast<int64_t>(a), ib = static_cast<int64_t>(b);
        return log_factorial(ia - 1) + log_factorial(ib - 1) - log_factorial(ia + ib - 1);
    }
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double beta_log_pdf(double x, double a, double b) {
    if (x <= 0.0 || x >= 1.0) {
        // limits exist when a==1 / b==1; callers use pdf() below for those
        return -std::numeric_limits<double>::infinity();
    }
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

inline double beta_pdf(double x, double a, double b) {
    if (x < 0.0 || x > 1.0) return 0.0;
    if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity() : (a == 1.0 ? b : 0.0);
    if (x == 1.0) return b < 1.0 ? std::numeric_limits<double>::infinity() : (b == 1.0 ? a : 0.0);
    return std::exp(beta_log_pdf(x, a, b));
}

// Regularized incomplete beta I_x(a, b) = P(Beta(a,b) <= x).
inline double beta_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(a, b, x);
}

inline double beta_mean(double a, double b) { return a / (a + b); }

inline double beta_variance(double a, double b) {
    double s = a + b;
    return a * b / (s * s * (s + 1.0));
}

// P(X > Y) for X ~ Beta(a1,b1), Y ~ Beta(a2,b2), all parameters positive
// integers.  Finite sum over the order-statistics representation (Cook 2005):
//   P(Y > X) = sum_{j=0}^{a2-1} B(a1+j, b1+b2) / ((b2+j) B(1+j, b2) B(a1, b1)),
// evaluated in logs, so P(X > Y) is its complement.
inline double beta_prob_greater_exact(int64_t a1, int64_t b1, int64_t a2, int64_t b2) {
    double lb11 = log_beta_fn(static_cast<double>(a1), static_cast<double>(b1));
    double p_y_gt_x = 0.0;
    for (int64_t j = 0; j < a2; ++j) {
        double lt = log_beta_fn(static_cast<double>(a1 + j), static_cast<double>(b1 + b2)) -
                    std::log(static_cast<double>(b2 + j)) -
                    log_beta_fn(static_cast<double>(1 + j), static_cast<double>(b2)) - lb11;
        p_y_gt_x += std::exp(lt);
    }
    return clamp01(1.0 - p_y_gt_x);
}

}  // namespace bud
