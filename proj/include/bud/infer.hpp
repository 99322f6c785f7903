#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bud/history.hpp"
#include "bud/special.hpp"

namespace bud {

struct TwoByTwo {
    int64_t arm_resp = 0;
    int64_t arm_nonresp = 0;
    int64_t ctrl_resp = 0;
    int64_t ctrl_nonresp = 0;

    int64_t arm_n() const { return arm_resp + arm_nonresp; }
    int64_t ctrl_n() const { return ctrl_resp + ctrl_nonresp; }
    int64_t responders() const { return arm_resp + ctrl_resp; }
    int64_t total() const { return arm_n() + ctrl_n(); }
};

// One-sided Fisher exact p-value for the alternative "arm rate > control
// rate": upper hypergeometric tail at the observed arm responders.  Empty
// margins give p = 1 by convention.
inline double fisher_exact_one_sided(const TwoByTwo& t) {
    require(t.arm_resp >= 0 && t.arm_nonresp >= 0 && t.ctrl_resp >= 0 && t.ctrl_nonresp >= 0,
            "fisher: negative counts");
    const int64_t N = t.total(), R = t.responders(), n = t.arm_n();
    if (N == 0 || R == 0 || R == N || n == 0 || n == N) return 1.0;
    if (t.arm_resp <= std::max<int64_t>(0, n + R - N)) return 1.0;  // whole support
    double log_denom = log_binomial(N, R);
    double p = 0.0;
    int64_t hi = std::min(n, R);
    for (int64_t x = t.arm_resp; x <= hi; ++x) {
        double lp = log_binomial(n, x) + log_binomial(N - n, R - x) - log_denom;
        p += std::exp(lp);
    }
    return std::min(1.0, p);
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;    // Fisher path
    bool reject = false;
    double level = 0.05;
};

struct BootstrapThreshold {
    double threshold = 0.0;
    double level = 0.1;
    int64_t replications = 0;
    bool unstable_quantile = false;  // raised when B < 200
};

// Empirical (1 - level) quantile of the null statistics; decisions compare
// strictly above the threshold.
inline BootstrapThreshold bootstrap_threshold(std::vector<double> null_stats, double level) {
    require(!null_stats.empty(), "bootstrap: no null statistics");
    require(level > 0.0 && level < 1.0, "bootstrap: level must be in (0,1)");
    BootstrapThreshold out;
    out.level = level;
    out.replications = static_cast<int64_t>(null_stats.size());
    out.unstable_quantile = null_stats.size() < 200;
    std::sort(null_stats.begin(), null_stats.end());
    size_t q = static_cast<size_t>(std::floor((1.0 - level) * null_stats.size()));
    if (q >= null_stats.size()) q = null_stats.size() - 1;
    out.threshold = null_stats[q];
    return out;
}

// monotone in the level by construction of the order statistic
inline bool bootstrap_reject(double statistic, const BootstrapThreshold& thr) {
    return statistic > thr.threshold;
}

// ---------------------------------------------------------------------------
// Effect estimators (controlled binary family)
// ---------------------------------------------------------------------------

struct EffectEstimates {
    std::vector<double> posterior_mean;  // gamma_hat from posterior means
    std::vector<double> raw;             // gamma_hat from observed proportions
};

inline EffectEstimates effect_estimates(const TrialHistory& h) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("effect_estimates: controlled binary family only");
    EffectEstimates out;
    const BetaArm& c = h.beta(0);
    const auto& cprior = std::get<BetaArm>(h.prior_arms[0]);
    double c_n = static_cast<double>(h.assignment_counts[0]);
    double c_raw = c_n > 0 ? (c.alpha - cprior.alpha) / c_n : cprior.mean();
    for (size_t a = 1; a < h.n_arms(); ++a) {
        const BetaArm& b = h.beta(a);
        const auto& bprior = std::get<BetaArm>(h.prior_arms[a]);
        out.posterior_mean.push_back(b.mean() - c.mean());
        double n = static_cast<double>(h.assignment_counts[a]);
        double raw = n > 0 ? (b.alpha - bprior.alpha) / n : bprior.mean();
        out.raw.push_back(raw - c_raw);
    }
    return out;
}

}  // namespace bud
