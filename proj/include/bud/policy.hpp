#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bud/metric.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// PolicySpec
// ---------------------------------------------------------------------------

enum class PolicyKind {
    BUD,           // p(a) proportional to gain^h(t)
    Myopic,        // argmax gain
    BR,            // balanced randomization
    BAR_Trippa,    // control-balancing adaptive randomization (controlled trials)
    BAR2_Thall,    // power-Thompson with exponent t/(2T)
    ThompsonBest,  // p(a) proportional to P(theta_a is the maximum)
    RPW,           // randomized play-the-winner urn
    DBCD_Neyman,   // doubly adaptive biased coin toward rho_a ~ sqrt(theta(1-theta))
    DBCD_SqrtRate, // toward rho_a ~ sqrt(theta)
    OracleFixed,   // fixed per-arm quotas
};

inline const char* policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::BUD: return "BUD";
        case PolicyKind::Myopic: return "myopic";
        case PolicyKind::BR: return "BR";
        case PolicyKind::BAR_Trippa: return "BAR";
        case PolicyKind::BAR2_Thall: return "BAR2";
        case PolicyKind::ThompsonBest: return "BAR-thompson";
        case PolicyKind::RPW: return "RPW";
        case PolicyKind::DBCD_Neyman: return "DBCD1";
        case PolicyKind::DBCD_SqrtRate: return "DBCD2";
        case PolicyKind::OracleFixed: return "oracle-fixed";
    }
    return "?";
}

struct ExponentSchedule {
    enum class Type { Constant, PowerOfT } type = Type::Constant;
    double value = 3.0;   // constant h, or the scale of the power schedule
    double power = 0.75;  // h(t) = value * (t/T)^power

    double at(int64_t t, int64_t T) const {
        if (type == Type::Constant) return value;
        if (T <= 0) return 0.0;
        return value * std::pow(static_cast<double>(t) / static_cast<double>(T), power);
    }
};

struct PolicySpec {
    PolicyKind kind = PolicyKind::BUD;
    ExponentSchedule h;

    // comparator tuning knobs
    double rpw_initial = 1.0;      // balls per arm at the start
    double rpw_add = 1.0;          // balls added on success (failure spreads the same mass)
    double bar_gamma_scale = 3.0;  // gamma(t) = scale * (t/T)^power for BAR
    double bar_gamma_power = 0.75;
    double bar_control_scale = 0.25;
    double dbcd_gamma = 2.0;
    std::vector<int64_t> oracle_quotas;

    void validate() const {
        require(h.value >= 0.0, "policy: exponent schedule must be nonnegative");
        require(dbcd_gamma >= 0.0, "policy: DBCD gamma must be nonnegative");
    }
};

// ---------------------------------------------------------------------------
// Expected one-step information gain
// ---------------------------------------------------------------------------

using GainVector = std::vector<double>;

// E[u(S_{t+1}) | A=arm, S_t] - u(S_t), clamped at zero.  `u_base` avoids
// re-evaluating the current state for every arm.
inline double expected_gain(const TrialHistory& h, const MetricSpec& metric, size_t arm,
                            MetricCtx& ctx, double u_base) {
    double expected = 0.0;
    switch (h.family) {
        case DesignFamily::MultiArmControlled:
        case DesignFamily::BestArm: {
            const BetaArm& b = h.beta(arm);
            double p = b.mean();
            TrialHistory next = h;
            next.arms[arm] = b.updated(true);
            double u1 = eval_metric_raw(metric, next, ctx);
            next.arms[arm] = b.updated(false);
            double u0 = eval_metric_raw(metric, next, ctx);
            expected = p * u1 + (1.0 - p) * u0;
            break;
        }
        case DesignFamily::Normal: {
            if (metric.kind != MetricKind::VarianceSum)
                throw family_error("expected_gain: only the variance metric is defined "
                                   "for normal outcomes");
            // posterior variance does not depend on the outcome value
            const NormalArm& n = h.normal(arm);
            return std::max(0.0, n.variance() - n.updated(0.0).variance());
        }
        case DesignFamily::CoPrimary: {
            const DirichletArm& d = h.dirichlet(arm);
            TrialHistory next = h;
            for (int y = 0; y < 4; ++y) {
                next.arms[arm] = d.updated(y);
                expected += d.cell_mean(y) * eval_metric_raw(metric, next, ctx);
            }
            break;
        }
        case DesignFamily::Biomarker:
            throw family_error("expected_gain: biomarker gains are profile-conditional "
                               "(see biomarker.hpp)");
    }
    return std::max(0.0, expected - u_base);
}

inline double expected_gain(const TrialHistory& h, const MetricSpec& metric, size_t arm,
                            MetricCtx& ctx) {
    return expected_gain(h, metric, arm, ctx, eval_metric_raw(metric, h, ctx));
}

inline GainVector compute_gains(const TrialHistory& h, const MetricSpec& metric, MetricCtx& ctx) {
    double u_base = eval_metric_raw(metric, h, ctx);
    GainVector g(h.n_arms());
    for (size_t a = 0; a < h.n_arms(); ++a) g[a] = expected_gain(h, metric, a, ctx, u_base);
    return g;
}

// ---------------------------------------------------------------------------
// Randomization rules
// ---------------------------------------------------------------------------

// p(a) proportional to gain_a^h.  h = 0 or an all-zero gain vector yields the
// uniform distribution; computed in logs so large h does not overflow.
inline std::vector<double> bud_probabilities(const GainVector& gains, double h_value) {
    require(!gains.empty(), "bud_probabilities: empty gain vector");
    if (h_value < 0.0) throw config_error("bud_probabilities: negative exponent");
    const size_t K = gains.size();
    std::vector<double> p(K, 1.0 / static_cast<double>(K));
    if (h_value == 0.0) return p;

    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(K, -std::numeric_limits<double>::infinity());
    for (size_t a = 0; a < K; ++a) {
        double g = std::max(gains[a], 0.0);
        if (g > 0.0) {
            logs[a] = h_value * std::log(g);
            max_log = std::max(max_log, logs[a]);
        }
    }
    if (!std::isfinite(max_log)) return p;  // all gains zero
    double total = 0.0;
    for (size_t a = 0; a < K; ++a) {
        p[a] = std::exp(logs[a] - max_log);
        total += p[a];
    }
    for (double& v : p) v /= total;
    return p;
}

inline std::vector<double> myopic_probabilities(const GainVector& gains) {
    const size_t K = gains.size();
    double best = *std::max_element(gains.begin(), gains.end());
    std::vector<double> p(K, 0.0);
    size_t ties = 0;
    for (size_t a = 0; a < K; ++a)
        if (gains[a] == best) ++ties;
    for (size_t a = 0; a < K; ++a)
        if (gains[a] == best) p[a] = 1.0 / static_cast<double>(ties);
    return p;
}

namespace detail {

inline std::vector<double> normalized_or_uniform(std::vector<double> w) {
    double total = 0.0;
    bool ok = true;
    for (double v : w) {
        if (!std::isfinite(v) || v < 0.0) ok = false;
        total += v;
    }
    if (!ok || total <= 0.0) return std::vector<double>(w.size(), 1.0 / w.size());
    for (double& v : w) v /= total;
    return w;
}

inline std::vector<double> rpw_probabilities(const TrialHistory& h, const PolicySpec& spec) {
    const size_t K = h.n_arms();
    require(K >= 2, "RPW needs at least two arms");
    double fail_total = 0.0;
    std::vector<double> fails(K), succ(K);
    for (size_t a = 0; a < K; ++a) {
        const auto& prior = std::get<BetaArm>(h.prior_arms[a]);
        succ[a] = h.beta(a).alpha - prior.alpha;
        fails[a] = h.beta(a).beta - prior.beta;
        fail_total += fails[a];
    }
    std::vector<double> urn(K);
    for (size_t a = 0; a < K; ++a)
        urn[a] = spec.rpw_initial + spec.rpw_add * succ[a] +
                 spec.rpw_add * (fail_total - fails[a]) / static_cast<double>(K - 1);
    return normalized_or_uniform(urn);
}

inline std::vector<double> dbcd_probabilities(const TrialHistory& h, const PolicySpec& spec,
                                              bool neyman) {
    const size_t K = h.n_arms();
    // burn-in: one patient per arm before the allocation function applies
    std::vector<double> p(K, 0.0);
    size_t unsampled = 0;
    for (size_t a = 0; a < K; ++a)
        if (h.assignment_counts[a] == 0) ++unsampled;
    if (unsampled > 0) {
        for (size_t a = 0; a < K; ++a)
            if (h.assignment_counts[a] == 0) p[a] = 1.0 / static_cast<double>(unsampled);
        return p;
    }
    std::vector<double> target(K);
    for (size_t a = 0; a < K; ++a) {
        const auto& prior = std::get<BetaArm>(h.prior_arms[a]);
        double s = h.beta(a).alpha - prior.alpha;
        double n = static_cast<double>(h.assignment_counts[a]);
        double th = (s + 0.5) / (n + 1.0);  // continuity-corrected success rate
        target[a] = neyman ? std::sqrt(th * (1.0 - th)) : std::sqrt(th);
    }
    double tsum = 0.0;
    for (double v : target) tsum += v;
    for (double& v : target) v /= tsum;
    // Hu-Zhang allocation function g(p_hat, rho)
    std::vector<double> w(K);
    auto props = h.allocation_props();
    for (size_t a = 0; a < K; ++a) {
        double ratio = props[a] > 0.0 ? target[a] / props[a] : 1e6;
        w[a] = target[a] * std::pow(ratio, spec.dbcd_gamma);
    }
    return normalized_or_uniform(w);
}

inline std::vector<double> bar_trippa_probabilities(const TrialHistory& h, const PolicySpec& spec,
                                                    int64_t horizon) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("BAR requires a control arm");
    const size_t K = h.n_arms() - 1;
    double gamma_t = spec.bar_gamma_scale *
                     std::pow(static_cast<double>(h.t) / static_cast<double>(horizon),
                              spec.bar_gamma_power);
    std::vector<double> w(K + 1, 0.0);
    double exp_sum = 0.0;
    for (size_t a = 1; a <= K; ++a) {
        double pa = prob_greater(h.beta(a), h.beta(0));
        w[a] = std::pow(pa, gamma_t);
        exp_sum += w[a];
    }
    double n_max = 0.0;
    for (size_t a = 1; a <= K; ++a)
        n_max = std::max(n_max, static_cast<double>(h.assignment_counts[a]));
    double imbalance = n_max - static_cast<double>(h.assignment_counts[0]);
    w[0] = (exp_sum / static_cast<double>(K)) *
           std::exp(spec.bar_control_scale / static_cast<double>(K) * imbalance);
    return normalized_or_uniform(w);
}

inline std::vector<double> power_thompson_probabilities(const TrialHistory& h, double exponent,
                                                        const UnitGrid& grid) {
    auto arms = h.beta_arms();
    auto pbest = prob_best_grid(arms, grid);
    if (exponent == 1.0) return detail::normalized_or_uniform(pbest);
    std::vector<double> w(pbest.size());
    for (size_t a = 0; a < w.size(); ++a) w[a] = std::pow(pbest[a], exponent);
    return normalized_or_uniform(w);
}

inline std::vector<double> oracle_fixed_probabilities(const TrialHistory& h,
                                                      const PolicySpec& spec) {
    require(spec.oracle_quotas.size() == h.n_arms(),
            "oracle-fixed: quota vector must match the arm count");
    // deterministic: next patient goes to the arm with the largest deficit
    std::vector<double> p(h.n_arms(), 0.0);
    int64_t best_deficit = std::numeric_limits<int64_t>::min();
    size_t best = 0;
    for (size_t a = 0; a < h.n_arms(); ++a) {
        int64_t deficit = spec.oracle_quotas[a] - h.assignment_counts[a];
        if (deficit > best_deficit) {
            best_deficit = deficit;
            best = a;
        }
    }
    p[best] = 1.0;
    return p;
}

}  // namespace detail

// Allocation probabilities of the comparator designs.  `horizon` is the total
// planned sample size T (BAR and BAR2 schedules depend on t/T); `grid` backs
// the P(best) quadratures.
inline std::vector<double> comparator_probabilities(const TrialHistory& h, const PolicySpec& spec,
                                                    int64_t horizon, const UnitGrid& grid) {
    switch (spec.kind) {
        case PolicyKind::BR:
            return std::vector<double>(h.n_arms(), 1.0 / static_cast<double>(h.n_arms()));
        case PolicyKind::RPW: return detail::rpw_probabilities(h, spec);
        case PolicyKind::DBCD_Neyman: return detail::dbcd_probabilities(h, spec, true);
        case PolicyKind::DBCD_SqrtRate: return detail::dbcd_probabilities(h, spec, false);
        case PolicyKind::BAR_Trippa: return detail::bar_trippa_probabilities(h, spec, horizon);
        case PolicyKind::BAR2_Thall: {
            double expo = static_cast<double>(h.t) / (2.0 * static_cast<double>(horizon));
            return detail::power_thompson_probabilities(h, expo, grid);
        }
        case PolicyKind::ThompsonBest:
            return detail::power_thompson_probabilities(h, 1.0, grid);
        case PolicyKind::OracleFixed: return detail::oracle_fixed_probabilities(h, spec);
        case PolicyKind::BUD:
        case PolicyKind::Myopic:
            throw config_error("comparator_probabilities: BUD/myopic need gain vectors");
    }
    throw config_error("unknown policy kind");
}

inline size_t select_action(const std::vector<double>& probs, RngStream& rng) {
    return rng.categorical(probs);
}

}  // namespace bud
