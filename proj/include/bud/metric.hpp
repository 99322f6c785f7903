#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "bud/history.hpp"
#include "bud/posterior.hpp"
#include "bud/quad.hpp"
#include "bud/rng.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// MetricSpec
// ---------------------------------------------------------------------------

enum class MetricKind {
    VarianceSum,             // sum_a (v_a - Var(gamma_a | S)); per-arm theta variance when uncontrolled
    TruncatedVarianceSum,    // sum_a (v_a - Var(gamma_a 1{gamma_a>0} | S))
    EntropyOfMax,            // negative differential entropy of theta_{a*}
    AsymEntropyBiomarker,    // biomarker composite (evaluated through the subgroup engine)
    AsymEntropyCoprimary,    // co-primary composite of asymmetric entropies
    VarianceCoprimary,       // co-primary weighted variance sum
    DifferentialEntropySum,  // sum of negative differential entropies of gamma_a
    MADSum,                  // sum of mean absolute deviations of gamma_a
    DiscretizedVariance,     // variance of the 3-class discretized effect
    DiscretizedEntropy,      // Shannon entropy of the 3-class discretized effect
    MaxEffectVariance,       // v - Var(max_a gamma_a | S)
};

inline const char* metric_kind_name(MetricKind k) {
    switch (k) {
        case MetricKind::VarianceSum: return "variance-sum";
        case MetricKind::TruncatedVarianceSum: return "truncated-variance-sum";
        case MetricKind::EntropyOfMax: return "entropy-of-max";
        case MetricKind::AsymEntropyBiomarker: return "asym-entropy-biomarker";
        case MetricKind::AsymEntropyCoprimary: return "asym-entropy-coprimary";
        case MetricKind::VarianceCoprimary: return "variance-coprimary";
        case MetricKind::DifferentialEntropySum: return "differential-entropy-sum";
        case MetricKind::MADSum: return "mad-sum";
        case MetricKind::DiscretizedVariance: return "discretized-variance";
        case MetricKind::DiscretizedEntropy: return "discretized-entropy";
        case MetricKind::MaxEffectVariance: return "max-effect-variance";
    }
    return "?";
}

struct MetricSpec {
    MetricKind kind = MetricKind::VarianceSum;
    double w = 5.0;          // composite weight
    double beta_exp = 6.0;   // asymmetric-entropy exponent, > 1
    std::vector<double> cutpoints = {0.0, 0.25};  // discretized-effect bins
    int grid_points = 1025;  // density/entropy grid
    int gl_points = 256;     // per-axis tensor quadrature for indicator functionals
    int64_t mc_draws = 4096; // MC-evaluated kinds

    void validate() const {
        bool asym = kind == MetricKind::AsymEntropyBiomarker ||
                    kind == MetricKind::AsymEntropyCoprimary;
        if (asym) require(beta_exp > 1.0, "metric: beta_exp must be > 1 for asymmetric entropy");
        require(w >= 0.0, "metric: weight w must be nonnegative");
        require(grid_points >= 3, "metric: grid_points too small");
        require(mc_draws >= 1, "metric: mc_draws must be positive");
        for (size_t i = 0; i + 1 < cutpoints.size(); ++i)
            require(cutpoints[i] < cutpoints[i + 1], "metric: cutpoints must be increasing");
        if (kind == MetricKind::DiscretizedVariance || kind == MetricKind::DiscretizedEntropy) {
            require(cutpoints.size() == 2, "metric: discretized kinds need two cutpoints");
            for (double c : cutpoints)
                if (c <= -1.0 || c >= 1.0)
                    throw config_error("metric: cutpoints must lie inside (-1, 1)");
        }
    }
};

// H_as[p] = p - p^beta, the asymmetric entropy.
inline double asym_entropy(double p, double beta_exp) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return p - std::pow(p, beta_exp);
}

// ---------------------------------------------------------------------------
// Effect-density helpers (gamma = theta_arm - theta_control, both Beta)
// ---------------------------------------------------------------------------

// P(gamma <= c)
inline double effect_cdf(const BetaArm& arm, const BetaArm& ctrl, double c, int gl_n = 64) {
    auto f = [&](double y) {
        double x = y + c;
        double F = x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : arm.cdf(x));
        return ctrl.pdf(y) * F;
    };
    return clamp01(gl_integrate(f, 0.0, 1.0, gl_n));
}

// density of gamma evaluated at the points gx in (-1,1)
inline std::vector<double> effect_density(const BetaArm& arm, const BetaArm& ctrl,
                                          const std::vector<double>& gx, int gl_n = 48) {
    std::vector<double> out(gx.size(), 0.0);
    for (size_t i = 0; i < gx.size(); ++i) {
        double g = gx[i];
        double lo = std::max(0.0, -g), hi = std::min(1.0, 1.0 - g);
        if (hi <= lo) continue;
        auto f = [&](double y) { return arm.pdf(y + g) * ctrl.pdf(y); };
        out[i] = gl_integrate(f, lo, hi, gl_n);
    }
    return out;
}

namespace detail {

// Uniform grid over (-1,1) with Simpson weights.
struct EffectGrid {
    explicit EffectGrid(int n_points) {
        int n = n_points < 3 ? 3 : n_points;
        if (n % 2 == 0) ++n;
        x.resize(n);
        w.resize(n);
        double h = 2.0 / (n - 1);
        for (int i = 0; i < n; ++i) {
            x[i] = -1.0 + i * h;
            double c = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            w[i] = c * h / 3.0;
        }
    }
    std::vector<double> x, w;
};

inline double entropy_of_density(const std::vector<double>& f, const std::vector<double>& w) {
    double acc = 0.0;
    for (size_t i = 0; i < f.size(); ++i)
        if (f[i] > 0.0) acc += w[i] * f[i] * std::log(f[i]);
    return acc;  // = E[log f], the negative differential entropy
}

}  // namespace detail

// negative differential entropy E[log f] of the effect gamma
inline double effect_neg_entropy(const BetaArm& arm, const BetaArm& ctrl, int grid_points) {
    detail::EffectGrid g(grid_points);
    auto f = effect_density(arm, ctrl, g.x);
    return detail::entropy_of_density(f, g.w);
}

// mean absolute deviation around the posterior median of gamma
inline double effect_mad(const BetaArm& arm, const BetaArm& ctrl, int grid_points) {
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (effect_cdf(arm, ctrl, mid) < 0.5 ? lo : hi) = mid;
    }
    double med = 0.5 * (lo + hi);
    detail::EffectGrid g(grid_points);
    auto f = effect_density(arm, ctrl, g.x);
    double acc = 0.0;
    for (size_t i = 0; i < g.x.size(); ++i) acc += g.w[i] * f[i] * std::abs(g.x[i] - med);
    return acc;
}

// class probabilities of the discretized effect for cutpoints (c1, c2)
inline std::array<double, 3> effect_class_probs(const BetaArm& arm, const BetaArm& ctrl, double c1,
                                                double c2) {
    double f1 = effect_cdf(arm, ctrl, c1);
    double f2 = effect_cdf(arm, ctrl, c2);
    return {f1, std::max(0.0, f2 - f1), std::max(0.0, 1.0 - f2)};
}

// moments of the truncated effect gamma * 1{gamma > 0} by tensor quadrature
// over the product Beta posterior
inline std::pair<double, double> truncated_effect_mean_var(const BetaArm& arm, const BetaArm& ctrl,
                                                           int gl_n) {
    const GlRule& r = gauss_legendre(gl_n);
    std::vector<double> fa(gl_n), fc(gl_n);
    for (int i = 0; i < gl_n; ++i) {
        fa[i] = arm.pdf(r.nodes[i]) * r.weights[i];
        fc[i] = ctrl.pdf(r.nodes[i]) * r.weights[i];
    }
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < gl_n; ++i) {
        double x = r.nodes[i];
        double rowsum1 = 0.0, rowsum2 = 0.0;
        for (int j = 0; j < gl_n; ++j) {
            double g = x - r.nodes[j];
            if (g <= 0.0) continue;
            double wj = fc[j];
            rowsum1 += wj * g;
            rowsum2 += wj * g * g;
        }
        m1 += fa[i] * rowsum1;
        m2 += fa[i] * rowsum2;
    }
    return {m1, m2 - m1 * m1};
}

// ---------------------------------------------------------------------------
// Entropy-of-max cache
// ---------------------------------------------------------------------------

// Sorted packed (alpha, beta) pairs, the orbit key of arm-exchangeable
// functionals.  Fails (returns false) for > 4 arms or non-integer / oversized
// parameters.
inline bool beta_orbit_key(const std::vector<BetaArm>& arms, uint64_t out[2]) {
    if (arms.size() > 4) return false;
    std::array<uint32_t, 4> packed{};
    for (size_t a = 0; a < arms.size(); ++a) {
        if (!is_integral_value(arms[a].alpha) || !is_integral_value(arms[a].beta)) return false;
        auto al = static_cast<uint64_t>(arms[a].alpha), be = static_cast<uint64_t>(arms[a].beta);
        if (al >= 65536 || be >= 65536) return false;
        packed[a] = static_cast<uint32_t>((al << 16) | be);
    }
    std::sort(packed.begin(), packed.begin() + arms.size());
    out[0] = (static_cast<uint64_t>(packed[0]) << 32) | packed[1];
    out[1] = (static_cast<uint64_t>(packed[2]) << 32) | packed[3];
    return true;
}

struct OrbitKeyHash {
    size_t operator()(const std::pair<uint64_t, uint64_t>& k) const {
        uint64_t h = k.first * 0x9E3779B97F4A7C15ull;
        h ^= k.second + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return static_cast<size_t>(h);
    }
};

// Negative entropy of the best-arm density is exchangeable in the arms, so it
// is memoized on the sorted integer sufficient statistics.  One instance per
// worker thread; no internal locking.
class EntropyOfMaxCache {
  public:
    explicit EntropyOfMaxCache(int grid_points = 1025) : grid_(grid_points) {}

    double eval(const std::vector<BetaArm>& arms) {
        uint64_t key[2];
        if (beta_orbit_key(arms, key)) {
            auto it = memo_.find({key[0], key[1]});
            if (it != memo_.end()) return it->second;
            double v = compute(arms);
            memo_.emplace(std::make_pair(key[0], key[1]), v);
            return v;
        }
        return compute(arms);
    }

    const UnitGrid& grid() const { return grid_; }
    size_t size() const { return memo_.size(); }

  private:
    double compute(const std::vector<BetaArm>& arms) const {
        auto f = best_arm_density_grid(arms, grid_);
        double acc = 0.0;
        for (size_t i = 0; i < grid_.size(); ++i)
            if (f[i] > 0.0) acc += grid_.w[i] * f[i] * std::log(f[i]);
        return acc;
    }

    UnitGrid grid_;
    std::unordered_map<std::pair<uint64_t, uint64_t>, double, OrbitKeyHash> memo_;
};

// ---------------------------------------------------------------------------
// Co-primary joint-effect evaluator interface
// ---------------------------------------------------------------------------

// P(gamma_1 > 0 and gamma_2 > 0) for an (arm, control) Dirichlet pair.  The
// marginal comparisons are exact Beta comparisons; only this joint needs
// Monte Carlo, and implementations differ in how draws are organized
// (coprimary.hpp).
class CoprimaryJointEval {
  public:
    virtual ~CoprimaryJointEval() = default;
    virtual double prob_both(const DirichletArm& arm, const DirichletArm& ctrl) = 0;
};

// Plain per-call MC with a frozen seed derived from the sufficient statistics.
class FreshDrawJointEval : public CoprimaryJointEval {
  public:
    explicit FreshDrawJointEval(int64_t draws = 4096, uint64_t seed = 0x5eed)
        : draws_(draws), seed_(seed) {}

    double prob_both(const DirichletArm& arm, const DirichletArm& ctrl) override {
        uint64_t h = seed_;
        for (double c : arm.counts) h = h * 0x100000001B3ull + static_cast<uint64_t>(c * 8);
        for (double c : ctrl.counts) h = h * 0x100000001B3ull + static_cast<uint64_t>(c * 8);
        RngStream rng(h, 0, Sub::MetricMc);
        std::vector<double> aa(arm.counts.begin(), arm.counts.end());
        std::vector<double> cc(ctrl.counts.begin(), ctrl.counts.end());
        std::vector<double> ta, tc;
        int64_t hits = 0;
        for (int64_t i = 0; i < draws_; ++i) {
            rng.dirichlet(aa, ta);
            rng.dirichlet(cc, tc);
            if ((ta[0] + ta[1]) > (tc[0] + tc[1]) && (ta[0] + ta[2]) > (tc[0] + tc[2])) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(draws_);
    }

  private:
    int64_t draws_;
    uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Metric evaluation
// ---------------------------------------------------------------------------

// Per-replication evaluation context: caches and the metric-MC substream.
struct MetricCtx {
    EntropyOfMaxCache* entropy_cache = nullptr;
    CoprimaryJointEval* joint = nullptr;
    RngStream* mc_stream = nullptr;
};

namespace detail {

inline double variance_sum_raw(const MetricSpec&, const TrialHistory& h) {
    if (h.family == DesignFamily::MultiArmControlled) {
        require(h.n_arms() >= 2, "variance-sum: controlled design needs a control arm");
        double ctrl_var = posterior_variance(h.arms[0]);
        double acc = 0.0;
        for (size_t a = 1; a < h.n_arms(); ++a)
            acc -= posterior_variance(h.arms[a]) + ctrl_var;
        return acc;
    }
    // uncontrolled families: per-arm parameter variances
    double acc = 0.0;
    for (size_t a = 0; a < h.n_arms(); ++a) acc -= posterior_variance(h.arms[a]);
    return acc;
}

inline double truncated_variance_sum_raw(const MetricSpec& spec, const TrialHistory& h) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("truncated-variance-sum requires the controlled binary family");
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a)
        acc -= truncated_effect_mean_var(h.beta(a), h.beta(0), spec.gl_points).second;
    return acc;
}

inline double diff_entropy_sum_raw(const MetricSpec& spec, const TrialHistory& h) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("differential-entropy-sum requires the controlled binary family");
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a)
        acc += effect_neg_entropy(h.beta(a), h.beta(0), spec.grid_points);
    return acc;
}

inline double mad_sum_raw(const MetricSpec& spec, const TrialHistory& h) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("mad-sum requires the controlled binary family");
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a)
        acc -= effect_mad(h.beta(a), h.beta(0), spec.grid_points);
    return acc;
}

inline double discretized_raw(const MetricSpec& spec, const TrialHistory& h, bool entropy) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("discretized metrics require the controlled binary family");
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a) {
        auto p = effect_class_probs(h.beta(a), h.beta(0), spec.cutpoints[0], spec.cutpoints[1]);
        if (entropy) {
            double H = 0.0;
            for (double q : p)
                if (q > 0.0) H -= q * std::log(q);
            acc -= H;
        } else {
            double m = p[1] + 2.0 * p[2];
            double m2 = p[1] + 4.0 * p[2];
            acc -= m2 - m * m;
        }
    }
    return acc;
}

inline double max_effect_variance_raw(const MetricSpec& spec, const TrialHistory& h,
                                      MetricCtx& ctx) {
    if (h.family != DesignFamily::MultiArmControlled)
        throw family_error("max-effect-variance requires the controlled binary family");
    // MC over the product posterior using the context stream (or a frozen one)
    RngStream fallback(0xFEED, 0, Sub::MetricMc);
    RngStream& rng = ctx.mc_stream ? *ctx.mc_stream : fallback;
    double m = 0.0, m2 = 0.0;
    for (int64_t i = 0; i < spec.mc_draws; ++i) {
        double t0 = rng.beta(h.beta(0).alpha, h.beta(0).beta);
        double mx = -2.0;
        for (size_t a = 1; a < h.n_arms(); ++a)
            mx = std::max(mx, rng.beta(h.beta(a).alpha, h.beta(a).beta) - t0);
        m += mx;
        m2 += mx * mx;
    }
    double n = static_cast<double>(spec.mc_draws);
    m /= n;
    return -(m2 / n - m * m);
}

inline double entropy_of_max_raw(const MetricSpec& spec, const TrialHistory& h, MetricCtx& ctx) {
    if (h.family != DesignFamily::BestArm && h.family != DesignFamily::MultiArmControlled)
        throw family_error("entropy-of-max requires Beta arms");
    auto arms = h.beta_arms();
    if (ctx.entropy_cache) return ctx.entropy_cache->eval(arms);
    EntropyOfMaxCache local(spec.grid_points);
    return local.eval(arms);
}

inline double coprimary_variance_raw(const MetricSpec& spec, const TrialHistory& h) {
    if (h.family != DesignFamily::CoPrimary)
        throw family_error("variance-coprimary requires the co-primary family");
    const auto& ctrl = h.dirichlet(0);
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a) {
        const auto& arm = h.dirichlet(a);
        double var_both = arm.cell_variance(DirichletArm::kBoth) +
                          ctrl.cell_variance(DirichletArm::kBoth);
        double var_m1 = arm.marginal_variance(1) + ctrl.marginal_variance(1);
        double var_m2 = arm.marginal_variance(2) + ctrl.marginal_variance(2);
        acc -= var_both + spec.w * (var_m1 + var_m2);
    }
    return acc;
}

inline double coprimary_asym_raw(const MetricSpec& spec, const TrialHistory& h, MetricCtx& ctx) {
    if (h.family != DesignFamily::CoPrimary)
        throw family_error("asym-entropy-coprimary requires the co-primary family");
    const auto& ctrl = h.dirichlet(0);
    FreshDrawJointEval fallback(spec.mc_draws);
    CoprimaryJointEval& joint = ctx.joint ? *ctx.joint : fallback;
    double acc = 0.0;
    for (size_t a = 1; a < h.n_arms(); ++a) {
        const auto& arm = h.dirichlet(a);
        auto pa1 = arm.marginal_params(1), pc1 = ctrl.marginal_params(1);
        auto pa2 = arm.marginal_params(2), pc2 = ctrl.marginal_params(2);
        double p1 = prob_greater(BetaArm{pa1[0], pa1[1]}, BetaArm{pc1[0], pc1[1]});
        double p2 = prob_greater(BetaArm{pa2[0], pa2[1]}, BetaArm{pc2[0], pc2[1]});
        double pe = joint.prob_both(arm, ctrl);
        acc -= asym_entropy(pe, spec.beta_exp) +
               spec.w * (asym_entropy(p1, spec.beta_exp) + asym_entropy(p2, spec.beta_exp));
    }
    return acc;
}

}  // namespace detail

// Raw value of the information functional (paper-scale, no baseline shift).
inline double eval_metric_raw(const MetricSpec& spec, const TrialHistory& h, MetricCtx& ctx) {
    switch (spec.kind) {
        case MetricKind::VarianceSum: return detail::variance_sum_raw(spec, h);
        case MetricKind::TruncatedVarianceSum: return detail::truncated_variance_sum_raw(spec, h);
        case MetricKind::EntropyOfMax: return detail::entropy_of_max_raw(spec, h, ctx);
        case MetricKind::DifferentialEntropySum: return detail::diff_entropy_sum_raw(spec, h);
        case MetricKind::MADSum: return detail::mad_sum_raw(spec, h);
        case MetricKind::DiscretizedVariance: return detail::discretized_raw(spec, h, false);
        case MetricKind::DiscretizedEntropy: return detail::discretized_raw(spec, h, true);
        case MetricKind::MaxEffectVariance: return detail::max_effect_variance_raw(spec, h, ctx);
        case MetricKind::VarianceCoprimary: return detail::coprimary_variance_raw(spec, h);
        case MetricKind::AsymEntropyCoprimary: return detail::coprimary_asym_raw(spec, h, ctx);
        case MetricKind::AsymEntropyBiomarker:
            throw family_error("biomarker metric is evaluated through the subgroup engine");
    }
    throw config_error("unknown metric kind");
}

// Offset form: zero on the empty history.  The prior baseline is evaluated on
// a copy of the history with the arms reset to their priors.
inline double eval_metric(const MetricSpec& spec, const TrialHistory& h, MetricCtx& ctx) {
    double raw = eval_metric_raw(spec, h, ctx);
    switch (spec.kind) {
        case MetricKind::VarianceSum:
        case MetricKind::TruncatedVarianceSum:
        case MetricKind::DifferentialEntropySum:
        case MetricKind::MADSum:
        case MetricKind::DiscretizedVariance:
        case MetricKind::DiscretizedEntropy:
        case MetricKind::MaxEffectVariance: {
            TrialHistory prior = h;
            prior.arms = h.prior_arms;
            // deterministic baseline: MC kinds fall back to their frozen stream
            MetricCtx prior_ctx;
            prior_ctx.entropy_cache = ctx.entropy_cache;
            prior_ctx.joint = ctx.joint;
            return raw - eval_metric_raw(spec, prior, prior_ctx);
        }
        default:
            return raw;  // paper formulas carry no prior offset
    }
}

inline double eval_metric(const MetricSpec& spec, const TrialHistory& h) {
    MetricCtx ctx;
    return eval_metric(spec, h, ctx);
}

}  // namespace bud
