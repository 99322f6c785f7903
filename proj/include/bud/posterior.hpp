#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "bud/common.hpp"
#include "bud/quad.hpp"
#include "bud/rng.hpp"
#include "bud/special.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Conjugate arm states
// ---------------------------------------------------------------------------

struct BetaArm {
    double alpha = 1.0;  // prior pseudo-successes + observed successes
    double beta = 1.0;   // prior pseudo-failures + observed failures

    double mean() const { return alpha / (alpha + beta); }
    double variance() const { return beta_variance(alpha, beta); }
    double pdf(double x) const { return beta_pdf(x, alpha, beta); }
    double cdf(double x) const { return beta_cdf(x, alpha, beta); }

    BetaArm updated(bool success) const {
        return success ? BetaArm{alpha + 1.0, beta} : BetaArm{alpha, beta + 1.0};
    }
};

// Normal outcome with known variance `outcome_var` and N(0, prior_var) prior
// on the mean.  Sufficient statistics are (n, sum_y).
struct NormalArm {
    double prior_var = 1.0;
    double outcome_var = 1.0;
    int64_t n = 0;
    double sum_y = 0.0;

    double variance() const { return 1.0 / (1.0 / prior_var + static_cast<double>(n) / outcome_var); }
    double mean() const { return variance() * sum_y / outcome_var; }

    NormalArm updated(double y) const { return NormalArm{prior_var, outcome_var, n + 1, sum_y + y}; }
};

// Two binary co-primary endpoints.  Cells are ordered (both positive,
// endpoint 1 only, endpoint 2 only, none); marginals are Beta by aggregation.
struct DirichletArm {
    static constexpr int kBoth = 0, kFirstOnly = 1, kSecondOnly = 2, kNone = 3;
    std::array<double, 4> counts{1.0, 1.0, 1.0, 1.0};

    double total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
    double cell_mean(int y) const { return counts[y] / total(); }
    double cell_variance(int y) const { return beta_variance(counts[y], total() - counts[y]); }
    double mean() const { return cell_mean(kBoth); }
    // variance of the both-endpoints response probability (the primary effect cell)
    double variance() const { return cell_variance(kBoth); }

    // marginal response probability of endpoint l (1-based) as Beta params
    std::array<double, 2> marginal_params(int l) const {
        double a = counts[kBoth] + (l == 1 ? counts[kFirstOnly] : counts[kSecondOnly]);
        return {a, total() - a};
    }
    double marginal_mean(int l) const {
        auto p = marginal_params(l);
        return p[0] / (p[0] + p[1]);
    }
    double marginal_variance(int l) const {
        auto p = marginal_params(l);
        return beta_variance(p[0], p[1]);
    }

    DirichletArm updated(int cell) const {
        DirichletArm out = *this;
        out.counts[static_cast<size_t>(cell)] += 1.0;
        return out;
    }
};

using PosteriorState = std::variant<BetaArm, NormalArm, DirichletArm>;

// ---------------------------------------------------------------------------
// Outcomes and updating
// ---------------------------------------------------------------------------

struct Outcome {
    enum class Kind { Binary, Real, Cell } kind;
    double value = 0.0;  // 0/1, real outcome, or cell index

    static Outcome binary(bool y) { return {Kind::Binary, y ? 1.0 : 0.0}; }
    static Outcome real(double y) { return {Kind::Real, y}; }
    static Outcome cell(int y) { return {Kind::Cell, static_cast<double>(y)}; }
};

inline PosteriorState update(const PosteriorState& state, const Outcome& y) {
    if (std::holds_alternative<BetaArm>(state)) {
        if (y.kind != Outcome::Kind::Binary)
            throw family_error("update: Beta arm expects a binary outcome");
        return std::get<BetaArm>(state).updated(y.value != 0.0);
    }
    if (std::holds_alternative<NormalArm>(state)) {
        if (y.kind != Outcome::Kind::Real)
            throw family_error("update: Normal arm expects a real outcome");
        return std::get<NormalArm>(state).updated(y.value);
    }
    if (y.kind != Outcome::Kind::Cell)
        throw family_error("update: Dirichlet arm expects a cell outcome");
    int cell = static_cast<int>(y.value);
    require(cell >= 0 && cell < 4, "update: cell index out of range");
    return std::get<DirichletArm>(state).updated(cell);
}

inline double posterior_variance(const PosteriorState& state) {
    return std::visit([](const auto& arm) { return arm.variance(); }, state);
}

// ---------------------------------------------------------------------------
// Beta comparison P(theta_a > theta_b)
// ---------------------------------------------------------------------------

inline double prob_greater_quadrature(const BetaArm& a, const BetaArm& b, double tol = 1e-12) {
    // integrate f_b(y) * P(theta_a > y)
    auto f = [&](double y) { return b.pdf(y) * (1.0 - a.cdf(y)); };
    return clamp01(adaptive_gl(f, 0.0, 1.0, tol));
}

// Exact finite sum when all four parameters are integral (the default priors
// keep them so); adaptive quadrature otherwise.
inline double prob_greater(const BetaArm& a, const BetaArm& b) {
    if (is_integral_value(a.alpha) && is_integral_value(a.beta) && is_integral_value(b.alpha) &&
        is_integral_value(b.beta)) {
        return beta_prob_greater_exact(
            static_cast<int64_t>(a.alpha), static_cast<int64_t>(a.beta),
            static_cast<int64_t>(b.alpha), static_cast<int64_t>(b.beta));
    }
    return prob_greater_quadrature(a, b, 1e-10);
}

// ---------------------------------------------------------------------------
// Best-arm density p_{theta_{a*}}(x | Sigma)
// ---------------------------------------------------------------------------

inline double best_arm_density(const std::vector<BetaArm>& arms, double x) {
    double total = 0.0;
    for (size_t a = 0; a < arms.size(); ++a) {
        double term = arms[a].pdf(x);
        for (size_t j = 0; j < arms.size(); ++j)
            if (j != a) term *= arms[j].cdf(x);
        total += term;
    }
    return total;
}

// Density evaluated on a whole grid in one pass (cdf/pdf per arm computed once).
inline std::vector<double> best_arm_density_grid(const std::vector<BetaArm>& arms,
                                                 const UnitGrid& grid) {
    const size_t n = grid.size(), K = arms.size();
    std::vector<double> pdf(K * n), cdf(K * n), out(n, 0.0);
    for (size_t a = 0; a < K; ++a)
        for (size_t i = 0; i < n; ++i) {
            pdf[a * n + i] = arms[a].pdf(grid.x[i]);
            cdf[a * n + i] = arms[a].cdf(grid.x[i]);
        }
    for (size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (size_t a = 0; a < K; ++a) {
            double term = pdf[a * n + i];
            for (size_t j = 0; j < K; ++j)
                if (j != a) term *= cdf[j * n + i];
            total += term;
        }
        out[i] = total;
    }
    return out;
}

// P(arm a is the maximum) for every arm, by grid quadrature of
// pdf_a(x) * prod_{j!=a} cdf_j(x).
inline std::vector<double> prob_best_grid(const std::vector<BetaArm>& arms, const UnitGrid& grid) {
    const size_t n = grid.size(), K = arms.size();
    std::vector<double> pdf(K * n), cdf(K * n), out(K, 0.0);
    for (size_t a = 0; a < K; ++a)
        for (size_t i = 0; i < n; ++i) {
            pdf[a * n + i] = arms[a].pdf(grid.x[i]);
            cdf[a * n + i] = arms[a].cdf(grid.x[i]);
        }
    for (size_t a = 0; a < K; ++a) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double term = pdf[a * n + i];
            for (size_t j = 0; j < K; ++j)
                if (j != a) term *= cdf[j * n + i];
            acc += grid.w[i] * term;
        }
        out[a] = clamp01(acc);
    }
    double s = 0.0;
    for (double v : out) s += v;
    if (s > 0.0)
        for (double& v : out) v /= s;
    return out;
}

// ---------------------------------------------------------------------------
// Dirichlet marginals and treatment-effect moments
// ---------------------------------------------------------------------------

struct DirichletEffectSummary {
    double nu1_mean = 0.0, nu2_mean = 0.0;             // arm endpoint marginal means
    double effect1_mean = 0.0, effect2_mean = 0.0;     // gamma_{l,a} posterior means
    double effect1_var = 0.0, effect2_var = 0.0;       // MC estimates
    double prob_effect1 = 0.0, prob_effect2 = 0.0;     // P(gamma_l > 0)
    double prob_both = 0.0;                            // P(gamma_1 > 0 and gamma_2 > 0)
    int64_t mc_draws = 0;
    uint64_t mc_seed = 0;
};

// Moments of gamma_{l,a} = nu_{l,a} - nu_{l,0} by Monte Carlo with a declared
// draw count.  Means are exact (linear); variances and joint probabilities
// come from the draws.
inline DirichletEffectSummary dirichlet_marginals(const DirichletArm& arm,
                                                  const DirichletArm& control, int64_t mc_draws,
                                                  uint64_t mc_seed) {
    DirichletEffectSummary s;
    s.nu1_mean = arm.marginal_mean(1);
    s.nu2_mean = arm.marginal_mean(2);
    s.effect1_mean = s.nu1_mean - control.marginal_mean(1);
    s.effect2_mean = s.nu2_mean - control.marginal_mean(2);
    s.mc_draws = mc_draws;
    s.mc_seed = mc_seed;

    RngStream rng(mc_seed, 0, Sub::MetricMc);
    std::vector<double> ta, tc;
    std::vector<double> alpha_a(arm.counts.begin(), arm.counts.end());
    std::vector<double> alpha_c(control.counts.begin(), control.counts.end());
    double m1 = 0.0, m2 = 0.0, v1 = 0.0, v2 = 0.0;
    int64_t c1 = 0, c2 = 0, cb = 0;
    for (int64_t i = 0; i < mc_draws; ++i) {
        rng.dirichlet(alpha_a, ta);
        rng.dirichlet(alpha_c, tc);
        double g1 = (ta[0] + ta[1]) - (tc[0] + tc[1]);
        double g2 = (ta[0] + ta[2]) - (tc[0] + tc[2]);
        m1 += g1;
        m2 += g2;
        v1 += g1 * g1;
        v2 += g2 * g2;
        if (g1 > 0.0) ++c1;
        if (g2 > 0.0) ++c2;
        if (g1 > 0.0 && g2 > 0.0) ++cb;
    }
    double n = static_cast<double>(mc_draws);
    m1 /= n;
    m2 /= n;
    s.effect1_var = v1 / n - m1 * m1;
    s.effect2_var = v2 / n - m2 * m2;
    s.prob_effect1 = c1 / n;
    s.prob_effect2 = c2 / n;
    s.prob_both = cb / n;
    return s;
}

}  // namespace bud
