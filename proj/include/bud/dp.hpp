#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "bud/common.hpp"
#include "bud/special.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Sufficient-statistic lattice
//
// A state is a vector of per-(arm, outcome) counts c[0..d), sum(c) = t.  It is
// ranked through the combinatorial number system: with prefix sums
// S_j = c_0 + ... + c_{j-1}, the bar positions b_j = S_j + j - 1 are a strictly
// increasing (d-1)-combination and rank(c) = sum_j C(b_j, j).  Incrementing
// one cell bumps exactly the bars to its right, so successor ranks at stage
// t+1 come from two prefix-sum arrays in O(1) per successor.
// ---------------------------------------------------------------------------

class Lattice {
  public:
    Lattice(int n_cells, int horizon) : d_(n_cells), T_(horizon), nmax_(horizon + n_cells + 2) {
        int nmax = nmax_;
        binom_.assign(static_cast<size_t>(nmax) * (d_ + 1), 0);
        for (int n = 0; n < nmax; ++n) {
            at(n, 0) = 1;
            for (int k = 1; k <= std::min(n, d_); ++k)
                at(n, k) = at(n - 1, k - 1) + (n - 1 >= k ? at(n - 1, k) : 0);
        }
    }

    int cells() const { return d_; }
    int horizon() const { return T_; }

    uint64_t states_at(int t) const { return choose(t + d_ - 1, d_ - 1); }
    // all states over stages 0..T (the paper's operation count for BI)
    uint64_t total_states(int T) const { return choose(T + d_, d_); }

    uint64_t choose(int n, int k) const {
        if (k < 0 || k > d_ || n < 0 || n < k) return 0;
        require(n < nmax_, "lattice: binomial query beyond the horizon table");
        return at(n, k);
    }

    uint64_t rank(const std::vector<int>& c) const {
        uint64_t r = 0;
        int S = 0;
        for (int j = 1; j < d_; ++j) {
            S += c[j - 1];
            r += choose(S + j - 1, j);
        }
        return r;
    }

    // state of stage t with the given rank
    std::vector<int> unrank(int t, uint64_t r) const {
        std::vector<int> b(d_);
        for (int j = d_ - 1; j >= 1; --j) {
            int lo = j - 1, hi = t + d_;  // b_j in [j-1, t+d-2]
            while (lo < hi) {             // largest b with C(b, j) <= r
                int mid = (lo + hi + 1) / 2;
                if (choose(mid, j) <= r) lo = mid;
                else hi = mid - 1;
            }
            b[j] = lo;
            r -= choose(lo, j);
        }
        std::vector<int> c(d_);
        int prevS = 0;
        for (int j = 1; j < d_; ++j) {
            int S = b[j] - (j - 1);
            c[j - 1] = S - prevS;
            prevS = S;
        }
        c[d_ - 1] = t - prevS;
        return c;
    }

    // Iterate every state of stage t in rank order; fn(rank, counts).
    // Parallel chunks each start from an unranked state and continue with the
    // colex odometer.
    template <class Fn>
    void for_each_state(int t, int threads, Fn&& fn) const {
        uint64_t total = states_at(t);
        int workers = std::max(1, threads);
        if (total < 4096) workers = 1;
        std::vector<std::thread> pool;
        auto run = [&](uint64_t lo, uint64_t hi) {
            std::vector<int> c = unrank(t, lo);
            std::vector<int> b(d_);
            int S = 0;
            for (int j = 1; j < d_; ++j) {
                S += c[j - 1];
                b[j] = S + j - 1;
            }
            for (uint64_t r = lo; r < hi; ++r) {
                fn(r, c);
                if (r + 1 == hi) break;
                // colex successor of the bar combination
                int j = 1;
                while (j < d_ - 1 && b[j] + 1 == b[j + 1]) ++j;
                ++b[j];
                for (int i = 1; i < j; ++i) b[i] = i - 1;
                int prevS = 0;
                for (int i = 1; i < d_; ++i) {
                    int Si = b[i] - (i - 1);
                    c[i - 1] = Si - prevS;
                    prevS = Si;
                }
                c[d_ - 1] = t - prevS;
            }
        };
        if (workers == 1) {
            run(0, total);
            return;
        }
        uint64_t chunk = (total + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            uint64_t lo = w * chunk, hi = std::min(total, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

  private:
    uint64_t& at(int n, int k) { return binom_[static_cast<size_t>(n) * (d_ + 1) + k]; }
    const uint64_t& at(int n, int k) const {
        return binom_[static_cast<size_t>(n) * (d_ + 1) + k];
    }

    int d_;
    int T_;
    int nmax_;
    std::vector<uint64_t> binom_;
};

// ---------------------------------------------------------------------------
// Backward induction
// ---------------------------------------------------------------------------

struct BiOptions {
    int threads = 1;
    uint64_t max_stage_states = 80000000;  // budget on any single stage
    bool keep_all_stages = false;          // retain V_t for policy queries / tests
};

struct BiResult {
    double root_value = 0.0;
    uint64_t terminal_states = 0;
    std::vector<std::vector<double>> stage_values;  // filled when keep_all_stages
};

// V_t(s) = max_a sum_y pred(y | a, s) V_{t+1}(s + e_{a,y}) with conjugate
// predictive probabilities pred = (pseudo + count) / (pseudo_arm + n_arm).
// `terminal` must be safe to call concurrently.
template <class TerminalU>
BiResult backward_induction(int n_arms, int n_outcomes, const std::vector<double>& pseudo, int T,
                            const TerminalU& terminal, BiOptions opts = {}) {
    const int d = n_arms * n_outcomes;
    require(static_cast<int>(pseudo.size()) == d, "backward_induction: pseudo size mismatch");
    require(d >= 1 && d <= 63, "backward_induction: cell count out of range");
    Lattice lat(d, T);
    if (lat.states_at(T) > opts.max_stage_states)
        throw budget_error("backward_induction: stage " + std::to_string(T) + " has " +
                           std::to_string(lat.states_at(T)) + " states, over the budget of " +
                           std::to_string(opts.max_stage_states));

    std::vector<double> pseudo_arm(n_arms, 0.0);
    for (int a = 0; a < n_arms; ++a)
        for (int y = 0; y < n_outcomes; ++y) pseudo_arm[a] += pseudo[a * n_outcomes + y];

    BiResult result;
    result.terminal_states = lat.states_at(T);
    if (opts.keep_all_stages) result.stage_values.resize(T + 1);

    std::vector<double> next(lat.states_at(T));
    lat.for_each_state(T, opts.threads, [&](uint64_t r, const std::vector<int>& c) {
        next[r] = terminal(c);
    });
    if (opts.keep_all_stages) result.stage_values[T] = next;

    std::vector<double> cur;
    for (int t = T - 1; t >= 0; --t) {
        cur.assign(lat.states_at(t), 0.0);
        lat.for_each_state(t, opts.threads, [&](uint64_t r, const std::vector<int>& c) {
            // prefix arrays for successor ranks
            double best = -std::numeric_limits<double>::infinity();
            uint64_t pa[64], pb[64];  // pa[i] = sum_{j<=i} C(b_j, j), pb likewise for b_j+1
            pa[0] = 0;
            pb[0] = 0;
            int S = 0;
            for (int j = 1; j < d; ++j) {
                S += c[j - 1];
                int bj = S + j - 1;
                pa[j] = pa[j - 1] + lat.choose(bj, j);
                pb[j] = pb[j - 1] + lat.choose(bj + 1, j);
            }
            uint64_t pbtot = pb[d - 1];
            for (int a = 0; a < n_arms; ++a) {
                double n_a = 0.0;
                for (int y = 0; y < n_outcomes; ++y) n_a += c[a * n_outcomes + y];
                double denom = pseudo_arm[a] + n_a;
                double ev = 0.0;
                for (int y = 0; y < n_outcomes; ++y) {
                    int i = a * n_outcomes + y;
                    double pred = (pseudo[i] + c[i]) / denom;
                    uint64_t succ = pa[std::min(i, d - 1)] + (pbtot - pb[std::min(i, d - 1)]);
                    ev += pred * next[succ];
                }
                best = std::max(best, ev);
            }
            cur[r] = best;
        });
        if (opts.keep_all_stages) result.stage_values[t] = cur;
        next.swap(cur);
    }
    result.root_value = next[0];
    return result;
}

// ---------------------------------------------------------------------------
// Oracle allocation for the separable variance-sum metric
// ---------------------------------------------------------------------------

// E[ Var(theta | Sigma) | n patients at true rate theta ]: binomial average of
// the conjugate posterior variance.
inline double expected_posterior_variance_binary(int n, double theta, double v1, double v2) {
    double acc = 0.0;
    for (int s = 0; s <= n; ++s) {
        double logp = log_binomial(n, s);
        if (theta > 0.0) logp += s * std::log(theta);
        else if (s > 0) continue;
        if (theta < 1.0) logp += (n - s) * std::log1p(-theta);
        else if (s < n) continue;
        acc += std::exp(logp) * beta_variance(v1 + s, v2 + n - s);
    }
    return acc;
}

struct OracleResult {
    std::vector<int64_t> quotas;
    double expected_utility = 0.0;  // offset form, E[u(Sigma_T)]
    double expected_cost = 0.0;     // sum of expected posterior effect variances
};

// Best fixed composition of T patients for the controlled variance-sum metric
// ("the oracle knows theta").  Exact arm-separable dynamic program; the control
// term enters every treatment effect, hence the K-fold weight.
inline OracleResult oracle_allocation_variance_sum(const std::vector<double>& truth, int64_t T,
                                                   double v1 = 1.0, double v2 = 1.0) {
    require(!truth.empty(), "oracle: need at least the control arm");
    const size_t n_arms = truth.size();
    const size_t K = n_arms - 1;

    // per-arm cost tables g_a(n)
    std::vector<std::vector<double>> g(n_arms, std::vector<double>(T + 1));
    for (size_t a = 0; a < n_arms; ++a)
        for (int64_t n = 0; n <= T; ++n) {
            double base = expected_posterior_variance_binary(static_cast<int>(n), truth[a], v1, v2);
            g[a][n] = (a == 0 && K > 0) ? static_cast<double>(K) * base : base;
        }

    // dynamic program over arms
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> f(n_arms + 1, std::vector<double>(T + 1, inf));
    std::vector<std::vector<int>> arg(n_arms + 1, std::vector<int>(T + 1, 0));
    f[0][0] = 0.0;
    for (size_t a = 0; a < n_arms; ++a)
        for (int64_t m = 0; m <= T; ++m) {
            if (f[a][m] == inf) continue;
            for (int64_t n = 0; m + n <= T; ++n) {
                double cand = f[a][m] + g[a][n];
                if (cand < f[a + 1][m + n]) {
                    f[a + 1][m + n] = cand;
                    arg[a + 1][m + n] = static_cast<int>(n);
                }
            }
        }

    OracleResult out;
    out.quotas.assign(n_arms, 0);
    int64_t rem = T;
    for (size_t a = n_arms; a >= 1; --a) {
        out.quotas[a - 1] = arg[a][rem];
        rem -= arg[a][rem];
    }
    out.expected_cost = f[n_arms][T];
    double prior_cost = 0.0;
    for (size_t a = 0; a < n_arms; ++a) prior_cost += g[a][0];
    out.expected_utility = prior_cost - out.expected_cost;  // sum_a (v_a - E Var)
    return out;
}

inline double regret(double optimal_expected_u, double design_expected_u) {
    return std::max(0.0, optimal_expected_u - design_expected_u);
}

// Limiting allocation proportions rho_a ~ sigma_a^{2h/(1+2h)} (Neyman as
// h -> infinity).
inline std::vector<double> asymptotic_limit(const std::vector<double>& sigmas, double h) {
    require(h >= 0.0, "asymptotic_limit: h must be nonnegative");
    double e = 2.0 * h / (1.0 + 2.0 * h);
    std::vector<double> rho(sigmas.size());
    double total = 0.0;
    for (size_t a = 0; a < sigmas.size(); ++a) {
        require(sigmas[a] > 0.0, "asymptotic_limit: sigmas must be positive");
        rho[a] = std::pow(sigmas[a], e);
        total += rho[a];
    }
    for (double& v : rho) v /= total;
    return rho;
}

}  // namespace bud
