#pragma once

#include <mutex>
#include <numeric>

#include "bud/coprimary.hpp"
#include "bud/dp.hpp"
#include "bud/metric.hpp"
#include "bud/policy.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Shard-locked caches shared between the BI terminal layer and the policy
// simulations, so both sides price the identical utility surface.
// ---------------------------------------------------------------------------

class SharedEntropyMemo {
  public:
    explicit SharedEntropyMemo(int grid_points = 1025) : grid_(grid_points) {}

    double eval(const std::vector<BetaArm>& arms) {
        uint64_t key[2];
        if (!beta_orbit_key(arms, key)) return compute(arms);
        std::pair<uint64_t, uint64_t> k{key[0], key[1]};
        size_t shard = OrbitKeyHash{}(k) % kShards;
        {
            std::lock_guard<std::mutex> lock(locks_[shard]);
            auto it = maps_[shard].find(k);
            if (it != maps_[shard].end()) return it->second;
        }
        double v = compute(arms);
        std::lock_guard<std::mutex> lock(locks_[shard]);
        maps_[shard].emplace(k, v);
        return v;
    }

    size_t size() const {
        size_t n = 0;
        for (const auto& m : maps_) n += m.size();
        return n;
    }

    const UnitGrid& grid() const { return grid_; }

  private:
    double compute(const std::vector<BetaArm>& arms) const {
        auto f = best_arm_density_grid(arms, grid_);
        double acc = 0.0;
        for (size_t i = 0; i < grid_.size(); ++i)
            if (f[i] > 0.0) acc += grid_.w[i] * f[i] * std::log(f[i]);
        return acc;
    }

    static constexpr size_t kShards = 64;
    UnitGrid grid_;
    std::mutex locks_[kShards];
    std::unordered_map<std::pair<uint64_t, uint64_t>, double, OrbitKeyHash> maps_[kShards];
};

// P(arm is best) is permutation-equivariant, so values are stored for the
// sorted state and unsorted queries are answered through the permutation.
class SharedProbBestMemo {
  public:
    explicit SharedProbBestMemo(int grid_points = 1025) : grid_(grid_points) {}

    std::vector<double> eval(const std::vector<BetaArm>& arms) {
        const size_t K = arms.size();
        std::vector<size_t> order(K);
        std::iota(order.begin(), order.end(), 0);
        std::vector<uint64_t> packed(K, 0);
        bool keyable = K <= 4;
        for (size_t a = 0; a < K && keyable; ++a) {
            if (!is_integral_value(arms[a].alpha) || !is_integral_value(arms[a].beta) ||
                arms[a].alpha >= 65536 || arms[a].beta >= 65536) {
                keyable = false;
                break;
            }
            packed[a] = (static_cast<uint64_t>(arms[a].alpha) << 16) |
                        static_cast<uint64_t>(arms[a].beta);
        }
        if (!keyable) return prob_best_grid(arms, grid_);

        std::sort(order.begin(), order.end(),
                  [&](size_t i, size_t j) { return packed[i] < packed[j]; });
        std::vector<BetaArm> sorted(K);
        std::pair<uint64_t, uint64_t> k{0, 0};
        for (size_t i = 0; i < K; ++i) {
            sorted[i] = arms[order[i]];
            uint64_t p = packed[order[i]];
            if (i < 2) k.first = (k.first << 32) | p;
            else k.second = (k.second << 32) | p;
        }
        size_t shard = OrbitKeyHash{}(k) % kShards;
        std::vector<double> sorted_probs;
        bool found = false;
        {
            std::lock_guard<std::mutex> lock(locks_[shard]);
            auto it = maps_[shard].find(k);
            if (it != maps_[shard].end()) {
                sorted_probs = it->second;
                found = true;
            }
        }
        if (!found) {
            sorted_probs = prob_best_grid(sorted, grid_);
            std::lock_guard<std::mutex> lock(locks_[shard]);
            maps_[shard].emplace(k, sorted_probs);
        }
        std::vector<double> out(K);
        for (size_t i = 0; i < K; ++i) out[order[i]] = sorted_probs[i];
        return out;
    }

  private:
    static constexpr size_t kShards = 64;
    UnitGrid grid_;
    std::mutex locks_[kShards];
    std::unordered_map<std::pair<uint64_t, uint64_t>, std::vector<double>, OrbitKeyHash>
        maps_[kShards];
};

// ---------------------------------------------------------------------------
// Best-arm entropy study (no control arm, binary outcomes, uniform priors)
// ---------------------------------------------------------------------------

// Bayes-optimal root value E_{d*}[u(Sigma_T)] for the negative best-arm
// entropy metric.
inline double bi_root_best_arm(int n_arms, int T, SharedEntropyMemo& memo, BiOptions opts = {}) {
    std::vector<double> pseudo(2 * n_arms, 1.0);
    auto terminal = [&](const std::vector<int>& c) {
        std::vector<BetaArm> arms(n_arms);
        for (int a = 0; a < n_arms; ++a)
            arms[a] = BetaArm{1.0 + c[2 * a], 1.0 + c[2 * a + 1]};
        return memo.eval(arms);
    };
    return backward_induction(n_arms, 2, pseudo, T, terminal, opts).root_value;
}

// Expected terminal utility of a policy under the prior (theta drawn from
// independent uniforms per simulation), priced on the same entropy memo.
inline double simulate_best_arm_expected_u(int n_arms, int T, PolicyKind kind, double h,
                                           int64_t n_sims, uint64_t seed, int threads,
                                           SharedEntropyMemo& memo, SharedProbBestMemo& pbest) {
    std::atomic<int64_t> next{0};
    std::vector<double> partial(std::max(1, threads), 0.0);
    auto work = [&](int wid) {
        double acc = 0.0;
        PolicySpec spec;
        spec.kind = kind;
        for (;;) {
            int64_t i = next.fetch_add(1);
            if (i >= n_sims) break;
            RngStream prior(seed, i, Sub::PriorDraw);
            RngStream assign(seed, i, Sub::Assignment);
            RngStream outcomes(seed, i, Sub::Outcome);
            std::vector<double> theta(n_arms);
            for (auto& t : theta) t = prior.u01();
            TrialHistory hist = fresh_best_arm(n_arms);
            for (int t = 0; t < T; ++t) {
                std::vector<double> probs;
                switch (kind) {
                    case PolicyKind::BUD: {
                        auto arms = hist.beta_arms();
                        double u_base = memo.eval(arms);
                        GainVector gains(n_arms);
                        for (int a = 0; a < n_arms; ++a) {
                            auto tmp = arms;
                            tmp[a] = arms[a].updated(true);
                            double u1 = memo.eval(tmp);
                            tmp[a] = arms[a].updated(false);
                            double u0 = memo.eval(tmp);
                            double p = arms[a].mean();
                            gains[a] = std::max(0.0, p * u1 + (1 - p) * u0 - u_base);
                        }
                        probs = bud_probabilities(gains, h);
                        break;
                    }
                    case PolicyKind::ThompsonBest: probs = pbest.eval(hist.beta_arms()); break;
                    case PolicyKind::BR:
                        probs.assign(n_arms, 1.0 / n_arms);
                        break;
                    case PolicyKind::RPW: {
                        UnitGrid dummy(3);
                        probs = comparator_probabilities(hist, spec, T, dummy);
                        break;
                    }
                    default: throw config_error("bi study: unsupported policy");
                }
                size_t arm = select_action(probs, assign);
                hist.record(arm, Outcome::binary(outcomes.bernoulli(theta[arm])));
            }
            acc += memo.eval(hist.beta_arms());
        }
        partial[wid] += acc;
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::max(1, threads); ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n_sims);
}

// ---------------------------------------------------------------------------
// Co-primary study (control + K experimental arms, Dirichlet outcomes)
// ---------------------------------------------------------------------------

inline double bi_root_coprimary(int n_experimental, int T, double w, double beta_exp,
                                FrozenPairJointEval& joint, BiOptions opts = {}) {
    int arms = n_experimental + 1;
    std::vector<double> pseudo(static_cast<size_t>(arms) * 4, 1.0);
    auto terminal = [&](const std::vector<int>& c) {
        return coprimary_utility_from_counts(c, arms, w, beta_exp, joint);
    };
    return backward_induction(arms, 4, pseudo, T, terminal, opts).root_value;
}

inline double simulate_coprimary_expected_u(int n_experimental, int T, PolicyKind kind, double h,
                                            double w, double beta_exp, int64_t n_sims,
                                            uint64_t seed, int threads,
                                            FrozenPairJointEval& joint) {
    const int arms = n_experimental + 1;
    std::atomic<int64_t> next{0};
    std::vector<double> partial(std::max(1, threads), 0.0);
    auto utility = [&](const TrialHistory& hist) {
        std::vector<int> counts(static_cast<size_t>(arms) * 4, 0);
        for (int a = 0; a < arms; ++a) {
            const auto& d = std::get<DirichletArm>(hist.arms[a]);
            for (int y = 0; y < 4; ++y)
                counts[a * 4 + y] = static_cast<int>(d.counts[y] - 1.0);
        }
        return coprimary_utility_from_counts(counts, arms, w, beta_exp, joint);
    };
    auto work = [&](int wid) {
        double acc = 0.0;
        for (;;) {
            int64_t i = next.fetch_add(1);
            if (i >= n_sims) break;
            RngStream prior(seed, i, Sub::PriorDraw);
            RngStream assign(seed, i, Sub::Assignment);
            RngStream outcomes(seed, i, Sub::Outcome);
            std::vector<std::vector<double>> truth(arms);
            std::vector<double> flat{1, 1, 1, 1};
            for (auto& t : truth) prior.dirichlet(flat, t);
            TrialHistory hist = fresh_coprimary(n_experimental);
            for (int t = 0; t < T; ++t) {
                std::vector<double> probs;
                if (kind == PolicyKind::BUD) {
                    double u_base = utility(hist);
                    GainVector gains(arms);
                    for (int a = 0; a < arms; ++a) {
                        const auto& d = std::get<DirichletArm>(hist.arms[a]);
                        double expected = 0.0;
                        for (int y = 0; y < 4; ++y) {
                            TrialHistory tmp = hist;
                            std::get<DirichletArm>(tmp.arms[a]) = d.updated(y);
                            expected += d.cell_mean(y) * utility(tmp);
                        }
                        gains[a] = std::max(0.0, expected - u_base);
                    }
                    probs = bud_probabilities(gains, h);
                } else if (kind == PolicyKind::BR) {
                    probs.assign(arms, 1.0 / arms);
                } else {
                    throw config_error("co-primary bi study compares BUD and BR");
                }
                size_t arm = select_action(probs, assign);
                hist.record(arm, Outcome::cell(static_cast<int>(outcomes.categorical(truth[arm]))));
            }
            acc += utility(hist);
        }
        partial[wid] += acc;
    };
    std::vector<std::thread> pool;
    for (int w0 = 0; w0 < std::max(1, threads); ++w0) pool.emplace_back(work, w0);
    for (auto& th : pool) th.join();
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n_sims);
}

}  // namespace bud
