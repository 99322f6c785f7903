#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "bud/metric.hpp"
#include "bud/posterior.hpp"
#include "bud/rng.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Frozen-pair memo
//
// P(gamma_1 > 0 and gamma_2 > 0) depends only on the (arm, control) count
// pair.  Each pair is estimated once by MC with a seed frozen from its counts,
// so backward induction and policy simulation see the same perturbed utility
// and regret differences stay internally consistent.  Keys are canonicalized
// under the simultaneous endpoint swap of both arms.
// ---------------------------------------------------------------------------

class FrozenPairJointEval : public CoprimaryJointEval {
  public:
    explicit FrozenPairJointEval(int64_t draws = 16384, uint64_t seed = 0xC0FFEE)
        : draws_(draws), seed_(seed) {}

    double prob_both(const DirichletArm& arm, const DirichletArm& ctrl) override {
        uint64_t key = pair_key(arm, ctrl);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = memo_.find(key);
            if (it != memo_.end()) return it->second;
        }
        double v = compute(arm, ctrl, key);
        std::lock_guard<std::mutex> lock(mu_);
        memo_.emplace(key, v);
        return v;
    }

    // Fill the memo for every pair with n_arm + n_ctrl <= horizon (integer
    // counts over the unit prior).  After warming, lookups never insert.
    void precompute(int horizon, int threads) {
        std::vector<uint64_t> keys;
        std::vector<std::pair<DirichletArm, DirichletArm>> pairs;
        std::array<int, 4> ca{}, cc{};
        enumerate(horizon, ca, cc, keys, pairs);
        std::vector<double> values(pairs.size());
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(16);
                if (i >= pairs.size()) return;
                for (size_t j = i; j < std::min(pairs.size(), i + 16); ++j)
                    values[j] = compute(pairs[j].first, pairs[j].second, keys[j]);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < std::max(1, threads); ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        std::lock_guard<std::mutex> lock(mu_);
        for (size_t j = 0; j < pairs.size(); ++j) memo_.emplace(keys[j], values[j]);
    }

    size_t size() const { return memo_.size(); }
    int64_t draws() const { return draws_; }

  private:
    static uint64_t raw_key(const DirichletArm& arm, const DirichletArm& ctrl) {
        uint64_t k = 0;
        for (double c : arm.counts) k = (k << 8) | static_cast<uint64_t>(c - 1.0);
        for (double c : ctrl.counts) k = (k << 8) | static_cast<uint64_t>(c - 1.0);
        return k;
    }

    static DirichletArm swapped(const DirichletArm& d) {
        DirichletArm out = d;
        std::swap(out.counts[DirichletArm::kFirstOnly], out.counts[DirichletArm::kSecondOnly]);
        return out;
    }

    static uint64_t pair_key(const DirichletArm& arm, const DirichletArm& ctrl) {
        return std::min(raw_key(arm, ctrl), raw_key(swapped(arm), swapped(ctrl)));
    }

    double compute(const DirichletArm& arm_in, const DirichletArm& ctrl_in, uint64_t key) const {
        // evaluate on the canonical orientation so both orientations agree
        DirichletArm arm = arm_in, ctrl = ctrl_in;
        if (raw_key(arm, ctrl) != key) {
            arm = swapped(arm);
            ctrl = swapped(ctrl);
        }
        RngStream rng(seed_ ^ key, 0, Sub::MetricMc);
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

    void enumerate(int horizon, std::array<int, 4>& ca, std::array<int, 4>& cc,
                   std::vector<uint64_t>& keys,
                   std::vector<std::pair<DirichletArm, DirichletArm>>& pairs) const {
        // iterate over all count 4-tuples for arm and control within budget
        std::unordered_map<uint64_t, bool> seen;
        std::function<void(int, int, int)> rec_c = [&](int cell, int used_a, int used_c) {
            if (cell == 3) {
                for (int last = 0; used_a + used_c + last <= horizon; ++last) {
                    cc[3] = last;
                    DirichletArm a, c;
                    for (int i = 0; i < 4; ++i) {
                        a.counts[i] = 1.0 + ca[i];
                        c.counts[i] = 1.0 + cc[i];
                    }
                    uint64_t key = pair_key(a, c);
                    if (seen.emplace(key, true).second) {
                        keys.push_back(key);
                        pairs.emplace_back(a, c);
                    }
                }
                return;
            }
            for (int v = 0; used_a + used_c + v <= horizon; ++v) {
                cc[cell] = v;
                rec_c(cell + 1, used_a, used_c + v);
            }
        };
        std::function<void(int, int)> rec_a = [&](int cell, int used) {
            if (cell == 4) {
                rec_c(0, used, 0);
                return;
            }
            for (int v = 0; used + v <= horizon; ++v) {
                ca[cell] = v;
                rec_a(cell + 1, used + v);
            }
        };
        rec_a(0, 0);
    }

    int64_t draws_;
    uint64_t seed_;
    mutable std::mutex mu_;
    std::unordered_map<uint64_t, double> memo_;
};

// ---------------------------------------------------------------------------
// Common-random-number bank engine for long trials
//
// Per-arm draw banks from the current Dirichlet posteriors with cached
// survival grids.  A queried state equal to a bank is answered from the grid;
// a state one observation ahead is answered by importance reweighting the
// same draws, so gain comparisons across arms share one set of draws.
// ---------------------------------------------------------------------------

class CrnBankJointEval : public CoprimaryJointEval {
  public:
    CrnBankJointEval(int64_t draws, uint64_t master_seed, uint64_t replication, int grid = 256)
        : draws_(draws), grid_(grid), master_(master_seed), rep_(replication) {}

    // Refresh banks to the trial's current arm states (one rebuild per
    // assignment); candidate look-aheads are then served by reweighting.
    void sync(const std::vector<DirichletArm>& arms) {
        for (const auto& d : arms) {
            bool found = false;
            for (auto& b : banks_)
                if (b.base_counts == d.counts) {
                    found = true;
                    break;
                }
            if (!found) rebuild(d);
        }
    }

    double prob_both(const DirichletArm& arm, const DirichletArm& ctrl) override {
        Bank& ba = bank_for(arm);
        Bank& bc = bank_for(ctrl);
        bool arm_shift = ba.shift_cell >= 0;
        bool ctrl_shift = bc.shift_cell >= 0;

        if (!ctrl_shift && !arm_shift) return survival_average(ba, bc, nullptr);
        if (ctrl_shift && !arm_shift) {
            // reweight the control draws; the arm grid stays cached
            return survival_average(ba, bc, &bc);
        }
        // arm side shifted: rebuild a weighted survival on the fly
        std::vector<double> wgrid;
        weighted_survival(ba, wgrid);
        return survival_average_grid(wgrid, bc, ctrl_shift ? &bc : nullptr);
    }

  private:
    struct Bank {
        std::array<double, 4> base_counts{};  // posterior counts the draws came from
        int shift_cell = -1;                  // query state = base + e_cell (importance mode)
        std::vector<float> nu1, nu2;          // marginal coordinates per draw
        std::vector<float> theta_draws;       // full 4-cell draws (importance weights)
        std::vector<float> theta_cell;        // active shift-cell weights
        std::vector<double> surv;             // unweighted survival grid
        uint64_t stamp = 0;
    };

    // find (or build) the bank whose base matches the queried counts exactly
    // or lags it by one observation in a single cell
    Bank& bank_for(const DirichletArm& d) {
        for (auto& b : banks_) {
            if (b.base_counts == d.counts) {
                b.shift_cell = -1;
                return b;
            }
        }
        for (auto& b : banks_) {
            int shift = -1;
            bool ok = true;
            for (int y = 0; y < 4 && ok; ++y) {
                double diff = d.counts[y] - b.base_counts[y];
                if (diff == 0.0) continue;
                if (diff == 1.0 && shift < 0) shift = y;
                else ok = false;
            }
            if (ok && shift >= 0) {
                b.shift_cell = shift;
                fill_shift_weights(b, shift);
                return b;
            }
        }
        return rebuild(d);
    }

    Bank& rebuild(const DirichletArm& d) {
        // reuse the stalest slot
        if (banks_.size() < 8) banks_.emplace_back();
        Bank* victim = &banks_[0];
        for (auto& b : banks_)
            if (b.stamp < victim->stamp) victim = &b;
        Bank& b = *victim;
        b.base_counts = d.counts;
        b.shift_cell = -1;
        b.stamp = ++clock_;
        b.nu1.resize(draws_);
        b.nu2.resize(draws_);
        b.theta_cell.assign(draws_, 0.0f);

        uint64_t h = master_ ^ (rep_ * 0x9E3779B97F4A7C15ull);
        for (double c : d.counts) h = h * 0x100000001B3ull + static_cast<uint64_t>(c * 4.0);
        RngStream rng(h, rep_, Sub::MetricMc);
        std::vector<double> alpha(d.counts.begin(), d.counts.end()), th;
        b.theta_draws.assign(static_cast<size_t>(draws_) * 4, 0.0f);
        for (int64_t i = 0; i < draws_; ++i) {
            rng.dirichlet(alpha, th);
            b.nu1[i] = static_cast<float>(th[0] + th[1]);
            b.nu2[i] = static_cast<float>(th[0] + th[2]);
            for (int y = 0; y < 4; ++y)
                b.theta_draws[static_cast<size_t>(i) * 4 + y] = static_cast<float>(th[y]);
        }
        build_survival(b);
        return b;
    }

    void fill_shift_weights(Bank& b, int cell) {
        for (int64_t i = 0; i < draws_; ++i)
            b.theta_cell[i] = b.theta_draws[static_cast<size_t>(i) * 4 + cell];
    }

    void build_survival(Bank& b) {
        const int G = grid_;
        std::vector<double> hist(static_cast<size_t>(G) * G, 0.0);
        for (int64_t i = 0; i < draws_; ++i) {
            int u = std::min(G - 1, static_cast<int>(b.nu1[i] * G));
            int v = std::min(G - 1, static_cast<int>(b.nu2[i] * G));
            hist[static_cast<size_t>(u) * G + v] += 1.0;
        }
        b.surv.assign(static_cast<size_t>(G) * G, 0.0);
        for (int u = G - 1; u >= 0; --u)
            for (int v = G - 1; v >= 0; --v) {
                double s = hist[static_cast<size_t>(u) * G + v];
                if (u + 1 < G) s += b.surv[static_cast<size_t>(u + 1) * G + v];
                if (v + 1 < G) s += b.surv[static_cast<size_t>(u) * G + v + 1];
                if (u + 1 < G && v + 1 < G) s -= b.surv[static_cast<size_t>(u + 1) * G + v + 1];
                b.surv[static_cast<size_t>(u) * G + v] = s;
            }
        for (auto& s : b.surv) s /= static_cast<double>(draws_);
    }

    // weighted survival of an arm bank whose query state is base + e_cell
    void weighted_survival(Bank& b, std::vector<double>& out) const {
        const int G = grid_;
        std::vector<double> hist(static_cast<size_t>(G) * G, 0.0);
        double total = 0.0;
        for (int64_t i = 0; i < draws_; ++i) {
            double w = b.theta_cell[i];
            total += w;
            int u = std::min(G - 1, static_cast<int>(b.nu1[i] * G));
            int v = std::min(G - 1, static_cast<int>(b.nu2[i] * G));
            hist[static_cast<size_t>(u) * G + v] += w;
        }
        out.assign(static_cast<size_t>(G) * G, 0.0);
        for (int u = G - 1; u >= 0; --u)
            for (int v = G - 1; v >= 0; --v) {
                double s = hist[static_cast<size_t>(u) * G + v];
                if (u + 1 < G) s += out[static_cast<size_t>(u + 1) * G + v];
                if (v + 1 < G) s += out[static_cast<size_t>(u) * G + v + 1];
                if (u + 1 < G && v + 1 < G) s -= out[static_cast<size_t>(u + 1) * G + v + 1];
                out[static_cast<size_t>(u) * G + v] = s;
            }
        for (auto& s : out) s /= std::max(total, 1e-300);
    }

    double survival_average(const Bank& arm, const Bank& ctrl, const Bank* ctrl_weighted) const {
        const int G = grid_;
        double num = 0.0, den = 0.0;
        for (int64_t j = 0; j < draws_; ++j) {
            double w = 1.0;
            if (ctrl_weighted) w = ctrl_weighted->theta_cell[j];
            int u = std::min(G - 1, static_cast<int>(ctrl.nu1[j] * G));
            int v = std::min(G - 1, static_cast<int>(ctrl.nu2[j] * G));
            num += w * arm.surv[static_cast<size_t>(u) * G + v];
            den += w;
        }
        return num / std::max(den, 1e-300);
    }

    double survival_average_grid(const std::vector<double>& surv, const Bank& ctrl,
                                 const Bank* ctrl_weighted) const {
        const int G = grid_;
        double num = 0.0, den = 0.0;
        for (int64_t j = 0; j < draws_; ++j) {
            double w = 1.0;
            if (ctrl_weighted) w = ctrl_weighted->theta_cell[j];
            int u = std::min(G - 1, static_cast<int>(ctrl.nu1[j] * G));
            int v = std::min(G - 1, static_cast<int>(ctrl.nu2[j] * G));
            num += w * surv[static_cast<size_t>(u) * G + v];
            den += w;
        }
        return num / std::max(den, 1e-300);
    }

    int64_t draws_;
    int grid_;
    uint64_t master_, rep_;
    uint64_t clock_ = 0;
    std::vector<Bank> banks_;
};

// Information measure on raw lattice counts (arm cells appended after the
// control cells), shared by the dynamic program and its policy simulations.
inline double coprimary_utility_from_counts(const std::vector<int>& counts, int n_arms, double w,
                                            double beta_exp, CoprimaryJointEval& joint) {
    DirichletArm ctrl;
    for (int y = 0; y < 4; ++y) ctrl.counts[y] = 1.0 + counts[y];
    double u = 0.0;
    for (int a = 1; a < n_arms; ++a) {
        DirichletArm arm;
        for (int y = 0; y < 4; ++y) arm.counts[y] = 1.0 + counts[a * 4 + y];
        auto pa1 = arm.marginal_params(1), pc1 = ctrl.marginal_params(1);
        auto pa2 = arm.marginal_params(2), pc2 = ctrl.marginal_params(2);
        double p1 = prob_greater(BetaArm{pa1[0], pa1[1]}, BetaArm{pc1[0], pc1[1]});
        double p2 = prob_greater(BetaArm{pa2[0], pa2[1]}, BetaArm{pc2[0], pc2[1]});
        double pe = joint.prob_both(arm, ctrl);
        u -= asym_entropy(pe, beta_exp) +
             w * (asym_entropy(p1, beta_exp) + asym_entropy(p2, beta_exp));
    }
    return u;
}

}  // namespace bud
