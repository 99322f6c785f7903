#pragma once

#include <array>
#include <boost/math/special_functions/beta.hpp>
#include <cstdint>
#include <memory>
#include <vector>

#include "bud/metric.hpp"
#include "bud/policy.hpp"
#include "bud/posterior.hpp"
#include "bud/quad.hpp"
#include "bud/rng.hpp"
#include "bud/special.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BiomarkerConfig {
    int n_biomarkers = 4;                  // B
    int n_experimental = 4;                // K
    std::vector<int> targets;              // b_a for a = 1..K (1-based biomarker index)
    std::vector<double> prevalences;       // per biomarker
    double pi = 0.5;                       // P(E_{1,a} = 1)
    double lambda = 0.5;                   // P(E_{0,a} = 1 | E_{1,a} = 1)

    int n_profiles() const { return 1 << n_biomarkers; }
    int n_arms() const { return n_experimental + 1; }

    void validate() const {
        require(n_biomarkers >= 1 && n_biomarkers <= 8, "biomarker: B out of range");
        require(n_experimental >= 1 && n_experimental <= 8, "biomarker: K out of range");
        require(static_cast<int>(targets.size()) == n_experimental,
                "biomarker: need one target per experimental arm");
        for (int b : targets)
            require(b >= 1 && b <= n_biomarkers, "biomarker: target map b_a out of range");
        require(static_cast<int>(prevalences.size()) == n_biomarkers,
                "biomarker: need one prevalence per biomarker");
        for (double p : prevalences)
            require(is_probability(p), "biomarker: prevalence outside [0,1]");
        require(is_probability(pi) && is_probability(lambda),
                "biomarker: pi and lambda must be probabilities");
    }
};

// Per-arm prior over the indicator configuration (E1, E0): the (0,1)
// configuration is impossible by construction.
inline std::array<double, 3> prior_config_distribution(double pi, double lambda) {
    require(is_probability(pi) && is_probability(lambda),
            "prior_config_distribution: pi, lambda in [0,1]");
    return {1.0 - pi, pi * (1.0 - lambda), pi * lambda};
}

// ---------------------------------------------------------------------------
// Sufficient statistics
// ---------------------------------------------------------------------------

// Beta(1,1) cells per (profile, arm), with assignment tallies used for
// reporting.  Arm 0 is the control.
struct SubgroupBank {
    int B = 0, K = 0;
    std::vector<int> succ, fail;              // cell (x, a) = x * (K+1) + a
    int64_t t = 0;
    std::vector<int64_t> arm_counts;          // per arm
    std::vector<int64_t> stratum_counts;      // (biomarker l, arm): X_l = 1 patients

    SubgroupBank() = default;
    SubgroupBank(int n_biomarkers, int n_experimental) : B(n_biomarkers), K(n_experimental) {
        int cells = (1 << B) * (K + 1);
        succ.assign(cells, 0);
        fail.assign(cells, 0);
        arm_counts.assign(K + 1, 0);
        stratum_counts.assign(static_cast<size_t>(B) * (K + 1), 0);
    }

    int cell(int profile, int arm) const { return profile * (K + 1) + arm; }

    void record(int profile, int arm, bool response) {
        int i = cell(profile, arm);
        (response ? succ[i] : fail[i])++;
        ++arm_counts[arm];
        ++t;
        for (int l = 0; l < B; ++l)
            if ((profile >> l) & 1) ++stratum_counts[static_cast<size_t>(l) * (K + 1) + arm];
    }

    BetaArm cell_arm(int profile, int arm) const {
        int i = cell(profile, arm);
        return BetaArm{1.0 + succ[i], 1.0 + fail[i]};
    }
    int cell_n(int profile, int arm) const {
        int i = cell(profile, arm);
        return succ[i] + fail[i];
    }
};

struct IndicatorProbs {
    // per experimental arm (index 0 = arm 1)
    std::vector<double> p_e1;     // P(E_{1,a} = 1 | Sigma)
    std::vector<double> p_e0;     // P(E_{0,a} = 1 | Sigma)
    std::vector<double> p_union;  // P(E_{1,a} = 1 or E_{0,a} = 1 | Sigma)
    double ess = 0.0;             // effective draws behind an MC estimate
    uint64_t mc_seed = 0;
};

// ---------------------------------------------------------------------------
// Shared, data-independent tables
//
// Joint indicator configurations couple the arms through the shared control
// cells.  Everything here follows from one identity: conditional on the
// control cells, per-arm configuration probabilities are products over
// profiles of incomplete-beta factors, so any weighted configuration sum
// expands into 4^K monomials whose expectations factor into per-profile
// one-dimensional integrals.
// ---------------------------------------------------------------------------

class BiomarkerTables {
  public:
    explicit BiomarkerTables(const BiomarkerConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        const int K = cfg.n_experimental;
        n_monomials_ = 1 << (2 * K);  // per arm: bit0 = A factor, bit1 = B factor
        n_joint_ = 1;
        for (int a = 0; a < K; ++a) n_joint_ *= 4;

        // positive-profile sets
        pos_mask_.assign(cfg.n_profiles(), 0);
        for (int x = 0; x < cfg.n_profiles(); ++x)
            for (int a = 0; a < K; ++a)
                if ((x >> (cfg.targets[a] - 1)) & 1) pos_mask_[x] |= (1u << a);

        // subset_of[M][x]: arms whose active factor involves profile x
        subset_of_.assign(static_cast<size_t>(n_monomials_) * cfg.n_profiles(), 0);
        for (int M = 0; M < n_monomials_; ++M)
            for (int x = 0; x < cfg.n_profiles(); ++x) {
                uint8_t s = 0;
                for (int a = 0; a < K; ++a) {
                    bool hasA = (M >> (2 * a)) & 1, hasB = (M >> (2 * a + 1)) & 1;
                    bool positive = (pos_mask_[x] >> a) & 1;
                    if ((positive && hasA) || (!positive && hasB)) s |= (1u << a);
                }
                subset_of_[static_cast<size_t>(M) * cfg.n_profiles() + x] = s;
            }

        compute_flat_masses();
        compute_weights_and_kappas();
    }

    const BiomarkerConfig& config() const { return cfg_; }
    int n_monomials() const { return n_monomials_; }
    int n_joint_configs() const { return n_joint_; }
    uint8_t subset_of(int M, int x) const {
        return subset_of_[static_cast<size_t>(M) * cfg_.n_profiles() + x];
    }
    double flat_mass(int joint) const { return flat_mass_[joint]; }
    double weight(int joint) const { return weight_[joint]; }
    // kappa vectors: index 0 = normalizer, then per arm (E1, E0, not-none)
    int n_kappa() const { return 1 + 3 * cfg_.n_experimental; }
    const std::vector<double>& kappa(int which) const { return kappa_[which]; }

    static int kappa_e1(int arm0) { return 1 + 3 * arm0; }
    static int kappa_e0(int arm0) { return 2 + 3 * arm0; }
    static int kappa_not_none(int arm0) { return 3 + 3 * arm0; }

    // coefficient of monomial m in P(config | control), m in {1, A, B, AB}
    static double config_coef(int config, int m) {
        static constexpr double table[4][4] = {
            // 1     A     B     AB        (config = E1*2 + E0)
            {0.0, 0.0, 0.0, 1.0},    // (0,0) = A B
            {0.0, 1.0, 0.0, -1.0},   // (0,1) = A (1-B)
            {0.0, 0.0, 1.0, -1.0},   // (1,0) = (1-A) B
            {1.0, -1.0, -1.0, 1.0},  // (1,1) = (1-A)(1-B)
        };
        return table[config][m];
    }

    // Monte Carlo estimate of the flat-prior region masses over the 4^K joint
    // classifications (the estimator named in the module contract; the exact
    // values back the engine).
    std::vector<double> flat_masses_mc(int64_t draws, uint64_t seed) const {
        const int K = cfg_.n_experimental, P = cfg_.n_profiles();
        std::vector<double> counts(n_joint_, 0.0);
        RngStream rng(seed, 0, Sub::PriorDraw);
        std::vector<double> ctrl(P), arm(P);
        for (int64_t i = 0; i < draws; ++i) {
            for (int x = 0; x < P; ++x) ctrl[x] = rng.u01();
            int joint = 0, base = 1;
            for (int a = 0; a < K; ++a) {
                bool e1 = false, e0 = false;
                for (int x = 0; x < P; ++x) {
                    double th = rng.u01();
                    if (th > ctrl[x]) ((pos_mask_[x] >> a) & 1 ? e1 : e0) = true;
                }
                joint += base * (2 * (e1 ? 1 : 0) + (e0 ? 1 : 0));
                base *= 4;
            }
            counts[joint] += 1.0;
        }
        for (double& c : counts) c /= static_cast<double>(draws);
        return counts;
    }

  private:
    // flat-prior value(M) = prod_x 1 / (|S_M(x)| + 1)
    double flat_value(int M) const {
        double v = 1.0;
        for (int x = 0; x < cfg_.n_profiles(); ++x)
            v /= 1.0 + __builtin_popcount(subset_of(M, x));
        return v;
    }

    void compute_flat_masses() {
        flat_mass_.assign(n_joint_, 0.0);
        const int K = cfg_.n_experimental;
        std::vector<double> fv(n_monomials_);
        for (int M = 0; M < n_monomials_; ++M) fv[M] = flat_value(M);
        for (int joint = 0; joint < n_joint_; ++joint) {
            double z = 0.0;
            for (int M = 0; M < n_monomials_; ++M) {
                double coef = 1.0;
                int j = joint;
                for (int a = 0; a < K && coef != 0.0; ++a) {
                    coef *= config_coef(j % 4, (M >> (2 * a)) & 3);
                    j /= 4;
                }
                if (coef != 0.0) z += coef * fv[M];
            }
            flat_mass_[joint] = std::max(0.0, z);
        }
    }

    void compute_weights_and_kappas() {
        const int K = cfg_.n_experimental;
        auto prior3 = prior_config_distribution(cfg_.pi, cfg_.lambda);
        // prior over the 4 per-arm configs; (0,1) impossible
        std::array<double, 4> prior4{prior3[0], 0.0, prior3[1], prior3[2]};

        weight_.assign(n_joint_, 0.0);
        for (int joint = 0; joint < n_joint_; ++joint) {
            double p = 1.0;
            int j = joint;
            for (int a = 0; a < K; ++a) {
                p *= prior4[j % 4];
                j /= 4;
            }
            if (p > 0.0) {
                require(flat_mass_[joint] > 0.0, "biomarker: empty region with prior mass");
                weight_[joint] = p / flat_mass_[joint];
            }
        }

        kappa_.assign(n_kappa(), std::vector<double>(n_monomials_, 0.0));
        for (int joint = 0; joint < n_joint_; ++joint) {
            if (weight_[joint] == 0.0) continue;
            std::array<int, 8> conf{};
            int j = joint;
            for (int a = 0; a < K; ++a) {
                conf[a] = j % 4;
                j /= 4;
            }
            // distribute W * prod_a coef over the monomials
            distribute(joint, conf, 0, 0, weight_[joint]);
        }
    }

    void distribute(int joint, const std::array<int, 8>& conf, int a, int M, double coef) {
        const int K = cfg_.n_experimental;
        if (coef == 0.0) return;
        if (a == K) {
            kappa_[0][M] += coef;
            for (int arm = 0; arm < K; ++arm) {
                int c = conf[arm];
                if (c >= 2) kappa_[kappa_e1(arm)][M] += coef;       // E1 = 1
                if (c == 3) kappa_[kappa_e0(arm)][M] += coef;       // E0 = 1 (and E1 = 1)
                if (c != 0) kappa_[kappa_not_none(arm)][M] += coef; // union
            }
            return;
        }
        for (int m = 0; m < 4; ++m) {
            double c = config_coef(conf[a], m);
            if (c != 0.0) distribute(joint, conf, a + 1, M | (m << (2 * a)), coef * c);
        }
    }

    BiomarkerConfig cfg_;
    int n_monomials_ = 0;
    int n_joint_ = 0;
    std::vector<uint8_t> pos_mask_;   // per profile: arms targeting it positively
    std::vector<uint8_t> subset_of_;
    std::vector<double> flat_mass_;
    std::vector<double> weight_;
    std::vector<std::vector<double>> kappa_;
};

// ---------------------------------------------------------------------------
// Exact per-replication engine
// ---------------------------------------------------------------------------

// Evaluates indicator probabilities, the information measure and the
// profile-conditional gains for one trial in closed form: per-profile
// Gauss-Legendre integrals are exact for the polynomial integrands, with node
// tables cached per cell and refreshed only when the cell changes.
class BiomarkerEngine {
  public:
    explicit BiomarkerEngine(std::shared_ptr<const BiomarkerTables> tables)
        : tables_(std::move(tables)),
          bank_(tables_->config().n_biomarkers, tables_->config().n_experimental) {
        const int P = tables_->config().n_profiles();
        prof_.resize(P);
        for (int x = 0; x < P; ++x) refresh_profile(x);
    }

    const SubgroupBank& bank() const { return bank_; }
    const BiomarkerConfig& config() const { return tables_->config(); }

    void record(int profile, int arm, bool response) {
        bank_.record(profile, arm, response);
        refresh_profile(profile, arm);
    }

    IndicatorProbs indicator_probs() const {
        std::vector<double> acc(tables_->n_kappa(), 0.0);
        accumulate(acc, -1, -1, false);
        return pack_probs(acc);
    }

    double utility(double w, double beta_exp) const {
        return utility_from(indicator_probs(), w, beta_exp);
    }

    double utility_from(const IndicatorProbs& p, double w, double beta_exp) const {
        double u = 0.0;
        for (size_t a = 0; a < p.p_e1.size(); ++a)
            u -= asym_entropy(p.p_union[a], beta_exp) +
                 w * (asym_entropy(p.p_e1[a], beta_exp) + asym_entropy(p.p_e0[a], beta_exp));
        return u;
    }

    // posterior predictive response probability for a patient with `profile`
    // on `arm`, under the constrained posterior
    double predictive_mean(int profile, int arm) const {
        std::vector<double> acc_num(tables_->n_kappa(), 0.0);
        accumulate(acc_num, profile, arm, true);
        std::vector<double> acc_den(tables_->n_kappa(), 0.0);
        accumulate(acc_den, -1, -1, false);
        return clamp01(acc_num[0] / acc_den[0]);
    }

    // expected one-step gains of the biomarker information measure for a
    // patient with the given profile, one entry per arm 0..K
    GainVector gains(int profile, double w, double beta_exp) const {
        const int A = config().n_arms();
        std::vector<double> acc_base(tables_->n_kappa(), 0.0);
        accumulate(acc_base, -1, -1, false);
        double u_base = utility_from(pack_probs(acc_base), w, beta_exp);
        GainVector g(A, 0.0);
        for (int a = 0; a < A; ++a) {
            std::vector<double> acc_num(tables_->n_kappa(), 0.0);
            accumulate(acc_num, profile, a, true);
            double phat = clamp01(acc_num[0] / acc_base[0]);
            double u1 = utility_with(profile, a, true, w, beta_exp);
            double u0 = utility_with(profile, a, false, w, beta_exp);
            g[a] = std::max(0.0, phat * u1 + (1.0 - phat) * u0 - u_base);
        }
        return g;
    }

    std::vector<double> allocation_probabilities(int profile, double h, double w,
                                                 double beta_exp) const {
        return bud_probabilities(gains(profile, w, beta_exp), h);
    }

    // utility after observing one extra (profile, arm, response)
    double utility_with(int profile, int arm, bool response, double w, double beta_exp) const {
        BiomarkerEngine& self = const_cast<BiomarkerEngine&>(*this);
        int i = bank_.cell(profile, arm);
        auto& tally = response ? self.bank_.succ : self.bank_.fail;
        ++tally[i];
        self.refresh_profile(profile, arm);
        double u = utility(w, beta_exp);
        --tally[i];
        self.refresh_profile(profile, arm);
        return u;
    }

  private:
    struct ProfileCache {
        int nodes = 0;
        bool transformed = false;  // quantile-scale rule for heavy-data cells
        std::vector<double> z;     // evaluation points
        std::vector<double> kw;    // kernel(z_i) * w_i of the control cell
        std::vector<double> kwz;   // z_i * kw_i
        std::vector<double> cdf;   // [arm0][node]: I_{z_i}(s+1, f+1)
        std::vector<double> pm;    // [arm0][node]: E[theta 1(theta <= z_i)]
        std::vector<double> J;     // [subset]: plain integrals
        std::vector<double> Jz;    // [subset]: z-weighted integrals
    };

    static int rule_size_for(int degree) {
        for (int m : {16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512})
            if (2 * m - 1 >= degree + 2) return m;
        return 0;  // beyond polynomial exactness: switch to the quantile transform
    }

    // Refresh the node tables of one profile.  `changed_arm` = -1 rebuilds
    // everything; otherwise only the affected rows are recomputed (a rule-size
    // change forces the full rebuild).
    void refresh_profile(int x, int changed_arm = -1) {
        const auto& cfg = config();
        const int K = cfg.n_experimental;
        ProfileCache& pc = prof_[x];
        int degree = bank_.cell_n(x, 0);
        for (int a = 1; a <= K; ++a) degree += bank_.cell_n(x, a) + 2;
        int want = rule_size_for(degree);
        bool transformed = want == 0;
        if (transformed) want = 512;
        if (want != pc.nodes || transformed != pc.transformed || changed_arm < 0) {
            pc.nodes = want;
            pc.transformed = transformed;
            changed_arm = -1;  // rebuild all rows on the new nodes
        }
        const GlRule& rule = gauss_legendre(pc.nodes);

        if (changed_arm <= 0) {
            BetaArm ctrl = bank_.cell_arm(x, 0);
            pc.z.resize(pc.nodes);
            pc.kw.resize(pc.nodes);
            pc.kwz.resize(pc.nodes);
            for (int i = 0; i < pc.nodes; ++i) {
                if (pc.transformed) {
                    // integrate in the control-quantile scale: exactness is
                    // lost but the kernel peak is always resolved
                    pc.z[i] = boost::math::ibeta_inv(ctrl.alpha, ctrl.beta, rule.nodes[i]);
                    pc.kw[i] = rule.weights[i];
                } else {
                    pc.z[i] = rule.nodes[i];
                    pc.kw[i] = rule.weights[i] * ctrl.pdf(pc.z[i]);
                }
                pc.kwz[i] = pc.z[i] * pc.kw[i];
            }
        }
        pc.cdf.resize(static_cast<size_t>(K) * pc.nodes);
        pc.pm.resize(static_cast<size_t>(K) * pc.nodes);
        for (int a = 1; a <= K; ++a) {
            if (changed_arm > 0 && a != changed_arm) continue;
            BetaArm arm = bank_.cell_arm(x, a);
            double mean = arm.mean();
            for (int i = 0; i < pc.nodes; ++i) {
                double z = pc.z[i];
                pc.cdf[(a - 1) * pc.nodes + i] = arm.cdf(z);
                pc.pm[(a - 1) * pc.nodes + i] = mean * beta_cdf(z, arm.alpha + 1.0, arm.beta);
            }
        }
        rebuild_subset_integrals(x);
    }

    void rebuild_subset_integrals(int x) {
        const int K = config().n_experimental;
        const int S = 1 << K;
        ProfileCache& pc = prof_[x];
        pc.J.assign(S, 0.0);
        pc.Jz.assign(S, 0.0);
        std::vector<double> prod(S);
        for (int i = 0; i < pc.nodes; ++i) {
            prod[0] = 1.0;
            for (int mask = 1; mask < S; ++mask) {
                int low = mask & (-mask);
                int a0 = __builtin_ctz(mask);
                prod[mask] = prod[mask ^ low] * pc.cdf[a0 * pc.nodes + i];
            }
            for (int mask = 0; mask < S; ++mask) {
                pc.J[mask] += pc.kw[i] * prod[mask];
                pc.Jz[mask] += pc.kwz[i] * prod[mask];
            }
        }
    }

    // Accumulate sum_M kappa^{(g)}_M * value(M) into acc for every kappa
    // vector.  With moment_profile >= 0 the value(M) products carry the
    // partial-moment factor for (moment_profile, moment_arm): arm 0 swaps in
    // the z-weighted kernel; an experimental arm swaps its cdf factor for the
    // partial moment (or multiplies by the cell mean when absent).
    void accumulate(std::vector<double>& acc, int moment_profile, int moment_arm,
                    bool moment) const {
        const auto& tb = *tables_;
        const auto& cfg = config();
        const int P = cfg.n_profiles();
        const int nM = tb.n_monomials();
        double cell_mean = 0.0;
        std::vector<double> Jmod;
        if (moment && moment_arm > 0) {
            cell_mean = bank_.cell_arm(moment_profile, moment_arm).mean();
            Jmod = moment_integrals(moment_profile, moment_arm);
        }
        for (int M = 0; M < nM; ++M) {
            double v = 1.0;
            for (int x = 0; x < P; ++x) {
                uint8_t s = tb.subset_of(M, x);
                if (moment && x == moment_profile) {
                    if (moment_arm == 0) {
                        v *= prof_[x].Jz[s];
                    } else if ((s >> (moment_arm - 1)) & 1) {
                        v *= Jmod[s];
                    } else {
                        v *= cell_mean * prof_[x].J[s];
                    }
                } else {
                    v *= prof_[x].J[s];
                }
                if (v == 0.0) break;
            }
            if (v == 0.0) continue;
            for (int kidx = 0; kidx < tb.n_kappa(); ++kidx) {
                double k = tb.kappa(kidx)[M];
                if (k != 0.0) acc[kidx] += k * v;
            }
        }
    }

    // subset integrals with arm `a`'s cdf factor replaced by its partial moment
    std::vector<double> moment_integrals(int x, int a) const {
        const int K = config().n_experimental;
        const int S = 1 << K;
        const ProfileCache& pc = prof_[x];
        std::vector<double> out(S, 0.0), prod(S);
        for (int i = 0; i < pc.nodes; ++i) {
            prod[0] = 1.0;
            for (int mask = 1; mask < S; ++mask) {
                int low = mask & (-mask);
                int a0 = __builtin_ctz(mask);
                double f = (a0 == a - 1) ? pc.pm[a0 * pc.nodes + i] : pc.cdf[a0 * pc.nodes + i];
                prod[mask] = prod[mask ^ low] * f;
            }
            for (int mask = 0; mask < S; ++mask) out[mask] += pc.kw[i] * prod[mask];
        }
        return out;
    }

    IndicatorProbs pack_probs(const std::vector<double>& acc) const {
        const int K = config().n_experimental;
        IndicatorProbs out;
        double denom = acc[0];
        require(denom > 0.0, "biomarker: vanishing posterior normalizer");
        for (int a = 0; a < K; ++a) {
            out.p_e1.push_back(clamp01(acc[BiomarkerTables::kappa_e1(a)] / denom));
            out.p_e0.push_back(clamp01(acc[BiomarkerTables::kappa_e0(a)] / denom));
            out.p_union.push_back(clamp01(acc[BiomarkerTables::kappa_not_none(a)] / denom));
        }
        return out;
    }

    std::shared_ptr<const BiomarkerTables> tables_;
    SubgroupBank bank_;
    std::vector<ProfileCache> prof_;
};

// ---------------------------------------------------------------------------
// Region-reweighting Monte Carlo estimator
// ---------------------------------------------------------------------------

// Draw theta from the unconstrained product-Beta posterior, classify each
// draw's joint indicator configuration and reweight by prior mass over flat
// region mass.  Antithetic pairs are formed through the inverse Beta cdf.
inline IndicatorProbs posterior_indicator_probs(const SubgroupBank& bank,
                                                const BiomarkerTables& tables, int64_t mc_draws,
                                                uint64_t seed, bool antithetic = true) {
    require(mc_draws >= 1024, "posterior_indicator_probs: need at least 1024 draws");
    const auto& cfg = tables.config();
    const int K = cfg.n_experimental, P = cfg.n_profiles();
    RngStream rng(seed, 1, Sub::MetricMc);

    std::vector<double> pos_subset(P, 0.0);
    std::vector<double> num_e1(K, 0.0), num_e0(K, 0.0), num_union(K, 0.0);
    double denom = 0.0, denom2 = 0.0;
    std::vector<double> u_ctrl(P), theta_ctrl(P), theta_arm(P);

    int64_t pairs = antithetic ? (mc_draws + 1) / 2 : mc_draws;
    int reps_per_pair = antithetic ? 2 : 1;
    std::vector<double> u_cells(static_cast<size_t>(P) * (K + 1));

    for (int64_t it = 0; it < pairs; ++it) {
        for (auto& u : u_cells) u = rng.u01_open();
        for (int rep = 0; rep < reps_per_pair; ++rep) {
            int joint = 0, base = 1;
            for (int x = 0; x < P; ++x) {
                double u = rep == 0 ? u_cells[x * (K + 1)] : 1.0 - u_cells[x * (K + 1)];
                BetaArm c = bank.cell_arm(x, 0);
                theta_ctrl[x] = boost::math::ibeta_inv(c.alpha, c.beta, u);
            }
            std::array<bool, 8> e1{}, e0{};
            for (int a = 1; a <= K; ++a) {
                bool v1 = false, v0 = false;
                for (int x = 0; x < P; ++x) {
                    double u = u_cells[x * (K + 1) + a];
                    if (rep == 1) u = 1.0 - u;
                    BetaArm arm = bank.cell_arm(x, a);
                    double th = boost::math::ibeta_inv(arm.alpha, arm.beta, u);
                    if (th > theta_ctrl[x]) {
                        bool positive = (x >> (cfg.targets[a - 1] - 1)) & 1;
                        (positive ? v1 : v0) = true;
                    }
                }
                e1[a - 1] = v1;
                e0[a - 1] = v0;
                joint += base * (2 * (v1 ? 1 : 0) + (v0 ? 1 : 0));
                base *= 4;
            }
            double w = tables.weight(joint);
            denom += w;
            denom2 += w * w;
            if (w > 0.0)
                for (int a = 0; a < K; ++a) {
                    if (e1[a]) num_e1[a] += w;
                    if (e1[a] && e0[a]) num_e0[a] += w;  // (0,1) carries zero weight
                    if (e1[a] || e0[a]) num_union[a] += w;
                }
        }
    }
    if (denom <= 0.0)
        throw diagnostic_error("posterior_indicator_probs: no draws landed in a "
                               "positive-prior region; widen mc_draws");
    IndicatorProbs out;
    out.mc_seed = seed;
    out.ess = denom * denom / std::max(denom2, 1e-300);
    for (int a = 0; a < K; ++a) {
        out.p_e1.push_back(num_e1[a] / denom);
        out.p_e0.push_back(num_e0[a] / denom);
        out.p_union.push_back(num_union[a] / denom);
    }
    return out;
}

}  // namespace bud
