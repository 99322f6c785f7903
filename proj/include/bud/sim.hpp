#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "bud/biomarker.hpp"
#include "bud/coprimary.hpp"
#include "bud/dp.hpp"
#include "bud/infer.hpp"
#include "bud/metric.hpp"
#include "bud/policy.hpp"

namespace bud {

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct AnalysisSpec {
    std::string test = "fisher";  // "fisher" | "bootstrap" | "none"
    double level = 0.05;
    int64_t bootstrap_B = 2000;
};

struct ScenarioConfig {
    std::string name = "scenario";
    DesignFamily family = DesignFamily::MultiArmControlled;

    // binary families: response probability per arm (controlled: arm 0)
    std::vector<double> theta;

    // normal family
    std::vector<double> normal_means;
    std::vector<double> normal_outcome_vars;
    double normal_prior_var = 1.0;

    // co-primary: cell probabilities (both, first-only, second-only, none)
    std::vector<std::array<double, 4>> cells;

    // biomarker family
    BiomarkerConfig biomarker;
    double bm_control_rate = 0.35;
    std::vector<double> bm_positive_rate;  // per experimental arm
    std::vector<double> bm_negative_rate;  // per experimental arm

    double prior_v1 = 1.0, prior_v2 = 1.0;
    int64_t T = 100;
    int64_t replications = 1000;
    uint64_t seed = 20240101;
    int workers = 0;  // 0: BUD_WORKERS env or hardware concurrency

    MetricSpec metric;
    PolicySpec policy;
    AnalysisSpec analysis;

    int64_t joint_draws = 4096;      // CRN bank draws for co-primary gains
    std::string joint_mode = "crn";  // "crn" | "frozen"

    size_t n_arms() const {
        switch (family) {
            case DesignFamily::MultiArmControlled:
            case DesignFamily::BestArm: return theta.size();
            case DesignFamily::Normal: return normal_means.size();
            case DesignFamily::CoPrimary: return cells.size();
            case DesignFamily::Biomarker: return biomarker.n_arms();
        }
        return 0;
    }

    void validate() const {
        require(T >= 1, "scenario: T must be >= 1");
        require(replications >= 1, "scenario: replications must be >= 1");
        metric.validate();
        policy.validate();
        require(analysis.level > 0.0 && analysis.level < 1.0, "scenario: test level in (0,1)");
        switch (family) {
            case DesignFamily::MultiArmControlled:
                require(theta.size() >= 2, "scenario: controlled design needs >= 2 arms");
                for (double p : theta) require(is_probability(p), "scenario: theta outside [0,1]");
                break;
            case DesignFamily::BestArm:
                require(theta.size() >= 1, "scenario: need at least one arm");
                for (double p : theta) require(is_probability(p), "scenario: theta outside [0,1]");
                break;
            case DesignFamily::Normal:
                require(!normal_means.empty(), "scenario: need normal means");
                require(normal_means.size() == normal_outcome_vars.size(),
                        "scenario: means/variances size mismatch");
                for (double v : normal_outcome_vars)
                    require(v > 0.0, "scenario: outcome variances must be positive");
                require(normal_prior_var > 0.0, "scenario: prior variance must be positive");
                break;
            case DesignFamily::CoPrimary:
                require(cells.size() >= 2, "scenario: co-primary needs control + arms");
                for (const auto& c : cells) {
                    double s = 0.0;
                    for (double v : c) {
                        require(is_probability(v), "scenario: cell probability outside [0,1]");
                        s += v;
                    }
                    require(std::abs(s - 1.0) < 1e-9, "scenario: cell probabilities must sum to 1");
                }
                break;
            case DesignFamily::Biomarker:
                biomarker.validate();
                require(is_probability(bm_control_rate), "scenario: control rate outside [0,1]");
                require(bm_positive_rate.size() ==
                            static_cast<size_t>(biomarker.n_experimental),
                        "scenario: need a positive-group rate per experimental arm");
                require(bm_negative_rate.size() == bm_positive_rate.size(),
                        "scenario: need a negative-group rate per experimental arm");
                for (double p : bm_positive_rate)
                    require(is_probability(p), "scenario: positive rate outside [0,1]");
                for (double p : bm_negative_rate)
                    require(is_probability(p), "scenario: negative rate outside [0,1]");
                break;
        }
    }
};

inline int resolve_workers(const ScenarioConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("BUD_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// ---------------------------------------------------------------------------
// Per-replication record
// ---------------------------------------------------------------------------

struct TrialRecord {
    std::vector<int64_t> arm_counts;
    double util_offset = 0.0;  // u(Sigma_T) with prior-baseline offsets
    double util_raw = 0.0;     // paper-scale value

    // controlled binary
    std::vector<double> effect_pm, effect_raw, fisher_p;

    // best-arm
    std::vector<double> p_best;
    int selected_arm = -1;
    double selected_estimate = 0.0;

    // biomarker: subgroup-restricted difference-in-proportions statistics and
    // per-(biomarker, arm) positive-stratum counts
    std::vector<double> bm_stat_pos, bm_stat_neg;
    std::vector<int64_t> stratum_counts;

    // co-primary: per-arm endpoint statistics and effect estimates
    std::vector<double> cop_stat1, cop_stat2;
    std::vector<double> cop_effect1_pm, cop_effect2_pm, cop_effect1_raw, cop_effect2_raw;
};

// Per-worker caches shared across its replications.
struct SimWorkspace {
    explicit SimWorkspace(int grid_points = 1025) : entropy(grid_points), grid(grid_points) {}
    EntropyOfMaxCache entropy;
    UnitGrid grid;
};

// ---------------------------------------------------------------------------
// Single trial
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> policy_probabilities(const ScenarioConfig& cfg, const TrialHistory& h,
                                                MetricCtx& ctx, SimWorkspace& ws) {
    switch (cfg.policy.kind) {
        case PolicyKind::BUD: {
            auto gains = compute_gains(h, cfg.metric, ctx);
            return bud_probabilities(gains, cfg.policy.h.at(h.t, cfg.T));
        }
        case PolicyKind::Myopic: return myopic_probabilities(compute_gains(h, cfg.metric, ctx));
        default: return comparator_probabilities(h, cfg.policy, cfg.T, ws.grid);
    }
}

inline void finalize_controlled(const ScenarioConfig& cfg, const TrialHistory& h, TrialRecord& r) {
    auto est = effect_estimates(h);
    r.effect_pm = est.posterior_mean;
    r.effect_raw = est.raw;
    const auto& cprior = std::get<BetaArm>(h.prior_arms[0]);
    int64_t c_resp = static_cast<int64_t>(h.beta(0).alpha - cprior.alpha);
    for (size_t a = 1; a < h.n_arms(); ++a) {
        const auto& aprior = std::get<BetaArm>(h.prior_arms[a]);
        int64_t a_resp = static_cast<int64_t>(h.beta(a).alpha - aprior.alpha);
        TwoByTwo tab{a_resp, h.assignment_counts[a] - a_resp, c_resp,
                     h.assignment_counts[0] - c_resp};
        r.fisher_p.push_back(fisher_exact_one_sided(tab));
    }
}

inline void finalize_best_arm(const ScenarioConfig& cfg, const TrialHistory& h, TrialRecord& r,
                              SimWorkspace& ws) {
    r.p_best = prob_best_grid(h.beta_arms(), ws.grid);
    r.selected_arm =
        static_cast<int>(std::max_element(r.p_best.begin(), r.p_best.end()) - r.p_best.begin());
    r.selected_estimate = h.beta(r.selected_arm).mean();
}

inline void finalize_coprimary(const ScenarioConfig& cfg, const TrialHistory& h, TrialRecord& r) {
    const auto& ctrl = h.dirichlet(0);
    const auto& ctrl_prior = std::get<DirichletArm>(h.prior_arms[0]);
    auto observed_marginal = [&](const DirichletArm& cur, const DirichletArm& prior, int l,
                                 int64_t n) {
        if (n == 0) return 0.5;
        double resp = cur.counts[DirichletArm::kBoth] - prior.counts[DirichletArm::kBoth] +
                      (l == 1 ? cur.counts[DirichletArm::kFirstOnly] -
                                    prior.counts[DirichletArm::kFirstOnly]
                              : cur.counts[DirichletArm::kSecondOnly] -
                                    prior.counts[DirichletArm::kSecondOnly]);
        return resp / static_cast<double>(n);
    };
    double c1 = observed_marginal(ctrl, ctrl_prior, 1, h.assignment_counts[0]);
    double c2 = observed_marginal(ctrl, ctrl_prior, 2, h.assignment_counts[0]);
    for (size_t a = 1; a < h.n_arms(); ++a) {
        const auto& arm = h.dirichlet(a);
        const auto& arm_prior = std::get<DirichletArm>(h.prior_arms[a]);
        double a1 = observed_marginal(arm, arm_prior, 1, h.assignment_counts[a]);
        double a2 = observed_marginal(arm, arm_prior, 2, h.assignment_counts[a]);
        r.cop_stat1.push_back(a1 - c1);
        r.cop_stat2.push_back(a2 - c2);
        r.cop_effect1_raw.push_back(a1 - c1);
        r.cop_effect2_raw.push_back(a2 - c2);
        r.cop_effect1_pm.push_back(arm.marginal_mean(1) - ctrl.marginal_mean(1));
        r.cop_effect2_pm.push_back(arm.marginal_mean(2) - ctrl.marginal_mean(2));
    }
}

inline TrialRecord run_trial_biomarker(const ScenarioConfig& cfg, uint64_t rep, SimWorkspace& ws,
                                       std::shared_ptr<const BiomarkerTables> tables) {
    const auto& bm = cfg.biomarker;
    BiomarkerEngine engine(std::move(tables));
    RngStream assign(cfg.seed, rep, Sub::Assignment);
    RngStream outcomes(cfg.seed, rep, Sub::Outcome);
    RngStream profiles(cfg.seed, rep, Sub::Profile);
    const int K = bm.n_experimental;

    for (int64_t t = 0; t < cfg.T; ++t) {
        int profile = 0;
        for (int l = 0; l < bm.n_biomarkers; ++l)
            if (profiles.bernoulli(bm.prevalences[l])) profile |= (1 << l);
        std::vector<double> probs;
        if (cfg.policy.kind == PolicyKind::BUD) {
            probs = engine.allocation_probabilities(profile, cfg.policy.h.at(t, cfg.T),
                                                    cfg.metric.w, cfg.metric.beta_exp);
        } else if (cfg.policy.kind == PolicyKind::BR) {
            probs.assign(K + 1, 1.0 / (K + 1));
        } else {
            throw config_error("biomarker family supports BUD and BR policies");
        }
        int arm = static_cast<int>(select_action(probs, assign));
        double rate = cfg.bm_control_rate;
        if (arm > 0) {
            bool positive = (profile >> (bm.targets[arm - 1] - 1)) & 1;
            rate = positive ? cfg.bm_positive_rate[arm - 1] : cfg.bm_negative_rate[arm - 1];
        }
        engine.record(profile, arm, outcomes.bernoulli(rate));
    }

    TrialRecord r;
    const SubgroupBank& bank = engine.bank();
    r.arm_counts = bank.arm_counts;
    r.util_raw = engine.utility(cfg.metric.w, cfg.metric.beta_exp);
    r.util_offset = r.util_raw;  // the biomarker measure carries no prior offset
    r.stratum_counts = bank.stratum_counts;

    // subgroup-restricted difference in observed response proportions
    for (int a = 1; a <= K; ++a) {
        for (int positive = 1; positive >= 0; --positive) {
            int64_t as = 0, an = 0, cs = 0, cn = 0;
            for (int x = 0; x < bm.n_profiles(); ++x) {
                bool in_group = (((x >> (bm.targets[a - 1] - 1)) & 1) == positive);
                if (!in_group) continue;
                as += bank.succ[bank.cell(x, a)];
                an += bank.succ[bank.cell(x, a)] + bank.fail[bank.cell(x, a)];
                cs += bank.succ[bank.cell(x, 0)];
                cn += bank.succ[bank.cell(x, 0)] + bank.fail[bank.cell(x, 0)];
            }
            double stat = (an == 0 || cn == 0)
                              ? -1e9
                              : static_cast<double>(as) / an - static_cast<double>(cs) / cn;
            (positive ? r.bm_stat_pos : r.bm_stat_neg).push_back(stat);
        }
    }
    return r;
}

}  // namespace detail

inline TrialRecord run_trial(const ScenarioConfig& cfg, uint64_t rep, SimWorkspace& ws,
                             std::shared_ptr<const BiomarkerTables> tables = nullptr) {
    if (cfg.family == DesignFamily::Biomarker)
        return detail::run_trial_biomarker(cfg, rep, ws, std::move(tables));

    RngStream assign(cfg.seed, rep, Sub::Assignment);
    RngStream outcomes(cfg.seed, rep, Sub::Outcome);
    RngStream metric_mc(cfg.seed, rep, Sub::MetricMc);

    TrialHistory h;
    switch (cfg.family) {
        case DesignFamily::MultiArmControlled:
            h = fresh_controlled(cfg.theta.size() - 1, cfg.prior_v1, cfg.prior_v2);
            break;
        case DesignFamily::BestArm:
            h = fresh_best_arm(cfg.theta.size(), cfg.prior_v1, cfg.prior_v2);
            break;
        case DesignFamily::Normal:
            h = fresh_normal(cfg.normal_outcome_vars, cfg.normal_prior_var);
            break;
        case DesignFamily::CoPrimary: h = fresh_coprimary(cfg.cells.size() - 1); break;
        default: break;
    }

    std::unique_ptr<CrnBankJointEval> crn;
    std::unique_ptr<FrozenPairJointEval> frozen;
    MetricCtx ctx;
    ctx.entropy_cache = &ws.entropy;
    ctx.mc_stream = &metric_mc;
    if (cfg.family == DesignFamily::CoPrimary) {
        if (cfg.joint_mode == "frozen") {
            frozen = std::make_unique<FrozenPairJointEval>(cfg.joint_draws);
            ctx.joint = frozen.get();
        } else {
            crn = std::make_unique<CrnBankJointEval>(cfg.joint_draws, cfg.seed, rep);
            ctx.joint = crn.get();
        }
    }

    for (int64_t t = 0; t < cfg.T; ++t) {
        auto probs = detail::policy_probabilities(cfg, h, ctx, ws);
        size_t arm = select_action(probs, assign);
        switch (cfg.family) {
            case DesignFamily::MultiArmControlled:
            case DesignFamily::BestArm:
                h.record(arm, Outcome::binary(outcomes.bernoulli(cfg.theta[arm])));
                break;
            case DesignFamily::Normal:
                h.record(arm, Outcome::real(cfg.normal_means[arm] +
                                            std::sqrt(cfg.normal_outcome_vars[arm]) *
                                                outcomes.normal()));
                break;
            case DesignFamily::CoPrimary: {
                std::vector<double> cell_probs(cfg.cells[arm].begin(), cfg.cells[arm].end());
                h.record(arm, Outcome::cell(static_cast<int>(outcomes.categorical(cell_probs))));
                if (crn) {
                    std::vector<DirichletArm> arms;
                    for (const auto& s : h.arms) arms.push_back(std::get<DirichletArm>(s));
                    crn->sync(arms);
                }
                break;
            }
            default: break;
        }
    }

    TrialRecord r;
    r.arm_counts = h.assignment_counts;
    r.util_raw = eval_metric_raw(cfg.metric, h, ctx);
    r.util_offset = eval_metric(cfg.metric, h, ctx);
    switch (cfg.family) {
        case DesignFamily::MultiArmControlled: detail::finalize_controlled(cfg, h, r); break;
        case DesignFamily::BestArm: detail::finalize_best_arm(cfg, h, r, ws); break;
        case DesignFamily::CoPrimary: detail::finalize_coprimary(cfg, h, r); break;
        default: break;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Batch execution and operating characteristics
// ---------------------------------------------------------------------------

inline std::vector<TrialRecord> run_batch_records(const ScenarioConfig& cfg) {
    cfg.validate();
    std::shared_ptr<const BiomarkerTables> tables;
    if (cfg.family == DesignFamily::Biomarker)
        tables = std::make_shared<BiomarkerTables>(cfg.biomarker);

    std::vector<TrialRecord> records(cfg.replications);
    std::atomic<int64_t> next{0};
    int workers = std::min<int64_t>(resolve_workers(cfg), cfg.replications);
    auto work = [&] {
        SimWorkspace ws(cfg.metric.grid_points);
        for (;;) {
            int64_t i = next.fetch_add(1);
            if (i >= cfg.replications) return;
            records[i] = run_trial(cfg, static_cast<uint64_t>(i), ws, tables);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return records;
}

struct OCArm {
    double ess = 0.0;
    double sd = 0.0;
    double rejection_rate = 0.0;  // Fisher / bootstrap rejection share
    double p_selected = 0.0;      // best-arm family: selection proportion
    double mse_raw_e3 = 0.0;      // x1000, observed-proportion estimator
    double mse_pm_e3 = 0.0;       // x1000, posterior-mean estimator
};

struct OCReport {
    std::string scenario;
    std::string design;
    int64_t T = 0;
    int64_t replications = 0;
    uint64_t seed = 0;
    std::vector<OCArm> arms;

    double util_mean = 0.0;    // offset form
    double util_median = 0.0;
    double util_raw_mean = 0.0;

    // best-arm family
    double best_mse_e3 = 0.0;

    // biomarker family: per experimental arm
    std::vector<double> bm_power_pos, bm_power_neg;
    // per (biomarker, arm): mean and sd of positive-stratum counts
    std::vector<double> stratum_ess, stratum_sd;

    // co-primary family: per experimental arm
    std::vector<double> cop_power_e1, cop_power_e2, cop_power_both;
    std::vector<double> cop_mse1_pm_e3, cop_mse2_pm_e3;
    std::vector<double> cop_mse1_raw_e3, cop_mse2_raw_e3;
};

namespace detail {

inline ScenarioConfig null_scenario(const ScenarioConfig& cfg) {
    ScenarioConfig null_cfg = cfg;
    null_cfg.name = cfg.name + "-null";
    null_cfg.seed = cfg.seed ^ 0xB0075EEDull;
    null_cfg.replications = cfg.analysis.bootstrap_B;
    switch (cfg.family) {
        case DesignFamily::MultiArmControlled:
            for (size_t a = 1; a < null_cfg.theta.size(); ++a) null_cfg.theta[a] = cfg.theta[0];
            break;
        case DesignFamily::Biomarker:
            for (auto& p : null_cfg.bm_positive_rate) p = cfg.bm_control_rate;
            for (auto& p : null_cfg.bm_negative_rate) p = cfg.bm_control_rate;
            break;
        case DesignFamily::CoPrimary:
            for (size_t a = 1; a < null_cfg.cells.size(); ++a) null_cfg.cells[a] = cfg.cells[0];
            break;
        default: break;
    }
    return null_cfg;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

inline double sd_of(const std::vector<double>& v) {
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += sq(x - m);
    return v.size() > 1 ? std::sqrt(s / v.size()) : 0.0;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline OCReport run_batch(const ScenarioConfig& cfg) {
    auto records = run_batch_records(cfg);
    const size_t A = cfg.n_arms();
    const int64_t R = cfg.replications;

    OCReport rep;
    rep.scenario = cfg.name;
    rep.design = policy_kind_name(cfg.policy.kind);
    rep.T = cfg.T;
    rep.replications = R;
    rep.seed = cfg.seed;
    rep.arms.resize(A);

    for (size_t a = 0; a < A; ++a) {
        std::vector<double> counts;
        counts.reserve(records.size());
        for (const auto& r : records) counts.push_back(static_cast<double>(r.arm_counts[a]));
        rep.arms[a].ess = detail::mean_of(counts);
        rep.arms[a].sd = detail::sd_of(counts);
    }

    std::vector<double> utils, utils_raw;
    for (const auto& r : records) {
        utils.push_back(r.util_offset);
        utils_raw.push_back(r.util_raw);
    }
    rep.util_mean = detail::mean_of(utils);
    rep.util_median = detail::median_of(utils);
    rep.util_raw_mean = detail::mean_of(utils_raw);

    switch (cfg.family) {
        case DesignFamily::MultiArmControlled: {
            // effect MSEs and test rejections per experimental arm
            for (size_t a = 1; a < A; ++a) {
                double truth = cfg.theta[a] - cfg.theta[0];
                double mse_pm = 0.0, mse_raw = 0.0;
                for (const auto& r : records) {
                    mse_pm += sq(r.effect_pm[a - 1] - truth);
                    mse_raw += sq(r.effect_raw[a - 1] - truth);
                }
                rep.arms[a].mse_pm_e3 = 1000.0 * mse_pm / R;
                rep.arms[a].mse_raw_e3 = 1000.0 * mse_raw / R;
            }
            if (cfg.analysis.test == "fisher") {
                for (size_t a = 1; a < A; ++a) {
                    int64_t rejects = 0;
                    for (const auto& r : records)
                        if (r.fisher_p[a - 1] <= cfg.analysis.level) ++rejects;
                    rep.arms[a].rejection_rate = static_cast<double>(rejects) / R;
                }
            } else if (cfg.analysis.test == "bootstrap") {
                auto null_records = run_batch_records(detail::null_scenario(cfg));
                for (size_t a = 1; a < A; ++a) {
                    std::vector<double> null_stats;
                    for (const auto& r : null_records) null_stats.push_back(r.effect_raw[a - 1]);
                    auto thr = bootstrap_threshold(null_stats, cfg.analysis.level);
                    int64_t rejects = 0;
                    for (const auto& r : records)
                        if (bootstrap_reject(r.effect_raw[a - 1], thr)) ++rejects;
                    rep.arms[a].rejection_rate = static_cast<double>(rejects) / R;
                }
            }
            break;
        }
        case DesignFamily::BestArm: {
            double truth_max = *std::max_element(cfg.theta.begin(), cfg.theta.end());
            double mse = 0.0;
            std::vector<int64_t> selected(A, 0);
            for (const auto& r : records) {
                ++selected[r.selected_arm];
                mse += sq(r.selected_estimate - truth_max);
            }
            for (size_t a = 0; a < A; ++a)
                rep.arms[a].p_selected = static_cast<double>(selected[a]) / R;
            rep.best_mse_e3 = 1000.0 * mse / R;
            break;
        }
        case DesignFamily::Biomarker: {
            const int K = cfg.biomarker.n_experimental;
            const int B = cfg.biomarker.n_biomarkers;
            // stratum means per (biomarker, arm)
            rep.stratum_ess.assign(static_cast<size_t>(B) * (K + 1), 0.0);
            rep.stratum_sd.assign(static_cast<size_t>(B) * (K + 1), 0.0);
            for (size_t i = 0; i < rep.stratum_ess.size(); ++i) {
                std::vector<double> v;
                v.reserve(records.size());
                for (const auto& r : records)
                    v.push_back(static_cast<double>(r.stratum_counts[i]));
                rep.stratum_ess[i] = detail::mean_of(v);
                rep.stratum_sd[i] = detail::sd_of(v);
            }
            if (cfg.analysis.test == "bootstrap") {
                auto null_records = run_batch_records(detail::null_scenario(cfg));
                rep.bm_power_pos.assign(K, 0.0);
                rep.bm_power_neg.assign(K, 0.0);
                for (int a = 0; a < K; ++a) {
                    for (int positive = 1; positive >= 0; --positive) {
                        std::vector<double> null_stats;
                        for (const auto& r : null_records)
                            null_stats.push_back(positive ? r.bm_stat_pos[a] : r.bm_stat_neg[a]);
                        auto thr = bootstrap_threshold(null_stats, cfg.analysis.level);
                        int64_t rejects = 0;
                        for (const auto& r : records)
                            if (bootstrap_reject(positive ? r.bm_stat_pos[a] : r.bm_stat_neg[a],
                                                 thr))
                                ++rejects;
                        (positive ? rep.bm_power_pos[a] : rep.bm_power_neg[a]) =
                            static_cast<double>(rejects) / R;
                    }
                }
            }
            break;
        }
        case DesignFamily::CoPrimary: {
            const size_t K = A - 1;
            auto truth_marginal = [&](size_t arm, int l) {
                return cfg.cells[arm][0] + (l == 1 ? cfg.cells[arm][1] : cfg.cells[arm][2]);
            };
            rep.cop_mse1_pm_e3.assign(K, 0.0);
            rep.cop_mse2_pm_e3.assign(K, 0.0);
            rep.cop_mse1_raw_e3.assign(K, 0.0);
            rep.cop_mse2_raw_e3.assign(K, 0.0);
            for (size_t a = 1; a < A; ++a) {
                double g1 = truth_marginal(a, 1) - truth_marginal(0, 1);
                double g2 = truth_marginal(a, 2) - truth_marginal(0, 2);
                for (const auto& r : records) {
                    rep.cop_mse1_pm_e3[a - 1] += sq(r.cop_effect1_pm[a - 1] - g1);
                    rep.cop_mse2_pm_e3[a - 1] += sq(r.cop_effect2_pm[a - 1] - g2);
                    rep.cop_mse1_raw_e3[a - 1] += sq(r.cop_effect1_raw[a - 1] - g1);
                    rep.cop_mse2_raw_e3[a - 1] += sq(r.cop_effect2_raw[a - 1] - g2);
                }
                rep.cop_mse1_pm_e3[a - 1] *= 1000.0 / R;
                rep.cop_mse2_pm_e3[a - 1] *= 1000.0 / R;
                rep.cop_mse1_raw_e3[a - 1] *= 1000.0 / R;
                rep.cop_mse2_raw_e3[a - 1] *= 1000.0 / R;
            }
            if (cfg.analysis.test == "bootstrap") {
                auto null_records = run_batch_records(detail::null_scenario(cfg));
                rep.cop_power_e1.assign(K, 0.0);
                rep.cop_power_e2.assign(K, 0.0);
                rep.cop_power_both.assign(K, 0.0);
                for (size_t a = 0; a < K; ++a) {
                    std::vector<double> n1, n2;
                    for (const auto& r : null_records) {
                        n1.push_back(r.cop_stat1[a]);
                        n2.push_back(r.cop_stat2[a]);
                    }
                    auto thr1 = bootstrap_threshold(n1, cfg.analysis.level);
                    auto thr2 = bootstrap_threshold(n2, cfg.analysis.level);
                    int64_t r1 = 0, r2 = 0, rb = 0;
                    for (const auto& r : records) {
                        bool b1 = bootstrap_reject(r.cop_stat1[a], thr1);
                        bool b2 = bootstrap_reject(r.cop_stat2[a], thr2);
                        r1 += b1;
                        r2 += b2;
                        rb += (b1 && b2);
                    }
                    rep.cop_power_e1[a] = static_cast<double>(r1) / R;
                    rep.cop_power_e2[a] = static_cast<double>(r2) / R;
                    rep.cop_power_both[a] = static_cast<double>(rb) / R;
                }
            }
            break;
        }
        default: break;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Regret curves against the fixed-allocation oracle
// ---------------------------------------------------------------------------

struct RegretPoint {
    int64_t T = 0;
    std::string design;
    double regret = 0.0;
    double oracle_utility = 0.0;
    double design_utility = 0.0;
};

inline std::vector<RegretPoint> regret_curve(const ScenarioConfig& base,
                                             const std::vector<int64_t>& T_values,
                                             const std::vector<PolicySpec>& policies) {
    require(base.family == DesignFamily::MultiArmControlled &&
                base.metric.kind == MetricKind::VarianceSum,
            "regret_curve: controlled variance-sum scenarios only");
    std::vector<RegretPoint> out;
    for (int64_t T : T_values) {
        if (T == 0) {
            for (const auto& pol : policies)
                out.push_back({0, policy_kind_name(pol.kind), 0.0, 0.0, 0.0});
            continue;
        }
        auto oracle = oracle_allocation_variance_sum(base.theta, T, base.prior_v1, base.prior_v2);
        for (const auto& pol : policies) {
            ScenarioConfig cfg = base;
            cfg.T = T;
            cfg.policy = pol;
            cfg.analysis.test = "none";
            auto rep = run_batch(cfg);
            RegretPoint pt;
            pt.T = T;
            pt.design = policy_kind_name(pol.kind);
            pt.oracle_utility = oracle.expected_utility;
            pt.design_utility = rep.util_mean;
            pt.regret = regret(oracle.expected_utility, rep.util_mean);
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace bud
