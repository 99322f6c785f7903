#pragma once

#include <cstdint>
#include <vector>

#include "bud/posterior.hpp"

namespace bud {

enum class DesignFamily { MultiArmControlled, BestArm, Normal, CoPrimary, Biomarker };

inline const char* family_name(DesignFamily f) {
    switch (f) {
        case DesignFamily::MultiArmControlled: return "multi-arm-controlled";
        case DesignFamily::BestArm: return "best-arm";
        case DesignFamily::Normal: return "normal";
        case DesignFamily::CoPrimary: return "co-primary";
        case DesignFamily::Biomarker: return "biomarker";
    }
    return "?";
}

// Sigma_t for the conjugate families: enrolment count, per-arm assignment
// tallies and posterior states.  Arm 0 is the control in controlled families.
// The biomarker family keeps its own bank (see biomarker.hpp).
struct TrialHistory {
    DesignFamily family = DesignFamily::MultiArmControlled;
    int64_t t = 0;
    std::vector<int64_t> assignment_counts;
    std::vector<PosteriorState> arms;
    std::vector<PosteriorState> prior_arms;  // arms at t = 0, used for the v_a offsets

    size_t n_arms() const { return arms.size(); }

    std::vector<double> allocation_props() const {
        std::vector<double> p(assignment_counts.size(), 0.0);
        if (t > 0)
            for (size_t a = 0; a < p.size(); ++a)
                p[a] = static_cast<double>(assignment_counts[a]) / static_cast<double>(t);
        return p;
    }

    void record(size_t arm, const Outcome& y) {
        arms[arm] = update(arms[arm], y);
        ++assignment_counts[arm];
        ++t;
    }

    const BetaArm& beta(size_t a) const { return std::get<BetaArm>(arms[a]); }
    const NormalArm& normal(size_t a) const { return std::get<NormalArm>(arms[a]); }
    const DirichletArm& dirichlet(size_t a) const { return std::get<DirichletArm>(arms[a]); }

    std::vector<BetaArm> beta_arms() const {
        std::vector<BetaArm> out;
        out.reserve(arms.size());
        for (const auto& s : arms) out.push_back(std::get<BetaArm>(s));
        return out;
    }
};

inline TrialHistory fresh_controlled(size_t n_experimental, double v1 = 1.0, double v2 = 1.0) {
    TrialHistory h;
    h.family = DesignFamily::MultiArmControlled;
    h.assignment_counts.assign(n_experimental + 1, 0);
    h.arms.assign(n_experimental + 1, BetaArm{v1, v2});
    h.prior_arms = h.arms;
    return h;
}

inline TrialHistory fresh_best_arm(size_t n_arms, double v1 = 1.0, double v2 = 1.0) {
    TrialHistory h;
    h.family = DesignFamily::BestArm;
    h.assignment_counts.assign(n_arms, 0);
    h.arms.assign(n_arms, BetaArm{v1, v2});
    h.prior_arms = h.arms;
    return h;
}

inline TrialHistory fresh_normal(const std::vector<double>& outcome_vars, double prior_var) {
    TrialHistory h;
    h.family = DesignFamily::Normal;
    h.assignment_counts.assign(outcome_vars.size(), 0);
    for (double ov : outcome_vars) h.arms.push_back(NormalArm{prior_var, ov, 0, 0.0});
    h.prior_arms = h.arms;
    return h;
}

inline TrialHistory fresh_coprimary(size_t n_experimental, double pseudo_count = 1.0) {
    TrialHistory h;
    h.family = DesignFamily::CoPrimary;
    h.assignment_counts.assign(n_experimental + 1, 0);
    DirichletArm prior;
    prior.counts = {pseudo_count, pseudo_count, pseudo_count, pseudo_count};
    h.arms.assign(n_experimental + 1, prior);
    h.prior_arms = h.arms;
    return h;
}

}  // namespace bud
