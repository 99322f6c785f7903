#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "bud/coprimary.hpp"

using namespace bud;

namespace {

// direct high-draw MC oracle for P(gamma_1 > 0 and gamma_2 > 0)
double prob_both_oracle(const DirichletArm& arm, const DirichletArm& ctrl, int64_t n,
                        uint64_t seed) {
    RngStream rng(seed, 0, Sub::MetricMc);
    std::vector<double> aa(arm.counts.begin(), arm.counts.end());
    std::vector<double> cc(ctrl.counts.begin(), ctrl.counts.end());
    std::vector<double> ta, tc;
    int64_t hits = 0;
    for (int64_t i = 0; i < n; ++i) {
        rng.dirichlet(aa, ta);
        rng.dirichlet(cc, tc);
        if ((ta[0] + ta[1]) > (tc[0] + tc[1]) && (ta[0] + ta[2]) > (tc[0] + tc[2])) ++hits;
    }
    return static_cast<double>(hits) / n;
}

}  // namespace

TEST_CASE("frozen pair memo determinism and symmetry", "[coprimary]") {
    FrozenPairJointEval joint(16384);
    DirichletArm arm, ctrl;
    arm.counts = {3, 2, 1, 4};
    ctrl.counts = {1, 2, 2, 1};
    double v1 = joint.prob_both(arm, ctrl);
    double v2 = joint.prob_both(arm, ctrl);
    REQUIRE(v1 == v2);

    // simultaneous endpoint swap leaves the joint probability invariant
    DirichletArm arm_s = arm, ctrl_s = ctrl;
    std::swap(arm_s.counts[1], arm_s.counts[2]);
    std::swap(ctrl_s.counts[1], ctrl_s.counts[2]);
    REQUIRE(joint.prob_both(arm_s, ctrl_s) == v1);

    // fresh arms: P = 1/4 by symmetry
    DirichletArm flat;
    REQUIRE(joint.prob_both(flat, flat) == Catch::Approx(0.25).margin(3.5 * 0.433 / 128.0));
}

TEST_CASE("frozen pair memo vs large-draw oracle", "[coprimary][properties]") {
    FrozenPairJointEval joint(32768);
    RngStream gen(10101, 0, Sub::Outcome);
    int excursions = 0;
    for (int rep = 0; rep < 12; ++rep) {
        DirichletArm arm, ctrl;
        for (int y = 0; y < 4; ++y) {
            arm.counts[y] = 1.0 + gen.uniform_int(8);
            ctrl.counts[y] = 1.0 + gen.uniform_int(8);
        }
        double est = joint.prob_both(arm, ctrl);
        double oracle = prob_both_oracle(arm, ctrl, 400000, 900 + rep);
        double se = std::sqrt(0.25 / 32768.0 + 0.25 / 400000.0);
        if (std::abs(est - oracle) >= 3 * se) ++excursions;
        REQUIRE(std::abs(est - oracle) < 6 * se);
    }
    REQUIRE(excursions <= 2);
}

TEST_CASE("frozen pair precompute covers a small horizon", "[coprimary]") {
    FrozenPairJointEval joint(2048);
    joint.precompute(3, 2);
    size_t warmed = joint.size();
    REQUIRE(warmed > 0);
    // a lookup inside the horizon does not grow the memo
    DirichletArm arm, ctrl;
    arm.counts = {2, 1, 1, 1};  // one observation
    ctrl.counts = {1, 1, 2, 1};
    joint.prob_both(arm, ctrl);
    REQUIRE(joint.size() == warmed);
}

TEST_CASE("crn bank evaluator tracks the frozen estimate", "[coprimary]") {
    CrnBankJointEval crn(16384, 777, 3);
    DirichletArm arm, ctrl;
    arm.counts = {4, 3, 2, 5};
    ctrl.counts = {2, 4, 3, 2};
    crn.sync({ctrl, arm});
    double est = crn.prob_both(arm, ctrl);
    double oracle = prob_both_oracle(arm, ctrl, 400000, 31);
    // grid discretization adds a small bias on top of MC noise
    REQUIRE(est == Catch::Approx(oracle).margin(0.02));

    // one-observation look-ahead via importance reweighting
    DirichletArm arm_next = arm;
    arm_next.counts[0] += 1.0;
    double shifted = crn.prob_both(arm_next, ctrl);
    double oracle_shifted = prob_both_oracle(arm_next, ctrl, 400000, 32);
    REQUIRE(shifted == Catch::Approx(oracle_shifted).margin(0.02));
    // the shifted joint moves in the right direction (more both-responders)
    REQUIRE(shifted > est - 0.02);

    DirichletArm ctrl_next = ctrl;
    ctrl_next.counts[0] += 1.0;
    double ctrl_shifted = crn.prob_both(arm, ctrl_next);
    REQUIRE(ctrl_shifted ==
            Catch::Approx(prob_both_oracle(arm, ctrl_next, 400000, 33)).margin(0.02));
}

TEST_CASE("coprimary utility from counts matches the metric path", "[coprimary]") {
    FrozenPairJointEval joint(8192);
    std::vector<int> counts(12, 0);
    counts[0] = 2;  // control both-responders
    counts[5] = 1;  // arm 1, first-only
    counts[10] = 3; // arm 2, second-only
    double direct = coprimary_utility_from_counts(counts, 3, 5.0, 6.0, joint);

    TrialHistory h = fresh_coprimary(2);
    for (int a = 0; a < 3; ++a)
        for (int y = 0; y < 4; ++y)
            std::get<DirichletArm>(h.arms[a]).counts[y] = 1.0 + counts[a * 4 + y];
    MetricSpec spec;
    spec.kind = MetricKind::AsymEntropyCoprimary;
    spec.w = 5.0;
    spec.beta_exp = 6.0;
    MetricCtx ctx;
    ctx.joint = &joint;
    REQUIRE(eval_metric_raw(spec, h, ctx) == Catch::Approx(direct).epsilon(1e-12));
}
