#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "bud/history.hpp"
#include "bud/posterior.hpp"

using namespace bud;

namespace {

// independent quadrature oracle: P(X > Y) = int f_Y(y) (1 - F_X(y)) dy on a
// fine Simpson grid, built from raw pdf/cdf formulas only
double prob_greater_oracle(double a1, double b1, double a2, double b2) {
    const int n = 20001;
    double h = 1.0 / (n - 1), acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double y = i * h;
        double c = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += c * beta_pdf(y, a2, b2) * (1.0 - beta_cdf(y, a1, b1));
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("conjugate updates", "[posterior]") {
    PosteriorState s = BetaArm{1.0, 1.0};
    s = update(s, Outcome::binary(true));
    REQUIRE(std::get<BetaArm>(s).alpha == 2.0);
    REQUIRE(std::get<BetaArm>(s).beta == 1.0);

    PosteriorState nrm = NormalArm{1.0, 1.0, 0, 0.0};
    nrm = update(nrm, Outcome::real(0.7));
    REQUIRE(std::get<NormalArm>(nrm).n == 1);
    REQUIRE(std::get<NormalArm>(nrm).sum_y == Catch::Approx(0.7));

    PosteriorState dir = DirichletArm{};
    dir = update(dir, Outcome::cell(DirichletArm::kFirstOnly));
    REQUIRE(std::get<DirichletArm>(dir).counts[DirichletArm::kFirstOnly] == 2.0);
    REQUIRE(std::get<DirichletArm>(dir).total() == 5.0);

    REQUIRE_THROWS_AS(update(PosteriorState{BetaArm{}}, Outcome::real(0.3)), family_error);
    REQUIRE_THROWS_AS(update(PosteriorState{NormalArm{}}, Outcome::binary(true)), family_error);
    REQUIRE_THROWS_AS(update(PosteriorState{DirichletArm{}}, Outcome::binary(false)), family_error);
}

TEST_CASE("posterior variances", "[posterior]") {
    REQUIRE(posterior_variance(BetaArm{1, 1}) == Catch::Approx(1.0 / 12.0).epsilon(1e-12));
    // alpha*beta/((alpha+beta)^2 (alpha+beta+1)) at (2,1): 2/(9*4) = 1/18
    REQUIRE(posterior_variance(BetaArm{2, 1}) == Catch::Approx(1.0 / 18.0).epsilon(1e-12));

    NormalArm n0{1.0, 1.0, 0, 0.0};
    REQUIRE(n0.variance() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(n0.updated(0.7).variance() == Catch::Approx(0.5).epsilon(1e-12));

    // strictly decreasing in n
    NormalArm cur{2.0, 1.5, 0, 0.0};
    for (int i = 0; i < 20; ++i) {
        NormalArm next = cur.updated(0.0);
        REQUIRE(next.variance() < cur.variance());
        cur = next;
    }
}

TEST_CASE("normal gain telescopes as in the closed form", "[posterior]") {
    // Var(n) - Var(n+1) == sigma_a^2 / ((sigma_a^2/sigma^2 + n)(sigma_a^2/sigma^2 + 1 + n))
    for (double pv : {0.5, 1.0, 2.0})
        for (double ov : {0.5, 1.0, 2.0, 4.0})
            for (int64_t n : {0, 1, 2, 5, 17, 100}) {
                NormalArm arm{pv, ov, n, 0.3 * n};
                double delta = arm.variance() - arm.updated(1.0).variance();
                double r = ov / pv;
                double expected = ov / ((r + n) * (r + 1 + n));
                REQUIRE(delta == Catch::Approx(expected).epsilon(1e-12));
            }
}

TEST_CASE("prob_greater spec values", "[posterior]") {
    REQUIRE(prob_greater(BetaArm{1, 1}, BetaArm{1, 1}) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(prob_greater(BetaArm{2, 1}, BetaArm{1, 1}) ==
            Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(prob_greater(BetaArm{1, 1}, BetaArm{2, 1}) ==
            Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("prob_greater closed form vs quadrature within 1e-10", "[posterior][properties]") {
    RngStream r(2024, 0, Sub::MetricMc);
    for (int rep = 0; rep < 60; ++rep) {
        BetaArm a{1.0 + r.uniform_int(30), 1.0 + r.uniform_int(30)};
        BetaArm b{1.0 + r.uniform_int(30), 1.0 + r.uniform_int(30)};
        double exact = prob_greater(a, b);
        double quad = prob_greater_quadrature(a, b, 1e-12);
        REQUIRE(std::abs(exact - quad) < 1e-10);
        // complement identity
        REQUIRE(prob_greater(a, b) + prob_greater(b, a) == Catch::Approx(1.0).margin(1e-10));
    }
    // non-integral parameters fall back to quadrature and agree with the oracle
    BetaArm a{2.5, 1.25}, b{1.75, 3.5};
    REQUIRE(prob_greater(a, b) ==
            Catch::Approx(prob_greater_oracle(2.5, 1.25, 1.75, 3.5)).margin(1e-8));
}

TEST_CASE("best_arm_density spec values and normalization", "[posterior]") {
    // single uniform arm: density of theta itself
    REQUIRE(best_arm_density({BetaArm{1, 1}}, 0.37) == Catch::Approx(1.0).epsilon(1e-12));
    // two uniform arms at 0.5: 2 * 1 * 0.5
    REQUIRE(best_arm_density({BetaArm{1, 1}, BetaArm{1, 1}}, 0.5) ==
            Catch::Approx(1.0).epsilon(1e-12));

    UnitGrid grid(1024);
    std::vector<BetaArm> four(4, BetaArm{1, 1});
    REQUIRE(grid_integrate(grid, best_arm_density_grid(four, grid)) ==
            Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("best_arm_density integrates to one for random banks", "[posterior][properties]") {
    RngStream r(77, 0, Sub::MetricMc);
    UnitGrid grid(1024);
    for (int rep = 0; rep < 25; ++rep) {
        size_t K = 1 + r.uniform_int(6);
        std::vector<BetaArm> arms;
        for (size_t a = 0; a < K; ++a)
            arms.push_back(BetaArm{1.0 + r.uniform_int(8), 1.0 + r.uniform_int(8)});
        double integral = grid_integrate(grid, best_arm_density_grid(arms, grid));
        REQUIRE(integral == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("prob_best_grid sums to one and respects symmetry", "[posterior]") {
    UnitGrid grid(1024);
    auto p = prob_best_grid({BetaArm{1, 1}, BetaArm{1, 1}, BetaArm{1, 1}}, grid);
    for (double v : p) REQUIRE(v == Catch::Approx(1.0 / 3.0).margin(1e-9));
}

TEST_CASE("dirichlet marginals", "[posterior]") {
    // degenerate large counts at theta = (0.15, 0.25, 0.4, 0.2)
    DirichletArm big;
    big.counts = {0.15e7, 0.25e7, 0.4e7, 0.2e7};
    REQUIRE(big.marginal_mean(1) == Catch::Approx(0.40).epsilon(1e-9));
    REQUIRE(big.marginal_mean(2) == Catch::Approx(0.55).epsilon(1e-9));

    DirichletArm flat;
    REQUIRE(flat.marginal_mean(1) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(flat.marginal_mean(2) == Catch::Approx(0.5).epsilon(1e-12));

    auto s = dirichlet_marginals(flat, flat, 200000, 99);
    // symmetry: P(gamma_l > 0) = 1/2, joint = 1/4 up to MC error
    double se = std::sqrt(0.25 / 200000.0);
    REQUIRE(std::abs(s.prob_effect1 - 0.5) < 3 * se);
    REQUIRE(std::abs(s.prob_both - 0.25) < 3 * std::sqrt(0.25 * 0.75 / 200000.0));
    // MC effect variance agrees with the exact Beta-marginal sum
    double exact_var = flat.marginal_variance(1) + flat.marginal_variance(1);
    REQUIRE(s.effect1_var == Catch::Approx(exact_var).margin(4e-3 * exact_var + 3e-4));
}

TEST_CASE("one-step predictive never increases expected beta variance",
          "[posterior][properties]") {
    RngStream r(5150, 0, Sub::MetricMc);
    for (int rep = 0; rep < 200; ++rep) {
        BetaArm arm{1.0 + r.uniform_int(40), 1.0 + r.uniform_int(40)};
        double expected_next = arm.mean() * arm.updated(true).variance() +
                               (1.0 - arm.mean()) * arm.updated(false).variance();
        REQUIRE(arm.variance() - expected_next >= 0.0);
    }
}

TEST_CASE("trial history invariants", "[posterior]") {
    TrialHistory h = fresh_controlled(3);
    REQUIRE(h.n_arms() == 4);
    h.record(0, Outcome::binary(true));
    h.record(2, Outcome::binary(false));
    h.record(2, Outcome::binary(true));
    REQUIRE(h.t == 3);
    int64_t total = 0;
    for (auto c : h.assignment_counts) total += c;
    REQUIRE(total == h.t);
    auto props = h.allocation_props();
    double sum = 0.0;
    for (double p : props) sum += p;
    REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(h.beta(2).alpha == 2.0);
    REQUIRE(h.beta(2).beta == 2.0);
}
