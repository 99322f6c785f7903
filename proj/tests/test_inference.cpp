#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "bud/infer.hpp"
#include "bud/rng.hpp"

using namespace bud;

namespace {

// hypergeometric pmf by stable recursion, an oracle independent of the
// log-binomial path used by the implementation
std::vector<double> hypergeom_pmf(int64_t N, int64_t R, int64_t n) {
    int64_t lo = std::max<int64_t>(0, n + R - N), hi = std::min(n, R);
    std::vector<double> pmf(hi - lo + 1, 0.0);
    // ratio recurrence from x = lo, normalized at the end
    std::vector<long double> w(hi - lo + 1);
    w[0] = 1.0L;
    for (int64_t x = lo; x < hi; ++x) {
        long double ratio = (static_cast<long double>(n - x) * (R - x)) /
                            (static_cast<long double>(x + 1) * (N - R - n + x + 1));
        w[x - lo + 1] = w[x - lo] * ratio;
    }
    long double total = 0.0L;
    for (auto v : w) total += v;
    for (size_t i = 0; i < w.size(); ++i) pmf[i] = static_cast<double>(w[i] / total);
    return pmf;
}

}  // namespace

TEST_CASE("fisher exact spec values", "[inference]") {
    // arm 5/5 vs control 0/5 -> 1/C(10,5)
    REQUIRE(fisher_exact_one_sided({5, 0, 0, 5}) ==
            Catch::Approx(1.0 / 252.0).epsilon(1e-12));
    // identical tiny proportions: p > 0.5
    REQUIRE(fisher_exact_one_sided({1, 1, 1, 1}) > 0.5);
    // wrong direction: no tail mass beyond the observed table
    REQUIRE(fisher_exact_one_sided({0, 5, 5, 0}) == 1.0);
    // empty margins -> p = 1 by convention
    REQUIRE(fisher_exact_one_sided({0, 0, 0, 0}) == 1.0);
    REQUIRE(fisher_exact_one_sided({0, 3, 0, 7}) == 1.0);
}

TEST_CASE("fisher p-values match enumeration for all margins up to 30",
          "[inference][properties]") {
    for (int64_t N = 2; N <= 30; N += 1) {
        for (int64_t n = 1; n < N; n += 3) {
            for (int64_t R = 1; R < N; R += 3) {
                int64_t lo = std::max<int64_t>(0, n + R - N), hi = std::min(n, R);
                auto pmf = hypergeom_pmf(N, R, n);
                for (int64_t x = lo; x <= hi; ++x) {
                    double tail = 0.0;
                    for (int64_t y = x; y <= hi; ++y) tail += pmf[y - lo];
                    TwoByTwo t{x, n - x, R - x, (N - n) - (R - x)};
                    REQUIRE(fisher_exact_one_sided(t) == Catch::Approx(tail).margin(1e-10));
                }
            }
        }
    }
}

TEST_CASE("bootstrap threshold calibration", "[inference]") {
    // threshold is monotone decreasing in the level
    RngStream rng(606, 0, Sub::Analysis);
    std::vector<double> stats(2000);
    for (auto& s : stats) s = rng.normal();
    auto t10 = bootstrap_threshold(stats, 0.10);
    auto t05 = bootstrap_threshold(stats, 0.05);
    auto t20 = bootstrap_threshold(stats, 0.20);
    REQUIRE(t05.threshold > t10.threshold);
    REQUIRE(t10.threshold > t20.threshold);
    REQUIRE_FALSE(t10.unstable_quantile);
    REQUIRE(bootstrap_threshold({0.1, 0.5, 0.9}, 0.1).unstable_quantile);

    // self-calibration: rejection rate on fresh null draws ~ level
    int rejects = 0;
    const int M = 20000;
    for (int i = 0; i < M; ++i)
        if (bootstrap_reject(rng.normal(), t10)) ++rejects;
    REQUIRE(std::abs(rejects / static_cast<double>(M) - 0.10) < 0.015);
}

TEST_CASE("effect estimates and shrinkage", "[inference]") {
    TrialHistory h = fresh_controlled(2);
    for (int i = 0; i < 6; ++i) h.record(0, Outcome::binary(i % 2 == 0));
    for (int i = 0; i < 4; ++i) h.record(1, Outcome::binary(true));
    for (int i = 0; i < 4; ++i) h.record(2, Outcome::binary(false));
    auto est = effect_estimates(h);
    REQUIRE(est.raw[0] == Catch::Approx(1.0 - 0.5).epsilon(1e-12));
    REQUIRE(est.raw[1] == Catch::Approx(0.0 - 0.5).epsilon(1e-12));
    REQUIRE(est.posterior_mean[0] == Catch::Approx(5.0 / 6.0 - 0.5).epsilon(1e-12));

    // degenerate posterior at the truth: zero squared error
    TrialHistory big = fresh_controlled(1);
    std::get<BetaArm>(big.arms[0]) = BetaArm{4e8, 6e8};
    std::get<BetaArm>(big.arms[1]) = BetaArm{4e8, 6e8};
    auto est2 = effect_estimates(big);
    REQUIRE(sq(est2.posterior_mean[0] - 0.0) == Catch::Approx(0.0).margin(1e-12));

    // exact enumeration: posterior-mean MSE <= raw MSE at theta = 0.5, n <= 20
    for (int n = 1; n <= 20; ++n) {
        double mse_pm = 0.0, mse_raw = 0.0;
        for (int s = 0; s <= n; ++s) {
            double pmf = std::exp(log_binomial(n, s) - n * std::log(2.0));
            mse_pm += pmf * sq((s + 1.0) / (n + 2.0) - 0.5);
            mse_raw += pmf * sq(static_cast<double>(s) / n - 0.5);
        }
        REQUIRE(mse_pm <= mse_raw);
    }
}
