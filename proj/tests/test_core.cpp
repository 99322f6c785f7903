#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "bud/quad.hpp"
#include "bud/rng.hpp"
#include "bud/special.hpp"

using namespace bud;

TEST_CASE("philox streams are deterministic and distinct", "[rng]") {
    RngStream a(42, 7, Sub::Outcome);
    RngStream b(42, 7, Sub::Outcome);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream c(42, 7, Sub::Assignment);
    RngStream d(42, 8, Sub::Outcome);
    RngStream e(43, 7, Sub::Outcome);
    std::set<uint64_t> firsts{RngStream(42, 7, Sub::Outcome).next_u64(), c.next_u64(),
                              d.next_u64(), e.next_u64()};
    REQUIRE(firsts.size() == 4);
}

TEST_CASE("u01 and scalar distributions look sane", "[rng]") {
    RngStream r(1234, 0, Sub::MetricMc);
    const int n = 200000;
    double mean = 0.0, mn = 1.0, mx = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = r.u01();
        mean += u;
        mn = std::min(mn, u);
        mx = std::max(mx, u);
    }
    mean /= n;
    REQUIRE(mean == Catch::Approx(0.5).margin(0.005));
    REQUIRE(mn >= 0.0);
    REQUIRE(mx < 1.0);

    // gamma(3) has mean 3, var 3
    double gm = 0.0, gv = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = r.gamma(3.0);
        gm += g;
        gv += g * g;
    }
    gm /= n;
    gv = gv / n - gm * gm;
    REQUIRE(gm == Catch::Approx(3.0).margin(0.03));
    REQUIRE(gv == Catch::Approx(3.0).margin(0.1));

    // beta(2,3) mean 0.4
    double bm = 0.0;
    for (int i = 0; i < n; ++i) bm += r.beta(2.0, 3.0);
    REQUIRE(bm / n == Catch::Approx(0.4).margin(0.005));
}

TEST_CASE("categorical frequencies match probabilities", "[rng]") {
    RngStream r(99, 3, Sub::Assignment);
    std::vector<double> p{0.5, 0.3, 0.2};
    std::vector<int> counts(3, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[r.categorical(p)];
    for (int k = 0; k < 3; ++k) {
        double se = std::sqrt(p[k] * (1 - p[k]) / n);
        REQUIRE(std::abs(counts[k] / static_cast<double>(n) - p[k]) < 3 * se);
    }
}

TEST_CASE("gauss-legendre integrates polynomials exactly", "[quad]") {
    // degree 2n-1 exactness
    auto f = [](double x) { return 7.0 * std::pow(x, 9) - 3.0 * x * x + 1.0; };
    double expected = 7.0 / 10.0 - 1.0 + 1.0;
    REQUIRE(gl_integrate(f, 0.0, 1.0, 5) == Catch::Approx(expected).epsilon(1e-13));

    auto g = [](double x) { return std::exp(-x) * std::sin(5 * x); };
    double exact = (5.0 - std::exp(-1.0) * (std::sin(5.0) + 5.0 * std::cos(5.0))) / 26.0;
    REQUIRE(adaptive_gl(g, 0.0, 1.0, 1e-12) == Catch::Approx(exact).epsilon(1e-10));
}

TEST_CASE("unit grid simpson rule", "[quad]") {
    UnitGrid g(1025);
    std::vector<double> f(g.size());
    for (size_t i = 0; i < g.size(); ++i) f[i] = g.x[i] * g.x[i];
    REQUIRE(grid_integrate(g, f) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    // even request is bumped to odd
    REQUIRE(UnitGrid(1024).size() == 1025);
}

TEST_CASE("special functions", "[special]") {
    REQUIRE(log_binomial(10, 5) == Catch::Approx(std::log(252.0)).epsilon(1e-12));
    REQUIRE(beta_cdf(0.5, 1.0, 1.0) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(beta_variance(1.0, 1.0) == Catch::Approx(1.0 / 12.0).epsilon(1e-12));
    REQUIRE(beta_pdf(0.25, 2.0, 2.0) == Catch::Approx(6.0 * 0.25 * 0.75).epsilon(1e-12));
}

TEST_CASE("exact beta comparison orientation", "[special]") {
    // P(Beta(2,1) > Beta(1,1)) = 2/3
    REQUIRE(beta_prob_greater_exact(2, 1, 1, 1) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(beta_prob_greater_exact(1, 1, 2, 1) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    REQUIRE(beta_prob_greater_exact(3, 3, 3, 3) == Catch::Approx(0.5).epsilon(1e-12));
}
