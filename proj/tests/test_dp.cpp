#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "bud/dp.hpp"
#include "bud/metric.hpp"
#include "bud/rng.hpp"

using namespace bud;

namespace {

// raw controlled variance-sum terminal utility on lattice counts
// (arm cells: [2a] successes, [2a+1] failures; arm 0 is the control)
double variance_sum_terminal(const std::vector<int>& c) {
    size_t arms = c.size() / 2;
    double ctrl = beta_variance(1.0 + c[0], 1.0 + c[1]);
    double acc = 0.0;
    for (size_t a = 1; a < arms; ++a)
        acc -= beta_variance(1.0 + c[2 * a], 1.0 + c[2 * a + 1]) + ctrl;
    return acc;
}

// exhaustive action/outcome tree, the independent oracle for small cases
double enum_value(std::vector<int>& c, int t, int T, int n_arms, int n_outcomes,
                  const std::vector<double>& pseudo,
                  const std::function<double(const std::vector<int>&)>& terminal) {
    if (t == T) return terminal(c);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_arms; ++a) {
        double denom = 0.0;
        for (int y = 0; y < n_outcomes; ++y) denom += pseudo[a * n_outcomes + y] + c[a * n_outcomes + y];
        double ev = 0.0;
        for (int y = 0; y < n_outcomes; ++y) {
            int i = a * n_outcomes + y;
            double pred = (pseudo[i] + c[i]) / denom;
            ++c[i];
            ev += pred * enum_value(c, t + 1, T, n_arms, n_outcomes, pseudo, terminal);
            --c[i];
        }
        best = std::max(best, ev);
    }
    return best;
}

}  // namespace

TEST_CASE("lattice state counts match the paper's arithmetic", "[dp]") {
    // two-arm binary bandit, horizon 50: C(54,4) = 316,251 configurations
    Lattice lat(4, 50);
    REQUIRE(lat.total_states(50) == 316251);
    REQUIRE(Lattice(4, 100).total_states(100) == 4598126);  // doubling the sample size
}

TEST_CASE("lattice rank/unrank is a bijection", "[dp]") {
    Lattice lat(5, 9);
    for (int t : {0, 1, 4, 9}) {
        uint64_t n = lat.states_at(t);
        std::vector<bool> seen(n, false);
        lat.for_each_state(t, 1, [&](uint64_t r, const std::vector<int>& c) {
            int sum = 0;
            for (int v : c) sum += v;
            REQUIRE(sum == t);
            REQUIRE(lat.rank(c) == r);
            REQUIRE_FALSE(seen[r]);
            seen[r] = true;
            REQUIRE(lat.unrank(t, r) == c);
        });
        for (uint64_t r = 0; r < n; ++r) REQUIRE(seen[r]);
    }
    // parallel iteration covers the same states
    Lattice big(6, 12);
    std::atomic<uint64_t> count{0};
    big.for_each_state(12, 2, [&](uint64_t, const std::vector<int>&) { ++count; });
    REQUIRE(count.load() == big.states_at(12));
}

TEST_CASE("backward induction spec values", "[dp]") {
    std::vector<double> pseudo{1, 1, 1, 1};

    // T=0: root equals the prior utility
    auto r0 = backward_induction(2, 2, pseudo, 0, variance_sum_terminal);
    REQUIRE(r0.root_value == Catch::Approx(-2.0 / 12.0).epsilon(1e-12));

    // T=1, K+1=2 arms, raw variance-sum: -2/12 + 1/36 = -5/36
    auto r1 = backward_induction(2, 2, pseudo, 1, variance_sum_terminal);
    REQUIRE(r1.root_value == Catch::Approx(-5.0 / 36.0).epsilon(1e-12));
}

TEST_CASE("BI root matches exhaustive path enumeration", "[dp][properties]") {
    for (int n_arms : {2, 3}) {
        std::vector<double> pseudo(2 * n_arms, 1.0);
        for (int T = 1; T <= 4; ++T) {
            auto bi = backward_induction(n_arms, 2, pseudo, T, variance_sum_terminal);
            std::vector<int> c(2 * n_arms, 0);
            double oracle = enum_value(c, 0, T, n_arms, 2, pseudo, variance_sum_terminal);
            REQUIRE(bi.root_value == Catch::Approx(oracle).epsilon(1e-13));
        }
    }
    // co-primary-shaped lattice (4 outcomes) against the same oracle
    std::vector<double> pseudo(2 * 4, 1.0);
    auto term = [](const std::vector<int>& c) {
        double acc = 0.0;
        for (size_t a = 0; a < 2; ++a) {
            double tot = 4.0, first = 1.0 + c[a * 4 + 0];
            for (int y = 0; y < 4; ++y) tot += c[a * 4 + y];
            acc -= beta_variance(first, tot - first);
        }
        return acc;
    };
    auto bi = backward_induction(2, 4, pseudo, 3, term);
    std::vector<int> c(8, 0);
    std::function<double(const std::vector<int>&)> term_fn = term;
    double oracle = enum_value(c, 0, 3, 2, 4, pseudo, term_fn);
    REQUIRE(bi.root_value == Catch::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("Bellman consistency on random states", "[dp][properties]") {
    std::vector<double> pseudo{1, 1, 1, 1, 1, 1};
    const int T = 6;
    BiOptions opts;
    opts.keep_all_stages = true;
    auto bi = backward_induction(3, 2, pseudo, T, variance_sum_terminal, opts);
    Lattice lat(6, T);
    RngStream rng(808, 0, Sub::MetricMc);
    for (int rep = 0; rep < 1000; ++rep) {
        int t = static_cast<int>(rng.uniform_int(T));  // stage < T
        uint64_t r = rng.uniform_int(static_cast<uint32_t>(lat.states_at(t)));
        auto c = lat.unrank(t, r);
        double best = -1e300;
        for (int a = 0; a < 3; ++a) {
            double denom = 2.0;
            for (int y = 0; y < 2; ++y) denom += c[2 * a + y];
            double ev = 0.0;
            for (int y = 0; y < 2; ++y) {
                auto nxt = c;
                ++nxt[2 * a + y];
                ev += ((1.0 + c[2 * a + y]) / denom) * bi.stage_values[t + 1][lat.rank(nxt)];
            }
            REQUIRE(bi.stage_values[t][r] >= ev - 1e-12);
            best = std::max(best, ev);
        }
        REQUIRE(bi.stage_values[t][r] == Catch::Approx(best).margin(1e-12));
    }
}

TEST_CASE("budget errors name the state count", "[dp]") {
    std::vector<double> pseudo(8, 1.0);
    BiOptions opts;
    opts.max_stage_states = 1000;
    REQUIRE_THROWS_AS(backward_induction(4, 2, pseudo, 20, variance_sum_terminal, opts),
                      budget_error);
    try {
        backward_induction(4, 2, pseudo, 20, variance_sum_terminal, opts);
    } catch (const budget_error& e) {
        REQUIRE(std::string(e.what()).find("888030") != std::string::npos);
    }
}

TEST_CASE("oracle allocation", "[dp]") {
    // control only
    auto solo = oracle_allocation_variance_sum({0.4}, 17);
    REQUIRE(solo.quotas == std::vector<int64_t>{17});

    // symmetric scenario: control share strictly largest (enters every effect)
    auto sym = oracle_allocation_variance_sum({0.4, 0.4, 0.4, 0.4}, 20);
    for (size_t a = 1; a < 4; ++a) REQUIRE(sym.quotas[0] > sym.quotas[a]);
    int64_t total = 0;
    for (auto q : sym.quotas) total += q;
    REQUIRE(total == 20);

    // exhaustive enumeration of compositions at T=20 confirms the DP optimum
    double best_cost = 1e300;
    for (int n0 = 0; n0 <= 20; ++n0)
        for (int n1 = 0; n1 + n0 <= 20; ++n1)
            for (int n2 = 0; n1 + n0 + n2 <= 20; ++n2) {
                int n3 = 20 - n0 - n1 - n2;
                double cost = 3.0 * expected_posterior_variance_binary(n0, 0.4, 1, 1) +
                              expected_posterior_variance_binary(n1, 0.4, 1, 1) +
                              expected_posterior_variance_binary(n2, 0.4, 1, 1) +
                              expected_posterior_variance_binary(n3, 0.4, 1, 1);
                best_cost = std::min(best_cost, cost);
            }
    REQUIRE(sym.expected_cost == Catch::Approx(best_cost).epsilon(1e-12));

    // T=2, one experimental arm, equal rates: (1,1) is optimal
    auto two = oracle_allocation_variance_sum({0.5, 0.5}, 2);
    REQUIRE(two.quotas == std::vector<int64_t>{1, 1});
}

TEST_CASE("separable oracle costs match brute-force simulation", "[dp][properties][slow]") {
    // every composition of T=12 over K+1=3 arms, MC-evaluated
    const double theta[3] = {0.5, 0.3, 0.7};
    RngStream rng(4242, 0, Sub::Outcome);
    const int reps = 4000;
    for (int n0 = 0; n0 <= 12; n0 += 3)
        for (int n1 = 0; n0 + n1 <= 12; n1 += 3) {
            int n2 = 12 - n0 - n1;
            int n[3] = {n0, n1, n2};
            double exact = 0.0;
            for (int a = 0; a < 3; ++a) {
                double w = (a == 0) ? 2.0 : 1.0;
                exact += w * expected_posterior_variance_binary(n[a], theta[a], 1, 1);
            }
            double acc = 0.0, acc2 = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                double cost = 0.0;
                for (int a = 0; a < 3; ++a) {
                    int s = 0;
                    for (int i = 0; i < n[a]; ++i) s += rng.bernoulli(theta[a]) ? 1 : 0;
                    double w = (a == 0) ? 2.0 : 1.0;
                    cost += w * beta_variance(1.0 + s, 1.0 + n[a] - s);
                }
                acc += cost;
                acc2 += cost * cost;
            }
            double mean = acc / reps;
            double se = std::sqrt(std::max(0.0, acc2 / reps - mean * mean) / reps);
            REQUIRE(std::abs(mean - exact) < 3 * se + 1e-9);
        }
}

TEST_CASE("asymptotic limit", "[dp]") {
    auto flat = asymptotic_limit({2.0, 1.0, 0.5}, 0.0);
    for (double v : flat) REQUIRE(v == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

    auto neyman = asymptotic_limit({2.0, 1.0}, 1e9);
    REQUIRE(neyman[0] == Catch::Approx(2.0 / 3.0).margin(1e-6));
    REQUIRE(neyman[1] == Catch::Approx(1.0 / 3.0).margin(1e-6));

    // h=3, outcome variances (2, 2, 1.5, 0.5): sigma^(6/7) normalized
    std::vector<double> sig{std::sqrt(2.0), std::sqrt(2.0), std::sqrt(1.5), std::sqrt(0.5)};
    auto rho = asymptotic_limit(sig, 3.0);
    REQUIRE(rho[0] == Catch::Approx(0.2911).margin(5e-4));
    REQUIRE(rho[1] == Catch::Approx(0.2911).margin(5e-4));
    REQUIRE(rho[2] == Catch::Approx(0.2573).margin(5e-4));
    REQUIRE(rho[3] == Catch::Approx(0.1607).margin(5e-4));
}

TEST_CASE("regret clamps at zero", "[dp]") {
    REQUIRE(regret(1.0, 1.0) == 0.0);
    REQUIRE(regret(1.0, 1.2) == 0.0);
    REQUIRE(regret(1.0, 0.4) == Catch::Approx(0.6));
}
