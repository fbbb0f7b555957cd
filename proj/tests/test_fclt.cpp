#include <doctest.h>

#include <cmath>
#include <vector>

#include "abandonq/error.hpp"
#include "abandonq/fclt.hpp"
#include "abandonq/stats.hpp"
#include "oracles.hpp"

using namespace abandonq;

namespace {

SuperpositionConfig sup(int n, double gamma, DistSpec f, std::vector<double> grid, int reps,
                        std::uint64_t seed = 1) {
    SuperpositionConfig c;
    c.n = n;
    c.gamma = gamma;
    c.interrenewal = f;
    c.t_grid = std::move(grid);
    c.replications = reps;
    c.seed = seed;
    return c;
}

// |estimate - target| within four standard errors of the sample variance
void check_variance(const ScaledPathSample& s, std::size_t k, double target) {
    CHECK_MESSAGE(std::abs(s.var[k] - target) < 4.0 * s.se_var[k],
                  "t=" << s.t_grid[k] << " var=" << s.var[k] << " target=" << target << " se=" << s.se_var[k]);
}

}  // namespace

TEST_SUITE("fclt") {

TEST_CASE("Poisson superposition has variance mu t at any scale") {
    for (auto [n, gamma] : {std::pair{3, 0.5}, std::pair{50, 4.0}}) {
        const auto s = simulate_superposition(sup(n, gamma, exponential(0.5), {0.5, 1.0, 2.0}, 4000, 2));
        for (std::size_t k = 0; k < s.t_grid.size(); ++k) check_variance(s, k, 2.0 * s.t_grid[k]);
    }
}

TEST_CASE("small-case exact variances") {
    // Erlang2 (mean 1) stationary renewal count variance, per stream, then scaled by 1/gamma
    const double gamma = 0.7;
    const auto e = simulate_superposition(sup(3, gamma, erlang2(1.0), {0.5, 1.0, 3.0}, 6000, 3));
    for (std::size_t k = 0; k < e.t_grid.size(); ++k)
        check_variance(e, k, oracle::erlang2_stationary_count_var(gamma * e.t_grid[k]) / gamma);

    // Deterministic period 1, uniform phase: variance f(1 - f) with f the fractional part
    const double g2 = 10.3;
    const auto d = simulate_superposition(sup(4, g2, deterministic(1.0), {1.0}, 6000, 4));
    const double target = oracle::deterministic_stationary_count_var(g2) / g2;
    CHECK(target == doctest::Approx(0.21 / 10.3).epsilon(1e-9));
    check_variance(d, 0, target);
    for (long long c : d.counts) {
        CHECK(c >= 4 * 10);
        CHECK(c <= 4 * 11);
    }
}

TEST_CASE("deterministic variance vanishes as gamma grows") {
    double prev = 1e9;
    for (double g : {1.5, 15.5, 150.5}) {
        const auto s = simulate_superposition(sup(10, g, deterministic(1.0), {1.0}, 1000, 5));
        CHECK(s.var[0] < prev);
        CHECK(s.var[0] == doctest::Approx(0.25 / g).epsilon(0.15));
        prev = s.var[0];
    }
}

TEST_CASE("Erlang2 n=200 gamma=50: variance at t=1 near the Brownian limit 0.5") {
    const auto s = simulate_superposition(sup(200, 50.0, erlang2(1.0), {0.25, 0.5, 1.0}, 2000, 6));
    CHECK(std::abs(s.var[2] - 0.5) < 0.05);
    for (std::size_t k = 0; k < s.t_grid.size(); ++k) {
        CHECK(std::abs(s.mean[k]) < 3.0 * s.se_mean[k]);
        CHECK(s.var[k] / s.t_grid[k] == doctest::Approx(0.5).epsilon(0.12));
    }
    // unscaled counts are nondecreasing in t
    for (int r = 0; r < s.replications; ++r)
        for (std::size_t k = 1; k < s.t_grid.size(); ++k) CHECK(s.counts[r * 3 + k] >= s.counts[r * 3 + k - 1]);

    const BrownianReport rep = brownian_tests(s, erlang2(1.0), 0.5, 1.0);
    CHECK(std::abs(rep.increment_correlation) < 0.05);
    CHECK(rep.slope == doctest::Approx(0.5).epsilon(0.1));
    for (const auto& p : rep.per_time) CHECK(p.ad_p_value > 0.001);
}

TEST_CASE("Erlang2 without time scaling keeps increments dependent") {
    const auto s = simulate_superposition(sup(200, 1.0, erlang2(1.0), {0.5, 1.0}, 2000, 7));
    const BrownianReport rep = brownian_tests(s, erlang2(1.0), 0.5, 1.0);
    CHECK(rep.increment_correlation < -0.1);
    CHECK(rep.permutation_p_value < 0.01);
}

TEST_CASE("exponential slope") {
    const auto s = simulate_superposition(sup(100, 10.0, exponential(1.0), {0.5, 1.0, 1.5, 2.0}, 2000, 8));
    const BrownianReport rep = brownian_tests(s, exponential(1.0), 0.5, 1.0);
    CHECK(rep.expected_slope == 1.0);
    CHECK(rep.slope == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("non-stationary start shifts the mean") {
    // fresh Erlang2 start: E[N(tau)] = tau - (1 - e^{-4 tau}) / 4 per stream
    SuperpositionConfig c = sup(200, 50.0, erlang2(1.0), {0.25}, 1000, 9);
    c.stationary_start = false;
    const auto s = simulate_superposition(c);
    const double expected = -200.0 * (1.0 - std::exp(-4.0 * 12.5)) / 4.0 / std::sqrt(200.0 * 50.0);
    CHECK(expected == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(std::abs(s.mean[0] - expected) < 4.0 * s.se_mean[0]);
    CHECK(std::abs(s.mean[0]) > 10.0 * s.se_mean[0]);
}

TEST_CASE("FSLLN") {
    const FsllnResult big = fslln_check(sup(1000, 100.0, erlang2(1.0), {0.5, 1.0, 1.5, 2.0}, 40, 10));
    CHECK(big.max < 0.02);
    const FsllnResult small = fslln_check(sup(500, 100.0, erlang2(1.0), {0.5, 1.0, 1.5, 2.0}, 200, 11));
    const FsllnResult large = fslln_check(sup(1000, 100.0, erlang2(1.0), {0.5, 1.0, 1.5, 2.0}, 200, 12));
    CHECK(large.median / small.median == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("serial and parallel agree") {
    const auto c = sup(20, 5.0, lognormal(1.0, 1.52), {0.5, 1.0}, 100, 13);
    const auto a = simulate_superposition(c, Exec::Serial);
    const auto b = simulate_superposition(c, Exec::Parallel);
    CHECK(a.counts == b.counts);
    CHECK(a.paths == b.paths);
}

TEST_CASE("errors") {
    SuperpositionConfig c = sup(1000, 1000.0, exponential(1.0), {1.0}, 10);
    c.event_cap = 1e5;
    try {
        simulate_superposition(c);
        FAIL("expected MemoryBudgetExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MemoryBudgetExceeded);
    }
    const auto s = simulate_superposition(sup(5, 1.0, exponential(1.0), {0.5, 1.0}, 100));
    try {
        brownian_tests(s, exponential(1.0), 0.5, 1.0);
        FAIL("expected InsufficientReplications");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InsufficientReplications);
    }
    CHECK_THROWS_AS(validate(sup(5, 1.0, exponential(1.0), {0.0, 1.0}, 10)), Error);
    CHECK_THROWS_AS(validate(sup(5, 1.0, exponential(1.0), {1.0, 0.5}, 10)), Error);
}

}  // TEST_SUITE
