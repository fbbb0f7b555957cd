#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "abandonq/rng.hpp"
#include "abandonq/stats.hpp"

using namespace abandonq;

TEST_SUITE("rng") {

TEST_CASE("stream tuples are reproducible") {
    RngStream a(5, Stream::Arrivals, 3, 1), b(5, Stream::Arrivals, 3, 1);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different tuples give different sequences") {
    std::set<std::uint64_t> first;
    for (std::uint64_t seed : {1u, 2u})
        for (auto s : {Stream::Arrivals, Stream::Services, Stream::Patiences, Stream::Probes})
            for (std::uint64_t rep = 0; rep < 8; ++rep) first.insert(RngStream(seed, s, rep).next_u64());
    CHECK(first.size() == 2 * 4 * 8);
}

TEST_CASE("drawing from one stream does not shift another") {
    StreamSet s1 = StreamSet::for_replication(42, 7);
    StreamSet s2 = StreamSet::for_replication(42, 7);
    for (int i = 0; i < 500; ++i) s1.arrivals.uniform();
    for (int i = 0; i < 100; ++i) CHECK(s1.services.uniform() == s2.services.uniform());
}

TEST_CASE("uniform stays in the open unit interval") {
    RngStream r(1, Stream::Sampling);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int m = 1'000'000;
    for (int i = 0; i < m; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(std::abs(sum / m - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / m));
}

TEST_CASE("standard normal draws pass KS") {
    RngStream r(2, Stream::Sampling);
    std::vector<double> z(200'000);
    for (double& x : z) x = r.normal();
    CHECK(stats::ks_statistic(z, stats::normal_cdf) < stats::ks_critical(z.size(), 0.01));
}

}  // TEST_SUITE

TEST_SUITE("stats") {

TEST_CASE("normal functions match tabulated values") {
    CHECK(stats::normal_cdf(0.0) == 0.5);
    CHECK(stats::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
    CHECK(stats::normal_sf(8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-12));
    CHECK(stats::normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    for (double z : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
        CHECK(stats::normal_cdf(z) + stats::normal_sf(z) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(stats::normal_cdf(z) + stats::normal_cdf(-z) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("t and chi-squared quantiles") {
    CHECK(stats::student_t_quantile(0.975, 9) == doctest::Approx(2.262157162).epsilon(1e-8));
    CHECK(stats::student_t_quantile(0.975, 29) == doctest::Approx(2.045229642).epsilon(1e-8));
    CHECK(stats::chi_squared_quantile(0.99, 1) == doctest::Approx(6.634896601).epsilon(1e-8));
}

TEST_CASE("moments and half-width") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(stats::mean(x) == 3.0);
    CHECK(stats::variance(x) == 2.5);
    // t_{0.975,4} = 2.776445105
    CHECK(stats::half_width_95(x) == doctest::Approx(2.776445105 * std::sqrt(2.5 / 5.0)).epsilon(1e-8));
    const std::vector<double> y{2.0, 4.0, 6.0, 8.0, 10.0};
    CHECK(stats::correlation(x, y) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(stats::slope_through_origin(x, y) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("KS statistic on a tiny sample") {
    // Uniform CDF, sample {0.1, 0.5, 0.9}: largest gap is at 0.9 -> 1 - 0.9 = 0.1, or 1/3 - 0.1
    const double d = stats::ks_statistic({0.1, 0.5, 0.9}, [](double t) { return t; });
    CHECK(d == doctest::Approx(1.0 / 3.0 - 0.1).epsilon(1e-14));
    CHECK(stats::ks_critical(100, 0.05) == doctest::Approx(std::sqrt(-std::log(0.025) / 2.0) / 10.0).epsilon(1e-14));
}

TEST_CASE("Anderson-Darling separates normal from exponential samples") {
    RngStream r(9, Stream::Sampling);
    std::vector<double> z(2000), e(2000);
    for (double& v : z) v = r.normal();
    for (double& v : e) v = -std::log(r.uniform());
    CHECK(stats::anderson_darling_normal(z).p_value > 0.01);
    CHECK(stats::anderson_darling_normal(e).p_value < 1e-4);
}

TEST_CASE("permutation p-value") {
    RngStream r(10, Stream::Sampling);
    std::vector<double> x(500), y(500), w(500);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = r.normal();
        y[i] = r.normal();
        w[i] = x[i] + 0.5 * r.normal();
    }
    CHECK(stats::permutation_correlation_pvalue(x, w, 999, 1) <= 0.002);
    CHECK(stats::permutation_correlation_pvalue(x, y, 999, 1) > 0.001);
}

}  // TEST_SUITE
