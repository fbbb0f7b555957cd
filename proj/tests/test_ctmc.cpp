#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "abandonq/ctmc.hpp"
#include "abandonq/des.hpp"
#include "abandonq/diffusion.hpp"
#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"
#include "oracles.hpp"

using namespace abandonq;

namespace {

const DistSpec kH2 = hyperexp2(0.6741, 0.1484, 2.761);

double row_sum(const Generator& g, long r) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, r); it; ++it) s += it.value();
    return s;
}

}  // namespace

TEST_SUITE("ctmc") {

TEST_CASE("two-state toy generator") {
    const double a = 0.3, b = 1.7;
    Eigen::SparseMatrix<double, Eigen::RowMajor> Q(2, 2);
    Q.insert(0, 0) = -a;
    Q.insert(0, 1) = a;
    Q.insert(1, 0) = b;
    Q.insert(1, 1) = -b;
    double res = 1.0;
    const auto pi = stationary_vector(Q, &res);
    CHECK(pi[0] == doctest::Approx(b / (a + b)).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(a / (a + b)).epsilon(1e-14));
    CHECK(res < 1e-14);
}

TEST_CASE("reducible generator is singular") {
    Eigen::SparseMatrix<double, Eigen::RowMajor> Q(3, 3);
    Q.insert(0, 0) = -1.0;
    Q.insert(0, 1) = 1.0;
    Q.insert(1, 0) = 1.0;
    Q.insert(1, 1) = -1.0;
    // state 2 is absorbing and unreachable: two closed classes
    try {
        stationary_vector(Q);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK((e.code() == Errc::SingularSystem || e.code() == Errc::NonConvergence));
    }
}

TEST_CASE("n=1 H2 chain with L=3 matches the brute-force enumeration") {
    CTMCModel m = make_h2_model(1, 1.2, 1.0, kH2, 3);
    CHECK(m.state_count() == 7);  // levels 0..1 hold 1 + 2 states; levels 2, 3 hold 2 each
    const Generator g = build_generator(m, false);
    const auto ref = oracle::h2_generator(1, 1.2, 1.0, 0.6741, 1 / 0.1484, 1 / 2.761, 3);
    REQUIRE(static_cast<long>(ref.size()) == m.state_count());
    for (const auto& [from, row] : ref) {
        const long r = m.index(from.first, from.second);
        CHECK(g.level[r] == from.first);
        CHECK(g.k1[r] == from.second);
        for (const auto& [to, rate] : row) {
            CHECK(g.Q.coeff(r, m.index(to.first, to.second)) == doctest::Approx(rate).epsilon(1e-14));
        }
        long nnz = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, r); it; ++it) ++nnz;
        long ref_nnz = 0;
        for (const auto& kv : row) ref_nnz += kv.second != 0.0;
        CHECK(nnz == ref_nnz);
    }
    CHECK(g.dropped_arrival_rate == 1.2);
}

TEST_CASE("larger H2 chain matches the brute-force enumeration") {
    CTMCModel m = make_h2_model(6, 7.0, 0.5, kH2, 20);
    const Generator g = build_generator(m, false);
    const auto ref = oracle::h2_generator(6, 7.0, 0.5, 0.6741, 1 / 0.1484, 1 / 2.761, 20);
    REQUIRE(static_cast<long>(ref.size()) == m.state_count());
    for (const auto& [from, row] : ref)
        for (const auto& [to, rate] : row)
            CHECK(g.Q.coeff(m.index(from.first, from.second), m.index(to.first, to.second)) ==
                  doctest::Approx(rate).epsilon(1e-13));
}

TEST_CASE("generator structure for the n=100 model") {
    const CTMCModel m = make_h2_model(100, 120.0, 10.0, kH2);
    CHECK(m.truncation >= 100 + static_cast<long>(std::ceil(200.0 + 10.0 * std::sqrt(2700.0))));
    const Generator g = build_generator(m);
    CHECK(g.Q.rows() == m.state_count());
    CHECK(g.tail_mass_estimate <= 1e-8);
    for (long r = 0; r < g.Q.rows(); ++r) {
        CHECK(std::abs(row_sum(g, r)) < 1e-12 * std::max(1.0, -g.Q.coeff(r, r)));
        long nnz = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, r); it; ++it) {
            ++nnz;
            if (it.col() != r) CHECK(it.value() >= 0.0);
        }
        CHECK(nnz <= 6);  // diagonal plus at most five transitions
        if (nnz > 6) break;
    }
}

TEST_CASE("truncation too small is rejected") {
    try {
        build_generator(make_erlang_a_model(100, 120.0, 1.0, 10.0, 250));
        FAIL("expected TruncationTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TruncationTooSmall);
    }
    CHECK_THROWS_AS(build_generator(make_erlang_a_model(10, 12.0, 1.0, 1.0, 5)), Error);
    CHECK_THROWS_AS(make_h2_model(10, 12.0, 1.0, exponential(1.0)), Error);
}

TEST_CASE("Erlang-A against the birth-death product formula") {
    const CTMCModel m = make_erlang_a_model(100, 120.0, 1.0, 10.0);
    CHECK(m.state_count() == m.truncation + 1);
    const Generator g = build_generator(m);
    const StationaryDist d = solve_stationary(g, m);
    const auto ref = oracle::erlang_a_pmf(100, 120.0, 1.0, 10.0, m.truncation);
    CHECK(std::abs(d.mean() - oracle::mean_of(ref)) < 1e-8);
    double maxdiff = 0.0;
    for (std::size_t x = 0; x < ref.size(); ++x) maxdiff = std::max(maxdiff, std::abs(d.marginal[x] - ref[x]));
    CHECK(maxdiff < 1e-10);
    CHECK(d.residual < 1e-10);
    CHECK(std::accumulate(d.pi.begin(), d.pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    for (double p : d.pi) CHECK(p >= 0.0);
    CHECK(std::abs(flow_imbalance(d, g, m)) < 1e-8);
    CHECK(compare_to_gaussian(d, approximate(100, 1.0, 1.2, 10.0, 1.0, 1.0)).exact_mean == doctest::Approx(d.mean()));
}

TEST_CASE("H2 stationary distribution properties") {
    const CTMCModel m = make_h2_model(20, 24.0, 2.0, kH2);
    const Generator g = build_generator(m);
    const StationaryDist d = solve_stationary(g, m);
    CHECK(d.residual < 1e-10);
    CHECK(std::accumulate(d.pi.begin(), d.pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    // marginal is the level sum of the joint
    std::vector<double> lv(static_cast<std::size_t>(m.truncation + 1), 0.0);
    for (std::size_t s = 0; s < d.pi.size(); ++s) lv[static_cast<std::size_t>(g.level[s])] += d.pi[s];
    for (std::size_t x = 0; x < lv.size(); ++x) CHECK(lv[x] == doctest::Approx(d.marginal[x]).epsilon(1e-12));
    CHECK(std::abs(flow_imbalance(d, g, m)) < 1e-8);

    // doubling the truncation leaves E[X] unchanged
    const CTMCModel m2 = make_h2_model(20, 24.0, 2.0, kH2, 2 * m.truncation);
    const StationaryDist d2 = solve_stationary(build_generator(m2), m2);
    CHECK(std::abs(d2.mean() - d.mean()) < 1e-6);
}

TEST_CASE("abandonment fraction matches simulation of the same chain") {
    const CTMCModel m = make_h2_model(10, 12.0, 1.0, kH2);
    const Generator g = build_generator(m);
    const double exact = abandonment_fraction(solve_stationary(g, m), g, m);

    QueueModel q;
    q.servers = 10;
    q.arrival = exponential(1.0 / 12.0);
    q.service = kH2;
    q.patience = exponential(1.0);
    SimConfig c;
    c.horizon = 2e4;
    c.warmup = 2e3;
    c.replications = 10;
    c.seed = 21;
    const SimSummary s = simulate(q, c);
    const SimEstimate& e = s.get(Measure::AbdFraction);
    // half-width / t_{0.975,9} is one standard error
    const double se = e.half_width_95 / stats::student_t_quantile(0.975, 9);
    CHECK(std::abs(e.value - exact) < 3.0 * se);
}

TEST_CASE("total variation and the Gaussian comparison") {
    const std::vector<double> p{0.2, 0.3, 0.5};
    CHECK(total_variation(p, p) == 0.0);
    CHECK(total_variation(p, std::vector<double>{0.5, 0.3, 0.2}) == doctest::Approx(0.3).epsilon(1e-15));

    const CTMCModel m = make_h2_model(100, 120.0, 10.0, kH2);
    const StationaryDist d = solve_stationary(build_generator(m), m);
    const GaussianComparison c = compare_to_gaussian(d, approximate(100, 1.0, 1.2, 10.0, 1.0, m.scv()));
    CHECK(c.tv < 0.05);
    CHECK(c.approx_mean == doctest::Approx(300.0).epsilon(1e-3));
    CHECK(c.gaussian_pmf.size() == d.marginal.size());
}

}  // TEST_SUITE
