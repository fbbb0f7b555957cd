#include <doctest.h>

#include <cmath>

#include "abandonq/diffusion.hpp"
#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"

using namespace abandonq;

namespace {

Errc code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no exception");
    return Errc::ConfigError;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("M/D/100+M gamma=1 approximation row") {
    const GaussianApprox g = approximate(100, 1.0, 1.2, 1.0, 1.0, 0.0);
    CHECK(g.alpha == doctest::Approx(0.1667).epsilon(3e-4));
    CHECK(g.q == doctest::Approx(20.00).epsilon(1e-12));
    CHECK(g.sigma2_Q == doctest::Approx(70.00).epsilon(1e-12));
    CHECK(g.w == doctest::Approx(0.1823).epsilon(3e-4));
    CHECK(g.sigma2_W == doctest::Approx(0.005000).epsilon(1e-12));
}

TEST_CASE("M/LN/5+M gamma=50 approximation row") {
    const GaussianApprox g = approximate(5, 1.0, 1.2, 50.0, 1.0, 1.52);
    CHECK(g.sigma2_W == doctest::Approx(12.60).epsilon(1e-12));
    CHECK(g.w == doctest::Approx(9.116).epsilon(1e-4));
}

TEST_CASE("fields follow the closed forms") {
    const double n = 37, mu = 0.8, rho = 1.35, gamma = 4.2, cA2 = 0.6, cS2 = 2.1;
    const GaussianApprox g = approximate(37, mu, rho, gamma, cA2, cS2);
    CHECK(g.alpha == doctest::Approx((rho - 1) / rho).epsilon(1e-15));
    CHECK(g.q == doctest::Approx(n * mu * (rho - 1) * gamma).epsilon(1e-15));
    CHECK(g.ou_var == doctest::Approx(mu * (rho * cA2 + cS2 + rho - 1) / 2).epsilon(1e-15));
    CHECK(g.sigma2_Q == doctest::Approx(n * gamma * g.ou_var).epsilon(1e-15));
    CHECK(g.w == doctest::Approx(gamma * std::log(rho)).epsilon(1e-15));
    CHECK(g.sigma2_W ==
          doctest::Approx(gamma / n * (cA2 + rho * cS2 + rho - 1) / (2 * mu * rho)).epsilon(1e-15));
    // flow identity: lambda alpha = n mu (rho - 1) = q / gamma
    const double lambda = rho * n * mu;
    CHECK(lambda * g.alpha == doctest::Approx(n * mu * (rho - 1)).epsilon(1e-14));
    CHECK(g.q / gamma == doctest::Approx(n * mu * (rho - 1)).epsilon(1e-14));
}

TEST_CASE("continuity at criticality") {
    const GaussianApprox g = approximate(100, 1.0, 1.0 + 1e-12, 1.0, 1.0, 1.0);
    CHECK(g.alpha < 1e-11);
    CHECK(g.q < 1e-9);
    CHECK(g.w < 1e-11);
}

TEST_CASE("errors") {
    CHECK(code_of([] { approximate(100, 1.0, 1.0, 1.0, 1.0, 1.0); }) == Errc::NotOverloaded);
    CHECK(code_of([] { approximate(100, 1.0, 0.9, 1.0, 1.0, 1.0); }) == Errc::NotOverloaded);
    CHECK(code_of([] { approximate(0, 1.0, 1.2, 1.0, 1.0, 1.0); }) == Errc::InvalidParams);
    CHECK(code_of([] { approximate(10, 1.0, 1.2, -1.0, 1.0, 1.0); }) == Errc::InvalidParams);
    CHECK(code_of([] { patience_law(deterministic(1.0)); }) == Errc::HazardUnavailable);
}

TEST_CASE("tail examples") {
    const GaussianApprox md = approximate(100, 1.0, 1.2, 1.0, 1.0, 0.0);
    CHECK(queue_tail(md, 0.5) == doctest::Approx(0.2750).epsilon(2e-4));
    const GaussianApprox me2 = approximate(100, 1.0, 1.2, 1.0, 1.0, 0.5);
    CHECK(wait_tail(me2, 1.0) == doctest::Approx(0.1241).epsilon(4e-4));
    CHECK(queue_tail(md, 0.0) == 0.5);
    CHECK(wait_tail(md, 0.0) == 0.5);
    for (double a = -3.0; a <= 3.0; a += 0.25) {
        CHECK(queue_tail(me2, a) + queue_tail(me2, -a) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(wait_tail(me2, a) + wait_tail(me2, -a) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("state pmf") {
    const GaussianApprox h2 = approximate(100, 1.0, 1.2, 10.0, 1.0, 4.0);
    CHECK(h2.sigma2_Q == doctest::Approx(2700.0).epsilon(1e-14));
    CHECK(state_pmf(h2, 300) == doctest::Approx(0.3989422804014327 / std::sqrt(2700.0)).epsilon(1e-14));
    CHECK(state_pmf(h2, 300) == doctest::Approx(0.007677).epsilon(1e-3));
    const double sd = std::sqrt(h2.sigma2_Q);
    double sum = 0.0;
    for (long i = static_cast<long>(300 - 8 * sd); i <= static_cast<long>(300 + 8 * sd); ++i) sum += state_pmf(h2, i);
    CHECK(std::abs(sum - 1.0) < 1e-4);
}

TEST_CASE("general patience with exponential input reproduces the +M formulas") {
    const GaussianApprox a = approximate(100, 1.0, 1.2, 7.0, 1.0, 0.5);
    const GaussianApprox b = general_patience(100, 1.0, 1.2, exponential(7.0), 1.0, 0.5);
    CHECK(b.gamma == doctest::Approx(a.gamma).epsilon(1e-10));
    CHECK(b.w == doctest::Approx(a.w).epsilon(1e-10));
    CHECK(b.q == doctest::Approx(a.q).epsilon(1e-10));
    CHECK(b.alpha == doctest::Approx(a.alpha).epsilon(1e-10));
    CHECK(b.sigma2_Q == doctest::Approx(a.sigma2_Q).epsilon(1e-10));
    CHECK(b.sigma2_W == doctest::Approx(a.sigma2_W).epsilon(1e-10));
}

TEST_CASE("general patience with a uniform law") {
    // H uniform on [0, 2 gbar]: w = gbar/3, gamma = 5 gbar / 3, q = lambda (w - w^2 / (4 gbar))
    const double gbar = 3.0, rho = 1.2, n = 50, mu = 1.0;
    PatienceLaw uni{[=](double t) { return std::clamp(t / (2 * gbar), 0.0, 1.0); },
                    [=](double t) { return (t >= 0 && t <= 2 * gbar) ? 1.0 / (2 * gbar) : 0.0; },
                    2 * gbar};
    const GaussianApprox g = general_patience(50, mu, rho, uni, 1.0, 1.0);
    const double w = gbar / 3.0;
    CHECK(g.w == doctest::Approx(w).epsilon(1e-9));
    CHECK(g.gamma == doctest::Approx(5.0 * gbar / 3.0).epsilon(1e-9));
    CHECK(g.q == doctest::Approx(rho * n * mu * (w - w * w / (4 * gbar))).epsilon(1e-8));
    CHECK(g.sigma2_W == doctest::Approx(approximate(50, mu, rho, g.gamma, 1.0, 1.0).sigma2_W).epsilon(1e-12));
}

TEST_CASE("general patience: NoRoot when H stays below alpha") {
    // defective law with total mass 0.1 < 1/6
    PatienceLaw defective{[](double t) { return 0.1 * (1.0 - std::exp(-t)); },
                          [](double t) { return 0.1 * std::exp(-t); }, 50.0};
    CHECK(code_of([&] { general_patience(10, 1.0, 1.2, defective, 1.0, 1.0); }) == Errc::NoRoot);
}

}  // TEST_SUITE
