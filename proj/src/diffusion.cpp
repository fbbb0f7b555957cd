#include "abandonq/diffusion.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"

namespace abandonq {

namespace {

void check_inputs(int n, double mu, double rho, double cA2, double cS2) {
    if (n < 1 || !(mu > 0.0) || !(cA2 >= 0.0) || !(cS2 >= 0.0)) {
        throw Error(Errc::InvalidParams, "approximate needs n >= 1, mu > 0, cA2 >= 0, cS2 >= 0");
    }
    if (!(rho > 1.0)) throw Error(Errc::NotOverloaded, "rho must exceed 1");
}

// Fills the variance fields from an (effective) gamma.
void fill_variances(GaussianApprox& a) {
    const double nd = static_cast<double>(a.n);
    a.ou_var = a.mu * (a.rho * a.cA2 + a.cS2 + a.rho - 1.0) / 2.0;
    a.sigma2_Q = nd * a.gamma * a.ou_var;
    a.wait_scaled_var = (a.cA2 + a.rho * a.cS2 + a.rho - 1.0) / (2.0 * a.mu * a.rho);
    a.sigma2_W = a.gamma / nd * a.wait_scaled_var;
}

}  // namespace

GaussianApprox approximate(int n, double mu, double rho, double gamma, double cA2, double cS2) {
    check_inputs(n, mu, rho, cA2, cS2);
    if (!(gamma > 0.0)) throw Error(Errc::InvalidParams, "gamma must be > 0");
    GaussianApprox a;
    a.n = n;
    a.mu = mu;
    a.rho = rho;
    a.gamma = gamma;
    a.cA2 = cA2;
    a.cS2 = cS2;
    a.alpha = (rho - 1.0) / rho;
    a.q = static_cast<double>(n) * mu * (rho - 1.0) * gamma;
    a.w = gamma * std::log(rho);
    fill_variances(a);
    return a;
}

double queue_tail(const GaussianApprox& approx, double a) {
    return stats::normal_sf(a / std::sqrt(approx.ou_var));
}

double wait_tail(const GaussianApprox& approx, double a) {
    return stats::normal_sf(a / std::sqrt(approx.wait_scaled_var));
}

double state_pmf(const GaussianApprox& approx, long i) {
    const double sd = std::sqrt(approx.sigma2_Q);
    const double z = (static_cast<double>(i) - approx.n - approx.q) / sd;
    return stats::normal_pdf(z) / sd;
}

PatienceLaw patience_law(const DistSpec& patience) {
    if (patience.family() == Family::Deterministic) {
        throw Error(Errc::HazardUnavailable, "Deterministic patience has no hazard rate");
    }
    return PatienceLaw{[patience](double t) { return cdf(patience, t); },
                       [patience](double t) { return pdf(patience, t); },
                       quantile(patience, 1.0 - 1e-9)};
}

GaussianApprox general_patience(int n, double mu, double rho, const PatienceLaw& patience,
                                double cA2, double cS2) {
    check_inputs(n, mu, rho, cA2, cS2);
    const double target = (rho - 1.0) / rho;
    const double hi = patience.upper;
    if (!(patience.cdf(hi) >= target)) {
        throw Error(Errc::NoRoot, "patience CDF never reaches (rho-1)/rho");
    }

    // Bisection to a tight bracket, then Newton polish inside it.
    auto f = [&](double t) { return patience.cdf(t) - target; };
    boost::math::tools::eps_tolerance<double> tol(30);
    std::uintmax_t iters = 200;
    auto [lo_b, hi_b] = boost::math::tools::bisect(f, 0.0, hi, tol, iters);
    auto fd = [&](double t) { return std::make_pair(f(t), patience.pdf(t)); };
    const double w = boost::math::tools::newton_raphson_iterate(fd, 0.5 * (lo_b + hi_b), lo_b,
                                                               hi_b, 52);
    if (!(std::abs(f(w)) <= 1e-10)) throw Error(Errc::NoRoot, "root polish failed");

    const double density = patience.pdf(w);
    const double surv = 1.0 - patience.cdf(w);
    if (!(density > 0.0) || !(surv > 0.0)) {
        throw Error(Errc::HazardUnavailable, "hazard at the fluid wait is zero or undefined");
    }
    const double lambda = static_cast<double>(n) * mu * rho;
    const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double s) { return 1.0 - patience.cdf(s); }, 0.0, w, 15, 1e-13);

    GaussianApprox a;
    a.n = n;
    a.mu = mu;
    a.rho = rho;
    a.cA2 = cA2;
    a.cS2 = cS2;
    a.gamma = surv / density;
    a.alpha = target;
    a.q = lambda * integral;
    a.w = w;
    fill_variances(a);
    return a;
}

GaussianApprox general_patience(int n, double mu, double rho, const DistSpec& patience,
                                double cA2, double cS2) {
    return general_patience(n, mu, rho, patience_law(patience), cA2, cS2);
}

}  // namespace abandonq
