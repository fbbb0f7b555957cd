#include "abandonq/ou.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "abandonq/error.hpp"

namespace abandonq {

OUParams make_ou_params(double mu, double rho, double cA2, double cS2, double x0) {
    if (!(mu > 0.0) || !(rho > 0.0) || cA2 < 0.0 || cS2 < 0.0) {
        throw Error(Errc::InvalidParams, "OU parameters must be nonnegative with mu, rho > 0");
    }
    return OUParams{mu * (rho * cA2 + cS2 + rho - 1.0), x0};
}

std::vector<double> simulate_ou(const OUParams& params, std::span<const double> t_grid,
                                RngStream& rng) {
    std::vector<double> path;
    path.reserve(t_grid.size());
    double t = 0.0;
    double x = params.x0;
    const double half_var = 0.5 * params.diffusion_var;
    for (double next : t_grid) {
        if (next < t || (next == t && !path.empty())) {
            throw Error(Errc::InvalidParams, "OU grid must be strictly increasing and >= 0");
        }
        const double dt = next - t;
        if (dt > 0.0) {
            const double decay = std::exp(-dt);
            const double sd = std::sqrt(-half_var * std::expm1(-2.0 * dt));
            x = x * decay + sd * rng.normal();
        }
        path.push_back(x);
        t = next;
    }
    return path;
}

double ys_function(double rho, double mu, double s, double t) {
    const double stop = s + std::log(rho);
    if (t < s) return (rho - 1.0) * mu;
    if (t < stop) return (rho * std::exp(s - t) - 1.0) * mu;
    return -mu * (t - stop);
}

namespace {

// Components that do not involve the ys integral; all terms carry the
// e^{-2T} factor folded in so that large s does not overflow.
YsLaw ys_common(double s, double mu, double rho, double cA2, double cS2, double var_x0) {
    if (!(s >= 0.0) || !(mu > 0.0) || !(rho > 1.0) || cA2 < 0.0 || cS2 < 0.0 || var_x0 < 0.0) {
        throw Error(Errc::InvalidParams, "ys_law needs s >= 0, mu > 0, rho > 1, nonneg variances");
    }
    const double T = s + std::log(rho);
    const double e2T = std::exp(-2.0 * T);
    YsLaw law;
    law.s = s;
    law.var_x0 = var_x0;
    law.initial = e2T * var_x0;
    // int_0^s e^{2u} rho mu cA2 du
    law.arrival = rho * mu * cA2 * 0.5 * (std::exp(2.0 * (s - T)) - e2T);
    // int_0^T e^{2u} mu cS2 du
    law.service = mu * cS2 * 0.5 * (1.0 - e2T);
    return law;
}

}  // namespace

YsLaw ys_law(double s, double mu, double rho, double cA2, double cS2, double var_x0) {
    YsLaw law = ys_common(s, mu, rho, cA2, cS2, var_x0);
    const double T = s + std::log(rho);
    const double e2sT = std::exp(2.0 * (s - T));  // = 1/rho^2
    // int_0^s (rho-1) mu e^{2u} du
    const double first = (rho - 1.0) * mu * 0.5 * (e2sT - std::exp(-2.0 * T));
    // int_s^T (rho e^{s-u} - 1) mu e^{2u} du = mu [rho e^s (e^T - e^s) - (e^{2T} - e^{2s})/2]
    const double second =
        mu * (rho * std::exp(s - T) * (1.0 - std::exp(s - T)) - 0.5 * (1.0 - e2sT));
    law.abandonment = first + second;
    law.variance = law.initial + law.arrival + law.service + law.abandonment;
    return law;
}

YsLaw ys_law_quadrature(double s, double mu, double rho, double cA2, double cS2, double var_x0) {
    YsLaw law = ys_common(s, mu, rho, cA2, cS2, var_x0);
    const double T = s + std::log(rho);
    auto integrand = [&](double u) { return ys_function(rho, mu, s, u) * std::exp(2.0 * (u - T)); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double total = 0.0;
    if (s > 0.0) total += GK::integrate(integrand, 0.0, s, 20, 1e-10);
    total += GK::integrate(integrand, s, T, 20, 1e-10);
    law.abandonment = total;
    law.variance = law.initial + law.arrival + law.service + law.abandonment;
    return law;
}

double ys_limit_variance(double mu, double rho, double cA2, double cS2) {
    return mu * (cA2 + rho * cS2 + rho - 1.0) / (2.0 * rho);
}

double sample_scaled_wait(const YsLaw& law, double mu, RngStream& rng) {
    return std::sqrt(law.variance) * rng.normal() / mu;
}

}  // namespace abandonq
