#pragma once

#include <span>
#include <vector>

#include "abandonq/rng.hpp"

namespace abandonq {

/// dX = -X dt + dM, with M a driftless Brownian motion of variance
/// `diffusion_var` per unit time. Stationary law Normal(0, diffusion_var/2).
struct OUParams {
    double diffusion_var = 0.0;
    double x0 = 0.0;
};

/// diffusion_var = mu (rho cA2 + cS2 + rho - 1).
OUParams make_ou_params(double mu, double rho, double cA2, double cS2, double x0 = 0.0);

/// Exact-transition sample of the OU path at every point of `t_grid`
/// (strictly increasing, t_grid[0] >= 0), starting from x0 at time 0.
std::vector<double> simulate_ou(const OUParams& params, std::span<const double> t_grid,
                                RngStream& rng);

/// Rate function of the time-changed abandonment noise for a probe at s:
/// (rho-1)mu before s, (rho e^{s-t} - 1)mu up to s + log rho, then
/// -mu (t - s - log rho).
double ys_function(double rho, double mu, double s, double t);

/// Gaussian law of the stopped-arrival limit evaluated at s + log rho,
/// split into its four independent contributions.
struct YsLaw {
    double s = 0.0;
    double var_x0 = 0.0;
    double initial = 0.0;
    double arrival = 0.0;
    double service = 0.0;
    double abandonment = 0.0;
    double variance = 0.0;
};

/// Closed-form evaluation of every component.
YsLaw ys_law(double s, double mu, double rho, double cA2, double cS2, double var_x0);

/// Same law with the abandonment component integrated numerically
/// (adaptive Gauss-Kronrod, relative tolerance 1e-10).
YsLaw ys_law_quadrature(double s, double mu, double rho, double cA2, double cS2, double var_x0);

/// s -> infinity limit of YsLaw::variance: mu (cA2 + rho cS2 + rho - 1) / (2 rho).
double ys_limit_variance(double mu, double rho, double cA2, double cS2);

/// Draw the scaled virtual-wait limit (the stopped-arrival limit divided by mu).
double sample_scaled_wait(const YsLaw& law, double mu, RngStream& rng);

}  // namespace abandonq
