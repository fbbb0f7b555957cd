#pragma once

#include <functional>

#include "abandonq/distributions.hpp"

namespace abandonq {

/// Gaussian performance approximations from the one-dimensional OU model of
/// an overloaded many-server queue with abandonment.
struct GaussianApprox {
    // model inputs
    int n = 0;
    double mu = 0.0;
    double rho = 0.0;
    double gamma = 0.0;
    double cA2 = 0.0;
    double cS2 = 0.0;

    double alpha = 0.0;     // abandonment fraction
    double q = 0.0;         // mean queue length (customers in buffer)
    double sigma2_Q = 0.0;  // queue-length variance
    double w = 0.0;         // mean virtual waiting time
    double sigma2_W = 0.0;  // virtual-waiting-time variance
    double ou_var = 0.0;    // stationary variance of the scaled queue length
    double wait_scaled_var = 0.0;  // stationary variance of the scaled virtual wait
};

/// Throws Error{NotOverloaded} if rho <= 1, Error{InvalidParams} on bad inputs.
GaussianApprox approximate(int n, double mu, double rho, double gamma, double cA2, double cS2);

/// P[(X - n - q)/sqrt(n gamma) > a] under the stationary Gaussian law.
double queue_tail(const GaussianApprox& approx, double a);
/// P[sqrt(n/gamma) (W - w) > a] under the stationary Gaussian law.
double wait_tail(const GaussianApprox& approx, double a);

/// Gaussian density approximation of P[X = i].
double state_pmf(const GaussianApprox& approx, long i);

/// A patience law H described by its CDF and density. `upper` is a point
/// with H(upper) close to 1 that brackets the root search.
struct PatienceLaw {
    std::function<double(double)> cdf;
    std::function<double(double)> pdf;
    double upper = 0.0;
};

/// Throws Error{HazardUnavailable} for Deterministic patience.
PatienceLaw patience_law(const DistSpec& patience);

/// General-patience extension: solve H(w) = (rho-1)/rho, take gamma = 1/h(w)
/// and q = lambda * int_0^w (1 - H(s)) ds; the variances and tails then use
/// this effective gamma. Throws Error{NoRoot} if H never reaches (rho-1)/rho.
GaussianApprox general_patience(int n, double mu, double rho, const PatienceLaw& patience,
                                double cA2, double cS2);
GaussianApprox general_patience(int n, double mu, double rho, const DistSpec& patience,
                                double cA2, double cS2);

}  // namespace abandonq
