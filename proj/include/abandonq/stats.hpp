#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace abandonq::stats {

double normal_cdf(double z);
/// 1 - Phi(z), accurate in the upper tail.
double normal_sf(double z);
double normal_pdf(double z);
double normal_quantile(double p);

double student_t_quantile(double p, double dof);
double chi_squared_quantile(double p, double dof);

double mean(std::span<const double> xs);
/// Unbiased sample variance (divisor m - 1).
double variance(std::span<const double> xs);
double correlation(std::span<const double> xs, std::span<const double> ys);

/// Half-width of the two-sided 95% Student-t interval for the mean.
double half_width_95(std::span<const double> xs);

/// Standard error of the sample variance, sqrt((m4 - s^4) / m).
double variance_standard_error(std::span<const double> xs);

/// sup_x |F_emp(x) - F(x)| for a continuous reference CDF.
double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf);
/// Asymptotic critical value sqrt(-ln(alpha/2)/2) / sqrt(m).
double ks_critical(std::size_t m, double alpha);

struct AndersonDarling {
    double a2;           // raw statistic
    double a2_adjusted;  // small-sample correction for estimated mean and variance
    double p_value;
};
/// Normality test with mean and variance estimated from the data.
AndersonDarling anderson_darling_normal(std::vector<double> xs);

/// Least-squares slope of y on x through the origin.
double slope_through_origin(std::span<const double> x, std::span<const double> y);

/// Two-sided permutation p-value for the correlation of xs and ys.
double permutation_correlation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                      int permutations, std::uint64_t seed);

}  // namespace abandonq::stats
