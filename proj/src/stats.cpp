#include "abandonq/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numeric>

#include "abandonq/error.hpp"
#include "abandonq/rng.hpp"

namespace abandonq::stats {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

double student_t_quantile(double p, double dof) {
    return boost::math::quantile(boost::math::students_t(dof), p);
}

double chi_squared_quantile(double p, double dof) {
    return boost::math::quantile(boost::math::chi_squared(dof), p);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    // shifted by the first value so constant data give it back exactly
    const double x0 = xs.front();
    double s = 0.0;
    for (double x : xs) s += x - x0;
    return x0 + s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double x0 = xs.front();
    double s = 0.0, ss = 0.0;
    for (double x : xs) {
        s += x - x0;
        ss += (x - x0) * (x - x0);
    }
    const double n = static_cast<double>(xs.size());
    return std::max(ss - s * s / n, 0.0) / (n - 1.0);
}

double correlation(std::span<const double> xs, std::span<const double> ys) {
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double half_width_95(std::span<const double> xs) {
    if (xs.size() < 2) throw Error(Errc::InsufficientReplications, "need >= 2 values");
    const double m = static_cast<double>(xs.size());
    return student_t_quantile(0.975, m - 1.0) * std::sqrt(variance(xs) / m);
}

double variance_standard_error(std::span<const double> xs) {
    const double m = static_cast<double>(xs.size());
    const double mu = mean(xs);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = (x - mu) * (x - mu);
        m2 += d;
        m4 += d * d;
    }
    m2 /= m;
    m4 /= m;
    return std::sqrt(std::max(m4 - m2 * m2, 0.0) / m);
}

double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double m = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return d;
}

double ks_critical(std::size_t m, double alpha) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(m));
}

AndersonDarling anderson_darling_normal(std::vector<double> xs) {
    const std::size_t m = xs.size();
    if (m < 8) throw Error(Errc::InsufficientReplications, "Anderson-Darling needs >= 8 values");
    std::sort(xs.begin(), xs.end());
    const double mu = mean(xs);
    const double sd = std::sqrt(variance(xs));
    double s = 0.0;
    const double dm = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double zi = (xs[i] - mu) / sd;
        const double zj = (xs[m - 1 - i] - mu) / sd;
        // log Phi(z_i) + log(1 - Phi(z_{m+1-i}))
        s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(normal_cdf(zi)) + std::log(normal_sf(zj)));
    }
    const double a2 = -dm - s / dm;
    const double a2s = a2 * (1.0 + 0.75 / dm + 2.25 / (dm * dm));
    // D'Agostino & Stephens (1986), Table 4.9.
    double p;
    if (a2s >= 0.6) {
        p = std::exp(1.2937 - 5.709 * a2s + 0.0186 * a2s * a2s);
    } else if (a2s >= 0.34) {
        p = std::exp(0.9177 - 4.279 * a2s - 1.38 * a2s * a2s);
    } else if (a2s >= 0.2) {
        p = 1.0 - std::exp(-8.318 + 42.796 * a2s - 59.938 * a2s * a2s);
    } else {
        p = 1.0 - std::exp(-13.436 + 101.14 * a2s - 223.73 * a2s * a2s);
    }
    return {a2, a2s, std::clamp(p, 0.0, 1.0)};
}

double slope_through_origin(std::span<const double> x, std::span<const double> y) {
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    return sxy / sxx;
}

double permutation_correlation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                      int permutations, std::uint64_t seed) {
    const double observed = std::abs(correlation(xs, ys));
    std::vector<double> shuffled(ys.begin(), ys.end());
    RngStream rng(seed, Stream::Permutation);
    int extreme = 0;
    for (int k = 0; k < permutations; ++k) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
        if (std::abs(correlation(xs, shuffled)) >= observed) ++extreme;
    }
    return (extreme + 1.0) / (permutations + 1.0);
}

}  // namespace abandonq::stats
