#pragma once

#include <Eigen/SparseCore>
#include <span>
#include <vector>

#include "abandonq/diffusion.hpp"
#include "abandonq/distributions.hpp"

namespace abandonq {

/// M/H2/n+M (or M/M/n+M when single_phase) truncated at `truncation`
/// customers. Levels X <= n hold states (k1, X - k1); levels X > n hold the
/// queue length X - n and k1 with k1 + k2 = n.
struct CTMCModel {
    int n = 1;
    double lambda = 1.0;
    double gamma = 1.0;
    double p1 = 1.0;
    double rate1 = 1.0;
    double rate2 = 1.0;
    bool single_phase = true;
    long truncation = 0;

    double mu() const { return 1.0 / (p1 / rate1 + (single_phase ? 0.0 : (1.0 - p1) / rate2)); }
    double scv() const;
    int phases_at(long level) const;
    long state_count() const;
    /// Flat index of (level, k1).
    long index(long level, int k1) const;
};

/// n + ceil(q + 12 sigma_Q) with q and sigma_Q from the Gaussian model.
long default_truncation(int n, double lambda, double mu, double gamma, double cS2);

CTMCModel make_erlang_a_model(int n, double lambda, double mu, double gamma, long truncation = 0);
/// Service must be Hyperexp2. Admission from the queue draws a fresh phase.
CTMCModel make_h2_model(int n, double lambda, double gamma, const DistSpec& service,
                        long truncation = 0);

struct Generator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> Q;
    std::vector<long> level;  // X for each state
    std::vector<int> k1;      // phase-1 busy servers for each state
    double dropped_arrival_rate = 0.0;  // lambda, removed at level L
    double tail_mass_estimate = 0.0;    // Gaussian estimate of P[X > L]
};

/// Throws Error{TruncationTooSmall} if the estimated mass beyond the
/// truncation level exceeds 1e-8 (skipped when check_truncation is false,
/// for hand-sized chains in tests).
Generator build_generator(const CTMCModel& model, bool check_truncation = true);

struct StationaryDist {
    std::vector<double> pi;        // per state
    std::vector<double> marginal;  // P[X = x], x = 0..L
    double truncation_mass_bound = 0.0;
    double residual = 0.0;  // ||pi Q||_inf

    double mean() const;
    double variance() const;
};

/// Stationary vector of an irreducible generator: solves pi Q = 0, sum = 1.
/// Throws Error{SingularSystem} or Error{NonConvergence}; residual is set to
/// ||pi Q||_inf when non-null.
std::vector<double> stationary_vector(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q,
                                      double* residual = nullptr);

/// Direct sparse LU on the truncated chain with iterative refinement.
/// Throws Error{SingularSystem} or Error{NonConvergence}.
StationaryDist solve_stationary(const Generator& gen, const CTMCModel& model);

/// Long-run fraction of arrivals that abandon.
double abandonment_fraction(const StationaryDist& dist, const Generator& gen, const CTMCModel& model);
/// Completion rate plus abandonment rate minus accepted arrival rate.
double flow_imbalance(const StationaryDist& dist, const Generator& gen, const CTMCModel& model);

double total_variation(std::span<const double> p, std::span<const double> q);

struct GaussianComparison {
    double tv = 0.0;
    double exact_mean = 0.0;
    double exact_var = 0.0;
    double approx_mean = 0.0;
    double approx_var = 0.0;
    double mean_gap = 0.0;
    double var_gap = 0.0;
    std::vector<double> gaussian_pmf;  // over 0..L
};

GaussianComparison compare_to_gaussian(const StationaryDist& dist, const GaussianApprox& approx);

}  // namespace abandonq
