#pragma once

#include <cstdint>
#include <vector>

#include "abandonq/des.hpp"
#include "abandonq/distributions.hpp"

namespace abandonq {

/// n iid renewal streams with interrenewal law F, observed at gamma * t for
/// each t in t_grid and scaled as (B(gamma t) - n mu gamma t) / sqrt(n gamma).
struct SuperpositionConfig {
    int n = 100;
    double gamma = 10.0;
    DistSpec interrenewal = exponential(1.0);
    std::vector<double> t_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
    int replications = 500;
    std::uint64_t seed = 20130901;
    /// First epoch from F_e (stationary). false draws it from F instead.
    bool stationary_start = true;
    /// Upper limit on the expected number of renewal epochs per replication.
    double event_cap = 5e9;
};

void validate(const SuperpositionConfig& config);

struct ScaledPathSample {
    std::vector<double> t_grid;
    int replications = 0;
    /// Scaled values, row-major: paths[r * grid + k].
    std::vector<double> paths;
    /// Unscaled B_n(gamma t), same layout.
    std::vector<long long> counts;

    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> se_mean;
    std::vector<double> se_var;

    double at(int replication, std::size_t k) const {
        return paths[static_cast<std::size_t>(replication) * t_grid.size() + k];
    }
    std::vector<double> column(std::size_t k) const;
};

/// Throws Error{MemoryBudgetExceeded} when n gamma mu max(t) exceeds the cap.
ScaledPathSample simulate_superposition(const SuperpositionConfig& config,
                                        Exec exec = Exec::Parallel);

struct FsllnResult {
    std::vector<double> sup_deviation;  // per replication
    double median = 0.0;
    double max = 0.0;
};

/// sup over t_grid of |B(gamma t)/(n gamma) - mu t| per replication.
FsllnResult fslln_check(const SuperpositionConfig& config, Exec exec = Exec::Parallel);

struct BrownianReport {
    struct PerTime {
        double t;
        double mean;
        double se_mean;
        double var;
        double se_var;
        double expected_var;  // mu cS2 t
        double ad_statistic;
        double ad_p_value;
    };
    std::vector<PerTime> per_time;

    double t1 = 0.0;
    double t2 = 0.0;
    double increment_correlation = 0.0;  // corr(B(t2) - B(t1), B(t1))
    double permutation_p_value = 1.0;

    double slope = 0.0;  // least-squares Var[B(t)] ~ slope * t
    double expected_slope = 0.0;
    double slope_rel_error = 0.0;
};

/// Normality, increment independence and variance linearity checks.
/// (t1, t2) must both be grid points. Throws Error{InsufficientReplications}
/// for fewer than 500 replications.
BrownianReport brownian_tests(const ScaledPathSample& sample, const DistSpec& interrenewal,
                              double t1, double t2, int permutations = 999,
                              std::uint64_t seed = 7);

}  // namespace abandonq
