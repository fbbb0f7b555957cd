#include "abandonq/fclt.hpp"

#include <algorithm>
#include <cmath>

#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"

namespace abandonq {

void validate(const SuperpositionConfig& config) {
    if (config.n < 1 || !(config.gamma > 0.0) || config.replications < 1) {
        throw Error(Errc::InvalidParams, "superposition needs n >= 1, gamma > 0, replications >= 1");
    }
    if (config.t_grid.empty() || !(config.t_grid.front() > 0.0) ||
        !std::is_sorted(config.t_grid.begin(), config.t_grid.end()) ||
        std::adjacent_find(config.t_grid.begin(), config.t_grid.end()) != config.t_grid.end()) {
        throw Error(Errc::InvalidParams, "t_grid must be strictly increasing and start > 0");
    }
}

std::vector<double> ScaledPathSample::column(std::size_t k) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(replications));
    for (int r = 0; r < replications; ++r) out.push_back(at(r, k));
    return out;
}

namespace {

// Counts epochs of one renewal stream at each scaled grid time, streaming.
void count_stream(const SuperpositionConfig& config, const EquilibriumSpec& eq,
                  std::span<const double> horizons, RngStream& rng, long long* counts) {
    double t = config.stationary_start ? sample_equilibrium(eq, rng)
                                       : sample(config.interrenewal, rng);
    long long k = 0;
    for (std::size_t g = 0; g < horizons.size(); ++g) {
        while (t <= horizons[g]) {
            ++k;
            t += sample(config.interrenewal, rng);
        }
        counts[g] += k;
    }
}

void run_replication(const SuperpositionConfig& config, const EquilibriumSpec& eq,
                     std::span<const double> horizons, int r, long long* counts) {
    std::fill(counts, counts + horizons.size(), 0LL);
    for (int j = 0; j < config.n; ++j) {
        RngStream rng(config.seed, Stream::Renewals, static_cast<std::uint64_t>(r),
                      static_cast<std::uint64_t>(j));
        count_stream(config, eq, horizons, rng, counts);
    }
}

}  // namespace

ScaledPathSample simulate_superposition(const SuperpositionConfig& config, Exec exec) {
    validate(config);
    const double mu = config.interrenewal.rate();
    const double expected_events = config.n * config.gamma * mu * config.t_grid.back();
    if (expected_events > config.event_cap) {
        throw Error(Errc::MemoryBudgetExceeded, "expected renewal count exceeds event_cap");
    }
    const EquilibriumSpec eq = make_equilibrium(config.interrenewal);
    const std::size_t grid = config.t_grid.size();
    std::vector<double> horizons;
    for (double t : config.t_grid) horizons.push_back(config.gamma * t);

    ScaledPathSample out;
    out.t_grid = config.t_grid;
    out.replications = config.replications;
    out.counts.assign(grid * static_cast<std::size_t>(config.replications), 0);

    const int reps = config.replications;
    if (exec == Exec::Serial) {
        for (int r = 0; r < reps; ++r) {
            run_replication(config, eq, horizons, r, out.counts.data() + static_cast<std::size_t>(r) * grid);
        }
    } else {
#pragma omp parallel for schedule(dynamic, 4)
        for (int r = 0; r < reps; ++r) {
            run_replication(config, eq, horizons, r, out.counts.data() + static_cast<std::size_t>(r) * grid);
        }
    }

    const double scale = std::sqrt(config.n * config.gamma);
    out.paths.resize(out.counts.size());
    for (int r = 0; r < reps; ++r) {
        for (std::size_t k = 0; k < grid; ++k) {
            const std::size_t i = static_cast<std::size_t>(r) * grid + k;
            out.paths[i] = (static_cast<double>(out.counts[i]) - config.n * mu * horizons[k]) / scale;
        }
    }
    for (std::size_t k = 0; k < grid; ++k) {
        const auto col = out.column(k);
        out.mean.push_back(stats::mean(col));
        out.var.push_back(stats::variance(col));
        out.se_mean.push_back(std::sqrt(out.var.back() / reps));
        out.se_var.push_back(stats::variance_standard_error(col));
    }
    return out;
}

FsllnResult fslln_check(const SuperpositionConfig& config, Exec exec) {
    const ScaledPathSample sample = simulate_superposition(config, exec);
    const double mu = config.interrenewal.rate();
    const double norm = config.n * config.gamma;
    FsllnResult out;
    for (int r = 0; r < sample.replications; ++r) {
        double sup = 0.0;
        for (std::size_t k = 0; k < sample.t_grid.size(); ++k) {
            const double fluid =
                static_cast<double>(sample.counts[static_cast<std::size_t>(r) * sample.t_grid.size() + k]) / norm;
            sup = std::max(sup, std::abs(fluid - mu * sample.t_grid[k]));
        }
        out.sup_deviation.push_back(sup);
    }
    std::vector<double> sorted = out.sup_deviation;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    out.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    out.max = sorted.back();
    return out;
}

BrownianReport brownian_tests(const ScaledPathSample& sample, const DistSpec& interrenewal,
                              double t1, double t2, int permutations, std::uint64_t seed) {
    if (sample.replications < 500) {
        throw Error(Errc::InsufficientReplications, "Brownian tests need >= 500 replications");
    }
    auto grid_index = [&](double t) {
        for (std::size_t k = 0; k < sample.t_grid.size(); ++k) {
            if (std::abs(sample.t_grid[k] - t) < 1e-12) return k;
        }
        throw Error(Errc::InvalidParams, "increment endpoints must be grid points");
    };
    const std::size_t k1 = grid_index(t1);
    const std::size_t k2 = grid_index(t2);
    if (!(t1 < t2)) throw Error(Errc::InvalidParams, "need t1 < t2");

    const double mu = interrenewal.rate();
    const double slope_expected = mu * interrenewal.scv();
    BrownianReport report;
    for (std::size_t k = 0; k < sample.t_grid.size(); ++k) {
        const auto col = sample.column(k);
        const auto ad = stats::anderson_darling_normal(col);
        report.per_time.push_back({sample.t_grid[k], sample.mean[k], sample.se_mean[k], sample.var[k],
                                   sample.se_var[k], slope_expected * sample.t_grid[k], ad.a2_adjusted,
                                   ad.p_value});
    }

    const auto past = sample.column(k1);
    const auto later = sample.column(k2);
    std::vector<double> increment(past.size());
    for (std::size_t i = 0; i < past.size(); ++i) increment[i] = later[i] - past[i];
    report.t1 = t1;
    report.t2 = t2;
    report.increment_correlation = stats::correlation(increment, past);
    report.permutation_p_value = stats::permutation_correlation_pvalue(increment, past, permutations, seed);

    report.slope = stats::slope_through_origin(sample.t_grid, sample.var);
    report.expected_slope = slope_expected;
    report.slope_rel_error =
        slope_expected > 0.0 ? std::abs(report.slope - slope_expected) / slope_expected : report.slope;
    return report;
}

}  // namespace abandonq
