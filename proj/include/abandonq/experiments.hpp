#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "abandonq/config.hpp"
#include "abandonq/des.hpp"
#include "abandonq/diffusion.hpp"
#include "abandonq/fclt.hpp"

namespace abandonq {

enum class ExperimentKind { TableMeasures, TableTails, Figure1, ConvergenceSweep, FcltReport, YsLawReport };
std::string_view to_string(ExperimentKind kind) noexcept;
ExperimentKind experiment_kind_from_string(std::string_view name);

enum class Budget { Desk, Paper };
Budget budget_from_string(std::string_view name);

/// Desk: 10 replications x 1e5 time units (warmup 1e4).
/// Paper: 30 replications x 1e6 time units (warmup 1e5).
SimConfig budget_config(Budget budget);

enum class SweepRegime { ManyServer, LongPatience };

struct TvBound {
    double gamma = 0.0;
    std::optional<double> min;
    std::optional<double> max;
};

struct ExperimentPlan {
    std::string name = "plan";
    ExperimentKind kind = ExperimentKind::TableMeasures;

    // model grid: services outermost, then servers, then gammas
    std::vector<int> servers;
    std::vector<double> gammas;
    std::vector<DistSpec> services;
    Family arrival_family = Family::Exponential;
    double arrival_scv = 1.0;
    double rho = 1.2;
    double mu = 1.0;

    Budget budget = Budget::Desk;
    Json sim_overrides = Json::object();
    std::uint64_t seed = 20130901;

    // reference validation for table kinds
    std::filesystem::path reference;
    int reference_table = 0;

    // ConvergenceSweep
    SweepRegime regime = SweepRegime::ManyServer;
    double gamma_scale = 1.0;  // gamma_n = gamma_scale * sqrt(n)
    int allowed_inversions = 1;

    // Figure1
    std::vector<TvBound> tv_bounds;

    // FcltReport
    SuperpositionConfig fclt;
    double fclt_t1 = 0.5;
    double fclt_t2 = 1.0;
    int permutations = 999;
    bool expect_dependence = false;

    // YsLawReport
    std::vector<double> ys_s{0.0, 1.0, 5.0, 20.0};
    std::vector<double> ys_cA2{0.5, 1.0, 2.0};
    std::vector<double> ys_cS2{0.0, 1.0, 4.0};
    double ys_var_x0 = 0.0;

    std::filesystem::path out_dir = "out";

    SimConfig sim_config() const;
    QueueModel model(const DistSpec& service, int n, double gamma) const;
};

/// Parses a plan; relative paths are resolved against `base_dir`.
/// Throws Error{ConfigError}.
ExperimentPlan plan_from_json(const Json& j, const std::filesystem::path& base_dir = ".");
ExperimentPlan load_plan(const std::filesystem::path& path);

/// Short service label used in tables and the reference file (D, M, E2, LN, H2).
std::string service_label(const DistSpec& service);

struct TableCell {
    Measure measure = Measure::AbdFraction;
    double a = 0.0;
    double sim = 0.0;
    double half_width = 0.0;
    double approx = 0.0;
    double gap = 0.0;  // |sim - approx| / max(|sim|, 1e-12)
    bool simulated = true;
};

struct TableRow {
    std::string service;
    int n = 0;
    double gamma = 0.0;
    std::vector<TableCell> cells;

    const TableCell& cell(Measure measure, double a = 0.0) const;
};

double relative_gap(double sim, double approx);

/// Approximation-only cells (five measures and the six tails) for one model.
std::vector<TableCell> approx_cells(const GaussianApprox& approx, std::span<const double> tail_points);
/// Fills sim cells from a simulation summary next to the approximations.
TableRow make_row(const QueueModel& model, const SimSummary& summary, std::string_view service);
/// Same row shape without simulation (simulated = false, sim = 0).
TableRow make_approx_row(const QueueModel& model, std::span<const double> tail_points, std::string_view service);

struct ReferenceCell {
    int table = 0;
    std::string service;
    int n = 0;
    double gamma = 0.0;
    Measure measure = Measure::AbdFraction;
    double a = 0.0;
    bool approx = false;
    double value = 0.0;
    double half_width = 0.0;
    std::string text;  // value as printed, for significant-digit checks
    std::string provenance;
};

std::vector<ReferenceCell> load_reference(const std::filesystem::path& path);

/// Agreement of `ours` with a value printed to `printed` significant digits.
bool matches_significant(double ours, const std::string& printed);

/// Simulation tolerance band for one measure (absolute for the fraction and
/// tails, relative for means and variances).
struct Band {
    double tolerance;
    bool relative;
};
Band sim_band(Measure measure);

struct CellCheck {
    std::string label;
    bool approx = false;
    double ours = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string provenance;
};

struct ValidationReport {
    std::vector<CellCheck> cells;
    std::size_t failures() const;
    bool passed() const { return failures() == 0; }
    std::string summary() const;
};

/// Checks every row cell that has a reference counterpart in `table`.
/// Approximation cells must agree to the printed significant digits; sim
/// cells must fall inside sim_band(). With strict set, a failing cell throws
/// Error{ReferenceMismatch} listing the offenders.
ValidationReport validate_against_reference(std::span<const TableRow> rows,
                                            std::span<const ReferenceCell> reference, int table,
                                            bool strict = true);

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Artifacts {
    std::vector<std::filesystem::path> files;
    std::vector<TableRow> rows;
    std::vector<Check> checks;
    std::vector<std::string> warnings;

    bool ok() const;
};

/// Kolmogorov-Smirnov distance between a pmf over X = 0, 1, ... and the
/// Gaussian law N(n + q, sigma_Q^2), with a half-unit continuity correction.
double histogram_ks(std::span<const double> pmf, const GaussianApprox& approx);

/// Number of i with values[i+1] > values[i].
int count_inversions(std::span<const double> values);

/// Runs the plan, writing CSV, markdown and plot-data files plus
/// manifest.json into plan.out_dir. On a module error, the manifest records
/// the failure and the error is rethrown.
/// With approx_only set, table plans skip simulation and validate only the
/// approximation cells.
Artifacts run_plan(const ExperimentPlan& plan, Exec exec = Exec::Parallel, bool approx_only = false);

}  // namespace abandonq
