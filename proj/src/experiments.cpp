#include "abandonq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "abandonq/ctmc.hpp"
#include "abandonq/error.hpp"
#include "abandonq/ou.hpp"
#include "abandonq/stats.hpp"

namespace abandonq {

namespace fs = std::filesystem;

std::string_view to_string(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::TableMeasures: return "TableMeasures";
        case ExperimentKind::TableTails: return "TableTails";
        case ExperimentKind::Figure1: return "Figure1";
        case ExperimentKind::ConvergenceSweep: return "ConvergenceSweep";
        case ExperimentKind::FcltReport: return "FcltReport";
        case ExperimentKind::YsLawReport: return "YsLawReport";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
    for (auto k : {ExperimentKind::TableMeasures, ExperimentKind::TableTails, ExperimentKind::Figure1,
                   ExperimentKind::ConvergenceSweep, ExperimentKind::FcltReport, ExperimentKind::YsLawReport}) {
        if (to_string(k) == name) return k;
    }
    throw Error(Errc::ConfigError, "unknown experiment kind '" + std::string(name) + "'");
}

Budget budget_from_string(std::string_view name) {
    if (name == "desk") return Budget::Desk;
    if (name == "paper") return Budget::Paper;
    throw Error(Errc::ConfigError, "budget must be 'desk' or 'paper'");
}

SimConfig budget_config(Budget budget) {
    SimConfig c;
    if (budget == Budget::Desk) {
        c.replications = 10;
        c.horizon = 1e5;
        c.warmup = 1e4;
    } else {
        c.replications = 30;
        c.horizon = 1e6;
        c.warmup = 1e5;
    }
    return c;
}

SimConfig ExperimentPlan::sim_config() const {
    SimConfig base = budget_config(budget);
    base.seed = seed;
    return sim_config_from_json(sim_overrides, base);
}

QueueModel ExperimentPlan::model(const DistSpec& service, int n, double gamma) const {
    QueueModel m;
    m.servers = n;
    m.service = service;
    const double lambda = rho * n * service.rate();
    m.arrival = make_dist(arrival_family, 1.0 / lambda, arrival_scv);
    m.patience = exponential(gamma);
    return m;
}

std::string service_label(const DistSpec& service) {
    switch (service.family()) {
        case Family::Deterministic: return "D";
        case Family::Exponential: return "M";
        case Family::Erlang2: return "E2";
        case Family::Lognormal: return "LN";
        case Family::Hyperexp2: return "H2";
    }
    return "?";
}

// ---------------------------------------------------------------- plan parsing

namespace {

ExperimentPlan plan_from_json_impl(const Json& j, const fs::path& base_dir) {
    require_known_keys(j, {"name", "kind", "model", "budget", "sim", "seed", "reference", "sweep", "figure", "fclt",
                           "ys", "output"},
                       "plan");
    ExperimentPlan p;
    if (!j.contains("kind")) throw Error(Errc::ConfigError, "plan: missing 'kind'");
    p.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("name")) p.name = j.at("name").get<std::string>();
    if (j.contains("budget")) p.budget = budget_from_string(j.at("budget").get<std::string>());
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("sim")) {
        p.sim_overrides = j.at("sim");
        sim_config_from_json(p.sim_overrides);  // validate early
    }
    if (j.contains("output")) p.out_dir = base_dir / j.at("output").get<std::string>();

    const bool needs_model = p.kind == ExperimentKind::TableMeasures || p.kind == ExperimentKind::TableTails ||
                             p.kind == ExperimentKind::Figure1 || p.kind == ExperimentKind::ConvergenceSweep;
    if (j.contains("model")) {
        const Json& m = j.at("model");
        require_known_keys(m, {"servers", "gammas", "services", "rho", "mu", "arrival"}, "plan.model");
        if (!m.contains("servers") || !m.contains("services")) {
            throw Error(Errc::ConfigError, "plan.model: 'servers' and 'services' are required");
        }
        p.servers = m.at("servers").get<std::vector<int>>();
        if (m.contains("gammas")) p.gammas = m.at("gammas").get<std::vector<double>>();
        if (m.contains("rho")) p.rho = m.at("rho").get<double>();
        if (m.contains("mu")) p.mu = m.at("mu").get<double>();
        for (const auto& s : m.at("services")) p.services.push_back(dist_from_json(s, 1.0 / p.mu));
        if (m.contains("arrival")) {
            Json a = m.at("arrival");
            if (a.is_string()) a = Json{{"family", a}};
            require_known_keys(a, {"family", "scv"}, "plan.model.arrival");
            p.arrival_family = family_from_string(a.at("family").get<std::string>());
            const DistSpec probe = dist_from_json(a, 1.0);
            p.arrival_scv = probe.scv();
        }
        for (int n : p.servers) {
            if (n < 1) throw Error(Errc::ConfigError, "plan.model: servers must be >= 1");
        }
        for (double g : p.gammas) {
            if (!(g > 0.0)) throw Error(Errc::ConfigError, "plan.model: gammas must be positive");
        }
    } else if (needs_model) {
        throw Error(Errc::ConfigError, "plan: missing 'model' for " + std::string(to_string(p.kind)));
    }
    if (j.contains("reference")) {
        const Json& r = j.at("reference");
        require_known_keys(r, {"path", "table"}, "plan.reference");
        p.reference = base_dir / r.at("path").get<std::string>();
        p.reference_table = r.at("table").get<int>();
    }
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        require_known_keys(s, {"regime", "gamma_scale", "allowed_inversions"}, "plan.sweep");
        const auto regime = s.at("regime").get<std::string>();
        if (regime == "many-server") {
            p.regime = SweepRegime::ManyServer;
        } else if (regime == "long-patience") {
            p.regime = SweepRegime::LongPatience;
        } else {
            throw Error(Errc::ConfigError, "plan.sweep: regime must be 'many-server' or 'long-patience'");
        }
        if (s.contains("gamma_scale")) p.gamma_scale = s.at("gamma_scale").get<double>();
        if (s.contains("allowed_inversions")) p.allowed_inversions = s.at("allowed_inversions").get<int>();
    } else if (p.kind == ExperimentKind::ConvergenceSweep) {
        throw Error(Errc::ConfigError, "plan: missing 'sweep' for ConvergenceSweep");
    }
    if (j.contains("figure")) {
        const Json& f = j.at("figure");
        require_known_keys(f, {"tv_bounds"}, "plan.figure");
        for (const auto& b : f.value("tv_bounds", Json::array())) {
            require_known_keys(b, {"gamma", "min", "max"}, "plan.figure.tv_bounds");
            TvBound tb;
            tb.gamma = b.at("gamma").get<double>();
            if (b.contains("min")) tb.min = b.at("min").get<double>();
            if (b.contains("max")) tb.max = b.at("max").get<double>();
            p.tv_bounds.push_back(tb);
        }
    }
    if (j.contains("fclt")) {
        const Json& f = j.at("fclt");
        SuperpositionConfig base;
        base.seed = p.seed;
        p.fclt = superposition_from_json(f, base);
        if (f.contains("t1")) p.fclt_t1 = f.at("t1").get<double>();
        if (f.contains("t2")) p.fclt_t2 = f.at("t2").get<double>();
        if (f.contains("permutations")) p.permutations = f.at("permutations").get<int>();
        if (f.contains("expect_dependence")) p.expect_dependence = f.at("expect_dependence").get<bool>();
    } else if (p.kind == ExperimentKind::FcltReport) {
        throw Error(Errc::ConfigError, "plan: missing 'fclt' for FcltReport");
    }
    if (j.contains("ys")) {
        const Json& y = j.at("ys");
        require_known_keys(y, {"s", "cA2", "cS2", "var_x0"}, "plan.ys");
        if (y.contains("s")) p.ys_s = y.at("s").get<std::vector<double>>();
        if (y.contains("cA2")) p.ys_cA2 = y.at("cA2").get<std::vector<double>>();
        if (y.contains("cS2")) p.ys_cS2 = y.at("cS2").get<std::vector<double>>();
        if (y.contains("var_x0")) p.ys_var_x0 = y.at("var_x0").get<double>();
    }
    return p;
}

}  // namespace

ExperimentPlan plan_from_json(const Json& j, const fs::path& base_dir) {
    try {
        return plan_from_json_impl(j, base_dir);
    } catch (const Json::exception& e) {
        throw Error(Errc::ConfigError, std::string("plan: ") + e.what());
    }
}

ExperimentPlan load_plan(const fs::path& path) {
    ExperimentPlan p = plan_from_json(load_json(path), path.parent_path());
    if (p.name == "plan") p.name = path.stem().string();
    return p;
}

// ---------------------------------------------------------------- table rows

double relative_gap(double sim, double approx) {
    return std::abs(sim - approx) / std::max(std::abs(sim), 1e-12);
}

const TableCell& TableRow::cell(Measure measure, double a) const {
    for (const auto& c : cells) {
        if (c.measure == measure && std::abs(c.a - a) < 1e-12) return c;
    }
    throw Error(Errc::InvalidParams, "table row has no such cell");
}

std::vector<TableCell> approx_cells(const GaussianApprox& g, std::span<const double> tail_points) {
    std::vector<TableCell> cells;
    auto add = [&](Measure m, double a, double v) {
        TableCell c;
        c.measure = m;
        c.a = a;
        c.approx = v;
        c.simulated = false;
        cells.push_back(c);
    };
    add(Measure::AbdFraction, 0.0, g.alpha);
    add(Measure::QueueMean, 0.0, g.q);
    add(Measure::QueueVar, 0.0, g.sigma2_Q);
    add(Measure::WaitMean, 0.0, g.w);
    add(Measure::WaitVar, 0.0, g.sigma2_W);
    for (double a : tail_points) add(Measure::QueueTail, a, queue_tail(g, a));
    for (double a : tail_points) add(Measure::WaitTail, a, wait_tail(g, a));
    return cells;
}

namespace {

GaussianApprox model_approx(const QueueModel& model) {
    if (model.patience.family() == Family::Exponential) {
        return approximate(model.servers, model.mu(), model.rho(), model.gamma(), model.arrival.scv(),
                           model.service.scv());
    }
    return general_patience(model.servers, model.mu(), model.rho(), model.patience, model.arrival.scv(),
                            model.service.scv());
}

}  // namespace

TableRow make_approx_row(const QueueModel& model, std::span<const double> tail_points, std::string_view service) {
    TableRow row;
    row.service = std::string(service);
    row.n = model.servers;
    row.gamma = model.gamma();
    row.cells = approx_cells(model_approx(model), tail_points);
    return row;
}

TableRow make_row(const QueueModel& model, const SimSummary& summary, std::string_view service) {
    std::vector<double> tails;
    for (const auto& e : summary.estimates) {
        if (e.measure == Measure::QueueTail) tails.push_back(e.a);
    }
    TableRow row = make_approx_row(model, tails, service);
    for (auto& c : row.cells) {
        const SimEstimate& e = summary.get(c.measure, c.a);
        c.sim = e.value;
        c.half_width = e.half_width_95;
        c.simulated = true;
        c.gap = relative_gap(c.sim, c.approx);
    }
    return row;
}

// ---------------------------------------------------------------- reference

namespace {

Measure measure_from_string(std::string_view s) {
    for (auto m : {Measure::AbdFraction, Measure::QueueMean, Measure::QueueVar, Measure::WaitMean, Measure::WaitVar,
                   Measure::QueueTail, Measure::WaitTail, Measure::StateHistogram}) {
        if (to_string(m) == s) return m;
    }
    throw Error(Errc::ConfigError, "unknown measure '" + std::string(s) + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(field);
            field.clear();
        } else {
            field += ch;
        }
    }
    out.push_back(field);
    return out;
}

std::string fmt(double v, int digits = 10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string model_tag(const std::string& service, int n, double gamma) {
    return "M/" + service + "/" + std::to_string(n) + "+M gamma=" + fmt(gamma, 6);
}

std::string cell_label(const std::string& service, int n, double gamma, Measure m, double a) {
    std::string s = model_tag(service, n, gamma) + " " + std::string(to_string(m));
    if (m == Measure::QueueTail || m == Measure::WaitTail) s += "(" + fmt(a, 6) + ")";
    return s;
}

}  // namespace

std::vector<ReferenceCell> load_reference(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open reference " + path.string());
    std::string line;
    std::getline(in, line);
    const std::vector<std::string> expected{"table", "service", "n", "gamma", "measure",
                                            "a", "kind", "value", "half_width", "provenance"};
    if (split_csv(line) != expected) throw Error(Errc::ConfigError, path.string() + ": unexpected header");
    std::vector<ReferenceCell> cells;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 10) {
            throw Error(Errc::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
        }
        try {
            ReferenceCell c;
            c.table = std::stoi(f[0]);
            c.service = f[1];
            c.n = std::stoi(f[2]);
            c.gamma = std::stod(f[3]);
            c.measure = measure_from_string(f[4]);
            c.a = std::stod(f[5]);
            if (f[6] != "sim" && f[6] != "approx") throw Error(Errc::ConfigError, "kind must be sim or approx");
            c.approx = f[6] == "approx";
            c.text = f[7];
            c.value = std::stod(f[7]);
            c.half_width = f[8].empty() ? 0.0 : std::stod(f[8]);
            c.provenance = f[9];
            cells.push_back(std::move(c));
        } catch (const std::logic_error& e) {
            throw Error(Errc::ConfigError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cells;
}

bool matches_significant(double ours, const std::string& printed) {
    const double ref = std::stod(printed);
    if (ref == 0.0) return std::abs(ours) < 1e-12;
    // count printed significant digits
    int digits = 0;
    bool leading = true;
    for (char ch : printed) {
        if (ch < '0' || ch > '9') continue;
        if (leading && ch == '0') continue;
        leading = false;
        ++digits;
    }
    const double unit = std::pow(10.0, std::floor(std::log10(std::abs(ref))) - (digits - 1));
    return std::abs(ours - ref) <= 0.5 * unit * (1.0 + 1e-9);
}

Band sim_band(Measure measure) {
    switch (measure) {
        case Measure::AbdFraction: return {0.003, false};
        case Measure::QueueMean: return {0.02, true};
        case Measure::QueueVar: return {0.10, true};
        case Measure::WaitMean: return {0.02, true};
        case Measure::WaitVar: return {0.10, true};
        case Measure::QueueTail:
        case Measure::WaitTail: return {0.01, false};
        case Measure::StateHistogram: break;
    }
    return {0.0, false};
}

std::size_t ValidationReport::failures() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellCheck& c) { return !c.passed; }));
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os << (cells.size() - failures()) << "/" << cells.size() << " reference cells pass";
    for (const auto& c : cells) {
        if (!c.passed) {
            os << "\n  " << c.label << (c.approx ? " [approx]" : " [sim]") << ": ours " << fmt(c.ours, 6)
               << " vs " << fmt(c.reference, 6) << " (tol " << fmt(c.tolerance, 3) << ")";
        }
    }
    return os.str();
}

ValidationReport validate_against_reference(std::span<const TableRow> rows, std::span<const ReferenceCell> reference,
                                            int table, bool strict) {
    ValidationReport report;
    for (const auto& ref : reference) {
        if (ref.table != table) continue;
        for (const auto& row : rows) {
            if (row.service != ref.service || row.n != ref.n || std::abs(row.gamma - ref.gamma) > 1e-9) continue;
            for (const auto& c : row.cells) {
                if (c.measure != ref.measure || std::abs(c.a - ref.a) > 1e-9) continue;
                if (!ref.approx && !c.simulated) continue;
                CellCheck chk;
                chk.label = cell_label(row.service, row.n, row.gamma, c.measure, c.a);
                chk.approx = ref.approx;
                chk.reference = ref.value;
                chk.provenance = ref.provenance;
                if (ref.approx) {
                    chk.ours = c.approx;
                    chk.passed = matches_significant(c.approx, ref.text);
                    chk.tolerance = 0.0;
                } else {
                    chk.ours = c.sim;
                    const Band band = sim_band(c.measure);
                    chk.tolerance = band.relative ? band.tolerance * std::abs(ref.value) : band.tolerance;
                    chk.passed = std::abs(c.sim - ref.value) <= chk.tolerance;
                }
                report.cells.push_back(std::move(chk));
            }
        }
    }
    if (strict && !report.passed()) throw Error(Errc::ReferenceMismatch, report.summary());
    return report;
}

bool Artifacts::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

double histogram_ks(std::span<const double> pmf, const GaussianApprox& approx) {
    const double mean = approx.n + approx.q;
    const double sd = std::sqrt(approx.sigma2_Q);
    double cum = 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        const double g_below = stats::normal_cdf((static_cast<double>(i) - 0.5 - mean) / sd);
        d = std::max(d, std::abs(cum - g_below));
        cum += pmf[i];
        const double g = stats::normal_cdf((static_cast<double>(i) + 0.5 - mean) / sd);
        d = std::max(d, std::abs(cum - g));
    }
    return d;
}

int count_inversions(std::span<const double> values) {
    int k = 0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        if (values[i + 1] > values[i]) ++k;
    }
    return k;
}

// ---------------------------------------------------------------- artifacts

namespace {

class Writer {
public:
    Writer(const ExperimentPlan& plan, Artifacts& art) : plan_(plan), art_(art) {}

    std::ofstream open(const std::string& file) {
        fs::create_directories(plan_.out_dir);
        const fs::path path = plan_.out_dir / file;
        std::ofstream out(path);
        if (!out) throw Error(Errc::ConfigError, "cannot write " + path.string());
        art_.files.push_back(path);
        return out;
    }

private:
    const ExperimentPlan& plan_;
    Artifacts& art_;
};

void check(Artifacts& art, std::string name, bool passed, std::string detail = {}) {
    art.checks.push_back({std::move(name), passed, std::move(detail)});
}

std::string measure_header(Measure m, double a) {
    switch (m) {
        case Measure::AbdFraction: return "Abd. fraction";
        case Measure::QueueMean: return "Queue mean";
        case Measure::QueueVar: return "Queue variance";
        case Measure::WaitMean: return "Wait mean";
        case Measure::WaitVar: return "Wait variance";
        case Measure::QueueTail: return "P[X~>" + fmt(a, 3) + "]";
        case Measure::WaitTail: return "P[W~>" + fmt(a, 3) + "]";
        case Measure::StateHistogram: break;
    }
    return "?";
}

bool selected(ExperimentKind kind, Measure m) {
    const bool tail = m == Measure::QueueTail || m == Measure::WaitTail;
    return kind == ExperimentKind::TableTails ? tail : !tail;
}

void write_table(const ExperimentPlan& plan, Artifacts& art, Writer& w) {
    {
        auto csv = w.open(plan.name + ".csv");
        csv << "service,n,gamma,measure,a,sim,half_width,approx,gap\n";
        for (const auto& row : art.rows) {
            for (const auto& c : row.cells) {
                if (!selected(plan.kind, c.measure)) continue;
                csv << row.service << ',' << row.n << ',' << fmt(row.gamma) << ',' << to_string(c.measure) << ','
                    << fmt(c.a) << ',' << (c.simulated ? fmt(c.sim) : "") << ','
                    << (c.simulated ? fmt(c.half_width) : "") << ',' << fmt(c.approx) << ','
                    << (c.simulated ? fmt(c.gap) : "") << '\n';
            }
        }
    }
    auto md = w.open(plan.name + ".md");
    md << "# " << plan.name << "\n\n"
       << "rho = " << fmt(plan.rho, 6) << ", mu = " << fmt(plan.mu, 6)
       << "; simulated value, 95% half-width across replications, then *approximation*.\n\n";
    std::string current;
    for (const auto& row : art.rows) {
        const std::string block = "M/" + row.service + "/" + std::to_string(row.n) + "+M";
        if (block != current) {
            current = block;
            md << "\n## " << block << "\n\n| Patience |";
            std::size_t ncols = 0;
            for (const auto& c : row.cells) {
                if (!selected(plan.kind, c.measure)) continue;
                md << ' ' << measure_header(c.measure, c.a) << " |";
                ++ncols;
            }
            md << " max gap |\n|---|";
            for (std::size_t i = 0; i <= ncols; ++i) md << "---|";
            md << '\n';
        }
        double max_gap = 0.0;
        std::ostringstream sim, hw, approx;
        for (const auto& c : row.cells) {
            if (!selected(plan.kind, c.measure)) continue;
            sim << ' ' << (c.simulated ? fmt(c.sim, 4) : "") << " |";
            hw << ' ' << (c.simulated ? "±" + fmt(c.half_width, 2) : "") << " |";
            approx << " *" << fmt(c.approx, 4) << "* |";
            if (c.simulated) max_gap = std::max(max_gap, c.gap);
        }
        const std::string label = "gamma=" + fmt(row.gamma, 4);
        if (row.cells.front().simulated) {
            md << "| " << label << " |" << sim.str() << " |\n";
            md << "| |" << hw.str() << " |\n";
            md << "| |" << approx.str() << ' ' << fmt(100.0 * max_gap, 3) << "% |\n";
        } else {
            md << "| " << label << " |" << approx.str() << " |\n";
        }
    }
}

void validate_rows(const ExperimentPlan& plan, Artifacts& art, Writer& w) {
    if (plan.reference.empty()) return;
    const auto ref = load_reference(plan.reference);
    const auto report = validate_against_reference(art.rows, ref, plan.reference_table, false);
    auto csv = w.open(plan.name + "_validation.csv");
    csv << "cell,kind,ours,reference,tolerance,passed,provenance\n";
    for (const auto& c : report.cells) {
        csv << c.label << ',' << (c.approx ? "approx" : "sim") << ',' << fmt(c.ours) << ',' << fmt(c.reference)
            << ',' << fmt(c.tolerance) << ',' << (c.passed ? "pass" : "FAIL") << ',' << c.provenance << '\n';
    }
    if (report.cells.empty()) {
        art.warnings.push_back("no reference cells matched table " + std::to_string(plan.reference_table));
    }
    check(art, "reference table " + std::to_string(plan.reference_table), report.passed(), report.summary());
}

SimSummary simulate_checked(const QueueModel& model, const SimConfig& config, Exec exec, Artifacts& art,
                            const std::string& label) {
    const auto reps = run_replications(model, config, exec);
    std::size_t conserved = 0;
    for (const auto& r : reps) conserved += r.flow_conserved() ? 1 : 0;
    check(art, "flow conservation " + label, conserved == reps.size(),
          std::to_string(conserved) + "/" + std::to_string(reps.size()) + " replications");
    return aggregate(config, reps);
}

bool grid_empty(const ExperimentPlan& plan, bool need_gammas) {
    return plan.services.empty() || plan.servers.empty() || (need_gammas && plan.gammas.empty());
}

void run_table(const ExperimentPlan& plan, Exec exec, bool approx_only, Artifacts& art, Writer& w) {
    if (grid_empty(plan, true)) {
        art.warnings.push_back("empty model grid; nothing to do");
        return;
    }
    const SimConfig config = plan.sim_config();
    for (const auto& service : plan.services) {
        const std::string label = service_label(service);
        for (int n : plan.servers) {
            for (double gamma : plan.gammas) {
                const QueueModel model = plan.model(service, n, gamma);
                if (approx_only) {
                    art.rows.push_back(make_approx_row(model, config.tail_points, label));
                } else {
                    const SimSummary s = simulate_checked(model, config, exec, art, model_tag(label, n, gamma));
                    art.rows.push_back(make_row(model, s, label));
                }
            }
        }
    }
    write_table(plan, art, w);
    validate_rows(plan, art, w);
}

void run_figure(const ExperimentPlan& plan, Artifacts& art, Writer& w) {
    if (grid_empty(plan, true)) {
        art.warnings.push_back("empty model grid; nothing to do");
        return;
    }
    const DistSpec& service = plan.services.front();
    const int n = plan.servers.front();
    const double lambda = plan.rho * n * service.rate();
    auto summary = w.open(plan.name + ".csv");
    summary << "gamma,truncation,states,tv,exact_mean,approx_mean,exact_var,approx_var,abandon_fraction,residual,"
               "truncation_bound\n";
    for (double gamma : plan.gammas) {
        CTMCModel model = service.family() == Family::Hyperexp2 ? make_h2_model(n, lambda, gamma, service)
                          : service.family() == Family::Exponential
                              ? make_erlang_a_model(n, lambda, service.rate(), gamma)
                              : throw Error(Errc::UnsupportedFamily, "Figure1 needs H2 or M service");
        const Generator gen = build_generator(model);
        const StationaryDist dist = solve_stationary(gen, model);
        const GaussianApprox approx = approximate(n, service.rate(), plan.rho, gamma, 1.0, service.scv());
        const GaussianComparison cmp = compare_to_gaussian(dist, approx);
        const double imbalance = flow_imbalance(dist, gen, model);
        summary << fmt(gamma) << ',' << model.truncation << ',' << model.state_count() << ',' << fmt(cmp.tv) << ','
                << fmt(cmp.exact_mean) << ',' << fmt(cmp.approx_mean) << ',' << fmt(cmp.exact_var) << ','
                << fmt(cmp.approx_var) << ',' << fmt(abandonment_fraction(dist, gen, model)) << ','
                << fmt(dist.residual) << ',' << fmt(dist.truncation_mass_bound) << '\n';
        {
            auto pmf = w.open(plan.name + "_pmf_gamma" + fmt(gamma, 6) + ".csv");
            pmf << "x,exact,gaussian\n";
            for (std::size_t x = 0; x < dist.marginal.size(); ++x) {
                pmf << x << ',' << fmt(dist.marginal[x]) << ',' << fmt(cmp.gaussian_pmf[x]) << '\n';
            }
        }
        const std::string tag = "gamma=" + fmt(gamma, 6);
        check(art, "stationary residual " + tag, dist.residual < 1e-10, fmt(dist.residual, 3));
        check(art, "flow balance " + tag, std::abs(imbalance) < 1e-8, fmt(imbalance, 3));
        for (const auto& b : plan.tv_bounds) {
            if (std::abs(b.gamma - gamma) > 1e-12) continue;
            if (b.min) check(art, "TV > " + fmt(*b.min, 3) + " at " + tag, cmp.tv > *b.min, "TV = " + fmt(cmp.tv, 4));
            if (b.max) check(art, "TV < " + fmt(*b.max, 3) + " at " + tag, cmp.tv < *b.max, "TV = " + fmt(cmp.tv, 4));
        }
    }
}

void run_sweep(const ExperimentPlan& plan, Exec exec, Artifacts& art, Writer& w) {
    const bool many = plan.regime == SweepRegime::ManyServer;
    if (grid_empty(plan, !many)) {
        art.warnings.push_back("empty model grid; nothing to do");
        return;
    }
    std::vector<std::pair<int, double>> points;
    if (many) {
        for (int n : plan.servers) points.emplace_back(n, plan.gamma_scale * std::sqrt(static_cast<double>(n)));
    } else {
        for (double g : plan.gammas) points.emplace_back(plan.servers.front(), g);
    }
    const SimConfig config = plan.sim_config();
    const DistSpec& service = plan.services.front();
    std::vector<double> ks;
    auto csv = w.open(plan.name + ".csv");
    csv << "n,gamma,ks,replications,horizon\n";
    for (const auto& [n, gamma] : points) {
        const QueueModel model = plan.model(service, n, gamma);
        const std::string tag = "n=" + std::to_string(n) + " gamma=" + fmt(gamma, 6);
        const SimSummary s = simulate_checked(model, config, exec, art, tag);
        const GaussianApprox approx = model_approx(model);
        ks.push_back(histogram_ks(s.histogram, approx));
        csv << n << ',' << fmt(gamma) << ',' << fmt(ks.back()) << ',' << config.replications << ','
            << fmt(config.horizon) << '\n';
        auto hist = w.open(plan.name + "_hist_n" + std::to_string(n) + "_gamma" + fmt(gamma, 6) + ".csv");
        hist << "x,scaled_x,simulated,gaussian\n";
        const double scale = std::sqrt(n * gamma);
        for (std::size_t x = 0; x < s.histogram.size(); ++x) {
            hist << x << ',' << fmt((static_cast<double>(x) - n - approx.q) / scale) << ',' << fmt(s.histogram[x])
                 << ',' << fmt(state_pmf(approx, static_cast<long>(x))) << '\n';
        }
    }
    const int inv = count_inversions(ks);
    std::string detail = "KS:";
    for (double k : ks) detail += " " + fmt(k, 4);
    check(art, "KS nonincreasing (" + std::string(many ? "many-server" : "long-patience") + ", " +
                   std::to_string(inv) + " inversions, " + std::to_string(plan.allowed_inversions) + " allowed)",
          inv <= plan.allowed_inversions, detail);
}

void run_fclt(const ExperimentPlan& plan, Exec exec, Artifacts& art, Writer& w) {
    const auto& cfg = plan.fclt;
    const ScaledPathSample sample = simulate_superposition(cfg, exec);
    const BrownianReport rep =
        brownian_tests(sample, cfg.interrenewal, plan.fclt_t1, plan.fclt_t2, plan.permutations, cfg.seed);
    {
        auto csv = w.open(plan.name + "_per_time.csv");
        csv << "t,mean,se_mean,var,se_var,expected_var,ad_statistic,ad_p_value\n";
        for (const auto& p : rep.per_time) {
            csv << fmt(p.t) << ',' << fmt(p.mean) << ',' << fmt(p.se_mean) << ',' << fmt(p.var) << ','
                << fmt(p.se_var) << ',' << fmt(p.expected_var) << ',' << fmt(p.ad_statistic) << ','
                << fmt(p.ad_p_value) << '\n';
        }
    }
    // Law of large numbers: sup_t |B(gamma t)/(n gamma) - mu t| per replication.
    std::vector<double> sup(static_cast<std::size_t>(sample.replications), 0.0);
    const double mu = cfg.interrenewal.rate();
    const double ng = static_cast<double>(cfg.n) * cfg.gamma;
    for (int r = 0; r < sample.replications; ++r) {
        for (std::size_t k = 0; k < sample.t_grid.size(); ++k) {
            const double c = static_cast<double>(sample.counts[static_cast<std::size_t>(r) * sample.t_grid.size() + k]);
            sup[static_cast<std::size_t>(r)] = std::max(sup[static_cast<std::size_t>(r)], std::abs(c / ng - mu * sample.t_grid[k]));
        }
    }
    std::vector<double> sorted = sup;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    {
        auto csv = w.open(plan.name + "_summary.csv");
        csv << "n,gamma,replications,t1,t2,increment_correlation,permutation_p_value,slope,expected_slope,"
               "slope_rel_error,fslln_median_sup\n";
        csv << cfg.n << ',' << fmt(cfg.gamma) << ',' << sample.replications << ',' << fmt(rep.t1) << ','
            << fmt(rep.t2) << ',' << fmt(rep.increment_correlation) << ',' << fmt(rep.permutation_p_value) << ','
            << fmt(rep.slope) << ',' << fmt(rep.expected_slope) << ',' << fmt(rep.slope_rel_error) << ','
            << fmt(median) << '\n';
    }
    {
        auto csv = w.open(plan.name + "_paths.csv");
        csv << "replication";
        for (double t : sample.t_grid) csv << ",t=" << fmt(t);
        csv << '\n';
        for (int r = 0; r < std::min(sample.replications, 50); ++r) {
            csv << r;
            for (std::size_t k = 0; k < sample.t_grid.size(); ++k) csv << ',' << fmt(sample.at(r, k));
            csv << '\n';
        }
    }
    const std::string r_text = "r = " + fmt(rep.increment_correlation, 4);
    if (plan.expect_dependence) {
        check(art, "increments dependent (|r| > 0.1)", std::abs(rep.increment_correlation) > 0.1, r_text);
        return;
    }
    check(art, "increments independent (|r| < 0.05)", std::abs(rep.increment_correlation) < 0.05, r_text);
    for (const auto& p : rep.per_time) {
        check(art, "variance at t=" + fmt(p.t, 4) + " within 4 SE", std::abs(p.var - p.expected_var) <= 4.0 * p.se_var,
              fmt(p.var, 5) + " vs " + fmt(p.expected_var, 5) + " (SE " + fmt(p.se_var, 3) + ")");
    }
    check(art, "variance slope within 5%", rep.slope_rel_error < 0.05,
          fmt(rep.slope, 5) + " vs " + fmt(rep.expected_slope, 5));
}

void run_ys(const ExperimentPlan& plan, Exec exec, Artifacts& art, Writer& w) {
    double worst_quad = 0.0;
    double worst_limit = 0.0;
    {
        auto csv = w.open(plan.name + ".csv");
        csv << "s,cA2,cS2,initial,arrival,service,abandonment,variance,quadrature_variance,limit_variance\n";
        for (double s : plan.ys_s) {
            for (double a2 : plan.ys_cA2) {
                for (double s2 : plan.ys_cS2) {
                    const YsLaw law = ys_law(s, plan.mu, plan.rho, a2, s2, plan.ys_var_x0);
                    const YsLaw quad = ys_law_quadrature(s, plan.mu, plan.rho, a2, s2, plan.ys_var_x0);
                    const double limit = ys_limit_variance(plan.mu, plan.rho, a2, s2);
                    worst_quad = std::max(worst_quad, std::abs(law.variance - quad.variance) / quad.variance);
                    if (s >= 20.0) worst_limit = std::max(worst_limit, std::abs(law.variance - limit) / limit);
                    csv << fmt(s) << ',' << fmt(a2) << ',' << fmt(s2) << ',' << fmt(law.initial) << ','
                        << fmt(law.arrival) << ',' << fmt(law.service) << ',' << fmt(law.abandonment) << ','
                        << fmt(law.variance) << ',' << fmt(quad.variance) << ',' << fmt(limit) << '\n';
                }
            }
        }
    }
    check(art, "closed form vs quadrature (rel < 1e-8)", worst_quad < 1e-8, fmt(worst_quad, 3));
    check(art, "variance at s >= 20 vs limit (rel < 1e-6)", worst_limit < 1e-6, fmt(worst_limit, 3));

    if (plan.services.empty() || plan.servers.empty() || plan.gammas.empty()) return;
    const SimConfig config = plan.sim_config();
    auto csv = w.open(plan.name + "_probes.csv");
    csv << "service,n,gamma,scaled_wait_var_sim,half_width,scaled_wait_var_limit,rel_error\n";
    for (const auto& service : plan.services) {
        for (int n : plan.servers) {
            for (double gamma : plan.gammas) {
                const QueueModel model = plan.model(service, n, gamma);
                const std::string tag = model_tag(service_label(service), n, gamma);
                const SimSummary s = simulate_checked(model, config, exec, art, tag);
                const GaussianApprox g = model_approx(model);
                const SimEstimate& e = s.get(Measure::WaitVar);
                const double scale = n / gamma;
                const double rel = std::abs(scale * e.value - g.wait_scaled_var) / g.wait_scaled_var;
                csv << service_label(service) << ',' << n << ',' << fmt(gamma) << ',' << fmt(scale * e.value) << ','
                    << fmt(scale * e.half_width_95) << ',' << fmt(g.wait_scaled_var) << ',' << fmt(rel) << '\n';
                check(art, "probe wait variance within 10% " + tag, rel < 0.10,
                      fmt(scale * e.value, 5) + " vs " + fmt(g.wait_scaled_var, 5));
            }
        }
    }
}

void write_manifest(const ExperimentPlan& plan, const Artifacts& art, const std::string& error) {
    fs::create_directories(plan.out_dir);
    Json m;
    m["name"] = plan.name;
    m["kind"] = std::string(to_string(plan.kind));
    Json files = Json::array();
    for (const auto& f : art.files) files.push_back(f.filename().string());
    m["files"] = files;
    Json checks = Json::array();
    for (const auto& c : art.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    m["checks"] = checks;
    m["warnings"] = art.warnings;
    m["passed"] = error.empty() && art.ok();
    if (!error.empty()) m["error"] = error;
    std::ofstream out(plan.out_dir / "manifest.json");
    out << m.dump(2) << '\n';
}

}  // namespace

Artifacts run_plan(const ExperimentPlan& plan, Exec exec, bool approx_only) {
    Artifacts art;
    Writer w(plan, art);
    try {
        switch (plan.kind) {
            case ExperimentKind::TableMeasures:
            case ExperimentKind::TableTails: run_table(plan, exec, approx_only, art, w); break;
            case ExperimentKind::Figure1: run_figure(plan, art, w); break;
            case ExperimentKind::ConvergenceSweep: run_sweep(plan, exec, art, w); break;
            case ExperimentKind::FcltReport: run_fclt(plan, exec, art, w); break;
            case ExperimentKind::YsLawReport: run_ys(plan, exec, art, w); break;
        }
    } catch (const std::exception& e) {
        write_manifest(plan, art, e.what());
        throw;
    }
    if (!art.files.empty() || !art.checks.empty()) write_manifest(plan, art, {});
    return art;
}

}  // namespace abandonq
