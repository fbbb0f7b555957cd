// Command-line front end: one subcommand per analysis, each driven by a JSON
// config. Exit status is 0 only when every validation check passes.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "abandonq/config.hpp"
#include "abandonq/ctmc.hpp"
#include "abandonq/diffusion.hpp"
#include "abandonq/error.hpp"
#include "abandonq/experiments.hpp"
#include "abandonq/ou.hpp"
#include "abandonq/stats.hpp"

namespace fs = std::filesystem;
using namespace abandonq;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> budget;
    std::optional<std::string> out;
    bool serial = false;
};

Exec exec_of(const Options& o) { return o.serial ? Exec::Serial : Exec::Parallel; }

fs::path out_dir(const Options& o, const std::string& fallback) {
    return o.out ? fs::path(*o.out) : fs::path("out") / fallback;
}

bool report(const std::vector<Check>& checks, const std::vector<std::string>& warnings = {}) {
    for (const auto& w : warnings) std::cout << "warning: " << w << '\n';
    bool ok = true;
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
        std::cout << '\n';
        ok = ok && c.passed;
    }
    return ok;
}

std::string num(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

ExperimentPlan plan_with_overrides(const fs::path& path, const Options& o, std::optional<ExperimentKind> kind,
                                   const std::string& sub_out = {}) {
    Json j = load_json(path);
    if (kind && !j.contains("kind")) j["kind"] = std::string(to_string(*kind));
    ExperimentPlan plan = plan_from_json(j, path.parent_path());
    if (!j.contains("name")) plan.name = path.stem().string();
    if (kind && plan.kind != *kind) {
        throw Error(Errc::ConfigError, "plan kind " + std::string(to_string(plan.kind)) + " does not fit this subcommand");
    }
    if (o.seed) {
        plan.seed = *o.seed;
        plan.fclt.seed = *o.seed;
        plan.sim_overrides.erase("seed");
    }
    if (o.budget) plan.budget = budget_from_string(*o.budget);
    if (o.out) {
        plan.out_dir = sub_out.empty() ? fs::path(*o.out) : fs::path(*o.out) / sub_out;
    } else if (!j.contains("output")) {
        plan.out_dir = fs::path("out") / plan.name;
    }
    return plan;
}

bool run_plan_file(const fs::path& path, const Options& o, std::optional<ExperimentKind> kind, bool approx_only,
                   const std::string& sub_out = {}) {
    const ExperimentPlan plan = plan_with_overrides(path, o, kind, sub_out);
    std::cout << "== " << plan.name << " (" << to_string(plan.kind) << ") -> " << plan.out_dir.string() << '\n';
    const Artifacts art = run_plan(plan, exec_of(o), approx_only);
    for (const auto& f : art.files) std::cout << "wrote " << f.string() << '\n';
    return report(art.checks, art.warnings);
}


SimConfig sim_with_overrides(const Json& j, const Options& o) {
    SimConfig base = budget_config(o.budget ? budget_from_string(*o.budget) : Budget::Desk);
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    SimConfig c = j.contains("sim") ? sim_config_from_json(j.at("sim"), base) : base;
    if (o.seed) c.seed = *o.seed;
    return c;
}

GaussianApprox approx_of(const QueueModel& m) {
    if (m.patience.family() == Family::Exponential) {
        return approximate(m.servers, m.mu(), m.rho(), m.gamma(), m.arrival.scv(), m.service.scv());
    }
    return general_patience(m.servers, m.mu(), m.rho(), m.patience, m.arrival.scv(), m.service.scv());
}

Json approx_json(const GaussianApprox& g) {
    return {{"abandon_fraction", g.alpha}, {"queue_mean", g.q},   {"queue_var", g.sigma2_Q},
            {"wait_mean", g.w},            {"wait_var", g.sigma2_W}, {"ou_stationary_var", g.ou_var},
            {"scaled_wait_var", g.wait_scaled_var}};
}

int cmd_approx(const Options& o) {
    const Json j = load_json(o.config);
    if (j.contains("kind")) return run_plan_file(o.config, o, std::nullopt, true) ? 0 : 1;
    const QueueModel m = model_from_json(j);
    const GaussianApprox g = approx_of(m);
    Json out = approx_json(g);
    std::vector<double> tails = j.contains("sim") && j.at("sim").contains("tail_points")
                                    ? j.at("sim").at("tail_points").get<std::vector<double>>()
                                    : std::vector<double>{0.5, 1.0, 2.0};
    for (double a : tails) {
        out["queue_tail"][num(a)] = queue_tail(g, a);
        out["wait_tail"][num(a)] = wait_tail(g, a);
    }
    const fs::path dir = out_dir(o, fs::path(o.config).stem().string());
    fs::create_directories(dir);
    std::ofstream(dir / "approx.json") << out.dump(2) << '\n';
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_sim(const Options& o) {
    const Json j = load_json(o.config);
    const QueueModel m = model_from_json(j);
    const std::string warning = validate(m);
    if (!warning.empty()) std::cout << "warning: " << warning << '\n';
    const SimConfig c = sim_with_overrides(j, o);
    const auto reps = run_replications(m, c, exec_of(o));
    const SimSummary s = aggregate(c, reps);
    const fs::path dir = out_dir(o, fs::path(o.config).stem().string());
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "sim.csv");
        csv << "measure,a,value,half_width_95,replications\n";
        for (const auto& e : s.estimates) {
            csv << to_string(e.measure) << ',' << num(e.a, 10) << ',' << num(e.value, 10) << ','
                << num(e.half_width_95, 10) << ',' << e.replications << '\n';
            std::cout << e.label() << " = " << num(e.value) << " ± " << num(e.half_width_95, 3) << '\n';
        }
    }
    {
        std::ofstream csv(dir / "histogram.csv");
        csv << "x,probability\n";
        for (std::size_t x = 0; x < s.histogram.size(); ++x) csv << x << ',' << num(s.histogram[x], 10) << '\n';
    }
    std::vector<Check> checks;
    std::size_t ok = 0;
    for (const auto& r : reps) ok += r.flow_conserved() ? 1 : 0;
    checks.push_back({"flow conservation", ok == reps.size(), std::to_string(ok) + "/" + std::to_string(reps.size())});
    for (const auto& d : s.diagnostics) std::cout << "note: " << d << '\n';
    return report(checks) ? 0 : 1;
}

int cmd_exact(const Options& o) {
    const Json j = load_json(o.config);
    const QueueModel m = model_from_json(j);
    if (m.arrival.family() != Family::Exponential || m.patience.family() != Family::Exponential) {
        throw Error(Errc::UnsupportedFamily, "exact analysis needs Poisson arrivals and exponential patience");
    }
    const long trunc = j.value("truncation", 0L);
    CTMCModel model;
    if (m.service.family() == Family::Hyperexp2) {
        model = make_h2_model(m.servers, m.lambda(), m.gamma(), m.service, trunc);
    } else if (m.service.family() == Family::Exponential) {
        model = make_erlang_a_model(m.servers, m.lambda(), m.mu(), m.gamma(), trunc);
    } else {
        throw Error(Errc::UnsupportedFamily, "exact analysis needs M or H2 service");
    }
    const Generator gen = build_generator(model);
    const StationaryDist dist = solve_stationary(gen, model);
    const fs::path dir = out_dir(o, fs::path(o.config).stem().string());
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "states.csv");
        csv << "state,level,k1,probability\n";
        for (std::size_t i = 0; i < dist.pi.size(); ++i) {
            csv << i << ',' << gen.level[i] << ',' << gen.k1[i] << ',' << num(dist.pi[i], 12) << '\n';
        }
    }
    Json rep = {{"truncation", model.truncation},
                {"states", model.state_count()},
                {"residual", dist.residual},
                {"truncation_mass_bound", dist.truncation_mass_bound},
                {"mean", dist.mean()},
                {"variance", dist.variance()},
                {"abandon_fraction", abandonment_fraction(dist, gen, model)}};
    std::optional<GaussianComparison> cmp;
    if (m.rho() > 1.0) {
        cmp = compare_to_gaussian(dist, approx_of(m));
        rep["gaussian"] = {{"tv", cmp->tv},
                           {"mean_gap", cmp->mean_gap},
                           {"var_gap", cmp->var_gap},
                           {"approx_mean", cmp->approx_mean},
                           {"approx_var", cmp->approx_var}};
    }
    {
        std::ofstream csv(dir / "marginal.csv");
        csv << "x,exact" << (cmp ? ",gaussian" : "") << '\n';
        for (std::size_t x = 0; x < dist.marginal.size(); ++x) {
            csv << x << ',' << num(dist.marginal[x], 12);
            if (cmp) csv << ',' << num(cmp->gaussian_pmf[x], 12);
            csv << '\n';
        }
    }
    std::ofstream(dir / "report.json") << rep.dump(2) << '\n';
    std::cout << rep.dump(2) << '\n';
    const double imbalance = flow_imbalance(dist, gen, model);
    return report({{"stationary residual < 1e-10", dist.residual < 1e-10, num(dist.residual, 3)},
                   {"flow balance < 1e-8", std::abs(imbalance) < 1e-8, num(imbalance, 3)}})
               ? 0
               : 1;
}

int cmd_ou(const Options& o) {
    const Json j = load_json(o.config);
    require_known_keys(j, {"mu", "rho", "cA2", "cS2", "x0", "horizon", "step", "paths", "seed"}, "ou");
    const OUParams p = make_ou_params(j.value("mu", 1.0), j.value("rho", 1.2), j.value("cA2", 1.0),
                                      j.value("cS2", 1.0), j.value("x0", 0.0));
    const double horizon = j.value("horizon", 10.0);
    const double step = j.value("step", 0.1);
    const int paths = j.value("paths", 1000);
    std::uint64_t seed = j.value("seed", std::uint64_t{20130901});
    if (o.seed) seed = *o.seed;
    if (!(horizon > 0.0) || !(step > 0.0) || paths < 2) throw Error(Errc::ConfigError, "ou: bad horizon/step/paths");
    std::vector<double> grid;
    for (long k = 1; k * step <= horizon * (1.0 + 1e-12); ++k) grid.push_back(k * step);
    const fs::path dir = out_dir(o, fs::path(o.config).stem().string());
    fs::create_directories(dir);
    std::ofstream csv(dir / "ou_paths.csv");
    csv << "path,t,x\n";
    std::vector<double> terminal(static_cast<std::size_t>(paths));
    for (int r = 0; r < paths; ++r) {
        RngStream rng(seed, Stream::Ou, static_cast<std::uint64_t>(r));
        const auto xs = simulate_ou(p, grid, rng);
        terminal[static_cast<std::size_t>(r)] = xs.back();
        if (r < 20) {
            for (std::size_t k = 0; k < grid.size(); ++k) csv << r << ',' << num(grid[k], 10) << ',' << num(xs[k], 10) << '\n';
        }
    }
    const double t = grid.back();
    const double mean = p.x0 * std::exp(-t);
    const double sd = std::sqrt(p.diffusion_var / 2.0 * -std::expm1(-2.0 * t));
    const double d = stats::ks_statistic(terminal, [&](double x) { return stats::normal_cdf((x - mean) / sd); });
    const double crit = stats::ks_critical(terminal.size(), 0.01);
    std::cout << "terminal law N(" << num(mean) << ", " << num(sd * sd) << "), KS = " << num(d, 4) << '\n';
    return report({{"terminal values follow the exact transition law (KS, 1%)", d < crit,
                    "D = " + num(d, 4) + ", critical " + num(crit, 4)}})
               ? 0
               : 1;
}

int cmd_reproduce(const Options& o) {
    const Json j = load_json(o.config);
    if (!j.contains("plans")) return run_plan_file(o.config, o, std::nullopt, false) ? 0 : 1;
    require_known_keys(j, {"plans", "name"}, "suite");
    bool ok = true;
    for (const auto& entry : j.at("plans")) {
        const fs::path path = fs::path(o.config).parent_path() / entry.get<std::string>();
        ok = run_plan_file(path, o, std::nullopt, false, path.stem().string()) && ok;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"abandonq: many-server queues with abandonment"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", opt.config, "JSON config or plan file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "override the master seed");
        sub->add_option("--budget", opt.budget, "simulation budget")->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--out", opt.out, "output directory");
        sub->add_flag("--serial", opt.serial, "run replications on the serial reference loop");
    };
    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Sub subs[] = {
        {"approx", "Gaussian approximation for a model, or approximation rows of a table plan", cmd_approx},
        {"sim", "discrete-event simulation of a model", cmd_sim},
        {"exact", "exact stationary law of an M/H2/n+M or M/M/n+M model", cmd_exact},
        {"ou", "sample OU paths with exact transitions", cmd_ou},
        {"ys-law", "virtual-wait limit law report",
         [](const Options& o) { return run_plan_file(o.config, o, ExperimentKind::YsLawReport, false) ? 0 : 1; }},
        {"fclt", "superposition FCLT report",
         [](const Options& o) { return run_plan_file(o.config, o, ExperimentKind::FcltReport, false) ? 0 : 1; }},
        {"reproduce", "run an experiment plan or a suite of plans", cmd_reproduce},
    };
    for (const auto& s : subs) add_common(app.add_subcommand(s.name, s.help));
    CLI11_PARSE(app, argc, argv);
    for (const auto& s : subs) {
        if (!app.got_subcommand(s.name)) continue;
        try {
            return s.run(opt);
        } catch (const Error& e) {
            std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
    }
    return 2;
}
