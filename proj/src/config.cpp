#include "abandonq/config.hpp"

#include <fstream>

#include "abandonq/error.hpp"

namespace abandonq {

namespace {

[[noreturn]] void config_error(std::string_view where, const std::string& what) {
    throw Error(Errc::ConfigError, std::string(where) + ": " + what);
}

double number(const Json& j, const char* key, std::string_view where) {
    if (!j.contains(key)) config_error(where, std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) config_error(where, std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

double number_or(const Json& j, const char* key, double fallback, std::string_view where) {
    return j.contains(key) ? number(j, key, where) : fallback;
}

std::string short_family(Family f) {
    switch (f) {
        case Family::Deterministic: return "D";
        case Family::Exponential: return "M";
        case Family::Erlang2: return "E2";
        case Family::Lognormal: return "LN";
        case Family::Hyperexp2: return "H2";
    }
    return "?";
}

}  // namespace

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open " + path.string());
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
}

void require_known_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view where) {
    if (!j.is_object()) config_error(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) config_error(where, "unknown field '" + key + "'");
    }
}

namespace {

DistSpec dist_from_json_impl(const Json& j, double default_mean);

}  // namespace

DistSpec dist_from_json(const Json& j, double default_mean) {
    try {
        return dist_from_json_impl(j, default_mean);
    } catch (const Json::exception& e) {
        throw Error(Errc::ConfigError, std::string("dist: ") + e.what());
    }
}

namespace {

DistSpec dist_from_json_impl(const Json& j, double default_mean) {
    constexpr std::string_view where = "distribution";
    if (j.is_string()) return dist_from_json_impl(Json{{"family", j}}, default_mean);
    require_known_keys(j, {"family", "mean", "scv", "value", "rate", "stage_rate", "mu_log", "sigma_log",
                           "p1", "rate1", "rate2", "mean1", "mean2"},
                       where);
    if (!j.contains("family") || !j.at("family").is_string()) config_error(where, "missing 'family'");
    Family family;
    try {
        family = family_from_string(j.at("family").get<std::string>());
    } catch (const Error& e) {
        config_error(where, e.what());
    }
    switch (family) {
        case Family::Deterministic:
            if (j.contains("value")) return make_dist(DeterministicParams{number(j, "value", where)});
            break;
        case Family::Exponential:
            if (j.contains("rate")) return make_dist(ExponentialParams{number(j, "rate", where)});
            break;
        case Family::Erlang2:
            if (j.contains("stage_rate")) return make_dist(Erlang2Params{number(j, "stage_rate", where)});
            break;
        case Family::Lognormal:
            if (j.contains("mu_log") || j.contains("sigma_log")) {
                return make_dist(LognormalParams{number(j, "mu_log", where), number(j, "sigma_log", where)});
            }
            break;
        case Family::Hyperexp2:
            if (j.contains("p1")) {
                const double p1 = number(j, "p1", where);
                const double r1 = j.contains("rate1") ? number(j, "rate1", where) : 1.0 / number(j, "mean1", where);
                const double r2 = j.contains("rate2") ? number(j, "rate2", where) : 1.0 / number(j, "mean2", where);
                return make_dist(Hyperexp2Params{p1, r1, r2});
            }
            break;
    }
    const double mean = j.contains("mean") ? number(j, "mean", where) : default_mean;
    if (!(mean > 0.0)) config_error(where, "needs a positive 'mean' or family-native parameters");
    double scv;
    switch (family) {
        case Family::Deterministic: scv = 0.0; break;
        case Family::Exponential: scv = 1.0; break;
        case Family::Erlang2: scv = 0.5; break;
        default:
            if (!j.contains("scv")) config_error(where, "family " + short_family(family) + " needs 'scv'");
            scv = number(j, "scv", where);
    }
    if (j.contains("scv") && std::abs(number(j, "scv", where) - scv) > 1e-12) {
        config_error(where, "scv does not match family " + short_family(family));
    }
    return make_dist(family, mean, scv);
}

}  // namespace

Json dist_to_json(const DistSpec& dist) {
    return std::visit(
        [](const auto& p) -> Json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DeterministicParams>) {
                return {{"family", "D"}, {"value", p.value}};
            } else if constexpr (std::is_same_v<P, ExponentialParams>) {
                return {{"family", "M"}, {"rate", p.rate}};
            } else if constexpr (std::is_same_v<P, Erlang2Params>) {
                return {{"family", "E2"}, {"stage_rate", p.stage_rate}};
            } else if constexpr (std::is_same_v<P, LognormalParams>) {
                return {{"family", "LN"}, {"mu_log", p.mu_log}, {"sigma_log", p.sigma_log}};
            } else {
                return {{"family", "H2"}, {"p1", p.p1}, {"rate1", p.rate1}, {"rate2", p.rate2}};
            }
        },
        dist.params());
}

namespace {

QueueModel model_from_json_impl(const Json& j);

}  // namespace

QueueModel model_from_json(const Json& j) {
    try {
        return model_from_json_impl(j);
    } catch (const Json::exception& e) {
        throw Error(Errc::ConfigError, std::string("model: ") + e.what());
    }
}

namespace {

QueueModel model_from_json_impl(const Json& j) {
    constexpr std::string_view where = "model";
    require_known_keys(j, {"servers", "mu", "rho", "gamma", "arrival", "service", "patience", "truncation",
                           "sim", "seed", "name"},
                       where);
    if (!j.contains("servers") || !j.at("servers").is_number_integer()) {
        config_error(where, "missing integer 'servers'");
    }
    QueueModel m;
    m.servers = j.at("servers").get<int>();
    if (m.servers < 1) config_error(where, "'servers' must be >= 1");
    const double mu = number_or(j, "mu", 1.0, where);
    if (!j.contains("service")) config_error(where, "missing 'service'");
    m.service = dist_from_json(j.at("service"), 1.0 / mu);

    if (j.contains("rho")) {
        const double lambda = number(j, "rho", where) * m.servers * m.service.rate();
        if (!(lambda > 0.0)) config_error(where, "'rho' must be positive");
        Json a = j.contains("arrival") ? j.at("arrival") : Json{{"family", "M"}};
        if (a.is_string()) a = Json{{"family", a}};
        if (a.contains("mean") || a.contains("rate")) config_error(where, "give either 'rho' or an arrival rate");
        m.arrival = dist_from_json(a, 1.0 / lambda);
    } else {
        if (!j.contains("arrival")) config_error(where, "missing 'arrival' or 'rho'");
        m.arrival = dist_from_json(j.at("arrival"));
    }
    if (j.contains("gamma")) {
        if (j.contains("patience")) config_error(where, "give either 'gamma' or 'patience'");
        m.patience = exponential(number(j, "gamma", where));
    } else {
        if (!j.contains("patience")) config_error(where, "missing 'patience' or 'gamma'");
        m.patience = dist_from_json(j.at("patience"));
    }
    return m;
}

}  // namespace

Json model_to_json(const QueueModel& model) {
    return {{"servers", model.servers},
            {"arrival", dist_to_json(model.arrival)},
            {"service", dist_to_json(model.service)},
            {"patience", dist_to_json(model.patience)}};
}

namespace {

SimConfig sim_config_from_json_impl(const Json& j, SimConfig c);

}  // namespace

SimConfig sim_config_from_json(const Json& j, SimConfig c) {
    try {
        return sim_config_from_json_impl(j, c);
    } catch (const Json::exception& e) {
        throw Error(Errc::ConfigError, std::string("sim_config: ") + e.what());
    }
}

namespace {

SimConfig sim_config_from_json_impl(const Json& j, SimConfig c) {
    constexpr std::string_view where = "sim";
    require_known_keys(j, {"horizon", "warmup", "replications", "probe_interval", "seed", "mode", "tail_points",
                           "trace_limit"},
                       where);
    c.horizon = number_or(j, "horizon", c.horizon, where);
    c.warmup = number_or(j, "warmup", c.warmup, where);
    c.probe_interval = number_or(j, "probe_interval", c.probe_interval, where);
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("trace_limit")) c.trace_limit = j.at("trace_limit").get<std::size_t>();
    if (j.contains("tail_points")) c.tail_points = j.at("tail_points").get<std::vector<double>>();
    if (j.contains("mode")) {
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "standard") {
            c.mode = SimMode::Standard;
        } else if (mode == "perturbed") {
            c.mode = SimMode::Perturbed;
        } else {
            config_error(where, "mode must be 'standard' or 'perturbed'");
        }
    }
    validate(c);
    return c;
}

}  // namespace

Json sim_config_to_json(const SimConfig& c) {
    return {{"horizon", c.horizon},
            {"warmup", c.warmup},
            {"replications", c.replications},
            {"probe_interval", c.probe_interval},
            {"seed", c.seed},
            {"mode", c.mode == SimMode::Standard ? "standard" : "perturbed"},
            {"tail_points", c.tail_points},
            {"trace_limit", c.trace_limit}};
}

namespace {

SuperpositionConfig superposition_from_json_impl(const Json& j, SuperpositionConfig c);

}  // namespace

SuperpositionConfig superposition_from_json(const Json& j, SuperpositionConfig c) {
    try {
        return superposition_from_json_impl(j, c);
    } catch (const Json::exception& e) {
        throw Error(Errc::ConfigError, std::string("superposition: ") + e.what());
    }
}

namespace {

SuperpositionConfig superposition_from_json_impl(const Json& j, SuperpositionConfig c) {
    constexpr std::string_view where = "fclt";
    require_known_keys(j, {"n", "gamma", "interrenewal", "t_grid", "replications", "seed", "stationary_start",
                           "event_cap", "t1", "t2", "permutations", "expect_dependence"},
                       where);
    if (j.contains("n")) c.n = j.at("n").get<int>();
    c.gamma = number_or(j, "gamma", c.gamma, where);
    if (j.contains("interrenewal")) c.interrenewal = dist_from_json(j.at("interrenewal"), 1.0);
    if (j.contains("t_grid")) c.t_grid = j.at("t_grid").get<std::vector<double>>();
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("stationary_start")) c.stationary_start = j.at("stationary_start").get<bool>();
    c.event_cap = number_or(j, "event_cap", c.event_cap, where);
    validate(c);
    return c;
}

}  // namespace

}  // namespace abandonq
