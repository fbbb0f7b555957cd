#pragma once

#include <filesystem>
#include <json.hpp>

#include "abandonq/ctmc.hpp"
#include "abandonq/des.hpp"
#include "abandonq/distributions.hpp"
#include "abandonq/fclt.hpp"

namespace abandonq {

using Json = nlohmann::json;

/// Reads a JSON document. Throws Error{ConfigError} with the file name on
/// I/O or syntax problems.
Json load_json(const std::filesystem::path& path);

/// Moment form {"family", "mean", "scv"} or family-native form:
///   D {"value"}, M {"rate"}, E2 {"stage_rate"}, LN {"mu_log", "sigma_log"},
///   H2 {"p1", "rate1"|"mean1", "rate2"|"mean2"}.
/// `default_mean` fills a missing mean in the moment form (ignored if <= 0).
DistSpec dist_from_json(const Json& j, double default_mean = 0.0);
/// Family-native form; round-trips exactly through dist_from_json.
Json dist_to_json(const DistSpec& dist);

/// {"servers", "service", "arrival"|"rho", "patience"|"gamma"}. With "rho"
/// the arrivals are Poisson unless "arrival" gives a family and scv.
QueueModel model_from_json(const Json& j);
Json model_to_json(const QueueModel& model);

/// Overlays any of horizon, warmup, replications, probe_interval, seed,
/// mode, tail_points, trace_limit on `base`.
SimConfig sim_config_from_json(const Json& j, SimConfig base = {});
Json sim_config_to_json(const SimConfig& config);

SuperpositionConfig superposition_from_json(const Json& j, SuperpositionConfig base = {});

/// Fields are checked against `allowed`; any other key is a ConfigError.
void require_known_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view where);

}  // namespace abandonq
