#pragma once

// JSON forms of the configuration and result types. Readers reject unknown
// keys and wrong types with InputError naming the key; absent keys keep their
// defaults.

#include <json.hpp>
#include <string>

#include "hmmlabel/evaluation.hpp"

namespace hmmlabel {

using Json = nlohmann::json;

/// Parses text, turning syntax errors into InputError.
Json parse_json(std::string_view text, std::string_view what);
Json load_json(const std::string& path);

SquareMatrix matrix_from_json(const Json& j, std::string_view key);
Json matrix_to_json(const SquareMatrix& m);

/// Keys: states, true_transitions, emission, initial, presence_rate,
/// presence_mean_run, change_tpr, change_fpr, score_noise,
/// confidence_log10_correct, confidence_log10_wrong, confidence_log10_spread,
/// tail_ratio, length, seed. A non-gaze state list needs both matrices.
SimConfig sim_config_from_json(const Json& j);
Json to_json(const SimConfig& config);

/// Keys: delta_min, c_min, v_u_min, context_radius, retrain_interval,
/// smoothing_alpha, seed_frames, retrain_emission.
PipelineParams params_from_json(const Json& j, PipelineParams defaults = {});
Json to_json(const PipelineParams& params);

/// Keys: states, priors, transitions, emission.
HmmModel model_from_json(const Json& j);
Json to_json(const HmmModel& model);

/// Keys: delta_min, c_min, v_u_min (lists), base (params), simulation,
/// records (path), initial_model, repetitions, threads.
SweepSpec sweep_spec_from_json(const Json& j);

Json to_json(const TradeoffPoint& point);

}  // namespace hmmlabel
