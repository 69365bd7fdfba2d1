#include "hmmlabel/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace hmmlabel {

namespace {

void check_keys(const Json& j, std::string_view what, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InputError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw InputError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const Json& j, std::string_view key, T& out) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception&) {
    throw InputError("key '" + std::string(key) + "' has the wrong type");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (it->is_number_integer() && it->get<std::int64_t>() < 0) {
      throw InputError("key '" + std::string(key) + "' must be non-negative");
    }
  }
}

StateSpace states_from_json(const Json& j, std::string_view key) {
  std::vector<std::string> names;
  read(j, key, names);
  return StateSpace(std::move(names));
}

Json breakdown_to_json(const SourceBreakdown& b) { return {{"frames", b.frames}, {"errors", b.errors}}; }

}  // namespace

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_json(buffer.str(), path);
}

SquareMatrix matrix_from_json(const Json& j, std::string_view key) {
  std::vector<std::vector<double>> rows;
  read(j, key, rows);
  for (const auto& row : rows) {
    if (row.size() != rows.size()) throw InputError("key '" + std::string(key) + "' must be a square matrix");
  }
  return SquareMatrix::from_rows(rows);
}

Json matrix_to_json(const SquareMatrix& m) { return m.to_rows(); }

SimConfig sim_config_from_json(const Json& j) {
  check_keys(j, "simulation config",
             {"states", "true_transitions", "emission", "initial", "presence_rate", "presence_mean_run", "change_tpr",
              "change_fpr", "score_noise", "confidence_log10_correct", "confidence_log10_wrong",
              "confidence_log10_spread", "tail_ratio", "length", "seed"});
  SimConfig c = SimConfig::gaze_default();
  if (j.contains("states")) {
    c.states = states_from_json(j, "states");
    if (!(c.states == StateSpace::gaze_regions()) && (!j.contains("true_transitions") || !j.contains("emission"))) {
      throw InputError("simulation config: a custom state list needs true_transitions and emission");
    }
  }
  if (j.contains("true_transitions")) c.true_transitions = matrix_from_json(j, "true_transitions");
  if (j.contains("emission")) c.emission = matrix_from_json(j, "emission");
  read(j, "initial", c.initial);
  read(j, "presence_rate", c.presence_rate);
  read(j, "presence_mean_run", c.presence_mean_run);
  read(j, "change_tpr", c.change_tpr);
  read(j, "change_fpr", c.change_fpr);
  read(j, "score_noise", c.score_noise);
  read(j, "confidence_log10_correct", c.confidence_log10_correct);
  read(j, "confidence_log10_wrong", c.confidence_log10_wrong);
  read(j, "confidence_log10_spread", c.confidence_log10_spread);
  read(j, "tail_ratio", c.tail_ratio);
  read(j, "length", c.length);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const SimConfig& c) {
  return {{"states", c.states.names()},
          {"true_transitions", matrix_to_json(c.true_transitions)},
          {"emission", matrix_to_json(c.emission)},
          {"initial", c.initial},
          {"presence_rate", c.presence_rate},
          {"presence_mean_run", c.presence_mean_run},
          {"change_tpr", c.change_tpr},
          {"change_fpr", c.change_fpr},
          {"score_noise", c.score_noise},
          {"confidence_log10_correct", c.confidence_log10_correct},
          {"confidence_log10_wrong", c.confidence_log10_wrong},
          {"confidence_log10_spread", c.confidence_log10_spread},
          {"tail_ratio", c.tail_ratio},
          {"length", c.length},
          {"seed", c.seed}};
}

PipelineParams params_from_json(const Json& j, PipelineParams p) {
  check_keys(j, "pipeline params",
             {"delta_min", "c_min", "v_u_min", "context_radius", "retrain_interval", "smoothing_alpha", "seed_frames",
              "retrain_emission"});
  read(j, "delta_min", p.delta_min);
  read(j, "c_min", p.c_min);
  read(j, "v_u_min", p.v_u_min);
  read(j, "context_radius", p.context_radius);
  read(j, "retrain_interval", p.retrain_interval);
  read(j, "smoothing_alpha", p.smoothing_alpha);
  read(j, "seed_frames", p.seed_frames);
  read(j, "retrain_emission", p.retrain_emission);
  p.validate();
  return p;
}

Json to_json(const PipelineParams& p) {
  return {{"delta_min", p.delta_min},
          {"c_min", p.c_min},
          {"v_u_min", p.v_u_min},
          {"context_radius", p.context_radius},
          {"retrain_interval", p.retrain_interval},
          {"smoothing_alpha", p.smoothing_alpha},
          {"seed_frames", p.seed_frames},
          {"retrain_emission", p.retrain_emission}};
}

HmmModel model_from_json(const Json& j) {
  check_keys(j, "model", {"states", "priors", "transitions", "emission"});
  for (auto key : {"states", "priors", "transitions", "emission"}) {
    if (!j.contains(key)) throw InputError(std::string("model: missing key '") + key + "'");
  }
  std::vector<double> priors;
  read(j, "priors", priors);
  return HmmModel(states_from_json(j, "states"), std::move(priors), matrix_from_json(j, "transitions"),
                  matrix_from_json(j, "emission"));
}

Json to_json(const HmmModel& m) {
  return {{"states", m.states().names()},
          {"priors", m.priors()},
          {"transitions", matrix_to_json(m.transitions())},
          {"emission", matrix_to_json(m.emission())}};
}

SweepSpec sweep_spec_from_json(const Json& j) {
  check_keys(j, "sweep spec",
             {"delta_min", "c_min", "v_u_min", "base", "simulation", "records", "initial_model", "repetitions",
              "threads"});
  SweepSpec s;
  read(j, "delta_min", s.delta_min);
  read(j, "c_min", s.c_min);
  read(j, "v_u_min", s.v_u_min);
  if (j.contains("base")) s.base = params_from_json(j.at("base"), SweepSpec::default_base());
  if (j.contains("simulation")) s.simulation = sim_config_from_json(j.at("simulation"));
  if (j.contains("records")) {
    std::string path;
    read(j, "records", path);
    s.records_path = path;
  }
  if (j.contains("initial_model")) s.initial_model = model_from_json(j.at("initial_model"));
  read(j, "repetitions", s.repetitions);
  read(j, "threads", s.threads);
  s.validate();
  return s;
}

Json to_json(const TradeoffPoint& p) {
  Json j = {{"params", to_json(p.params)},
            {"total_frames", p.total_frames},
            {"manual_frames", p.manual_frames},
            {"auto_frames", p.auto_frames},
            {"reduction_factor", p.reduction_factor},
            {"accuracy", p.accuracy},
            {"no_manual", p.no_manual},
            {"by_source",
             {{"manual", breakdown_to_json(p.source(LabelSource::manual))},
              {"auto_stable", breakdown_to_json(p.source(LabelSource::auto_stable))},
              {"auto_confident", breakdown_to_json(p.source(LabelSource::auto_confident))}}},
            {"model_version", p.model_version},
            {"repetitions", p.repetitions},
            {"pareto", p.pareto}};
  if (!p.ok()) j["error"] = p.error;
  return j;
}

}  // namespace hmmlabel
