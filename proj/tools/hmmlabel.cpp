// Command-line front end: simulate, replay, sweep, pupil and serve.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "hmmlabel/config.hpp"
#include "hmmlabel/kernels.hpp"
#include "hmmlabel/pupil.hpp"
#include "hmmlabel/server.hpp"

using namespace hmmlabel;

namespace {

AnnotationServer* active_server = nullptr;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

PipelineParams load_params(const std::string& path, std::optional<HmmModel>& model) {
  if (path.empty()) return {};
  Json j = load_json(path);
  // A params file may carry the initial model alongside the thresholds.
  if (j.is_object() && j.contains("model")) {
    model = model_from_json(j.at("model"));
    j.erase("model");
  }
  return params_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HMM-assisted video annotation"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel variant: auto, scalar or avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  std::string config_path, out_path;
  std::optional<std::uint64_t> length, seed;
  auto* simulate = app.add_subcommand("simulate", "Write a simulated record stream");
  simulate->add_option("--config", config_path, "Simulation config (JSON); defaults when omitted");
  simulate->add_option("--length", length, "Override the frame count");
  simulate->add_option("--seed", seed, "Override the seed");
  simulate->add_option("--out", out_path, "Record file ('-' for stdout)")->required();

  std::string records_path, params_path, model_path;
  auto* replay = app.add_subcommand("replay", "Run the pipeline with a ground-truth annotator and report metrics");
  replay->add_option("--records", records_path, "Record file")->required()->check(CLI::ExistingFile);
  replay->add_option("--params", params_path, "Pipeline params (JSON, may include \"model\")");
  replay->add_option("--model", model_path, "Initial model (JSON); uniform when omitted");
  replay->add_option("--out", out_path, "Result JSON ('-' for stdout)");

  std::string spec_path, points_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "Threshold sweep with Pareto marking");
  sweep_cmd->add_option("--spec", spec_path, "Sweep spec (JSON); defaults when omitted");
  sweep_cmd->add_option("--out", out_path, "CSV output ('-' for stdout)");
  sweep_cmd->add_option("--points", points_path, "Also write full points as JSON");

  std::string image_path, polygon_path;
  auto* pupil_cmd = app.add_subcommand("pupil", "Locate the pupil in an eye image");
  pupil_cmd->add_option("image", image_path, "8-bit PGM")->required()->check(CLI::ExistingFile);
  pupil_cmd->add_option("--polygon", polygon_path, "Eye polygon, \"x,y\" per vertex")->required()->check(CLI::ExistingFile);

  std::string host = "127.0.0.1", images_dir, log_path;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the annotation queue over HTTP");
  serve->add_option("--records", records_path, "Record file")->required()->check(CLI::ExistingFile);
  serve->add_option("--params", params_path, "Pipeline params (JSON, may include \"model\")");
  serve->add_option("--model", model_path, "Initial model (JSON)");
  serve->add_option("--port", port, "Port; 0 picks a free one");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--images", images_dir, "Directory of <frame_index>.pgm/.png/.jpg images")->check(CLI::ExistingDirectory);
  serve->add_option("--log", log_path, "Append-only event log; replayed on restart");

  CLI11_PARSE(app, argc, argv);

  try {
    if (isa != "auto") kernels::set_active_isa(kernels::isa_from_string(isa));

    if (simulate->parsed()) {
      SimConfig config = config_path.empty() ? SimConfig::gaze_default() : sim_config_from_json(load_json(config_path));
      if (length) config.length = *length;
      if (seed) config.seed = *seed;
      config.validate();
      write_text(out_path, serialize_records(simulate_records(config)));
    } else if (replay->parsed()) {
      const RecordStream stream = load_records(records_path);
      std::optional<HmmModel> model;
      const PipelineParams params = load_params(params_path, model);
      if (!model_path.empty()) model = model_from_json(load_json(model_path));
      const auto point = replay_metrics(stream, model ? *model : HmmModel::uniform(stream.states), params);
      write_text(out_path, to_json(point).dump(2) + "\n");
    } else if (sweep_cmd->parsed()) {
      const SweepSpec spec = spec_path.empty() ? SweepSpec{} : sweep_spec_from_json(load_json(spec_path));
      const auto points = sweep(spec);
      write_text(out_path, sweep_csv(points));
      if (!points_path.empty()) {
        Json all = Json::array();
        for (const auto& p : points) all.push_back(to_json(p));
        write_text(points_path, all.dump(2) + "\n");
      }
    } else if (pupil_cmd->parsed()) {
      try {
        const auto result = pupil::extract_pupil(pupil::load_pgm(image_path), pupil::load_polygon(polygon_path));
        std::cout << format_double(result.center.x) << ' ' << format_double(result.center.y) << ' '
                  << result.blob_area << '\n';
      } catch (const pupil::NoPupil&) {
        std::cout << "no-pupil\n";
        return 2;
      }
    } else if (serve->parsed()) {
      ServiceConfig config;
      config.stream = load_records(records_path);
      std::optional<HmmModel> model;
      config.params = load_params(params_path, model);
      if (!model_path.empty()) model = model_from_json(load_json(model_path));
      config.initial_model = model ? *model : HmmModel::uniform(config.stream.states);
      if (!images_dir.empty()) config.image_dir = images_dir;
      if (!log_path.empty()) config.log_path = log_path;
      AnnotationService service(std::move(config));
      AnnotationServer server(service);
      const int bound = server.bind(host, port);
      std::cerr << "serving on http://" << host << ':' << bound << (service.recovered() ? " (recovered log)" : "")
                << std::endl;
      active_server = &server;
      std::signal(SIGINT, [](int) { active_server->stop(); });
      std::signal(SIGTERM, [](int) { active_server->stop(); });
      server.listen();
      active_server = nullptr;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
