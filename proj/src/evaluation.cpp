#include "hmmlabel/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace hmmlabel {

namespace {

std::size_t source_slot(LabelSource s) { return static_cast<std::size_t>(s); }

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw InputError(std::string("sweep grid '") + name + "' is empty");
}

TradeoffPoint average(const std::vector<TradeoffPoint>& reps) {
  TradeoffPoint out;
  out.params = reps.front().params;
  out.repetitions = reps.size();
  out.no_manual = true;
  const double n = static_cast<double>(reps.size());
  for (const auto& r : reps) {
    if (!r.ok()) {
      out.error = r.error;
      return out;
    }
    out.total_frames += r.total_frames / n;
    out.manual_frames += r.manual_frames / n;
    out.auto_frames += r.auto_frames / n;
    out.reduction_factor += r.reduction_factor / n;
    out.accuracy += r.accuracy / n;
    out.no_manual = out.no_manual && r.no_manual;
    out.model_version = std::max(out.model_version, r.model_version);
    for (std::size_t s = 0; s < 3; ++s) {
      out.by_source[s].frames += r.by_source[s].frames / n;
      out.by_source[s].errors += r.by_source[s].errors / n;
    }
  }
  if (reps.size() == 1) return reps.front();
  return out;
}

}  // namespace

TradeoffPoint replay_metrics(const RecordStream& stream, const HmmModel& model, const PipelineParams& params) {
  std::unordered_map<FrameIndex, StateIndex> truth;
  for (const auto& r : stream.records) {
    if (!r.object_present) continue;
    if (!r.ground_truth) {
      throw InputError("frame " + std::to_string(r.frame_index) + " is in a segment but has no ground truth");
    }
    truth.emplace(r.frame_index, *r.ground_truth);
  }
  const Annotator oracle = [&truth](const AnnotationPacket& packet) {
    std::vector<LabelRecord> labels;
    labels.reserve(packet.frames.size());
    for (FrameIndex f : packet.frames) labels.push_back({f, truth.at(f), LabelSource::manual});
    return labels;
  };
  const AnnotationRun run = run_pipeline(stream, model, params, oracle);
  if (run.aborted) throw Error("replay aborted: " + run.error);

  TradeoffPoint point;
  point.params = params;
  point.repetitions = 1;
  point.model_version = run.counters.model_version;
  point.total_frames = static_cast<double>(run.counters.in_segment_frames);
  point.manual_frames = static_cast<double>(run.counters.manual_frames);
  point.auto_frames = static_cast<double>(run.counters.auto_frames());
  std::uint64_t correct = 0;
  for (const auto& label : run.labels) {
    auto& slot = point.by_source[source_slot(label.source)];
    slot.frames += 1.0;
    if (label.state == truth.at(label.frame_index)) {
      ++correct;
    } else {
      slot.errors += 1.0;
    }
  }
  point.accuracy = point.total_frames > 0 ? static_cast<double>(correct) / point.total_frames : 1.0;
  point.no_manual = run.counters.manual_frames == 0;
  point.reduction_factor = point.no_manual ? point.total_frames : point.total_frames / point.manual_frames;
  return point;
}

PipelineParams SweepSpec::default_base() {
  PipelineParams params;
  params.seed_frames = 20000;
  return params;
}

void SweepSpec::validate() const {
  check_grid(delta_min, "delta_min");
  check_grid(c_min, "c_min");
  check_grid(v_u_min, "v_u_min");
  if (repetitions == 0) throw InputError("sweep needs at least one repetition");
  base.validate();
  for (double d : delta_min) {
    PipelineParams p = base;
    p.delta_min = d;
    p.validate();
  }
  for (double c : c_min) {
    PipelineParams p = base;
    p.c_min = c;
    p.validate();
  }
  for (double v : v_u_min) {
    PipelineParams p = base;
    p.v_u_min = v;
    p.validate();
  }
  if (!records_path) simulation.validate();
}

std::vector<TradeoffPoint> sweep(const SweepSpec& spec) {
  spec.validate();

  std::vector<PipelineParams> grid;
  for (double d : spec.delta_min) {
    for (double c : spec.c_min) {
      for (double v : spec.v_u_min) {
        PipelineParams p = spec.base;
        p.delta_min = d;
        p.c_min = c;
        p.v_u_min = v;
        grid.push_back(p);
      }
    }
  }

  // A recorded source is the same for every repetition.
  const std::size_t reps = spec.records_path ? 1 : spec.repetitions;
  std::vector<RecordStream> streams;
  if (spec.records_path) {
    streams.push_back(load_records(*spec.records_path));
  } else {
    streams.resize(reps);
  }

  const std::size_t tasks = grid.size() * reps;
  std::size_t threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks);

  // Streams are simulated in parallel first, then every (grid point, stream)
  // pair runs; results land in fixed slots so completion order is irrelevant.
  auto run_parallel = [threads](std::size_t count, const auto& body) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
    }
    for (auto& th : pool) th.join();
  };
  if (!spec.records_path) {
    run_parallel(reps, [&](std::size_t r) {
      SimConfig config = spec.simulation;
      config.seed = spec.simulation.seed + r;
      streams[r] = simulate_records(config);
    });
  }

  const HmmModel initial = spec.initial_model ? *spec.initial_model : HmmModel::uniform(streams.front().states);
  std::vector<TradeoffPoint> results(tasks);
  run_parallel(tasks, [&](std::size_t i) {
    const auto& params = grid[i / reps];
    try {
      results[i] = replay_metrics(streams[i % reps], initial, params);
    } catch (const std::exception& e) {
      results[i].params = params;
      results[i].error = e.what();
    }
  });

  std::vector<TradeoffPoint> points;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    points.push_back(average({results.begin() + static_cast<std::ptrdiff_t>(g * reps),
                              results.begin() + static_cast<std::ptrdiff_t>((g + 1) * reps)}));
  }
  mark_pareto(points);
  return points;
}

void mark_pareto(std::vector<TradeoffPoint>& points) {
  for (auto& p : points) {
    p.pareto = p.ok();
    if (!p.pareto) continue;
    for (const auto& q : points) {
      if (!q.ok()) continue;
      const bool no_worse = q.reduction_factor >= p.reduction_factor && q.accuracy >= p.accuracy;
      const bool better = q.reduction_factor > p.reduction_factor || q.accuracy > p.accuracy;
      if (no_worse && better) {
        p.pareto = false;
        break;
      }
    }
  }
}

std::string sweep_csv(const std::vector<TradeoffPoint>& points) {
  std::ostringstream out;
  out << "delta_min,c_min,v_u_min,total_frames,manual_frames,reduction_factor,accuracy,pareto\n";
  for (const auto& p : points) {
    out << format_double(p.params.delta_min) << ',' << format_double(p.params.c_min) << ','
        << format_double(p.params.v_u_min) << ',';
    if (p.ok()) {
      out << format_double(p.total_frames) << ',' << format_double(p.manual_frames) << ','
          << format_double(p.reduction_factor) << ',' << format_double(p.accuracy) << ',';
    } else {
      out << "nan,nan,nan,nan,";
    }
    out << (p.pareto ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace hmmlabel
