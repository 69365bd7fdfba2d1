#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hmmlabel/pipeline.hpp"
#include "hmmlabel/simulator.hpp"

namespace hmmlabel {

struct SourceBreakdown {
  double frames = 0.0;
  double errors = 0.0;
  friend bool operator==(const SourceBreakdown&, const SourceBreakdown&) = default;
};

/// Effort and accuracy of one parameter setting. Frame counts are means when
/// the point averages several repetitions.
struct TradeoffPoint {
  PipelineParams params;
  double total_frames = 0.0;
  double manual_frames = 0.0;
  double auto_frames = 0.0;
  /// total_frames / manual_frames; total_frames when nothing went to a human.
  double reduction_factor = 0.0;
  double accuracy = 0.0;
  bool no_manual = false;
  /// Indexed by LabelSource.
  std::array<SourceBreakdown, 3> by_source{};
  std::uint64_t model_version = 0;
  std::size_t repetitions = 0;
  bool pareto = false;
  /// Non-empty when the point failed; metrics are then meaningless.
  std::string error;

  bool ok() const { return error.empty(); }
  const SourceBreakdown& source(LabelSource s) const { return by_source[static_cast<std::size_t>(s)]; }
  friend bool operator==(const TradeoffPoint&, const TradeoffPoint&) = default;
};

/// Runs the pipeline with an annotator that answers every packet with ground
/// truth. Manual labels count as correct. Throws InputError when an in-segment
/// frame has no ground truth.
TradeoffPoint replay_metrics(const RecordStream& stream, const HmmModel& model, const PipelineParams& params);

struct SweepSpec {
  std::vector<double> delta_min{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> c_min{10.0};
  std::vector<double> v_u_min{1.0};
  /// Remaining pipeline settings shared by every grid point.
  PipelineParams base = default_base();
  /// Simulated source; ignored when records_path is set.
  SimConfig simulation = SimConfig::gaze_default();
  /// Recorded source replayed instead of simulating.
  std::optional<std::string> records_path;
  /// Model the replay starts from; uniform when absent.
  std::optional<HmmModel> initial_model;
  /// Simulated repetitions use seeds simulation.seed + r.
  std::size_t repetitions = 1;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  /// Seed-phase protocol: 20000 leading manual frames train the first model.
  static PipelineParams default_base();
  void validate() const;
};

/// Every grid point (delta_min outermost, then c_min, then v_u_min), averaged
/// over repetitions, with Pareto flags set. A failing point carries its error
/// and the others still run.
std::vector<TradeoffPoint> sweep(const SweepSpec& spec);

/// Marks points not dominated in (reduction_factor, accuracy) by any other
/// successful point. Independent of order.
void mark_pareto(std::vector<TradeoffPoint>& points);

/// Header plus one row per point: delta_min,c_min,v_u_min,total_frames,
/// manual_frames,reduction_factor,accuracy,pareto.
std::string sweep_csv(const std::vector<TradeoffPoint>& points);

}  // namespace hmmlabel
