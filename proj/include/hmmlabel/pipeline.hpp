#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmmlabel/hmm.hpp"
#include "hmmlabel/records.hpp"

namespace hmmlabel {

struct PipelineParams {
  /// Change-score threshold, in (0,1).
  double delta_min = 0.3;
  /// Top-two probability ratio required for a confident decision, >= 1.
  double c_min = 10.0;
  /// Stable-state threshold on V^u, > 0.
  double v_u_min = 1.0;
  /// Frames inspected on each side of a change-point.
  std::size_t context_radius = 2;
  /// Manual labels between model re-estimations; 0 disables retraining.
  std::uint64_t retrain_interval = 20000;
  double smoothing_alpha = 1.0;
  /// Leading stream frames annotated manually before automation starts and
  /// used for the first model estimate; 0 keeps the initial model.
  std::uint64_t seed_frames = 0;
  /// Re-estimate the emission matrix from manual labels paired with the
  /// stored classifier argmax on the retraining cadence.
  bool retrain_emission = true;

  /// Throws InputError when a threshold is outside its range.
  void validate() const;
  friend bool operator==(const PipelineParams&, const PipelineParams&) = default;
};

/// Maximal run of consecutive object-present frames.
struct Segment {
  FrameIndex start = 0;  // inclusive
  FrameIndex end = 0;    // inclusive
  /// Position of the first frame in the record vector.
  std::size_t first_record = 0;
  std::size_t id = 0;

  std::size_t length() const { return static_cast<std::size_t>(end - start + 1); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ChangePoint {
  FrameIndex frame_index = 0;
  /// Agreed confident decision of the context frames before / after the change.
  std::optional<StateIndex> pre_label;
  std::optional<StateIndex> post_label;
  friend bool operator==(const ChangePoint&, const ChangePoint&) = default;
};

enum class PacketReason : std::uint8_t { unconfident_change, unverified_interval, unstable_segment, seed };

std::string_view to_string(PacketReason reason);
PacketReason packet_reason_from_string(std::string_view text);

struct AnnotationPacket {
  std::uint64_t id = 0;
  PacketReason reason = PacketReason::unconfident_change;
  std::vector<FrameIndex> frames;  // sorted, non-empty, one segment
  std::size_t segment_id = 0;
  friend bool operator==(const AnnotationPacket&, const AnnotationPacket&) = default;
};

/// Splits the stream into maximal present runs. A gap in frame_index ends a
/// run. Throws InputError when frame indices are not strictly increasing.
std::vector<Segment> segment_frames(std::span<const FrameRecord> records);

/// Argmax when the top-two probability ratio reaches c_min (infinite when the
/// runner-up is 0). A tied top only passes c_min == 1, returning the lowest index.
std::optional<StateIndex> confident_class(std::span<const double> class_probs, double c_min);

/// Plain classifier decision: argmax with ties to the lowest index.
StateIndex classify(std::span<const double> class_probs);

/// Change-points at every frame of the segment whose change score reaches
/// delta_min. Labels are left empty.
std::vector<ChangePoint> binarize_changes(std::span<const FrameRecord> segment_records, double delta_min);

struct SegmentOutcome {
  std::vector<ChangePoint> changes;
  /// Automatic labels for frames not routed to a packet, sorted by frame.
  std::vector<LabelRecord> labels;
  /// Packets in emission order; ids are left 0 for the caller to assign.
  std::vector<AnnotationPacket> packets;
};

/// Change detection with confident classification, change verification and
/// stable-state detection for one segment. Every frame of the segment ends up
/// in exactly one of outcome.labels or a packet.
SegmentOutcome process_segment(const Segment& segment, std::span<const FrameRecord> records,
                               const HmmModel& model, const PipelineParams& params);

struct RunCounters {
  std::uint64_t in_segment_frames = 0;
  std::uint64_t manual_frames = 0;
  std::uint64_t auto_stable_frames = 0;
  std::uint64_t auto_confident_frames = 0;
  std::uint64_t packets = 0;
  std::uint64_t segments_total = 0;
  std::uint64_t segments_done = 0;
  std::uint64_t model_version = 0;

  std::uint64_t auto_frames() const { return auto_stable_frames + auto_confident_frames; }
  friend bool operator==(const RunCounters&, const RunCounters&) = default;
};

struct AnnotationRun {
  /// Finalized labels sorted by frame.
  std::vector<LabelRecord> labels;
  std::vector<AnnotationPacket> packets;
  RunCounters counters;
  std::optional<HmmModel> final_model;
  bool aborted = false;
  std::string error;
};

/// Returns one label per packet frame. Throwing aborts the run.
using Annotator = std::function<std::vector<LabelRecord>(const AnnotationPacket&)>;
/// Labels a whole segment's packets at once, one result per packet in order.
using BatchAnnotator =
    std::function<std::vector<std::vector<LabelRecord>>(std::span<const AnnotationPacket>)>;
/// Called after every completed segment with the counters, the model for the
/// next segment and the segment's finalized labels.
using RunObserver =
    std::function<void(const RunCounters&, const HmmModel&, std::span<const LabelRecord> segment_labels)>;

/// Runs the full annotation flow over a stream. Segments are processed in
/// order; each segment's packets go to the annotator before the next segment
/// starts; manual labels override automatic ones. Every retrain_interval
/// manual labels the chain (and optionally the emission) is re-estimated from
/// the finalized labels so far. Annotator failures stop the run and keep the
/// partial results, flagged in AnnotationRun::aborted.
AnnotationRun run_pipeline(const RecordStream& stream, const HmmModel& initial_model,
                           const PipelineParams& params, const BatchAnnotator& annotator,
                           const RunObserver& observer = {});
AnnotationRun run_pipeline(const RecordStream& stream, const HmmModel& initial_model,
                           const PipelineParams& params, const Annotator& annotator,
                           const RunObserver& observer = {});

/// Canonical text form of a run (labels, packets, counters) for replay
/// comparison and logs.
std::string serialize_run(const AnnotationRun& run, const StateSpace& states);

}  // namespace hmmlabel
