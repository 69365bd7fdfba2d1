#include "hmmlabel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hmmlabel {

namespace {

struct FrameState {
  std::optional<StateIndex> label;
  LabelSource source = LabelSource::auto_stable;
  bool queued = false;
};

// Inclusive local range [first, last] within a segment.
struct LocalRange {
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty = true;
};

LocalRange make_range(std::ptrdiff_t first, std::ptrdiff_t last) {
  if (first > last) return {};
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last), false};
}

class SegmentWorker {
 public:
  SegmentWorker(const Segment& segment, std::span<const FrameRecord> records, const HmmModel& model,
                const PipelineParams& params)
      : segment_(segment),
        frames_(records.subspan(segment.first_record, segment.length())),
        model_(model),
        params_(params),
        state_(frames_.size()),
        confident_(frames_.size()),
        confident_known_(frames_.size(), false) {}

  SegmentOutcome run() {
    SegmentOutcome out;
    out.changes = binarize_changes(frames_, params_.delta_min);
    std::vector<std::size_t> change_pos;
    change_pos.reserve(out.changes.size());
    for (auto& change : out.changes) {
      const std::size_t c = local(change.frame_index);
      change_pos.push_back(c);
      resolve_change(c, change, out.packets);
    }

    // Intervals between change-points, with the leading and trailing ones open
    // on their outer end.
    const std::size_t n = frames_.size();
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    if (change_pos.empty()) {
      check_interval(make_range(0, last), true, out.packets);
    } else {
      const auto& first_change = out.changes.front();
      check_interval(make_range(0, static_cast<std::ptrdiff_t>(change_pos.front()) - 1),
                     first_change.pre_label.has_value(), out.packets);
      for (std::size_t i = 0; i + 1 < change_pos.size(); ++i) {
        const auto& a = out.changes[i];
        const auto& b = out.changes[i + 1];
        const bool verified = a.post_label && b.pre_label && *a.post_label == *b.pre_label;
        check_interval(make_range(static_cast<std::ptrdiff_t>(change_pos[i]) + 1,
                                  static_cast<std::ptrdiff_t>(change_pos[i + 1]) - 1),
                       verified, out.packets);
      }
      check_interval(make_range(static_cast<std::ptrdiff_t>(change_pos.back()) + 1, last),
                     out.changes.back().post_label.has_value(), out.packets);
    }

    for (std::size_t p = 0; p < n; ++p) {
      if (state_[p].queued || !state_[p].label) continue;
      out.labels.push_back({frames_[p].frame_index, *state_[p].label, state_[p].source});
    }
    return out;
  }

 private:
  std::size_t local(FrameIndex frame) const { return static_cast<std::size_t>(frame - segment_.start); }

  const std::optional<StateIndex>& confident(std::size_t p) {
    if (!confident_known_[p]) {
      confident_[p] = confident_class(frames_[p].class_probs, params_.c_min);
      confident_known_[p] = true;
    }
    return confident_[p];
  }

  void assign(std::size_t p, StateIndex state, LabelSource source) {
    if (state_[p].label) return;
    state_[p].label = state;
    state_[p].source = source;
  }

  // Adds a packet with every frame of the range not already queued.
  void enqueue(LocalRange range, PacketReason reason, std::vector<AnnotationPacket>& packets) {
    if (range.empty) return;
    AnnotationPacket packet;
    packet.reason = reason;
    packet.segment_id = segment_.id;
    for (std::size_t p = range.first; p <= range.last; ++p) {
      if (state_[p].queued) continue;
      state_[p].queued = true;
      packet.frames.push_back(frames_[p].frame_index);
    }
    if (!packet.frames.empty()) packets.push_back(std::move(packet));
  }

  // Labels every confident frame of the range; false when any frame is unconfident.
  bool label_context(LocalRange range) {
    bool all_confident = true;
    if (range.empty) return all_confident;
    for (std::size_t p = range.first; p <= range.last; ++p) {
      const auto& decision = confident(p);
      if (decision) {
        assign(p, *decision, LabelSource::auto_confident);
      } else {
        all_confident = false;
      }
    }
    return all_confident;
  }

  void resolve_change(std::size_t c, ChangePoint& change, std::vector<AnnotationPacket>& packets) {
    const auto r = static_cast<std::ptrdiff_t>(params_.context_radius);
    const auto ci = static_cast<std::ptrdiff_t>(c);
    const auto last = static_cast<std::ptrdiff_t>(frames_.size()) - 1;
    const LocalRange before = make_range(std::max<std::ptrdiff_t>(0, ci - r), ci - 1);
    const LocalRange after = make_range(ci + 1, std::min(last, ci + r));

    const bool before_ok = label_context(before);
    const bool after_ok = label_context(after);
    // The labels on either side of a change come from the frames touching it.
    if (!before.empty) change.pre_label = confident(before.last);
    if (!after.empty) change.post_label = confident(after.first);

    if (before_ok && after_ok) {
      // The change frame takes its own confident decision, else the state it starts.
      const auto& own = confident(c);
      const auto label = own ? own : change.post_label;
      if (label) {
        assign(c, *label, LabelSource::auto_confident);
        return;
      }
    }
    enqueue(make_range(std::max<std::ptrdiff_t>(0, ci - r), std::min(last, ci + r)),
            PacketReason::unconfident_change, packets);
  }

  void check_interval(LocalRange range, bool verified, std::vector<AnnotationPacket>& packets) {
    if (range.empty) return;
    if (!verified) {
      enqueue(range, PacketReason::unverified_interval, packets);
      return;
    }
    observations_.clear();
    for (std::size_t p = range.first; p <= range.last; ++p) observations_.push_back(classify(frames_[p].class_probs));

    bool stable = false;
    StateIndex best = 0;
    try {
      const StableScore score = stable_state_score(model_, observations_);
      stable = score.v_u >= params_.v_u_min;
      best = score.best_state;
    } catch (const ImpossibleObservation&) {
      stable = false;
    }
    if (!stable) {
      enqueue(range, PacketReason::unstable_segment, packets);
      return;
    }
    for (std::size_t p = range.first; p <= range.last; ++p) {
      if (!state_[p].queued) assign(p, best, LabelSource::auto_stable);
    }
  }

  const Segment& segment_;
  std::span<const FrameRecord> frames_;
  const HmmModel& model_;
  const PipelineParams& params_;
  std::vector<FrameState> state_;
  std::vector<std::optional<StateIndex>> confident_;
  std::vector<bool> confident_known_;
  std::vector<StateIndex> observations_;
};

}  // namespace

void PipelineParams::validate() const {
  if (!(delta_min > 0.0 && delta_min < 1.0)) throw InputError("delta_min must lie in (0,1)");
  if (!(c_min >= 1.0) || std::isnan(c_min)) throw InputError("c_min must be >= 1");
  if (!(v_u_min > 0.0) || std::isnan(v_u_min)) throw InputError("v_u_min must be > 0");
  if (!(smoothing_alpha >= 0.0) || !std::isfinite(smoothing_alpha)) {
    throw InputError("smoothing_alpha must be finite and >= 0");
  }
}

std::string_view to_string(PacketReason reason) {
  switch (reason) {
    case PacketReason::unconfident_change:
      return "unconfident_change";
    case PacketReason::unverified_interval:
      return "unverified_interval";
    case PacketReason::unstable_segment:
      return "unstable_segment";
    case PacketReason::seed:
      return "seed";
  }
  return "unknown";
}

PacketReason packet_reason_from_string(std::string_view text) {
  for (auto reason : {PacketReason::unconfident_change, PacketReason::unverified_interval,
                      PacketReason::unstable_segment, PacketReason::seed}) {
    if (to_string(reason) == text) return reason;
  }
  throw InputError("unknown packet reason '" + std::string(text) + "'");
}

std::vector<Segment> segment_frames(std::span<const FrameRecord> records) {
  std::vector<Segment> segments;
  bool open = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.frame_index <= records[i - 1].frame_index) {
      throw InputError("frame_index " + std::to_string(r.frame_index) + " at position " +
                       std::to_string(i) + " is not strictly increasing");
    }
    if (open && (!r.object_present || r.frame_index != segments.back().end + 1)) open = false;
    if (!r.object_present) continue;
    if (open) {
      segments.back().end = r.frame_index;
    } else {
      segments.push_back({r.frame_index, r.frame_index, i, segments.size()});
      open = true;
    }
  }
  return segments;
}

StateIndex classify(std::span<const double> class_probs) {
  return static_cast<StateIndex>(std::max_element(class_probs.begin(), class_probs.end()) -
                                 class_probs.begin());
}

std::optional<StateIndex> confident_class(std::span<const double> class_probs, double c_min) {
  if (class_probs.size() < 2) return std::nullopt;
  const StateIndex top = classify(class_probs);
  double runner_up = -1.0;
  for (std::size_t i = 0; i < class_probs.size(); ++i) {
    if (i != top) runner_up = std::max(runner_up, class_probs[i]);
  }
  if (runner_up <= 0.0) return top;
  return class_probs[top] / runner_up >= c_min ? std::optional<StateIndex>(top) : std::nullopt;
}

std::vector<ChangePoint> binarize_changes(std::span<const FrameRecord> segment_records, double delta_min) {
  std::vector<ChangePoint> changes;
  for (std::size_t p = 1; p < segment_records.size(); ++p) {
    const auto& score = segment_records[p].change_score;
    if (score && *score >= delta_min) changes.push_back({segment_records[p].frame_index, {}, {}});
  }
  return changes;
}

SegmentOutcome process_segment(const Segment& segment, std::span<const FrameRecord> records,
                               const HmmModel& model, const PipelineParams& params) {
  return SegmentWorker(segment, records, model, params).run();
}

// ---------------------------------------------------------------------------
// Full run

namespace {

// Splits any segment that straddles the seed boundary so seed frames form
// whole segments of their own.
std::vector<Segment> split_at(std::vector<Segment> segments, std::uint64_t boundary_position) {
  std::vector<Segment> out;
  for (const auto& s : segments) {
    const std::size_t end_position = s.first_record + s.length();
    if (s.first_record < boundary_position && end_position > boundary_position) {
      const std::size_t head = static_cast<std::size_t>(boundary_position) - s.first_record;
      out.push_back({s.start, s.start + head - 1, s.first_record, 0});
      out.push_back({s.start + head, s.end, s.first_record + head, 0});
    } else {
      out.push_back(s);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

class PipelineRun {
 public:
  PipelineRun(const RecordStream& stream, const HmmModel& initial_model, const PipelineParams& params,
              const BatchAnnotator& annotator, const RunObserver& observer)
      : stream_(stream),
        params_(params),
        annotator_(annotator),
        observer_(observer),
        model_(initial_model),
        chain_counts_(initial_model.num_states()),
        emission_counts_(initial_model.num_states()) {}

  AnnotationRun run() {
    params_.validate();
    if (!(model_.states() == stream_.states)) throw InputError("model and stream state spaces differ");
    validate_stream(stream_);

    const auto segments = split_at(segment_frames(stream_.records), params_.seed_frames);
    run_.counters.segments_total = segments.size();
    for (const auto& s : segments) run_.counters.in_segment_frames += s.length();

    bool seeding = params_.seed_frames > 0;
    try {
      for (const auto& segment : segments) {
        const bool in_seed = segment.first_record < params_.seed_frames;
        if (seeding && !in_seed) {
          seeding = false;
          if (chain_counts_.labels() > 0) retrain();
        }
        if (in_seed) {
          AnnotationPacket packet{0, PacketReason::seed, {}, segment.id};
          for (FrameIndex f = segment.start; f <= segment.end; ++f) packet.frames.push_back(f);
          finish_segment(segment, {}, {std::move(packet)});
        } else {
          auto outcome = process_segment(segment, stream_.records, model_, params_);
          finish_segment(segment, std::move(outcome.labels), std::move(outcome.packets));
        }
      }
      if (seeding && chain_counts_.labels() > 0) retrain();
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      run_.aborted = true;
      run_.error = e.what();
    }
    run_.final_model = model_;
    return std::move(run_);
  }

 private:
  void finish_segment(const Segment& segment, std::vector<LabelRecord> auto_labels,
                      std::vector<AnnotationPacket> packets) {
    for (auto& packet : packets) {
      packet.id = next_packet_id_++;
      run_.packets.push_back(packet);
    }
    run_.counters.packets = run_.packets.size();

    std::vector<LabelRecord> manual;
    if (!packets.empty()) {
      std::vector<std::vector<LabelRecord>> answers;
      try {
        answers = annotator_(packets);
      } catch (const std::exception& e) {
        throw AnnotatorFailure(std::string("annotator failed: ") + e.what());
      }
      if (answers.size() != packets.size()) throw AnnotatorFailure("annotator returned the wrong number of packets");
      for (std::size_t i = 0; i < packets.size(); ++i) check_answer(packets[i], answers[i], manual);
    }

    // Merge: manual labels replace automatic ones for the same frame.
    std::vector<LabelRecord> merged;
    merged.reserve(segment.length());
    std::sort(manual.begin(), manual.end(),
              [](const LabelRecord& a, const LabelRecord& b) { return a.frame_index < b.frame_index; });
    std::size_t a = 0, m = 0;
    while (a < auto_labels.size() || m < manual.size()) {
      if (m < manual.size() && (a >= auto_labels.size() || manual[m].frame_index <= auto_labels[a].frame_index)) {
        if (a < auto_labels.size() && auto_labels[a].frame_index == manual[m].frame_index) ++a;
        merged.push_back(manual[m++]);
      } else {
        merged.push_back(auto_labels[a++]);
      }
    }
    if (merged.size() != segment.length()) {
      throw AnnotatorFailure("segment " + std::to_string(segment.id) + " did not receive one label per frame");
    }

    const std::uint64_t manual_before = run_.counters.manual_frames;
    std::vector<StateIndex> sequence;
    sequence.reserve(merged.size());
    for (const auto& label : merged) {
      sequence.push_back(label.state);
      switch (label.source) {
        case LabelSource::manual: {
          ++run_.counters.manual_frames;
          const auto& record = stream_.records[segment.first_record + (label.frame_index - segment.start)];
          emission_counts_.add(classify(record.class_probs), label.state);
          break;
        }
        case LabelSource::auto_stable:
          ++run_.counters.auto_stable_frames;
          break;
        case LabelSource::auto_confident:
          ++run_.counters.auto_confident_frames;
          break;
      }
    }
    chain_counts_.add_segment(sequence);
    run_.labels.insert(run_.labels.end(), merged.begin(), merged.end());
    ++run_.counters.segments_done;

    const bool seed_segment = !packets.empty() && packets.front().reason == PacketReason::seed;
    if (params_.retrain_interval > 0 && !seed_segment &&
        run_.counters.manual_frames / params_.retrain_interval > manual_before / params_.retrain_interval) {
      retrain();
    }
    if (observer_) observer_(run_.counters, model_, merged);
  }

  void check_answer(const AnnotationPacket& packet, const std::vector<LabelRecord>& answer,
                    std::vector<LabelRecord>& manual) {
    if (answer.size() != packet.frames.size()) {
      throw AnnotatorFailure("packet " + std::to_string(packet.id) + " received " + std::to_string(answer.size()) +
                             " labels for " + std::to_string(packet.frames.size()) + " frames");
    }
    std::vector<LabelRecord> sorted = answer;
    std::sort(sorted.begin(), sorted.end(),
              [](const LabelRecord& a, const LabelRecord& b) { return a.frame_index < b.frame_index; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i].frame_index != packet.frames[i] || sorted[i].state >= model_.num_states()) {
        throw AnnotatorFailure("packet " + std::to_string(packet.id) + " labels do not match its frames");
      }
      manual.push_back({sorted[i].frame_index, sorted[i].state, LabelSource::manual});
    }
  }

  void retrain() {
    const ChainParameters chain = chain_counts_.estimate(params_.smoothing_alpha);
    const SquareMatrix emission =
        params_.retrain_emission && emission_counts_.pairs() > 0 ? emission_counts_.estimate(params_.smoothing_alpha)
                                                                 : model_.emission();
    model_ = HmmModel(model_.states(), chain.priors, chain.transitions, emission);
    ++run_.counters.model_version;
  }

  struct AnnotatorFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  const RecordStream& stream_;
  const PipelineParams& params_;
  const BatchAnnotator& annotator_;
  const RunObserver& observer_;
  HmmModel model_;
  ChainCounts chain_counts_;
  EmissionCounts emission_counts_;
  AnnotationRun run_;
  std::uint64_t next_packet_id_ = 0;
};

}  // namespace

AnnotationRun run_pipeline(const RecordStream& stream, const HmmModel& initial_model,
                           const PipelineParams& params, const BatchAnnotator& annotator,
                           const RunObserver& observer) {
  return PipelineRun(stream, initial_model, params, annotator, observer).run();
}

AnnotationRun run_pipeline(const RecordStream& stream, const HmmModel& initial_model,
                           const PipelineParams& params, const Annotator& annotator,
                           const RunObserver& observer) {
  const BatchAnnotator batch = [&annotator](std::span<const AnnotationPacket> packets) {
    std::vector<std::vector<LabelRecord>> answers;
    answers.reserve(packets.size());
    for (const auto& packet : packets) answers.push_back(annotator(packet));
    return answers;
  };
  return run_pipeline(stream, initial_model, params, batch, observer);
}

std::string serialize_run(const AnnotationRun& run, const StateSpace& states) {
  std::ostringstream out;
  const auto& c = run.counters;
  out << "counters in_segment=" << c.in_segment_frames << " manual=" << c.manual_frames
      << " auto_stable=" << c.auto_stable_frames << " auto_confident=" << c.auto_confident_frames
      << " packets=" << c.packets << " segments=" << c.segments_done << "/" << c.segments_total
      << " model_version=" << c.model_version << " aborted=" << (run.aborted ? 1 : 0) << '\n';
  for (const auto& p : run.packets) {
    out << "packet " << p.id << ' ' << to_string(p.reason) << ' ' << p.segment_id << ' ';
    for (std::size_t i = 0; i < p.frames.size(); ++i) out << (i ? "," : "") << p.frames[i];
    out << '\n';
  }
  for (const auto& l : run.labels) {
    out << "label " << l.frame_index << ' ' << states.name(l.state) << ' ' << to_string(l.source) << '\n';
  }
  return out.str();
}

}  // namespace hmmlabel
