#pragma once

// Live manual-annotation queue. The pipeline runs on a background thread and
// blocks on the queue while a human (or a scripted client) leases packets and
// submits labels. Every queue mutation is appended to a line log, and a
// restarted service replays that log before resuming.

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "hmmlabel/pipeline.hpp"

namespace hmmlabel {

/// Request that conflicts with the service state, e.g. changing parameters
/// after the run started.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Seconds on an arbitrary but monotone-enough time line.
using Clock = std::function<double()>;
double system_seconds();

enum class EntryStatus : std::uint8_t { pending, leased, completed };
std::string_view to_string(EntryStatus status);

struct QueueEntry {
  AnnotationPacket packet;
  std::uint64_t enqueue_sequence = 0;
  EntryStatus status = EntryStatus::pending;
  /// Clock time after which a lease lapses; meaningful while leased.
  double lease_expiry = 0.0;
  /// One manual label per packet frame once completed, sorted by frame.
  std::vector<LabelRecord> labels;

  friend bool operator==(const QueueEntry&, const QueueEntry&) = default;
};

struct QueueEvent {
  enum class Kind : std::uint8_t { enqueue, lease, expire, complete };
  Kind kind = Kind::enqueue;
  /// Full packet for enqueue; only the id is used otherwise.
  AnnotationPacket packet;
  std::uint64_t sequence = 0;
  double lease_expiry = 0.0;
  std::vector<LabelRecord> labels;

  friend bool operator==(const QueueEvent&, const QueueEvent&) = default;
};

/// Log lines, states written by name:
///
///   enqueue <id> <sequence> <reason> <segment_id> <f0,f1,...>
///   lease <id> <expiry>
///   expire <id>
///   complete <id> <frame>=<state>,...
std::string format_event(const QueueEvent& event, const StateSpace& states);
QueueEvent parse_event(std::string_view line, const StateSpace& states);

struct SubmitResult {
  enum class Status : std::uint8_t { accepted, duplicate, rejected, unknown_packet };
  Status status = Status::rejected;
  std::string message;
  std::vector<FrameIndex> missing;
  std::vector<FrameIndex> extra;
  /// Frames whose state was not recognized.
  std::vector<FrameIndex> invalid;
};

struct QueueStats {
  std::uint64_t enqueued = 0;
  std::uint64_t pending = 0;
  std::uint64_t leased = 0;
  std::uint64_t completed = 0;
  std::uint64_t completed_frames = 0;
};

/// Thread-safe FIFO of annotation packets with leases. The event sink is
/// called under the queue lock, so it sees mutations in their total order.
class AnnotationQueue {
 public:
  using EventSink = std::function<void(const QueueEvent&)>;

  AnnotationQueue(std::size_t num_states, Clock clock);

  void set_sink(EventSink sink);

  /// Adds a packet under its id. Re-enqueueing an identical packet is a no-op
  /// returning false; a different packet under a known id throws Error.
  bool enqueue(const AnnotationPacket& packet);

  /// Leases the pending entry with the lowest sequence after lapsing expired
  /// leases. Empty when nothing is pending.
  std::optional<QueueEntry> next(double lease_seconds);

  /// Completes a pending or leased entry when labels cover exactly its frames
  /// with valid states. Resubmitting a completed entry's labels is a duplicate;
  /// different labels are rejected.
  SubmitResult submit(std::uint64_t id, const std::map<FrameIndex, StateIndex>& labels);

  /// Blocks until every listed entry is completed and returns their labels in
  /// order. Throws Error once the queue is closed.
  std::vector<std::vector<LabelRecord>> wait_for(std::span<const std::uint64_t> ids);

  /// Wakes and fails every waiter; later waits fail immediately.
  void close();

  /// Rebuilds state from a logged event without calling the sink.
  void apply(const QueueEvent& event);

  QueueStats stats();
  /// Entries in enqueue order.
  std::vector<QueueEntry> entries() const;
  std::optional<QueueEntry> entry(std::uint64_t id) const;

 private:
  void apply_locked(const QueueEvent& event);
  void emit(const QueueEvent& event);
  void expire_due();

  std::size_t num_states_;
  Clock clock_;
  EventSink sink_;
  mutable std::mutex mutex_;
  std::condition_variable completed_cv_;
  bool closed_ = false;
  std::map<std::uint64_t, QueueEntry> entries_;
  std::vector<std::uint64_t> id_by_sequence_;
  std::set<std::uint64_t> pending_sequences_;
  std::set<std::uint64_t> leased_ids_;
  std::uint64_t completed_ = 0;
  std::uint64_t completed_frames_ = 0;
};

enum class RunState : std::uint8_t { idle, running, finished, aborted };
std::string_view to_string(RunState state);

struct ProgressSnapshot {
  RunState state = RunState::idle;
  std::string error;
  /// In-segment frames of the whole stream.
  std::uint64_t total_frames = 0;
  /// Frames of completed packets, counted at submission.
  std::uint64_t manual_frames = 0;
  /// Automatic labels of finished segments.
  std::uint64_t auto_frames = 0;
  std::uint64_t auto_stable_frames = 0;
  std::uint64_t auto_confident_frames = 0;
  std::uint64_t pending_packets = 0;
  std::uint64_t leased_packets = 0;
  std::uint64_t completed_packets = 0;
  std::uint64_t segments_done = 0;
  std::uint64_t segments_total = 0;
  std::uint64_t model_version = 0;
  /// total / manual; empty while no frame was labeled manually.
  std::optional<double> reduction_factor;
  /// Over finalized labels of finished segments that carry ground truth.
  std::optional<double> accuracy;
  std::uint64_t scored_frames = 0;
  /// Nothing pending or leased and the pipeline will not enqueue more.
  bool drained = false;
};

struct ServiceConfig {
  RecordStream stream;
  HmmModel initial_model = HmmModel::uniform(StateSpace::gaze_regions());
  PipelineParams params;
  /// Append-only event log; an existing non-empty log is replayed.
  std::optional<std::string> log_path;
  /// Directory holding per-frame images named <frame_index>.<ext>.
  std::optional<std::string> image_dir;
  Clock clock = system_seconds;
};

/// Log file layout: a header, then queue events in order, then (once the run
/// completes) every finalized label and a closing line.
///
///   hmmlabel-log 1
///   states <name> ...
///   stream <record count> <fnv1a-64 of the record text, hex>
///   params delta_min=<x> c_min=<x> ...
///   <queue events>
///   label <frame> <state> <source>
///   done <manual> <auto_stable> <auto_confident> <packets> <model_version>
class AnnotationService {
 public:
  /// Throws InputError when the stream, model or params are invalid or an
  /// existing log belongs to a different stream.
  explicit AnnotationService(ServiceConfig config);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const StateSpace& states() const { return config_.stream.states; }
  PipelineParams params() const;
  /// Throws ConflictError once the run started (including after recovery).
  void set_params(const PipelineParams& params);
  /// True when the log was replayed at construction.
  bool recovered() const { return recovered_; }

  /// Starts the pipeline thread; idempotent.
  void start();
  /// Starts the run when idle, then leases the next packet.
  std::optional<QueueEntry> next(double lease_seconds);
  /// Labels keyed by decimal frame index with state names as values.
  SubmitResult submit(std::uint64_t id, const std::map<std::string, std::string>& labels);
  ProgressSnapshot progress();
  /// Current model and its version.
  std::pair<HmmModel, std::uint64_t> model() const;

  /// Null when no record has this index.
  const FrameRecord* frame(FrameIndex index) const;
  /// Path of the frame image when an image directory is configured and holds one.
  std::optional<std::string> image_path(FrameIndex index) const;

  /// Blocks until the pipeline thread ends and returns the run. Empty when
  /// the run never started.
  std::optional<AnnotationRun> wait();
  /// Closes the queue and joins the pipeline thread, as in a shutdown.
  void stop();

  std::vector<QueueEntry> queue_entries() const { return queue_.entries(); }

 private:
  void recover(std::istream& in);
  void open_log();
  void write_line(const std::string& line);
  void run_pipeline_thread();
  std::string header() const;

  ServiceConfig config_;
  std::uint64_t total_frames_ = 0;
  std::string stream_fingerprint_;
  AnnotationQueue queue_;

  mutable std::mutex mutex_;
  RunState state_ = RunState::idle;
  std::string error_;
  RunCounters counters_;
  HmmModel model_;
  std::uint64_t correct_ = 0;
  std::uint64_t scored_ = 0;
  std::optional<AnnotationRun> result_;
  bool recovered_ = false;
  bool log_done_ = false;

  std::mutex log_mutex_;
  std::unique_ptr<std::ostream> log_;
  std::thread worker_;
};

}  // namespace hmmlabel
