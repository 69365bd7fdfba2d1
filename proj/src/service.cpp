#include "hmmlabel/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hmmlabel {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw InputError(std::string(what) + ": '" + std::string(text) + "' is not a non-negative integer");
  }
  return value;
}

std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> parse_doubles(std::string_view text) {
  std::vector<double> out;
  for (auto part : split(text, ',')) out.push_back(parse_double(part));
  return out;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string params_line(const PipelineParams& p) {
  std::ostringstream out;
  out << "params delta_min=" << format_double(p.delta_min) << " c_min=" << format_double(p.c_min)
      << " v_u_min=" << format_double(p.v_u_min) << " context_radius=" << p.context_radius
      << " retrain_interval=" << p.retrain_interval << " smoothing_alpha=" << format_double(p.smoothing_alpha)
      << " seed_frames=" << p.seed_frames << " retrain_emission=" << (p.retrain_emission ? 1 : 0);
  return out.str();
}

PipelineParams parse_params_line(const std::vector<std::string_view>& t) {
  PipelineParams p;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const auto eq = t[i].find('=');
    if (eq == std::string_view::npos) throw InputError("log params: malformed field '" + std::string(t[i]) + "'");
    const auto key = t[i].substr(0, eq);
    const auto value = t[i].substr(eq + 1);
    if (key == "delta_min") {
      p.delta_min = parse_double(value);
    } else if (key == "c_min") {
      p.c_min = parse_double(value);
    } else if (key == "v_u_min") {
      p.v_u_min = parse_double(value);
    } else if (key == "context_radius") {
      p.context_radius = parse_uint(value, "context_radius");
    } else if (key == "retrain_interval") {
      p.retrain_interval = parse_uint(value, "retrain_interval");
    } else if (key == "smoothing_alpha") {
      p.smoothing_alpha = parse_double(value);
    } else if (key == "seed_frames") {
      p.seed_frames = parse_uint(value, "seed_frames");
    } else if (key == "retrain_emission") {
      p.retrain_emission = parse_uint(value, "retrain_emission") != 0;
    } else {
      throw InputError("log params: unknown field '" + std::string(key) + "'");
    }
  }
  p.validate();
  return p;
}

std::string model_line(const HmmModel& m) {
  return "model priors=" + join_doubles(m.priors()) + " transitions=" + join_doubles(m.transitions().data()) +
         " emission=" + join_doubles(m.emission().data());
}

HmmModel parse_model_line(const std::vector<std::string_view>& t, const StateSpace& states) {
  std::vector<double> priors, transitions, emission;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const auto eq = t[i].find('=');
    const auto key = t[i].substr(0, eq);
    if (eq == std::string_view::npos) throw InputError("log model: malformed field '" + std::string(t[i]) + "'");
    auto values = parse_doubles(t[i].substr(eq + 1));
    if (key == "priors") {
      priors = std::move(values);
    } else if (key == "transitions") {
      transitions = std::move(values);
    } else if (key == "emission") {
      emission = std::move(values);
    } else {
      throw InputError("log model: unknown field '" + std::string(key) + "'");
    }
  }
  const std::size_t n = states.size();
  if (transitions.size() != n * n || emission.size() != n * n) throw InputError("log model: wrong matrix size");
  return HmmModel(states, std::move(priors), SquareMatrix(n, std::move(transitions)), SquareMatrix(n, std::move(emission)));
}

}  // namespace

double system_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(EntryStatus status) {
  switch (status) {
    case EntryStatus::pending:
      return "pending";
    case EntryStatus::leased:
      return "leased";
    case EntryStatus::completed:
      return "completed";
  }
  return "?";
}

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::idle:
      return "idle";
    case RunState::running:
      return "running";
    case RunState::finished:
      return "finished";
    case RunState::aborted:
      return "aborted";
  }
  return "?";
}

std::string format_event(const QueueEvent& e, const StateSpace& states) {
  std::string out;
  const std::string id = std::to_string(e.packet.id);
  switch (e.kind) {
    case QueueEvent::Kind::enqueue: {
      out = "enqueue " + id + ' ' + std::to_string(e.sequence) + ' ' + std::string(to_string(e.packet.reason)) + ' ' +
            std::to_string(e.packet.segment_id) + ' ';
      for (std::size_t i = 0; i < e.packet.frames.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(e.packet.frames[i]);
      }
      break;
    }
    case QueueEvent::Kind::lease:
      out = "lease " + id + ' ' + format_double(e.lease_expiry);
      break;
    case QueueEvent::Kind::expire:
      out = "expire " + id;
      break;
    case QueueEvent::Kind::complete: {
      out = "complete " + id + ' ';
      for (std::size_t i = 0; i < e.labels.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(e.labels[i].frame_index) + '=' + states.name(e.labels[i].state);
      }
      break;
    }
  }
  return out;
}

QueueEvent parse_event(std::string_view line, const StateSpace& states) {
  const auto t = tokens(line);
  auto fail = [&](const std::string& why) { return InputError("log event '" + std::string(line) + "': " + why); };
  if (t.empty()) throw fail("empty line");
  QueueEvent e;
  auto expect = [&](std::size_t n) {
    if (t.size() != n) throw fail("expected " + std::to_string(n) + " fields");
  };
  if (t[0] == "enqueue") {
    expect(6);
    e.kind = QueueEvent::Kind::enqueue;
    e.packet.id = parse_uint(t[1], "packet id");
    e.sequence = parse_uint(t[2], "sequence");
    e.packet.reason = packet_reason_from_string(t[3]);
    e.packet.segment_id = parse_uint(t[4], "segment id");
    for (auto f : split(t[5], ',')) e.packet.frames.push_back(parse_uint(f, "frame"));
  } else if (t[0] == "lease") {
    expect(3);
    e.kind = QueueEvent::Kind::lease;
    e.packet.id = parse_uint(t[1], "packet id");
    e.lease_expiry = parse_double(t[2]);
  } else if (t[0] == "expire") {
    expect(2);
    e.kind = QueueEvent::Kind::expire;
    e.packet.id = parse_uint(t[1], "packet id");
  } else if (t[0] == "complete") {
    expect(3);
    e.kind = QueueEvent::Kind::complete;
    e.packet.id = parse_uint(t[1], "packet id");
    for (auto item : split(t[2], ',')) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw fail("label without '='");
      e.labels.push_back(
          {parse_uint(item.substr(0, eq), "frame"), states.index_of(item.substr(eq + 1)), LabelSource::manual});
    }
  } else {
    throw fail("unknown event");
  }
  return e;
}

AnnotationQueue::AnnotationQueue(std::size_t num_states, Clock clock)
    : num_states_(num_states), clock_(std::move(clock)) {}

void AnnotationQueue::set_sink(EventSink sink) {
  std::lock_guard lock(mutex_);
  sink_ = std::move(sink);
}

bool AnnotationQueue::enqueue(const AnnotationPacket& packet) {
  std::lock_guard lock(mutex_);
  if (const auto it = entries_.find(packet.id); it != entries_.end()) {
    if (it->second.packet == packet) return false;
    throw Error("packet " + std::to_string(packet.id) + " differs from the queued packet with the same id");
  }
  if (packet.frames.empty()) throw InputError("packet " + std::to_string(packet.id) + " has no frames");
  QueueEvent e;
  e.kind = QueueEvent::Kind::enqueue;
  e.packet = packet;
  e.sequence = id_by_sequence_.size();
  apply_locked(e);
  emit(e);
  return true;
}

std::optional<QueueEntry> AnnotationQueue::next(double lease_seconds) {
  if (!(lease_seconds > 0.0) || !std::isfinite(lease_seconds)) throw InputError("lease must be a positive number of seconds");
  std::lock_guard lock(mutex_);
  expire_due();
  if (pending_sequences_.empty()) return std::nullopt;
  QueueEvent e;
  e.kind = QueueEvent::Kind::lease;
  e.packet.id = id_by_sequence_[*pending_sequences_.begin()];
  e.lease_expiry = clock_() + lease_seconds;
  apply_locked(e);
  emit(e);
  return entries_.at(e.packet.id);
}

SubmitResult AnnotationQueue::submit(std::uint64_t id, const std::map<FrameIndex, StateIndex>& labels) {
  std::lock_guard lock(mutex_);
  SubmitResult result;
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    result.status = SubmitResult::Status::unknown_packet;
    result.message = "no packet " + std::to_string(id);
    return result;
  }
  QueueEntry& entry = it->second;
  const auto& frames = entry.packet.frames;
  for (FrameIndex f : frames) {
    if (!labels.contains(f)) result.missing.push_back(f);
  }
  for (const auto& [f, state] : labels) {
    if (!std::binary_search(frames.begin(), frames.end(), f)) result.extra.push_back(f);
    if (state >= num_states_) result.invalid.push_back(f);
  }
  if (!result.missing.empty() || !result.extra.empty() || !result.invalid.empty()) {
    result.status = SubmitResult::Status::rejected;
    result.message = "labels must cover exactly the packet frames with known states";
    return result;
  }
  std::vector<LabelRecord> records;
  records.reserve(labels.size());
  for (const auto& [f, state] : labels) records.push_back({f, state, LabelSource::manual});
  if (entry.status == EntryStatus::completed) {
    result.status = records == entry.labels ? SubmitResult::Status::duplicate : SubmitResult::Status::rejected;
    result.message = records == entry.labels ? "already completed" : "packet already completed with different labels";
    return result;
  }
  QueueEvent e;
  e.kind = QueueEvent::Kind::complete;
  e.packet.id = id;
  e.labels = std::move(records);
  apply_locked(e);
  emit(e);
  result.status = SubmitResult::Status::accepted;
  completed_cv_.notify_all();
  return result;
}

std::vector<std::vector<LabelRecord>> AnnotationQueue::wait_for(std::span<const std::uint64_t> ids) {
  std::unique_lock lock(mutex_);
  for (auto id : ids) {
    if (!entries_.contains(id)) throw Error("waiting on unknown packet " + std::to_string(id));
  }
  completed_cv_.wait(lock, [&] {
    return closed_ || std::all_of(ids.begin(), ids.end(),
                                  [&](auto id) { return entries_.at(id).status == EntryStatus::completed; });
  });
  if (closed_) throw Error("annotation queue closed");
  std::vector<std::vector<LabelRecord>> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(entries_.at(id).labels);
  return out;
}

void AnnotationQueue::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  completed_cv_.notify_all();
}

void AnnotationQueue::apply(const QueueEvent& event) {
  std::lock_guard lock(mutex_);
  apply_locked(event);
  completed_cv_.notify_all();
}

QueueStats AnnotationQueue::stats() {
  std::lock_guard lock(mutex_);
  expire_due();
  return {entries_.size(), pending_sequences_.size(), leased_ids_.size(), completed_, completed_frames_};
}

std::vector<QueueEntry> AnnotationQueue::entries() const {
  std::lock_guard lock(mutex_);
  std::vector<QueueEntry> out;
  out.reserve(id_by_sequence_.size());
  for (auto id : id_by_sequence_) out.push_back(entries_.at(id));
  return out;
}

std::optional<QueueEntry> AnnotationQueue::entry(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationQueue::apply_locked(const QueueEvent& e) {
  const std::uint64_t id = e.packet.id;
  auto invalid = [&](const char* why) { return Error("queue event for packet " + std::to_string(id) + ": " + why); };
  if (e.kind == QueueEvent::Kind::enqueue) {
    if (entries_.contains(id)) throw invalid("enqueued twice");
    if (e.sequence != id_by_sequence_.size()) throw invalid("sequence out of order");
    QueueEntry entry;
    entry.packet = e.packet;
    entry.enqueue_sequence = e.sequence;
    entries_.emplace(id, std::move(entry));
    id_by_sequence_.push_back(id);
    pending_sequences_.insert(e.sequence);
    return;
  }
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw invalid("not enqueued");
  QueueEntry& entry = it->second;
  switch (e.kind) {
    case QueueEvent::Kind::lease:
      if (entry.status != EntryStatus::pending) throw invalid("lease of a non-pending packet");
      pending_sequences_.erase(entry.enqueue_sequence);
      leased_ids_.insert(id);
      entry.status = EntryStatus::leased;
      entry.lease_expiry = e.lease_expiry;
      break;
    case QueueEvent::Kind::expire:
      if (entry.status != EntryStatus::leased) throw invalid("expiry of a packet that is not leased");
      leased_ids_.erase(id);
      pending_sequences_.insert(entry.enqueue_sequence);
      entry.status = EntryStatus::pending;
      break;
    case QueueEvent::Kind::complete:
      if (entry.status == EntryStatus::completed) throw invalid("completed twice");
      if (e.labels.size() != entry.packet.frames.size()) throw invalid("label count differs from frame count");
      pending_sequences_.erase(entry.enqueue_sequence);
      leased_ids_.erase(id);
      entry.status = EntryStatus::completed;
      entry.labels = e.labels;
      ++completed_;
      completed_frames_ += e.labels.size();
      break;
    case QueueEvent::Kind::enqueue:
      break;
  }
}

void AnnotationQueue::emit(const QueueEvent& event) {
  if (sink_) sink_(event);
}

void AnnotationQueue::expire_due() {
  if (leased_ids_.empty()) return;
  const double now = clock_();
  std::vector<std::uint64_t> due;
  for (auto id : leased_ids_) {
    if (now >= entries_.at(id).lease_expiry) due.push_back(id);
  }
  for (auto id : due) {
    QueueEvent e;
    e.kind = QueueEvent::Kind::expire;
    e.packet.id = id;
    apply_locked(e);
    emit(e);
  }
}

AnnotationService::AnnotationService(ServiceConfig config)
    : config_(std::move(config)),
      queue_(config_.stream.states.size(), config_.clock),
      model_(config_.initial_model) {
  validate_stream(config_.stream);
  config_.params.validate();
  if (!(config_.initial_model.states() == config_.stream.states)) {
    throw InputError("model and stream state spaces differ");
  }
  const auto segments = segment_frames(config_.stream.records);
  for (const auto& s : segments) total_frames_ += s.length();
  counters_.in_segment_frames = total_frames_;
  counters_.segments_total = segments.size();
  if (config_.log_path) {
    stream_fingerprint_ = fnv1a_hex(serialize_records(config_.stream));
    std::ifstream in(*config_.log_path, std::ios::binary);
    if (in && in.peek() != std::ifstream::traits_type::eof()) recover(in);
  }
}

AnnotationService::~AnnotationService() { stop(); }

std::string AnnotationService::header() const {
  std::string out = "hmmlabel-log 1\nstates";
  for (const auto& name : states().names()) out += ' ' + name;
  out += "\nstream " + std::to_string(config_.stream.records.size()) + ' ' + stream_fingerprint_ + '\n';
  out += params_line(config_.params) + '\n' + model_line(config_.initial_model);
  return out;
}

void AnnotationService::recover(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  // A crash can leave a torn final line; it never reached the reader, so drop it.
  if (!text.empty() && text.back() != '\n') {
    text.resize(text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);
    std::filesystem::resize_file(*config_.log_path, text.size());
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t number = 0;
  auto header_line = [&](std::string_view keyword) {
    if (!std::getline(lines, line)) throw InputError("log is missing its header");
    ++number;
    auto t = tokens(line);
    if (t.empty() || t[0] != keyword) throw InputError("log line " + std::to_string(number) + ": expected '" +
                                                       std::string(keyword) + "'");
    return t;
  };
  if (header_line("hmmlabel-log").size() != 2 || tokens(line)[1] != "1") throw InputError("unsupported log version");
  {
    const auto t = header_line("states");
    std::vector<std::string> names(t.begin() + 1, t.end());
    if (!(StateSpace(names) == states())) throw InputError("log states differ from the record stream");
  }
  {
    const auto t = header_line("stream");
    if (t.size() != 3 || parse_uint(t[1], "stream size") != config_.stream.records.size() ||
        t[2] != stream_fingerprint_) {
      throw InputError("log belongs to a different record stream");
    }
  }
  config_.params = parse_params_line(header_line("params"));
  config_.initial_model = parse_model_line(header_line("model"), states());
  model_ = config_.initial_model;
  while (std::getline(lines, line)) {
    ++number;
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t[0] == "label") continue;
    if (t[0] == "done") {
      log_done_ = true;
      continue;
    }
    try {
      queue_.apply(parse_event(line, states()));
    } catch (const Error& e) {
      throw InputError("log line " + std::to_string(number) + ": " + e.what());
    }
  }
  recovered_ = true;
}

PipelineParams AnnotationService::params() const {
  std::lock_guard lock(mutex_);
  return config_.params;
}

void AnnotationService::set_params(const PipelineParams& params) {
  params.validate();
  std::lock_guard lock(mutex_);
  if (state_ != RunState::idle || recovered_) throw ConflictError("parameters are fixed once the run has started");
  config_.params = params;
}

void AnnotationService::open_log() {
  if (!config_.log_path) return;
  auto out = std::make_unique<std::ofstream>(*config_.log_path, std::ios::binary | std::ios::app);
  if (!*out) throw InputError("cannot open log '" + *config_.log_path + "'");
  log_ = std::move(out);
  if (!recovered_) write_line(header());
  queue_.set_sink([this](const QueueEvent& e) { write_line(format_event(e, states())); });
}

void AnnotationService::write_line(const std::string& line) {
  std::lock_guard lock(log_mutex_);
  if (!log_) return;
  *log_ << line << '\n';
  log_->flush();
}

void AnnotationService::start() {
  std::lock_guard lock(mutex_);
  if (state_ != RunState::idle) return;
  open_log();
  state_ = RunState::running;
  worker_ = std::thread([this] { run_pipeline_thread(); });
}

void AnnotationService::run_pipeline_thread() {
  const BatchAnnotator annotator = [this](std::span<const AnnotationPacket> packets) {
    std::vector<std::uint64_t> ids;
    ids.reserve(packets.size());
    for (const auto& p : packets) {
      queue_.enqueue(p);
      ids.push_back(p.id);
    }
    return queue_.wait_for(ids);
  };
  const RunObserver observer = [this](const RunCounters& c, const HmmModel& m, std::span<const LabelRecord> labels) {
    std::uint64_t correct = 0, scored = 0;
    for (const auto& label : labels) {
      const FrameRecord* r = frame(label.frame_index);
      if (r && r->ground_truth) {
        ++scored;
        correct += *r->ground_truth == label.state;
      }
    }
    std::lock_guard lock(mutex_);
    counters_ = c;
    model_ = m;
    correct_ += correct;
    scored_ += scored;
  };

  AnnotationRun run;
  try {
    run = run_pipeline(config_.stream, config_.initial_model, config_.params, annotator, observer);
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    state_ = RunState::aborted;
    error_ = e.what();
    return;
  }
  if (!run.aborted && !log_done_) {
    std::string block;
    for (const auto& l : run.labels) {
      block += "label " + std::to_string(l.frame_index) + ' ' + states().name(l.state) + ' ' +
               std::string(to_string(l.source)) + '\n';
    }
    const auto& c = run.counters;
    block += "done " + std::to_string(c.manual_frames) + ' ' + std::to_string(c.auto_stable_frames) + ' ' +
             std::to_string(c.auto_confident_frames) + ' ' + std::to_string(c.packets) + ' ' +
             std::to_string(c.model_version);
    write_line(block);
  }
  std::lock_guard lock(mutex_);
  state_ = run.aborted ? RunState::aborted : RunState::finished;
  error_ = run.error;
  counters_ = run.counters;
  result_ = std::move(run);
}

std::optional<QueueEntry> AnnotationService::next(double lease_seconds) {
  start();
  return queue_.next(lease_seconds);
}

SubmitResult AnnotationService::submit(std::uint64_t id, const std::map<std::string, std::string>& labels) {
  SubmitResult bad;
  bad.status = SubmitResult::Status::rejected;
  std::map<FrameIndex, StateIndex> parsed;
  for (const auto& [key, name] : labels) {
    FrameIndex f = 0;
    try {
      f = parse_uint(key, "frame index");
    } catch (const InputError& e) {
      bad.message = e.what();
      return bad;
    }
    const auto state = states().find(name);
    if (!state) bad.invalid.push_back(f);
    parsed[f] = state.value_or(0);
  }
  if (!bad.invalid.empty()) {
    if (!queue_.entry(id)) return queue_.submit(id, {});
    bad.message = "unknown state names";
    return bad;
  }
  return queue_.submit(id, parsed);
}

ProgressSnapshot AnnotationService::progress() {
  const QueueStats q = queue_.stats();
  std::lock_guard lock(mutex_);
  ProgressSnapshot s;
  s.state = state_;
  s.error = error_;
  s.total_frames = total_frames_;
  s.manual_frames = q.completed_frames;
  s.auto_stable_frames = counters_.auto_stable_frames;
  s.auto_confident_frames = counters_.auto_confident_frames;
  s.auto_frames = counters_.auto_frames();
  s.pending_packets = q.pending;
  s.leased_packets = q.leased;
  s.completed_packets = q.completed;
  s.segments_done = counters_.segments_done;
  s.segments_total = counters_.segments_total;
  s.model_version = counters_.model_version;
  if (s.manual_frames > 0) s.reduction_factor = static_cast<double>(s.total_frames) / static_cast<double>(s.manual_frames);
  if (scored_ > 0) s.accuracy = static_cast<double>(correct_) / static_cast<double>(scored_);
  s.scored_frames = scored_;
  s.drained = (state_ == RunState::finished || state_ == RunState::aborted) && q.pending == 0 && q.leased == 0;
  return s;
}

std::pair<HmmModel, std::uint64_t> AnnotationService::model() const {
  std::lock_guard lock(mutex_);
  return {model_, counters_.model_version};
}

const FrameRecord* AnnotationService::frame(FrameIndex index) const {
  const auto& records = config_.stream.records;
  const auto it = std::lower_bound(records.begin(), records.end(), index,
                                   [](const FrameRecord& r, FrameIndex i) { return r.frame_index < i; });
  return it != records.end() && it->frame_index == index ? &*it : nullptr;
}

std::optional<std::string> AnnotationService::image_path(FrameIndex index) const {
  if (!config_.image_dir) return std::nullopt;
  for (const char* ext : {".pgm", ".png", ".jpg", ".jpeg"}) {
    const auto path = std::filesystem::path(*config_.image_dir) / (std::to_string(index) + ext);
    if (std::filesystem::is_regular_file(path)) return path.string();
  }
  return std::nullopt;
}

std::optional<AnnotationRun> AnnotationService::wait() {
  if (worker_.joinable()) worker_.join();
  std::lock_guard lock(mutex_);
  return result_;
}

void AnnotationService::stop() {
  queue_.close();
  if (worker_.joinable()) worker_.join();
  std::lock_guard lock(log_mutex_);
  log_.reset();
}

}  // namespace hmmlabel
