#include "hmmlabel/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hmmlabel {

namespace {

constexpr double kProbabilitySumTolerance = 1e-6;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

[[noreturn]] void fail(std::size_t line, std::string_view field, const std::string& message) {
  throw InputError("line " + std::to_string(line) + ", field '" + std::string(field) + "': " + message);
}

std::string record_context(const FrameRecord& r) { return "frame " + std::to_string(r.frame_index); }

void check_probs(const std::vector<double>& probs, std::size_t n, const std::string& where) {
  if (probs.size() != n) {
    throw InputError(where + ": class_probs has " + std::to_string(probs.size()) + " entries, expected " +
                     std::to_string(n));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw InputError(where + ": class_probs entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw InputError(where + ": class_probs sums to " + format_double(sum) + ", expected 1 within 1e-6");
  }
}

// Checks one record against its predecessor (nullptr for the first).
void check_record(const FrameRecord& r, const FrameRecord* previous, std::size_t num_states,
                  const std::string& where) {
  if (previous != nullptr && r.frame_index <= previous->frame_index) {
    throw InputError(where + ": frame_index " + std::to_string(r.frame_index) + " is not increasing");
  }
  if (r.object_present) {
    check_probs(r.class_probs, num_states, where);
  } else if (!r.class_probs.empty()) {
    throw InputError(where + ": class_probs present on an absent frame");
  }
  if (r.change_score) {
    const double s = *r.change_score;
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw InputError(where + ": change_score outside [0,1]");
    const bool has_predecessor = previous != nullptr && previous->frame_index + 1 == r.frame_index &&
                                 previous->object_present && r.object_present;
    if (!has_predecessor) {
      throw InputError(where + ": change_score requires an adjacent previous frame with both present");
    }
  }
  if (r.ground_truth && *r.ground_truth >= num_states) throw InputError(where + ": ground_truth out of range");
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last || text.empty()) {
    throw InputError("'" + std::string(text) + "' is not a decimal number");
  }
  return value;
}

void validate_stream(const RecordStream& stream) {
  const FrameRecord* previous = nullptr;
  for (const auto& r : stream.records) {
    check_record(r, previous, stream.states.size(), record_context(r));
    previous = &r;
  }
}

void write_records(std::ostream& out, const RecordStream& stream) {
  std::string line;
  line = "states";
  for (const auto& name : stream.states.names()) {
    line += ' ';
    line += name;
  }
  line += '\n';
  out << line;
  for (const auto& r : stream.records) {
    line = std::to_string(r.frame_index);
    line += r.object_present ? " 1" : " 0";
    if (r.object_present) {
      for (double p : r.class_probs) {
        line += ' ';
        line += format_double(p);
      }
    } else {
      line += " null";
    }
    line += ' ';
    line += r.change_score ? format_double(*r.change_score) : "null";
    line += ' ';
    line += r.ground_truth ? stream.states.name(*r.ground_truth) : "null";
    line += '\n';
    out << line;
  }
}

std::string serialize_records(const RecordStream& stream) {
  std::ostringstream out;
  write_records(out, stream);
  return out.str();
}

RecordStream read_records(std::istream& in) {
  RecordStream stream;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_fields(line);
    if (fields.empty()) continue;

    if (!have_header) {
      if (fields[0] != "states") fail(line_no, "header", "expected 'states <name> ...' header");
      std::vector<std::string> names(fields.begin() + 1, fields.end());
      try {
        stream.states = StateSpace(std::move(names));
      } catch (const InputError& e) {
        fail(line_no, "header", e.what());
      }
      have_header = true;
      continue;
    }

    const std::size_t n = stream.states.size();
    FrameRecord r;
    if (fields.size() < 2) fail(line_no, "object_present", "missing field");

    std::uint64_t index = 0;
    const auto idx = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    if (idx.ec != std::errc() || idx.ptr != fields[0].data() + fields[0].size()) {
      fail(line_no, "frame_index", "'" + std::string(fields[0]) + "' is not a non-negative integer");
    }
    r.frame_index = index;

    if (fields[1] == "1") {
      r.object_present = true;
    } else if (fields[1] != "0") {
      fail(line_no, "object_present", "expected 0 or 1");
    }

    const std::size_t prob_fields = r.object_present ? n : 1;
    const std::size_t expected = 2 + prob_fields + 2;
    if (fields.size() != expected) {
      fail(line_no, "record",
           "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    if (r.object_present) {
      r.class_probs.reserve(n);
      for (std::size_t s = 0; s < n; ++s) {
        try {
          r.class_probs.push_back(parse_double(fields[2 + s]));
        } catch (const InputError& e) {
          fail(line_no, "class_probs[" + std::to_string(s) + "]", e.what());
        }
      }
    } else if (fields[2] != "null") {
      fail(line_no, "class_probs", "absent frames carry 'null' probabilities");
    }

    const auto score_field = fields[2 + prob_fields];
    if (score_field != "null") {
      try {
        r.change_score = parse_double(score_field);
      } catch (const InputError& e) {
        fail(line_no, "change_score", e.what());
      }
    }
    const auto truth_field = fields[3 + prob_fields];
    if (truth_field != "null") {
      const auto state = stream.states.find(truth_field);
      if (!state) fail(line_no, "ground_truth", "unknown state '" + std::string(truth_field) + "'");
      r.ground_truth = *state;
    }

    const FrameRecord* previous = stream.records.empty() ? nullptr : &stream.records.back();
    try {
      check_record(r, previous, n, record_context(r));
    } catch (const InputError& e) {
      const std::string what = e.what();
      const std::string field = what.find("class_probs") != std::string::npos     ? "class_probs"
                                : what.find("change_score") != std::string::npos  ? "change_score"
                                : what.find("frame_index") != std::string::npos   ? "frame_index"
                                                                                  : "record";
      fail(line_no, field, what);
    }
    stream.records.push_back(std::move(r));
  }
  if (!have_header) throw InputError("record input is empty: missing 'states' header");
  return stream;
}

RecordStream parse_records(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_records(in);
}

RecordStream load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open record file '" + path + "'");
  return read_records(in);
}

void save_records(const std::string& path, const RecordStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write record file '" + path + "'");
  write_records(out, stream);
  if (!out) throw InputError("failed writing record file '" + path + "'");
}

}  // namespace hmmlabel
