#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hmmlabel/state_space.hpp"
#include "hmmlabel/types.hpp"

namespace hmmlabel {

/// Per-frame observation bundle.
struct FrameRecord {
  FrameIndex frame_index = 0;
  bool object_present = false;
  /// Classifier probabilities in state order; empty when the object is absent.
  std::vector<double> class_probs;
  /// Change measure against the previous frame, in [0,1]. Absent on the first
  /// frame of a stream and whenever the previous frame is missing or absent.
  std::optional<double> change_score;
  std::optional<StateIndex> ground_truth;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct RecordStream {
  StateSpace states;
  std::vector<FrameRecord> records;

  friend bool operator==(const RecordStream&, const RecordStream&) = default;
};

/// Throws InputError naming the first offending record when any stream-wide
/// invariant is violated.
void validate_stream(const RecordStream& stream);

/// Line format, one frame per line after a header:
///
///   states <name_0> <name_1> ...
///   <frame_index> <0|1> <p_0> ... <p_{S-1}> <change_score|null> <state|null>
///
/// Absent frames write a single `null` in place of the probabilities. Decimals
/// use the shortest representation that round-trips exactly.
void write_records(std::ostream& out, const RecordStream& stream);
std::string serialize_records(const RecordStream& stream);

/// Errors name the 1-based line number and field.
RecordStream read_records(std::istream& in);
RecordStream parse_records(std::string_view text);

RecordStream load_records(const std::string& path);
void save_records(const std::string& path, const RecordStream& stream);

/// Shortest round-trip decimal text for a double; locale independent.
std::string format_double(double value);
/// Throws InputError on anything but a complete decimal number.
double parse_double(std::string_view text);

}  // namespace hmmlabel
