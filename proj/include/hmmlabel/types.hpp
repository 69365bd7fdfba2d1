#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hmmlabel {

using StateIndex = std::size_t;
using FrameIndex = std::uint64_t;

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or arguments (malformed records, invalid parameters).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Every hidden-state path assigns probability zero to the observations.
class ImpossibleObservation : public Error {
 public:
  using Error::Error;
};

/// Provenance of a finalized per-frame label.
enum class LabelSource : std::uint8_t { manual, auto_stable, auto_confident };

std::string_view to_string(LabelSource source);
LabelSource label_source_from_string(std::string_view text);

struct LabelRecord {
  FrameIndex frame_index = 0;
  StateIndex state = 0;
  LabelSource source = LabelSource::manual;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

}  // namespace hmmlabel
