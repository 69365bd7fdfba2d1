#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmmlabel/types.hpp"

namespace hmmlabel {

/// Ordered set of discrete state names. Indices follow declaration order.
///
/// Names must be non-empty and free of whitespace and commas so they can be
/// written verbatim into the line-oriented record and log formats.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> names);

  /// The six gaze regions of the driver-gaze case study.
  static StateSpace gaze_regions();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(StateIndex index) const { return names_.at(index); }

  std::optional<StateIndex> find(std::string_view name) const;
  /// Like find(), but throws InputError for unknown names.
  StateIndex index_of(std::string_view name) const;

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace hmmlabel
