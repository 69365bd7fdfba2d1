#include "hmmlabel/state_space.hpp"

#include <algorithm>
#include <unordered_set>

namespace hmmlabel {

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::manual:
      return "manual";
    case LabelSource::auto_stable:
      return "auto_stable";
    case LabelSource::auto_confident:
      return "auto_confident";
  }
  return "unknown";
}

LabelSource label_source_from_string(std::string_view text) {
  if (text == "manual") return LabelSource::manual;
  if (text == "auto_stable") return LabelSource::auto_stable;
  if (text == "auto_confident") return LabelSource::auto_confident;
  throw InputError("unknown label source '" + std::string(text) + "'");
}

StateSpace::StateSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw InputError("state space needs at least 2 states");
  std::unordered_set<std::string_view> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw InputError("state names must be non-empty");
    if (std::any_of(name.begin(), name.end(),
                    [](char c) { return c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r'; })) {
      throw InputError("state name '" + name + "' contains whitespace or a comma");
    }
    if (name == "null") throw InputError("'null' is reserved and cannot name a state");
    if (!seen.insert(name).second) throw InputError("duplicate state name '" + name + "'");
  }
}

StateSpace StateSpace::gaze_regions() {
  return StateSpace({"road", "center_stack", "instrument_cluster", "rearview_mirror", "left", "right"});
}

std::optional<StateIndex> StateSpace::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<StateIndex>(it - names_.begin());
}

StateIndex StateSpace::index_of(std::string_view name) const {
  if (auto index = find(name)) return *index;
  throw InputError("unknown state '" + std::string(name) + "'");
}

}  // namespace hmmlabel
