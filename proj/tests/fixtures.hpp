#pragma once

// Hand-built record streams and annotators shared by the pipeline, service and
// acceptance suites.

#include <random>
#include <unordered_map>
#include <vector>

#include "hmmlabel/pipeline.hpp"
#include "hmmlabel/records.hpp"
#include "oracles.hpp"

namespace hmmlabel::testing {

/// Probabilities with `top` ahead of every other class by `ratio`.
inline std::vector<double> peaked(std::size_t n, StateIndex top, double ratio) {
  std::vector<double> p(n, 1.0);
  p[top] = ratio;
  const double sum = ratio + static_cast<double>(n - 1);
  for (auto& x : p) x /= sum;
  return p;
}

inline std::vector<double> flat(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

/// Fully present stream whose classifier reports the truth with a confident
/// margin and whose change score is 1 exactly at state transitions.
inline RecordStream noiseless_stream(const StateSpace& states, const std::vector<StateIndex>& truth,
                                     double ratio = 100.0) {
  RecordStream stream{states, {}};
  for (std::size_t t = 0; t < truth.size(); ++t) {
    FrameRecord r;
    r.frame_index = t;
    r.object_present = true;
    r.class_probs = peaked(states.size(), truth[t], ratio);
    if (t > 0) r.change_score = truth[t] != truth[t - 1] ? 1.0 : 0.0;
    r.ground_truth = truth[t];
    stream.records.push_back(std::move(r));
  }
  return stream;
}

/// Ground-truth path with every dwell drawn from the chain.
inline std::vector<StateIndex> sample_path(const SquareMatrix& transitions, std::size_t length, std::mt19937_64& rng) {
  std::vector<StateIndex> path(length);
  std::uniform_int_distribution<StateIndex> first(0, transitions.size() - 1);
  path[0] = first(rng);
  for (std::size_t t = 1; t < length; ++t) {
    path[t] = sample_index(transitions.row(path[t - 1]), rng);
  }
  return path;
}

/// Annotator that answers every packet frame with the stream's ground truth.
class OracleAnnotator {
 public:
  explicit OracleAnnotator(const RecordStream& stream) {
    for (const auto& r : stream.records) {
      if (r.ground_truth) truth_[r.frame_index] = *r.ground_truth;
    }
  }

  std::vector<LabelRecord> operator()(const AnnotationPacket& packet) const {
    std::vector<LabelRecord> labels;
    for (FrameIndex f : packet.frames) labels.push_back({f, truth_.at(f), LabelSource::manual});
    return labels;
  }

 private:
  std::unordered_map<FrameIndex, StateIndex> truth_;
};

inline Annotator oracle_annotator(const RecordStream& stream) {
  return [oracle = OracleAnnotator(stream)](const AnnotationPacket& p) { return oracle(p); };
}

}  // namespace hmmlabel::testing
