#pragma once

#include <cstdint>

#include "hmmlabel/hmm.hpp"
#include "hmmlabel/records.hpp"

namespace hmmlabel {

/// Statistical stand-in for a camera + classifier stack: hidden states follow a
/// Markov chain, classifier decisions follow a confusion matrix, and change
/// scores follow truncated normals calibrated at a 0.5 threshold.
struct SimConfig {
  StateSpace states = StateSpace::gaze_regions();
  SquareMatrix true_transitions;
  /// emission(k, y) = P(decision y | true state k).
  SquareMatrix emission;
  std::vector<double> initial;  // empty: uniform
  double presence_rate = 0.794;
  /// Mean length of a run of object-present frames; presence follows a
  /// two-state chain with stationary rate presence_rate. 0 draws presence
  /// independently per frame.
  double presence_mean_run = 8.0;
  /// P(change_score >= 0.5) at a true state transition.
  double change_tpr = 0.9;
  /// P(change_score >= 0.5) at a frame without a transition.
  double change_fpr = 0.003;
  /// Standard deviation of both (pre-truncation) score distributions.
  double score_noise = 0.2;
  /// log10 of the top-two probability ratio ~ Normal(mean, spread), floored
  /// just above 0; separate means for correct and wrong decisions.
  double confidence_log10_correct = 1.5;
  double confidence_log10_wrong = 0.3;
  double confidence_log10_spread = 0.5;
  /// Mass of each remaining class relative to the runner-up, in [0,1].
  double tail_ratio = 0.5;
  std::uint64_t length = 100000;
  std::uint64_t seed = 1;

  /// Six gaze regions with default dwell behavior and a confusion matrix
  /// whose diagonal averages 0.754.
  static SimConfig gaze_default();
  /// Throws InputError when any probability or matrix is invalid.
  void validate() const;
};

SquareMatrix default_gaze_transitions();
SquareMatrix default_gaze_emission();

/// Deterministic given config.seed. Throws InputError on a zero-length request.
RecordStream simulate_records(const SimConfig& config);

/// Mean of the truncated-to-[0,1] normal score distribution that puts the
/// requested mass at or above 0.5, clamped to [-0.5, 1.5].
double calibrate_score_mean(double mass_above_half, double spread);

}  // namespace hmmlabel
