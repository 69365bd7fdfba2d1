#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hmmlabel/state_space.hpp"
#include "hmmlabel/types.hpp"

namespace hmmlabel {

/// Log of probability zero. Distinguishable from every finite log-probability.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double log_p) { return log_p == kLogZero; }

/// Dense row-major square matrix of probabilities.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<double> row_major);
  /// Nested rows, e.g. from a config file. Throws InputError if not square.
  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static SquareMatrix identity(std::size_t n);
  static SquareMatrix uniform(std::size_t n);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t row, std::size_t col) { return data_[row * n_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return data_[row * n_ + col]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * n_, n_}; }
  std::span<const double> data() const { return data_; }
  std::vector<std::vector<double>> to_rows() const;

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Initial-state and transition probabilities of the hidden chain.
struct ChainParameters {
  std::vector<double> priors;
  SquareMatrix transitions;
};

/// Hidden Markov model over a discrete state space whose observations are
/// classifier decisions drawn from the same alphabet as the states.
///
/// Immutable after construction. Log-domain tables are precomputed so decoding
/// never touches raw probabilities.
class HmmModel {
 public:
  /// Throws InputError when any table is not a valid (row-)stochastic
  /// distribution within 1e-9 or dimensions disagree with the state space.
  HmmModel(StateSpace states, std::vector<double> priors, SquareMatrix transitions,
           SquareMatrix emission);

  /// Uniform priors, transitions and emission.
  static HmmModel uniform(StateSpace states);

  const StateSpace& states() const { return states_; }
  std::size_t num_states() const { return states_.size(); }
  const std::vector<double>& priors() const { return priors_; }
  const SquareMatrix& transitions() const { return transitions_; }
  /// emission(k, y) = P(decision y | true state k).
  const SquareMatrix& emission() const { return emission_; }

  /// Copy with priors and transitions replaced.
  HmmModel with_chain(const ChainParameters& chain) const;
  HmmModel with_emission(const SquareMatrix& emission) const;

  std::span<const double> log_priors() const { return log_priors_; }
  /// Row-major log a[from][to].
  std::span<const double> log_transitions() const { return log_transitions_; }
  /// log P(y | k) laid out with y as the row, so one observation is contiguous over k.
  std::span<const double> log_emission_for(StateIndex observation) const {
    return {log_emission_by_obs_.data() + observation * num_states(), num_states()};
  }
  std::span<const double> log_self_transitions() const { return log_self_; }

 private:
  StateSpace states_;
  std::vector<double> priors_;
  SquareMatrix transitions_;
  SquareMatrix emission_;
  std::vector<double> log_priors_;
  std::vector<double> log_transitions_;
  std::vector<double> log_emission_by_obs_;
  std::vector<double> log_self_;
};

struct DecodeResult {
  std::vector<StateIndex> path;
  double log_v_star = kLogZero;
};

struct StableScore {
  StateIndex best_state = 0;
  /// Best unchanged-state likelihood divided by the Viterbi path probability.
  /// Not bounded by 1: the unchanged likelihood carries no prior factor.
  double v_u = 0.0;
  double log_unchanged = kLogZero;
  double log_v_star = kLogZero;
};

/// Most likely hidden path for the observed decisions. Ties at every max go
/// to the lowest state index. Throws ImpossibleObservation when every path has
/// probability zero and InputError on empty or out-of-range observations.
DecodeResult viterbi(const HmmModel& model, std::span<const StateIndex> observations);

/// log of P(y_1|k) * prod_{t>=2} P(y_t|k) a_kk. Returns kLogZero on any zero factor.
double unchanged_log_prob(const HmmModel& model, std::span<const StateIndex> observations,
                          StateIndex state);

/// unchanged_log_prob for every state at once; out.size() must equal num_states().
void unchanged_log_probs(const HmmModel& model, std::span<const StateIndex> observations,
                         std::span<double> out);

/// Propagates ImpossibleObservation from viterbi().
StableScore stable_state_score(const HmmModel& model, std::span<const StateIndex> observations);

/// Running sufficient statistics for chain estimation.
class ChainCounts {
 public:
  explicit ChainCounts(std::size_t num_states);

  /// One temporally contiguous run of states.
  void add_segment(std::span<const StateIndex> states);

  std::size_t num_states() const { return n_; }
  std::uint64_t segments() const { return segments_; }
  std::uint64_t labels() const { return labels_; }

  /// Additive smoothing with the given alpha. Throws InputError when a
  /// distribution would be undefined (no data and alpha == 0).
  ChainParameters estimate(double alpha) const;

 private:
  std::size_t n_;
  std::uint64_t segments_ = 0;
  std::uint64_t labels_ = 0;
  std::vector<std::uint64_t> initial_;
  std::vector<std::uint64_t> transitions_;
};

class EmissionCounts {
 public:
  explicit EmissionCounts(std::size_t num_states);

  void add(StateIndex predicted, StateIndex truth);
  std::uint64_t pairs() const { return pairs_; }
  SquareMatrix estimate(double alpha) const;

 private:
  std::size_t n_;
  std::uint64_t pairs_ = 0;
  std::vector<std::uint64_t> counts_;  // [truth][predicted]
};

/// Priors and transitions from labeled segments. Each inner vector must have
/// consecutive frame indices.
ChainParameters estimate_model(std::span<const std::vector<LabelRecord>> segments,
                               std::size_t num_states, double alpha = 1.0);

struct DecisionPair {
  StateIndex predicted = 0;
  StateIndex truth = 0;
};

/// Confusion-matrix emission estimate: e[truth][predicted].
SquareMatrix estimate_emission(std::span<const DecisionPair> pairs, std::size_t num_states,
                               double alpha = 1.0);

}  // namespace hmmlabel
