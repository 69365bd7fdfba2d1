#include "hmmlabel/hmm.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "hmmlabel/kernels.hpp"

namespace hmmlabel {

namespace {

constexpr double kStochasticTolerance = 1e-9;

void check_distribution(std::span<const double> values, const std::string& what) {
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InputError(what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) {
    throw InputError(what + " sums to " + std::to_string(sum) + ", expected 1");
  }
}

void check_row_stochastic(const SquareMatrix& m, std::size_t n, const std::string& what) {
  if (m.size() != n) {
    throw InputError(what + " is " + std::to_string(m.size()) + "x" + std::to_string(m.size()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (std::size_t r = 0; r < n; ++r) check_distribution(m.row(r), what + " row " + std::to_string(r));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

void check_observations(const HmmModel& model, std::span<const StateIndex> observations) {
  if (observations.empty()) throw InputError("observation sequence is empty");
  for (StateIndex y : observations) {
    if (y >= model.num_states()) {
      throw InputError("observation " + std::to_string(y) + " outside state space of size " +
                       std::to_string(model.num_states()));
    }
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InputError("smoothing alpha must be finite and >= 0");
}

}  // namespace

// ---------------------------------------------------------------------------
// SquareMatrix

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
  if (data_.size() != n * n) throw InputError("matrix data does not match its dimension");
}

SquareMatrix SquareMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  SquareMatrix m(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw InputError("matrix is not square");
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::uniform(std::size_t n) {
  return SquareMatrix(n, 1.0 / static_cast<double>(n));
}

std::vector<std::vector<double>> SquareMatrix::to_rows() const {
  std::vector<std::vector<double>> rows(n_);
  for (std::size_t r = 0; r < n_; ++r) rows[r].assign(row(r).begin(), row(r).end());
  return rows;
}

// ---------------------------------------------------------------------------
// HmmModel

HmmModel::HmmModel(StateSpace states, std::vector<double> priors, SquareMatrix transitions,
                   SquareMatrix emission)
    : states_(std::move(states)),
      priors_(std::move(priors)),
      transitions_(std::move(transitions)),
      emission_(std::move(emission)) {
  const std::size_t n = states_.size();
  if (n < 2) throw InputError("model needs a state space of at least 2 states");
  if (priors_.size() != n) throw InputError("priors length does not match state space");
  check_distribution(priors_, "priors");
  check_row_stochastic(transitions_, n, "transitions");
  check_row_stochastic(emission_, n, "emission");

  log_priors_.resize(n);
  log_transitions_.resize(n * n);
  log_emission_by_obs_.resize(n * n);
  log_self_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_priors_[i] = safe_log(priors_[i]);
    log_self_[i] = safe_log(transitions_(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      log_transitions_[i * n + j] = safe_log(transitions_(i, j));
      log_emission_by_obs_[j * n + i] = safe_log(emission_(i, j));
    }
  }
}

HmmModel HmmModel::uniform(StateSpace states) {
  const std::size_t n = states.size();
  return HmmModel(std::move(states), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                  SquareMatrix::uniform(n), SquareMatrix::uniform(n));
}

HmmModel HmmModel::with_chain(const ChainParameters& chain) const {
  return HmmModel(states_, chain.priors, chain.transitions, emission_);
}

HmmModel HmmModel::with_emission(const SquareMatrix& emission) const {
  return HmmModel(states_, priors_, transitions_, emission);
}

// ---------------------------------------------------------------------------
// Decoding

DecodeResult viterbi(const HmmModel& model, std::span<const StateIndex> observations) {
  check_observations(model, observations);
  const std::size_t n = model.num_states();
  const std::size_t m = observations.size();
  const auto& k = kernels::active();

  std::vector<double> current(n);
  std::vector<double> next(n);
  std::vector<std::int32_t> back(m * n, 0);

  const auto first_emit = model.log_emission_for(observations[0]);
  const auto log_priors = model.log_priors();
  for (std::size_t s = 0; s < n; ++s) current[s] = first_emit[s] + log_priors[s];

  for (std::size_t t = 1; t < m; ++t) {
    k.max_plus_step(current.data(), model.log_transitions().data(),
                    model.log_emission_for(observations[t]).data(), n, next.data(),
                    back.data() + t * n);
    std::swap(current, next);
  }

  StateIndex last = 0;
  double best = kLogZero;
  for (std::size_t s = 0; s < n; ++s) {
    if (current[s] > best) {
      best = current[s];
      last = s;
    }
  }
  if (is_log_zero(best)) {
    throw ImpossibleObservation("no hidden state path can produce the observed decisions");
  }

  DecodeResult result;
  result.log_v_star = best;
  result.path.resize(m);
  result.path[m - 1] = last;
  for (std::size_t t = m - 1; t > 0; --t) {
    result.path[t - 1] = static_cast<StateIndex>(back[t * n + result.path[t]]);
  }
  return result;
}

double unchanged_log_prob(const HmmModel& model, std::span<const StateIndex> observations,
                          StateIndex state) {
  check_observations(model, observations);
  if (state >= model.num_states()) throw InputError("state index out of range");
  const double self = model.log_self_transitions()[state];
  double acc = model.log_emission_for(observations[0])[state];
  for (std::size_t t = 1; t < observations.size(); ++t) {
    acc = acc + model.log_emission_for(observations[t])[state];
    acc = acc + self;
  }
  return acc;
}

void unchanged_log_probs(const HmmModel& model, std::span<const StateIndex> observations,
                         std::span<double> out) {
  check_observations(model, observations);
  if (out.size() != model.num_states()) throw InputError("output span does not match state count");
  const std::size_t n = model.num_states();
  // log_emission_for(0) is the start of the whole observation-major table.
  kernels::active().accumulate_unchanged(observations.data(), observations.size(),
                                         model.log_emission_for(0).data(),
                                         model.log_self_transitions().data(), n, out.data());
}

StableScore stable_state_score(const HmmModel& model, std::span<const StateIndex> observations) {
  const DecodeResult decoded = viterbi(model, observations);
  std::vector<double> unchanged(model.num_states());
  unchanged_log_probs(model, observations, unchanged);

  StableScore score;
  score.log_v_star = decoded.log_v_star;
  for (std::size_t s = 0; s < unchanged.size(); ++s) {
    if (unchanged[s] > score.log_unchanged) {
      score.log_unchanged = unchanged[s];
      score.best_state = s;
    }
  }
  score.v_u = is_log_zero(score.log_unchanged) ? 0.0 : std::exp(score.log_unchanged - decoded.log_v_star);
  return score;
}

// ---------------------------------------------------------------------------
// Estimation

ChainCounts::ChainCounts(std::size_t num_states)
    : n_(num_states), initial_(num_states, 0), transitions_(num_states * num_states, 0) {}

void ChainCounts::add_segment(std::span<const StateIndex> states) {
  if (states.empty()) return;
  for (StateIndex s : states) {
    if (s >= n_) throw InputError("label state index out of range");
  }
  ++segments_;
  labels_ += states.size();
  ++initial_[states[0]];
  for (std::size_t t = 1; t < states.size(); ++t) ++transitions_[states[t - 1] * n_ + states[t]];
}

ChainParameters ChainCounts::estimate(double alpha) const {
  check_alpha(alpha);
  const double smooth_total = alpha * static_cast<double>(n_);

  ChainParameters out;
  const double prior_denominator = static_cast<double>(segments_) + smooth_total;
  if (prior_denominator <= 0.0) throw InputError("no labels to estimate priors from and alpha is 0");
  out.priors.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    out.priors[i] = (static_cast<double>(initial_[i]) + alpha) / prior_denominator;
  }

  out.transitions = SquareMatrix(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::uint64_t row_total = 0;
    for (std::size_t j = 0; j < n_; ++j) row_total += transitions_[i * n_ + j];
    const double denominator = static_cast<double>(row_total) + smooth_total;
    if (denominator <= 0.0) {
      throw InputError("state " + std::to_string(i) + " has no observed transitions and alpha is 0");
    }
    for (std::size_t j = 0; j < n_; ++j) {
      out.transitions(i, j) = (static_cast<double>(transitions_[i * n_ + j]) + alpha) / denominator;
    }
  }
  return out;
}

EmissionCounts::EmissionCounts(std::size_t num_states)
    : n_(num_states), counts_(num_states * num_states, 0) {}

void EmissionCounts::add(StateIndex predicted, StateIndex truth) {
  if (predicted >= n_ || truth >= n_) throw InputError("decision pair index out of range");
  ++counts_[truth * n_ + predicted];
  ++pairs_;
}

SquareMatrix EmissionCounts::estimate(double alpha) const {
  check_alpha(alpha);
  const double smooth_total = alpha * static_cast<double>(n_);
  SquareMatrix out(n_);
  for (std::size_t k = 0; k < n_; ++k) {
    std::uint64_t row_total = 0;
    for (std::size_t y = 0; y < n_; ++y) row_total += counts_[k * n_ + y];
    const double denominator = static_cast<double>(row_total) + smooth_total;
    if (denominator <= 0.0) {
      throw InputError("true state " + std::to_string(k) + " has no decision pairs and alpha is 0");
    }
    for (std::size_t y = 0; y < n_; ++y) {
      out(k, y) = (static_cast<double>(counts_[k * n_ + y]) + alpha) / denominator;
    }
  }
  return out;
}

ChainParameters estimate_model(std::span<const std::vector<LabelRecord>> segments,
                               std::size_t num_states, double alpha) {
  ChainCounts counts(num_states);
  std::vector<StateIndex> states;
  for (const auto& segment : segments) {
    states.clear();
    for (std::size_t i = 0; i < segment.size(); ++i) {
      if (i > 0 && segment[i].frame_index != segment[i - 1].frame_index + 1) {
        throw InputError("segment labels are not temporally contiguous at frame " +
                         std::to_string(segment[i].frame_index));
      }
      states.push_back(segment[i].state);
    }
    counts.add_segment(states);
  }
  return counts.estimate(alpha);
}

SquareMatrix estimate_emission(std::span<const DecisionPair> pairs, std::size_t num_states,
                               double alpha) {
  EmissionCounts counts(num_states);
  for (const auto& pair : pairs) counts.add(pair.predicted, pair.truth);
  return counts.estimate(alpha);
}

}  // namespace hmmlabel
