#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the decoding or estimation code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "hmmlabel/hmm.hpp"

namespace hmmlabel::testing {

inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng,
                                               double zero_probability = 0.0) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::bernoulli_distribution zero(zero_probability);
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = zero(rng) ? 0.0 : unit(rng);
    sum += x;
  }
  if (sum == 0.0) {
    v[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : v) x /= sum;
  return v;
}

inline SquareMatrix random_stochastic(std::size_t n, std::mt19937_64& rng,
                                      double zero_probability = 0.0) {
  SquareMatrix m(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = random_distribution(n, rng, zero_probability);
    for (std::size_t c = 0; c < n; ++c) m(r, c) = row[c];
  }
  return m;
}

inline StateSpace numbered_states(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
  return StateSpace(std::move(names));
}

inline HmmModel random_model(std::size_t n, std::mt19937_64& rng) {
  return HmmModel(numbered_states(n), random_distribution(n, rng), random_stochastic(n, rng),
                  random_stochastic(n, rng));
}

inline std::vector<StateIndex> random_observations(std::size_t n, std::size_t length,
                                                   std::mt19937_64& rng) {
  std::uniform_int_distribution<StateIndex> pick(0, n - 1);
  std::vector<StateIndex> obs(length);
  for (auto& y : obs) y = pick(rng);
  return obs;
}

/// Probability of one fixed hidden path, by direct multiplication.
inline double path_probability(const HmmModel& model, const std::vector<StateIndex>& path,
                               const std::vector<StateIndex>& obs) {
  double p = model.priors()[path[0]] * model.emission()(path[0], obs[0]);
  for (std::size_t t = 1; t < obs.size(); ++t) {
    p *= model.transitions()(path[t - 1], path[t]) * model.emission()(path[t], obs[t]);
  }
  return p;
}

struct BruteForceDecode {
  std::vector<StateIndex> path;
  double probability = 0.0;
  /// Every path whose probability is within a relative 1e-12 of the maximum.
  /// Paths sharing the same multiset of factors tie exactly.
  std::vector<std::vector<StateIndex>> optimal_paths;

  bool is_optimal(const std::vector<StateIndex>& candidate) const {
    return std::find(optimal_paths.begin(), optimal_paths.end(), candidate) != optimal_paths.end();
  }
};

/// Exhaustive maximum over all n^T hidden sequences.
inline BruteForceDecode brute_force_decode(const HmmModel& model,
                                           const std::vector<StateIndex>& obs) {
  const std::size_t n = model.num_states();
  const std::size_t m = obs.size();
  std::vector<StateIndex> path(m, 0);
  std::vector<std::pair<double, std::vector<StateIndex>>> all;
  BruteForceDecode best;
  best.probability = -1.0;
  bool done = false;
  while (!done) {
    const double p = path_probability(model, path, obs);
    all.emplace_back(p, path);
    if (p > best.probability) {
      best.probability = p;
      best.path = path;
    }
    done = true;
    for (std::size_t pos = m; pos > 0; --pos) {
      if (++path[pos - 1] < n) {
        done = false;
        break;
      }
      path[pos - 1] = 0;
    }
  }
  for (auto& [p, candidate] : all) {
    if (p >= best.probability * (1.0 - 1e-12)) best.optimal_paths.push_back(std::move(candidate));
  }
  return best;
}

/// P(y_1|k) * prod_{t>=2} P(y_t|k) a_kk by a straight product loop.
inline double unchanged_product(const HmmModel& model, const std::vector<StateIndex>& obs,
                                StateIndex k) {
  double p = model.emission()(k, obs[0]);
  for (std::size_t t = 1; t < obs.size(); ++t) {
    p *= model.emission()(k, obs[t]) * model.transitions()(k, k);
  }
  return p;
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

inline double max_row_tv(const SquareMatrix& a, const SquareMatrix& b) {
  double worst = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) worst = std::max(worst, total_variation(a.row(r), b.row(r)));
  return worst;
}

inline StateIndex sample_index(std::span<const double> weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

/// Contiguous label segments sampled from a known chain.
inline std::vector<std::vector<LabelRecord>> sample_chain_segments(
    const std::vector<double>& priors, const SquareMatrix& transitions, std::size_t total_labels,
    std::size_t segment_length, std::mt19937_64& rng) {
  std::vector<std::vector<LabelRecord>> segments;
  FrameIndex frame = 0;
  std::size_t produced = 0;
  while (produced < total_labels) {
    std::vector<LabelRecord> segment;
    StateIndex state = sample_index(priors, rng);
    const std::size_t length = std::min(segment_length, total_labels - produced);
    for (std::size_t i = 0; i < length; ++i) {
      if (i > 0) state = sample_index(transitions.row(state), rng);
      segment.push_back({frame++, state, LabelSource::manual});
    }
    produced += length;
    ++frame;  // gap between segments
    segments.push_back(std::move(segment));
  }
  return segments;
}

}  // namespace hmmlabel::testing
