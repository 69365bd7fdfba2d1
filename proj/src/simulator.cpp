#include "hmmlabel/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

namespace hmmlabel {

namespace {

constexpr double kMeanLow = -0.5;
constexpr double kMeanHigh = 1.5;
constexpr double kMinSpread = 0.02;

// Gaze region order: road, center_stack, instrument_cluster, rearview_mirror, left, right.
SquareMatrix spread_rows(const std::array<double, 6>& diagonal,
                         const std::array<std::array<double, 6>, 6>& off_diagonal_shares) {
  SquareMatrix m(6);
  for (std::size_t r = 0; r < 6; ++r) {
    m(r, r) = diagonal[r];
    for (std::size_t c = 0; c < 6; ++c) {
      if (c != r) m(r, c) = (1.0 - diagonal[r]) * off_diagonal_shares[r][c];
    }
  }
  return m;
}

// Uniform double in [0,1) built from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform double strictly inside (0,1).
double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

StateIndex sample_row(std::span<const double> weights, std::mt19937_64& rng) {
  double u = uniform01(rng);
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

double mass_above_half(double mean, double spread) {
  const boost::math::normal_distribution<double> dist(mean, spread);
  const double below_one = boost::math::cdf(dist, 1.0);
  const double below_zero = boost::math::cdf(dist, 0.0);
  const double below_half = boost::math::cdf(dist, 0.5);
  return (below_one - below_half) / (below_one - below_zero);
}

class TruncatedScore {
 public:
  TruncatedScore(double mean, double spread)
      : dist_(mean, spread),
        lower_(boost::math::cdf(dist_, 0.0)),
        upper_(boost::math::cdf(dist_, 1.0)) {}

  double sample(std::mt19937_64& rng) const {
    const double u = lower_ + (upper_ - lower_) * uniform_open(rng);
    if (u <= 0.0 || u >= 1.0) return u <= 0.0 ? 0.0 : 1.0;
    return std::clamp(boost::math::quantile(dist_, u), 0.0, 1.0);
  }

 private:
  boost::math::normal_distribution<double> dist_;
  double lower_;
  double upper_;
};

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string(what) + " must lie in [0,1]");
}

void check_matrix(const SquareMatrix& m, std::size_t n, const char* what) {
  if (m.size() != n) throw InputError(std::string(what) + " does not match the state space");
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0)) throw InputError(std::string(what) + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError(std::string(what) + " is not row-stochastic");
  }
}

}  // namespace

SquareMatrix default_gaze_transitions() {
  // Frame-rate dwells: several seconds on the road, glances of a second or two
  // elsewhere that mostly return to it.
  const std::array<double, 6> stay{0.995, 0.98, 0.98, 0.975, 0.98, 0.98};
  const std::array<std::array<double, 6>, 6> shares{{
      {0.0, 0.20, 0.25, 0.25, 0.20, 0.10},
      {0.80, 0.0, 0.10, 0.03, 0.02, 0.05},
      {0.80, 0.10, 0.0, 0.04, 0.03, 0.03},
      {0.80, 0.05, 0.05, 0.0, 0.05, 0.05},
      {0.80, 0.04, 0.06, 0.06, 0.0, 0.04},
      {0.80, 0.08, 0.04, 0.04, 0.04, 0.0},
  }};
  return spread_rows(stay, shares);
}

SquareMatrix default_gaze_emission() {
  // Diagonal sums to 4.524, i.e. averages 0.754; confusions favor neighboring regions.
  const std::array<double, 6> correct{0.90, 0.70, 0.70, 0.75, 0.74, 0.734};
  const std::array<std::array<double, 6>, 6> shares{{
      {0.0, 0.10, 0.40, 0.20, 0.20, 0.10},
      {0.20, 0.0, 0.40, 0.05, 0.05, 0.30},
      {0.50, 0.35, 0.0, 0.05, 0.05, 0.05},
      {0.50, 0.15, 0.05, 0.0, 0.10, 0.20},
      {0.70, 0.05, 0.10, 0.10, 0.0, 0.05},
      {0.35, 0.35, 0.05, 0.20, 0.05, 0.0},
  }};
  return spread_rows(correct, shares);
}

SimConfig SimConfig::gaze_default() {
  SimConfig config;
  config.states = StateSpace::gaze_regions();
  config.true_transitions = default_gaze_transitions();
  config.emission = default_gaze_emission();
  return config;
}

void SimConfig::validate() const {
  const std::size_t n = states.size();
  if (n < 2) throw InputError("simulator needs a state space");
  check_matrix(true_transitions, n, "true_transitions");
  check_matrix(emission, n, "emission");
  if (!initial.empty()) {
    if (initial.size() != n) throw InputError("initial distribution does not match the state space");
    double sum = 0.0;
    for (double p : initial) {
      check_probability(p, "initial");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("initial distribution does not sum to 1");
  }
  check_probability(presence_rate, "presence_rate");
  if (!std::isfinite(presence_mean_run) || presence_mean_run < 0.0 ||
      (presence_mean_run > 0.0 && presence_rate < 1.0 && presence_mean_run < presence_rate / (1.0 - presence_rate))) {
    throw InputError("presence_mean_run must be 0 or at least presence_rate / (1 - presence_rate)");
  }
  check_probability(change_tpr, "change_tpr");
  check_probability(change_fpr, "change_fpr");
  check_probability(tail_ratio, "tail_ratio");
  if (!(score_noise >= kMinSpread) || !std::isfinite(score_noise)) {
    throw InputError("score_noise must be finite and >= 0.02");
  }
  if (!(confidence_log10_spread >= 0.0) || !std::isfinite(confidence_log10_spread) ||
      !std::isfinite(confidence_log10_correct) || !std::isfinite(confidence_log10_wrong)) {
    throw InputError("confidence parameters must be finite with a non-negative spread");
  }
}

double calibrate_score_mean(double mass, double spread) {
  check_probability(mass, "score mass");
  double lo = kMeanLow;
  double hi = kMeanHigh;
  if (mass <= mass_above_half(lo, spread)) return lo;
  if (mass >= mass_above_half(hi, spread)) return hi;
  for (int iter = 0; iter < 200 && hi - lo > 1e-14; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (mass_above_half(mid, spread) < mass ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RecordStream simulate_records(const SimConfig& config) {
  config.validate();
  if (config.length == 0) throw InputError("simulated stream length must be positive");

  const std::size_t n = config.states.size();
  std::mt19937_64 rng(config.seed);
  const TruncatedScore transition_score(calibrate_score_mean(config.change_tpr, config.score_noise),
                                        config.score_noise);
  const TruncatedScore steady_score(calibrate_score_mean(config.change_fpr, config.score_noise),
                                    config.score_noise);
  const boost::math::normal_distribution<double> standard(0.0, 1.0);
  const std::vector<double> initial =
      config.initial.empty() ? std::vector<double>(n, 1.0 / static_cast<double>(n)) : config.initial;

  RecordStream stream;
  stream.states = config.states;
  stream.records.reserve(config.length);

  // Per-frame probability of being present given the previous frame's presence.
  double stay_present = config.presence_rate;
  double become_present = config.presence_rate;
  if (config.presence_mean_run > 0.0 && config.presence_rate > 0.0 && config.presence_rate < 1.0) {
    stay_present = 1.0 - 1.0 / config.presence_mean_run;
    become_present = config.presence_rate / ((1.0 - config.presence_rate) * config.presence_mean_run);
  }

  StateIndex state = 0;
  bool previous_present = false;
  for (std::uint64_t t = 0; t < config.length; ++t) {
    const StateIndex previous_state = state;
    state = t == 0 ? sample_row(initial, rng) : sample_row(config.true_transitions.row(state), rng);

    FrameRecord r;
    r.frame_index = t;
    r.ground_truth = state;
    const double presence_p = t == 0 ? config.presence_rate : (previous_present ? stay_present : become_present);
    r.object_present = uniform01(rng) < presence_p;
    if (r.object_present) {
      const StateIndex decision = sample_row(config.emission.row(state), rng);
      const bool correct = decision == state;
      const double mean = correct ? config.confidence_log10_correct : config.confidence_log10_wrong;
      const double log_ratio = std::max(
          1e-3, mean + config.confidence_log10_spread * boost::math::quantile(standard, uniform_open(rng)));
      const double ratio = std::pow(10.0, log_ratio);

      // Runner-up: the true state for a wrong decision, otherwise the most
      // likely confusion of the true state drawn from its emission row.
      StateIndex runner_up = state;
      if (correct) {
        std::vector<double> others(config.emission.row(state).begin(), config.emission.row(state).end());
        others[decision] = 0.0;
        double total = 0.0;
        for (double w : others) total += w;
        if (total > 0.0) {
          for (double& w : others) w /= total;
          runner_up = sample_row(others, rng);
        } else {
          runner_up = (decision + 1) % n;
          uniform01(rng);  // keep the draw count fixed per frame
        }
      }

      const double rest = config.tail_ratio * static_cast<double>(n - 2);
      const double top = 1.0 / (1.0 + (1.0 + rest) / ratio);
      const double second = top / ratio;
      const double tail = config.tail_ratio * second;
      r.class_probs.assign(n, tail);
      r.class_probs[decision] = top;
      r.class_probs[runner_up] = second;

      if (t > 0 && previous_present) {
        r.change_score = (state != previous_state ? transition_score : steady_score).sample(rng);
      }
    }
    previous_present = r.object_present;
    stream.records.push_back(std::move(r));
  }
  return stream;
}

}  // namespace hmmlabel
