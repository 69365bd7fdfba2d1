#include "hmmlabel/hmm.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"

namespace hmmlabel {
namespace {

using testing::brute_force_decode;
using testing::numbered_states;
using testing::random_model;
using testing::random_observations;

HmmModel two_state(std::vector<double> priors, SquareMatrix transitions, SquareMatrix emission) {
  return HmmModel(numbered_states(2), std::move(priors), std::move(transitions), std::move(emission));
}

TEST(HmmModel, RejectsNonStochasticTables) {
  EXPECT_THROW(two_state({0.6, 0.6}, SquareMatrix::uniform(2), SquareMatrix::uniform(2)), InputError);
  EXPECT_THROW(two_state({0.5, 0.5}, SquareMatrix::from_rows({{0.5, 0.5}, {0.0, 0.0}}),
                         SquareMatrix::uniform(2)),
               InputError);
  EXPECT_THROW(two_state({0.5, 0.5}, SquareMatrix::uniform(2),
                         SquareMatrix::from_rows({{1.5, -0.5}, {0.5, 0.5}})),
               InputError);
  EXPECT_THROW(two_state({0.5, 0.5}, SquareMatrix::uniform(3), SquareMatrix::uniform(2)), InputError);
  EXPECT_NO_THROW(two_state({1.0, 0.0}, SquareMatrix::identity(2), SquareMatrix::identity(2)));
}

TEST(Viterbi, SingleStepUsesPriorTimesEmission) {
  const auto model = two_state({0.7, 0.3}, SquareMatrix::uniform(2), SquareMatrix::identity(2));
  const std::vector<StateIndex> obs{0};
  const auto result = viterbi(model, obs);
  EXPECT_EQ(result.path, std::vector<StateIndex>{0});
  EXPECT_NEAR(std::exp(result.log_v_star), 0.7, 1e-15);
}

TEST(Viterbi, SelfTransitionDominates) {
  const auto model = two_state({0.5, 0.5}, SquareMatrix::from_rows({{0.9, 0.1}, {0.1, 0.9}}),
                               SquareMatrix::identity(2));
  const std::vector<StateIndex> obs{1, 1, 1};
  const auto result = viterbi(model, obs);
  EXPECT_EQ(result.path, (std::vector<StateIndex>{1, 1, 1}));
  EXPECT_NEAR(result.log_v_star, std::log(0.5 * 0.9 * 0.9), 1e-12);
}

TEST(Viterbi, TiesGoToLowestIndex) {
  const auto model = HmmModel::uniform(numbered_states(3));
  const std::vector<StateIndex> obs{2, 1, 0, 1};
  const auto result = viterbi(model, obs);
  EXPECT_EQ(result.path, (std::vector<StateIndex>{0, 0, 0, 0}));
}

TEST(Viterbi, ImpossibleObservationIsAnError) {
  // Identity emission and identity transitions: the decision can never switch.
  const auto model = two_state({0.5, 0.5}, SquareMatrix::identity(2), SquareMatrix::identity(2));
  const std::vector<StateIndex> obs{0, 1};
  EXPECT_THROW(viterbi(model, obs), ImpossibleObservation);
  EXPECT_THROW(stable_state_score(model, obs), ImpossibleObservation);
}

TEST(Viterbi, RejectsEmptyAndOutOfRangeObservations) {
  const auto model = HmmModel::uniform(numbered_states(2));
  EXPECT_THROW(viterbi(model, std::vector<StateIndex>{}), InputError);
  EXPECT_THROW(viterbi(model, std::vector<StateIndex>{0, 2}), InputError);
}

TEST(Viterbi, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(17);
  for (int instance = 0; instance < 200; ++instance) {
    const auto model = random_model(3, rng);
    const auto obs = random_observations(3, 6, rng);
    const auto oracle = brute_force_decode(model, obs);
    const auto result = viterbi(model, obs);
    if (oracle.optimal_paths.size() == 1) {
      ASSERT_EQ(result.path, oracle.path) << "instance " << instance;
    } else {
      ASSERT_TRUE(oracle.is_optimal(result.path)) << "instance " << instance;
    }
    ASSERT_NEAR(result.log_v_star, std::log(oracle.probability), 1e-9) << "instance " << instance;
  }
}

TEST(Viterbi, PathDominatesEveryFixedSequence) {
  std::mt19937_64 rng(5);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = 2 + instance % 3;
    const auto model = random_model(n, rng);
    const auto obs = random_observations(n, 1 + instance % 8, rng);
    const double v_star = std::exp(viterbi(model, obs).log_v_star);
    for (int trial = 0; trial < 20; ++trial) {
      const auto path = random_observations(n, obs.size(), rng);
      EXPECT_GE(v_star * (1 + 1e-12), testing::path_probability(model, path, obs));
    }
    for (StateIndex k = 0; k < n; ++k) {
      const double all_k = model.priors()[k] * testing::unchanged_product(model, obs, k);
      EXPECT_GE(v_star * (1 + 1e-12), all_k);
    }
  }
}

TEST(Viterbi, HandlesLongSequencesWithoutUnderflow) {
  std::mt19937_64 rng(8);
  const auto model = random_model(6, rng);
  const auto obs = random_observations(6, 20000, rng);
  const auto result = viterbi(model, obs);
  EXPECT_TRUE(std::isfinite(result.log_v_star));
  EXPECT_LT(result.log_v_star, -1000.0);
  EXPECT_EQ(result.path.size(), obs.size());
}

TEST(UnchangedLogProb, TwoStepProduct) {
  const auto model = two_state({0.5, 0.5}, SquareMatrix::from_rows({{0.8, 0.2}, {0.2, 0.8}}),
                               SquareMatrix::from_rows({{0.9, 0.1}, {0.1, 0.9}}));
  EXPECT_NEAR(unchanged_log_prob(model, std::vector<StateIndex>{0, 0}, 0), std::log(0.648), 1e-12);
  EXPECT_NEAR(unchanged_log_prob(model, std::vector<StateIndex>{1}, 0), std::log(0.1), 1e-15);
}

TEST(UnchangedLogProb, ZeroFactorGivesLogZero) {
  const auto model = two_state({0.5, 0.5}, SquareMatrix::uniform(2), SquareMatrix::identity(2));
  const double lp = unchanged_log_prob(model, std::vector<StateIndex>{0, 1}, 0);
  EXPECT_TRUE(is_log_zero(lp));
  EXPECT_FALSE(is_log_zero(unchanged_log_prob(model, std::vector<StateIndex>{0, 0}, 0)));
}

TEST(UnchangedLogProb, MatchesProductLoop) {
  std::mt19937_64 rng(99);
  for (int instance = 0; instance < 200; ++instance) {
    const auto model = random_model(4, rng);
    const auto obs = random_observations(4, 10, rng);
    std::vector<double> all(4);
    unchanged_log_probs(model, obs, all);
    for (StateIndex k = 0; k < 4; ++k) {
      const double expected = std::log(testing::unchanged_product(model, obs, k));
      EXPECT_NEAR(unchanged_log_prob(model, obs, k), expected, 1e-12);
      EXPECT_EQ(all[k], unchanged_log_prob(model, obs, k));
    }
  }
}

TEST(UnchangedLogProb, NonIncreasingInLength) {
  std::mt19937_64 rng(3);
  const auto model = random_model(5, rng);
  const auto obs = random_observations(5, 50, rng);
  for (StateIndex k = 0; k < 5; ++k) {
    double previous = 0.0;
    for (std::size_t len = 1; len <= obs.size(); ++len) {
      const double lp = unchanged_log_prob(model, std::span(obs).first(len), k);
      EXPECT_LE(lp, previous);
      previous = lp;
    }
  }
}

TEST(StableStateScore, CanExceedOneWithoutPriorFactor) {
  const double a_kk = 0.8;
  const auto model = two_state({0.5, 0.5}, SquareMatrix::from_rows({{a_kk, 0.2}, {0.2, a_kk}}),
                               SquareMatrix::identity(2));
  const auto score = stable_state_score(model, std::vector<StateIndex>{1, 1});
  EXPECT_EQ(score.best_state, 1u);
  EXPECT_NEAR(std::exp(score.log_v_star), 0.5 * a_kk, 1e-15);
  EXPECT_NEAR(std::exp(score.log_unchanged), a_kk, 1e-15);
  EXPECT_NEAR(score.v_u, 2.0, 1e-12);
}

TEST(StableStateScore, SingleObservationIsInversePrior) {
  const auto model = two_state({0.25, 0.75}, SquareMatrix::uniform(2), SquareMatrix::identity(2));
  EXPECT_NEAR(stable_state_score(model, std::vector<StateIndex>{0}).v_u, 4.0, 1e-12);
  EXPECT_NEAR(stable_state_score(model, std::vector<StateIndex>{1}).v_u, 1.0 / 0.75, 1e-12);
}

TEST(StableStateScore, UniformPriorIdentityEmissionGivesStateCount) {
  for (std::size_t n = 2; n <= 6; ++n) {
    SquareMatrix transitions(n, 0.1 / static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) transitions(i, i) = 0.9;
    const HmmModel model(numbered_states(n), std::vector<double>(n, 1.0 / static_cast<double>(n)),
                         transitions, SquareMatrix::identity(n));
    const std::vector<StateIndex> obs(12, n - 1);
    EXPECT_NEAR(stable_state_score(model, obs).v_u, static_cast<double>(n), 1e-12);
  }
}

TEST(StableStateScore, ComposesViterbiAndUnchangedOracles) {
  std::mt19937_64 rng(21);
  for (int instance = 0; instance < 50; ++instance) {
    const auto model = random_model(3, rng);
    const auto obs = random_observations(3, 8, rng);
    const auto decoded = brute_force_decode(model, obs);
    double best = -1.0;
    StateIndex best_state = 0;
    for (StateIndex k = 0; k < 3; ++k) {
      const double p = testing::unchanged_product(model, obs, k);
      if (p > best) {
        best = p;
        best_state = k;
      }
    }
    const auto score = stable_state_score(model, obs);
    EXPECT_EQ(score.best_state, best_state);
    EXPECT_NEAR(score.v_u, best / decoded.probability, 1e-9 * std::max(1.0, score.v_u));
  }
}

TEST(StableStateScore, InvariantUnderStateRelabeling) {
  std::mt19937_64 rng(77);
  for (int instance = 0; instance < 30; ++instance) {
    const std::size_t n = 4;
    const auto model = random_model(n, rng);
    const auto obs = random_observations(n, 7, rng);
    std::vector<StateIndex> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<double> priors(n);
    SquareMatrix transitions(n), emission(n);
    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) {
      priors[perm[i]] = model.priors()[i];
      names[perm[i]] = model.states().name(i);
      for (std::size_t j = 0; j < n; ++j) {
        transitions(perm[i], perm[j]) = model.transitions()(i, j);
        emission(perm[i], perm[j]) = model.emission()(i, j);
      }
    }
    const HmmModel permuted(StateSpace(names), priors, transitions, emission);
    std::vector<StateIndex> permuted_obs(obs.size());
    for (std::size_t t = 0; t < obs.size(); ++t) permuted_obs[t] = perm[obs[t]];

    const auto a = stable_state_score(model, obs);
    const auto b = stable_state_score(permuted, permuted_obs);
    EXPECT_EQ(perm[a.best_state], b.best_state);
    EXPECT_NEAR(a.v_u, b.v_u, 1e-9 * a.v_u);
  }
}

TEST(EstimateModel, CountsTransitionsWithoutSmoothing) {
  const std::vector<std::vector<LabelRecord>> segments{
      {{0, 0, LabelSource::manual}, {1, 0, LabelSource::manual}, {2, 1, LabelSource::manual},
       {3, 1, LabelSource::manual}}};
  const auto chain = estimate_model(segments, 2, 0.0);
  EXPECT_EQ(chain.priors, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(chain.transitions, SquareMatrix::from_rows({{0.5, 0.5}, {0.0, 1.0}}));
}

TEST(EstimateModel, EmptyInputWithSmoothingIsUniform) {
  const auto chain = estimate_model({}, 2, 1.0);
  EXPECT_EQ(chain.priors, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(chain.transitions, SquareMatrix::uniform(2));
}

TEST(EstimateModel, EmptyInputWithoutSmoothingFails) {
  EXPECT_THROW(estimate_model({}, 2, 0.0), InputError);
  EXPECT_THROW(estimate_emission({}, 2, 0.0), InputError);
  EXPECT_THROW(estimate_model({}, 2, -1.0), InputError);
}

TEST(EstimateModel, RejectsNonContiguousSegments) {
  const std::vector<std::vector<LabelRecord>> segments{
      {{0, 0, LabelSource::manual}, {2, 0, LabelSource::manual}}};
  EXPECT_THROW(estimate_model(segments, 2, 1.0), InputError);
}

TEST(EstimateModel, RecoversKnownChain) {
  std::mt19937_64 rng(1234);
  const std::vector<double> priors{0.6, 0.3, 0.1};
  const auto truth = SquareMatrix::from_rows({{0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}});
  const auto segments = testing::sample_chain_segments(priors, truth, 100000, 50, rng);
  const auto chain = estimate_model(segments, 3, 1.0);
  EXPECT_LT(testing::max_row_tv(chain.transitions, truth), 0.05);
  EXPECT_LT(testing::total_variation(chain.priors, priors), 0.05);
}

TEST(EstimateModel, ConvergesWithMoreData) {
  const std::vector<double> priors{0.5, 0.5};
  const auto truth = SquareMatrix::from_rows({{0.7, 0.3}, {0.4, 0.6}});
  double tv_small = 0.0, tv_large = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto small = estimate_model(testing::sample_chain_segments(priors, truth, 1000, 100, rng), 2);
    const auto large = estimate_model(testing::sample_chain_segments(priors, truth, 100000, 100, rng), 2);
    tv_small += testing::max_row_tv(small.transitions, truth);
    tv_large += testing::max_row_tv(large.transitions, truth);
  }
  EXPECT_LT(tv_large, tv_small);
}

TEST(EstimateEmission, PerfectPredictionsGiveIdentity) {
  std::vector<DecisionPair> pairs;
  for (StateIndex s = 0; s < 3; ++s) {
    for (int i = 0; i < 4; ++i) pairs.push_back({s, s});
  }
  EXPECT_EQ(estimate_emission(pairs, 3, 0.0), SquareMatrix::identity(3));
}

TEST(EstimateEmission, RecoversConfusionMatrix) {
  std::mt19937_64 rng(4321);
  const auto confusion = SquareMatrix::from_rows({{0.8, 0.15, 0.05}, {0.1, 0.7, 0.2}, {0.05, 0.05, 0.9}});
  std::vector<DecisionPair> pairs;
  for (int i = 0; i < 100000; ++i) {
    const StateIndex truth = static_cast<StateIndex>(i % 3);
    pairs.push_back({testing::sample_index(confusion.row(truth), rng), truth});
  }
  EXPECT_LT(testing::max_row_tv(estimate_emission(pairs, 3, 1.0), confusion), 0.02);
}

TEST(EstimateEmission, SmoothingKeepsRowsValid) {
  const std::vector<DecisionPair> pairs{{0, 0}};
  const auto emission = estimate_emission(pairs, 3, 1.0);
  EXPECT_NEAR(emission(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(emission(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NO_THROW(HmmModel(numbered_states(3), {0.2, 0.3, 0.5}, SquareMatrix::uniform(3), emission));
}

}  // namespace
}  // namespace hmmlabel
