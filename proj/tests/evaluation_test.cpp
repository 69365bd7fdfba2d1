#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "hmmlabel/config.hpp"
#include "hmmlabel/evaluation.hpp"

namespace hmmlabel {
namespace {

SimConfig small_sim(std::uint64_t seed, std::uint64_t length = 30000) {
  auto config = SimConfig::gaze_default();
  config.seed = seed;
  config.length = length;
  return config;
}

SweepSpec small_spec() {
  SweepSpec spec;
  spec.simulation = small_sim(3);
  spec.base.seed_frames = 5000;
  spec.threads = 2;
  return spec;
}

TEST(ReplayMetrics, SaturatedRunIsAllManualAndExact) {
  std::mt19937_64 rng(1);
  const auto states = StateSpace::gaze_regions();
  auto stream = testing::noiseless_stream(states, testing::sample_path(default_gaze_transitions(), 3000, rng));
  for (auto& r : stream.records) {
    r.class_probs = testing::flat(6);
    if (r.change_score) r.change_score = 0.9;
  }
  PipelineParams params;
  params.delta_min = 0.05;
  const auto point = replay_metrics(stream, HmmModel::uniform(states), params);
  EXPECT_EQ(point.reduction_factor, 1.0);
  EXPECT_EQ(point.accuracy, 1.0);
  EXPECT_FALSE(point.no_manual);
}

TEST(ReplayMetrics, NoiselessRunNeedsNoHuman) {
  std::mt19937_64 rng(2);
  const auto states = StateSpace::gaze_regions();
  const auto stream = testing::noiseless_stream(states, testing::sample_path(default_gaze_transitions(), 3000, rng));
  const HmmModel model(states, std::vector<double>(6, 1.0 / 6.0), default_gaze_transitions(), SquareMatrix::identity(6));
  const auto point = replay_metrics(stream, model, PipelineParams{});
  EXPECT_EQ(point.manual_frames, 0.0);
  EXPECT_TRUE(point.no_manual);
  EXPECT_EQ(point.accuracy, 1.0);
  EXPECT_EQ(point.reduction_factor, 3000.0);
}

TEST(ReplayMetrics, MissingGroundTruthIsAnError) {
  auto stream = simulate_records(small_sim(4, 500));
  stream.records[100].object_present = true;
  stream.records[100].ground_truth.reset();
  if (stream.records[100].class_probs.empty()) stream.records[100].class_probs = testing::flat(6);
  EXPECT_THROW(replay_metrics(stream, HmmModel::uniform(stream.states), PipelineParams{}), InputError);
}

TEST(ReplayMetrics, ErrorsComeOnlyFromAutomaticLabels) {
  const auto stream = simulate_records(small_sim(5));
  PipelineParams params;
  params.seed_frames = 5000;
  const auto point = replay_metrics(stream, HmmModel::uniform(stream.states), params);
  EXPECT_EQ(point.source(LabelSource::manual).errors, 0.0);
  EXPECT_EQ(point.source(LabelSource::manual).frames, point.manual_frames);
  EXPECT_EQ(point.manual_frames + point.auto_frames, point.total_frames);
  const double errors = point.source(LabelSource::auto_stable).errors + point.source(LabelSource::auto_confident).errors;
  EXPECT_EQ(point.accuracy, (point.total_frames - errors) / point.total_frames);
  EXPECT_GE(point.reduction_factor, 1.0);
  EXPECT_GT(point.model_version, 0u);
}

TEST(Sweep, SinglePointIsParetoOptimal) {
  auto spec = small_spec();
  spec.delta_min = {0.3};
  const auto points = sweep(spec);
  ASSERT_EQ(points.size(), 1u);
  EXPECT_TRUE(points[0].pareto);
}

TEST(Sweep, GridOrderAndRepetitionAveraging) {
  auto spec = small_spec();
  spec.delta_min = {0.2, 0.4};
  spec.v_u_min = {0.5, 2.0};
  spec.repetitions = 2;
  const auto points = sweep(spec);
  ASSERT_EQ(points.size(), 4u);
  EXPECT_EQ(points[1].params.delta_min, 0.2);
  EXPECT_EQ(points[1].params.v_u_min, 2.0);
  EXPECT_EQ(points[2].params.delta_min, 0.4);

  double manual = 0.0, accuracy = 0.0;
  for (std::uint64_t r = 0; r < 2; ++r) {
    const auto stream = simulate_records(small_sim(3 + r));
    auto params = spec.base;
    params.delta_min = 0.4;
    params.v_u_min = 2.0;
    const auto point = replay_metrics(stream, HmmModel::uniform(stream.states), params);
    manual += point.manual_frames / 2.0;
    accuracy += point.accuracy / 2.0;
  }
  EXPECT_EQ(points[3].manual_frames, manual);
  EXPECT_EQ(points[3].accuracy, accuracy);
  EXPECT_EQ(points[3].repetitions, 2u);
}

TEST(Sweep, OutputIsIndependentOfThreadCount) {
  auto spec = small_spec();
  spec.repetitions = 2;
  spec.threads = 1;
  const auto serial = sweep_csv(sweep(spec));
  spec.threads = 4;
  EXPECT_EQ(sweep_csv(sweep(spec)), serial);
  EXPECT_EQ(sweep_csv(sweep(spec)), serial);
}

TEST(Sweep, CsvHasHeaderAndOneRowPerPoint) {
  const auto csv = sweep_csv(sweep(small_spec()));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "delta_min,c_min,v_u_min,total_frames,manual_frames,reduction_factor,accuracy,pareto");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_NE(csv.find("\n0.1,10,1,"), std::string::npos);
}

TEST(Sweep, FailingPointsKeepTheirErrors) {
  auto stream = simulate_records(small_sim(6, 2000));
  for (auto& r : stream.records) r.ground_truth.reset();
  const std::string path = ::testing::TempDir() + "no_truth.records";
  save_records(path, stream);
  auto spec = small_spec();
  spec.records_path = path;
  spec.delta_min = {0.2, 0.3};
  const auto points = sweep(spec);
  ASSERT_EQ(points.size(), 2u);
  for (const auto& p : points) {
    EXPECT_FALSE(p.ok());
    EXPECT_FALSE(p.pareto);
  }
  EXPECT_NE(sweep_csv(points).find("0.2,10,1,nan,nan,nan,nan,0"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Sweep, RejectsEmptyGrid) {
  auto spec = small_spec();
  spec.delta_min.clear();
  EXPECT_THROW(sweep(spec), InputError);
  spec = small_spec();
  spec.repetitions = 0;
  EXPECT_THROW(sweep(spec), InputError);
}

TradeoffPoint at(double reduction, double accuracy) {
  TradeoffPoint p;
  p.reduction_factor = reduction;
  p.accuracy = accuracy;
  return p;
}

// Frontier by a sweep over reduction in descending order.
std::vector<std::pair<double, double>> frontier_by_scan(std::vector<TradeoffPoint> points) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return a.reduction_factor != b.reduction_factor ? a.reduction_factor > b.reduction_factor : a.accuracy > b.accuracy;
  });
  std::vector<std::pair<double, double>> out;
  double best_accuracy = -1.0;
  for (const auto& p : points) {
    const bool duplicate = !out.empty() && out.back() == std::pair{p.reduction_factor, p.accuracy};
    if (p.accuracy > best_accuracy || duplicate) out.emplace_back(p.reduction_factor, p.accuracy);
    best_accuracy = std::max(best_accuracy, p.accuracy);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Pareto, MatchesScanAndIgnoresOrder) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> coarse(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TradeoffPoint> points;
    for (int i = 0; i < 8; ++i) points.push_back(at(coarse(rng), 0.9 + 0.01 * coarse(rng)));
    const auto expected = frontier_by_scan(points);
    for (int shuffle = 0; shuffle < 3; ++shuffle) {
      std::shuffle(points.begin(), points.end(), rng);
      mark_pareto(points);
      std::vector<std::pair<double, double>> marked;
      for (const auto& p : points) {
        if (p.pareto) marked.emplace_back(p.reduction_factor, p.accuracy);
      }
      std::sort(marked.begin(), marked.end());
      ASSERT_EQ(marked, expected);
    }
  }
}

TEST(Pareto, DominatedPointIsNotMarked) {
  std::vector<TradeoffPoint> points{at(2, 0.99), at(5, 0.95), at(4, 0.94), at(5, 0.95)};
  mark_pareto(points);
  EXPECT_TRUE(points[0].pareto);
  EXPECT_TRUE(points[1].pareto);
  EXPECT_FALSE(points[2].pareto);
  EXPECT_TRUE(points[3].pareto);
}

TEST(TradeoffJson, CarriesFullPoint) {
  const auto stream = simulate_records(small_sim(7, 5000));
  const auto point = replay_metrics(stream, HmmModel::uniform(stream.states), PipelineParams{});
  const auto j = to_json(point);
  EXPECT_EQ(j.at("manual_frames").get<double>(), point.manual_frames);
  EXPECT_EQ(j.at("params").at("delta_min").get<double>(), 0.3);
  EXPECT_EQ(j.at("by_source").at("auto_stable").at("frames").get<double>(),
            point.source(LabelSource::auto_stable).frames);
  EXPECT_FALSE(j.contains("error"));
}

}  // namespace
}  // namespace hmmlabel
