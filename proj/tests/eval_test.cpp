#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "bcnet/eval.hpp"
#include "bcnet/numeric/random.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace bcnet;
using oracle::random_instance;

TEST(Thresholds, Grids) {
  EXPECT_EQ(thumos_thresholds().size(), 11u);
  EXPECT_EQ(anet_thresholds().size(), 10u);
  EXPECT_EQ(thumos_thresholds().back(), 1.0);
  EXPECT_EQ(anet_thresholds()[1], 0.55);
}

TEST(AverageRecall, PerfectProposals) {
  gts_by_video gts{{"a", {{{0, 10}, ""}, {{20, 30}, ""}}}};
  proposals_by_video props{{"a", {{{0, 10}, 0.9, ""}, {{20, 30}, 0.8, ""}}}};
  EXPECT_EQ(average_recall_at_an(props, gts, 2, thumos_thresholds()), 1.0);
  EXPECT_EQ(average_recall_at_an(props, gts, 1, thumos_thresholds()), 0.5);
}

TEST(AverageRecall, NoProposals) {
  gts_by_video gts{{"a", {{{0, 10}, ""}}}};
  EXPECT_EQ(average_recall_at_an({}, gts, 100, anet_thresholds()), 0.0);
}

TEST(AverageRecall, PartialOverlapCountsThresholds) {
  gts_by_video gts{{"a", {{{0, 10}, ""}}}};
  proposals_by_video props{{"a", {{{0, 8}, 0.5, ""}}}};
  EXPECT_NEAR(average_recall_at_an(props, gts, 1, thumos_thresholds()), 7.0 / 11.0, 1e-15);
}

TEST(AverageRecall, OneToOneMatching) {
  // Two proposals on the same gt recall it once.
  gts_by_video gts{{"a", {{{0, 10}, ""}, {{50, 60}, ""}}}};
  proposals_by_video props{{"a", {{{0, 10}, 0.9, ""}, {{0, 10}, 0.8, ""}}}};
  EXPECT_EQ(average_recall_at_an(props, gts, 2, {0.5}), 0.5);
}

TEST(Auc, SimpleCases) {
  gts_by_video gts{{"a", {{{0, 10}, ""}}}};
  proposals_by_video perfect{{"a", {{{0, 10}, 0.9, ""}}}};
  EXPECT_EQ(auc_ar_curve(perfect, gts, 100, anet_thresholds()), 1.0);
  EXPECT_EQ(auc_ar_curve({}, gts, 100, anet_thresholds()), 0.0);
  // The gt is only found at rank 2: AR is 0 at AN = 1 and 1 afterwards.
  proposals_by_video late{{"a", {{{40, 50}, 0.9, ""}, {{0, 10}, 0.5, ""}}}};
  EXPECT_NEAR(auc_ar_curve(late, gts, 4, anet_thresholds()), 0.75, 1e-15);
}

TEST(Map, PerfectDetections) {
  gts_by_video gts{{"a", {{{0, 10}, "x"}}}, {"b", {{{5, 9}, "x"}}}};
  proposals_by_video dets{{"a", {{{0, 10}, 0.9, "x"}}}, {"b", {{{5, 9}, 0.7, "x"}}}};
  auto m = mean_average_precision(dets, gts, anet_thresholds());
  for (const auto& [t, v] : m.per_threshold) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(m.average, 1.0);
}

TEST(Map, FalsePositiveRankedFirst) {
  gts_by_video gts{{"a", {{{0, 10}, "x"}}}};
  proposals_by_video dets{{"a", {{{0, 10}, 0.9, "x"}, {{30, 40}, 0.95, "x"}}}};
  EXPECT_EQ(average_precision(dets, gts, "x", 0.5), 0.5);
}

TEST(Map, AverageIsMeanOfThresholds) {
  rng gen(2);
  auto inst = random_instance(gen, 2);
  auto m = mean_average_precision(inst.props, inst.gts, anet_thresholds());
  double s = 0;
  for (const auto& [t, v] : m.per_threshold) s += v;
  EXPECT_NEAR(m.average, s / 10.0, 1e-15);
}

TEST(Metrics, AgreeWithBruteForceOracle) {
  rng gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(gen, 1 + trial % 3);
    const auto th = trial % 2 ? thumos_thresholds() : anet_thresholds();
    double previous = 0.0;
    for (std::size_t an = 1; an <= 10; ++an) {
      const double ar = average_recall_at_an(inst.props, inst.gts, an, th);
      EXPECT_NEAR(ar, oracle::average_recall(inst.props, inst.gts, an, th), 1e-9);
      EXPECT_GE(ar, previous);
      previous = ar;
    }
    EXPECT_NEAR(auc_ar_curve(inst.props, inst.gts, 10, th), oracle::auc(inst.props, inst.gts, 10, th), 1e-9);
    auto m = mean_average_precision(inst.props, inst.gts, th);
    for (double t : th) EXPECT_NEAR(m.per_threshold[t], oracle::mean_ap(inst.props, inst.gts, t), 1e-9);
  }
}

TEST(Metrics, RecallNonIncreasingInThreshold) {
  rng gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(gen);
    auto r = recall_per_threshold(inst.props, inst.gts, 10, thumos_thresholds());
    for (std::size_t i = 0; i + 1 < r.size(); ++i) EXPECT_GE(r[i], r[i + 1]);
  }
}

TEST(Metrics, InvariantToInputOrder) {
  rng gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_instance(gen, 2);
    auto shuffled = inst.props;
    for (auto& [id, list] : shuffled) gen.shuffle(list);
    EXPECT_EQ(auc_ar_curve(inst.props, inst.gts, 10, anet_thresholds()),
              auc_ar_curve(shuffled, inst.gts, 10, anet_thresholds()));
    EXPECT_EQ(mean_average_precision(inst.props, inst.gts, {0.5}).average,
              mean_average_precision(shuffled, inst.gts, {0.5}).average);
  }
}

TEST(Evaluate, ReportFields) {
  gts_by_video gts{{"a", {{{0, 10}, ""}}}};
  proposals_by_video props{{"a", {{{0, 10}, 0.9, ""}}}};
  auto r = evaluate(props, gts, {1, 5, 100}, 100, anet_thresholds(), false);
  EXPECT_EQ(r.curve.size(), 100u);
  EXPECT_EQ(r.ar_at_an.at(100), 1.0);
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_TRUE(r.map_at_tiou.empty());
}
