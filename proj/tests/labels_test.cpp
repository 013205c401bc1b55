#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bcnet/labels.hpp"
#include "bcnet/numeric/random.hpp"
#include "support/oracles.hpp"

using namespace bcnet;

namespace {

interval random_interval(rng& gen, double lo, double hi) {
  double a = gen.uniform(lo, hi), b = gen.uniform(lo, hi);
  if (a > b) std::swap(a, b);
  if (b - a < 1e-3) b = a + 1e-3;
  return {a, b};
}

}  // namespace

TEST(Tiou, HandValues) {
  EXPECT_DOUBLE_EQ(tiou({0, 10}, {0, 10}), 1.0);
  EXPECT_DOUBLE_EQ(tiou({0, 10}, {5, 15}), 5.0 / 15.0);
  EXPECT_EQ(tiou({0, 1}, {2, 3}), 0.0);
  EXPECT_EQ(tiou({0, 1}, {1, 2}), 0.0);
}

TEST(ActionLabel, MaxOverGroundTruth) {
  EXPECT_DOUBLE_EQ(action_label_tiou({0, 10}, {{20, 30}, {0, 8}}), 0.8);
  EXPECT_EQ(action_label_tiou({0, 10}, {}), 0.0);
  EXPECT_THROW(action_label_tiou({3, 3}, {}), contract_error);
}

TEST(BackgroundLabel, HandValues) {
  EXPECT_DOUBLE_EQ(background_label_tioa({0, 10}, {{2, 4}}), 0.8);
  EXPECT_EQ(background_label_tioa({0, 10}, {}), 1.0);
  EXPECT_EQ(background_label_tioa({2, 4}, {{0, 10}}), 0.0);
  // Overlapping ground truths are merged before measuring coverage.
  EXPECT_DOUBLE_EQ(background_label_tioa({0, 10}, {{0, 6}, {4, 8}}), 0.2);
}

TEST(Labels, AgreeWithSweepLineOracle) {
  rng gen(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_interval(gen, 0, 100);
    std::vector<interval> gts;
    const auto n = gen.below(5);
    for (std::size_t i = 0; i < n; ++i) gts.push_back(random_interval(gen, 0, 100));
    EXPECT_NEAR(action_label_tiou(p, gts), oracle::action_label(p, gts), 1e-12);
    EXPECT_NEAR(background_label_tioa(p, gts), oracle::background_label(p, gts), 1e-12);
  }
}

TEST(Labels, ActionPlusBackgroundIsNotOne) {
  // Proposal strictly containing a gt: fully covered gt, partial coverage.
  interval gt{10, 20};
  EXPECT_DOUBLE_EQ(action_label_tiou({5, 25}, {gt}), 0.5);
  EXPECT_DOUBLE_EQ(background_label_tioa({5, 25}, {gt}), 0.5);
  // Proposal inside the gt: background 0, action below 1.
  EXPECT_NE(action_label_tiou({12, 18}, {gt}) + background_label_tioa({12, 18}, {gt}), 1.0);
  // Partial overlap.
  EXPECT_NE(action_label_tiou({15, 30}, {gt}) + background_label_tioa({15, 30}, {gt}), 1.0);
  // The sum is 1 when the proposal covers the gt or misses it.
  EXPECT_EQ(action_label_tiou(gt, {gt}) + background_label_tioa(gt, {gt}), 1.0);
  EXPECT_EQ(action_label_tiou({30, 40}, {gt}) + background_label_tioa({30, 40}, {gt}), 1.0);
}

TEST(Labels, SumIsOneExactlyWhenProposalCoversGt) {
  rng gen(4);
  int partial = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_interval(gen, 0, 50);
    const auto g = random_interval(gen, 0, 50);
    const double s = action_label_tiou(p, {g}) + background_label_tioa(p, {g});
    const bool covers = p.start <= g.start && g.end <= p.end;
    if (covers || intersection_length(p, g) <= 0) {
      EXPECT_NEAR(s, 1.0, 1e-12);
    } else {
      ++partial;
      EXPECT_GT(std::abs(s - 1.0), 1e-9) << p.start << " " << p.end << " " << g.start << " " << g.end;
    }
  }
  EXPECT_GT(partial, 100);
}

TEST(Labels, RangeInvariant) {
  rng gen(8);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_interval(gen, 0, 30);
    std::vector<interval> gts{random_interval(gen, 0, 30), random_interval(gen, 0, 30)};
    const double a = action_label_tiou(p, gts), b = background_label_tioa(p, gts);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(BoundaryLabels, RegionAroundBoundaries) {
  // Instance [10, 30] steps: radius 2, start region [8, 12], end region [28, 32].
  auto b = boundary_label_seq({{10, 30}}, 40, 1.0);
  for (std::size_t t = 0; t < 40; ++t) {
    EXPECT_EQ(b.start[t], (t >= 8 && t <= 12) ? 1.0 : 0.0) << t;
    EXPECT_EQ(b.end[t], (t >= 28 && t <= 32) ? 1.0 : 0.0) << t;
  }
}

TEST(BoundaryLabels, SecondsAreConvertedToSteps) {
  auto a = boundary_label_seq({{20, 60}}, 40, 2.0);
  auto b = boundary_label_seq({{10, 30}}, 40, 1.0);
  EXPECT_EQ(a.start, b.start);
  EXPECT_EQ(a.end, b.end);
}

TEST(BoundaryLabels, ShortInstanceStillMarksOneStep) {
  auto b = boundary_label_seq({{5.0, 6.0}}, 10, 1.0);
  EXPECT_EQ(b.start[5], 1.0);
  EXPECT_EQ(b.end[6], 1.0);
  EXPECT_EQ(b.start[4] + b.start[6], 0.0);
}

TEST(FrameLabels, StepCentres) {
  auto f = frame_actionness_labels({{2, 5}}, 8, 1.0);
  EXPECT_EQ(f.action, (std::vector<double>{0, 0, 1, 1, 1, 0, 0, 0}));
  for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(f.action[t] + f.background[t], 1.0);
}

TEST(AnchorLabels, MatchPerAnchorFormulas) {
  auto grid = build_anchor_grid(16, {4, 8}, 2);
  std::vector<interval> gts{{3, 9}};
  auto labels = anchor_labels(grid, gts, 0.5);
  ASSERT_EQ(labels.action.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto span = grid.anchors[i].seconds(0.5);
    EXPECT_DOUBLE_EQ(labels.action[i], oracle::action_label(span, gts));
    EXPECT_NEAR(labels.background[i], oracle::background_label(span, gts), 1e-12);
  }
}

TEST(MakeLabels, PaddingIsMasked) {
  video_features v{"x", Tensor::zeros({16, 2}), 1.0, 10, 0.0};
  auto grid = build_anchor_grid(16, {4, 8}, 1);
  auto b = make_labels(v, {"x", 10, {{{2, 6}, ""}}}, grid);
  for (std::size_t t = 0; t < 16; ++t) EXPECT_EQ(b.step_mask[t], t < 10 ? 1.0 : 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(b.anchor_mask[i], grid.anchors[i].start < 10 ? 1.0 : 0.0);
  }
}

TEST(Anchors, GridLayout) {
  auto grid = build_anchor_grid(32, {8, 16}, 3);
  // Scale 8 stride 4 -> 7 anchors; scale 16 stride 8 -> 3 anchors.
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.anchors[6].start, 24u);
  EXPECT_EQ(grid.anchors[7].start, 0u);
  EXPECT_EQ(grid.anchors[9].end, 32u);
}

TEST(Anchors, InterpolationWeights) {
  auto grid = build_anchor_grid(8, {4}, 3);
  // Anchor [0,4], samples at 0, 2, 4; the last lies on a valid step.
  EXPECT_EQ(grid.weight(0, 0, 0), 1.0);
  EXPECT_EQ(grid.weight(0, 1, 2), 1.0);
  EXPECT_EQ(grid.weight(0, 2, 4), 1.0);
  auto frac = build_anchor_grid(8, {3}, 2);
  // Anchor [0,3]: samples at 0 and 3; stride 1.
  EXPECT_EQ(frac.weight(0, 1, 3), 1.0);
  auto mid = build_anchor_grid(8, {3}, 1);
  EXPECT_DOUBLE_EQ(mid.weight(0, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(mid.weight(0, 0, 2), 0.5);
}

TEST(Anchors, RowsSumToOneInsideSequence) {
  for (std::size_t samples : {1u, 2u, 5u, 32u}) {
    auto grid = build_anchor_grid(40, default_scales(40), samples);
    for (std::size_t a = 0; a < grid.size(); ++a) {
      for (std::size_t n = 0; n < samples; ++n) {
        const double pos = sample_position(grid.anchors[a], n, samples);
        double s = 0.0;
        for (std::size_t t = 0; t < 40; ++t) s += grid.weight(a, n, t);
        EXPECT_NEAR(s, pos <= 39.0 ? 1.0 : 40.0 - pos, 1e-12);
      }
    }
  }
}

TEST(Anchors, ScaleLongerThanSequenceIsSkipped) {
  auto grid = build_anchor_grid(10, {4, 20}, 1);
  EXPECT_EQ(grid.scales, (std::vector<std::size_t>{4}));
  EXPECT_THROW(build_anchor_grid(3, {4}, 1), contract_error);
}
