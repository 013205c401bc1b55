#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bcnet/numeric/grad_check.hpp"
#include "bcnet/training.hpp"

using namespace bcnet;

namespace {

model_config small_config(std::size_t input_dim) {
  model_config c;
  c.input_dim = input_dim;
  c.model_dim = 8;
  c.bp_layers = 1;
  c.scales = {4, 8};
  c.anchor_samples = 2;
  c.ffn_ratio = 1.0;
  return c;
}

std::vector<training_sample> small_dataset(const model_config& mc, std::size_t n = 3) {
  std::vector<training_sample> data;
  for (auto& v : synth_generate(21, n, 16, mc.input_dim, 2)) {
    data.push_back(make_sample(v.features, v.annotations, mc));
  }
  return data;
}

}  // namespace

TEST(BalancedBce, HalfEverywhereIsLn2) {
  for (std::vector<double> target : {std::vector<double>{1, 0, 0, 0}, std::vector<double>{1, 1, 0},
                                     std::vector<double>{0, 0}, std::vector<double>{1}}) {
    auto pred = Tensor::filled({target.size()}, 0.5);
    EXPECT_NEAR(balanced_bce(pred, target).item(), std::log(2.0), 1e-12);
  }
}

TEST(BalancedBce, ClosedFormWeights) {
  // n = 4, one positive: positive weight 2, negative weight 2/3.
  auto pred = Tensor::vector({0.8, 0.3, 0.1, 0.6});
  const double expected = -(2.0 * std::log(0.8) + (2.0 / 3.0) * (std::log(0.7) + std::log(0.9) + std::log(0.4))) / 4.0;
  EXPECT_NEAR(balanced_bce(pred, {1, 0, 0, 0}).item(), expected, 1e-12);
}

TEST(BalancedBce, TargetsBinarizedAtHalf) {
  auto pred = Tensor::vector({0.8, 0.3, 0.4});
  EXPECT_DOUBLE_EQ(balanced_bce(pred, {0.9, 0.2, 0.5}).item(), balanced_bce(pred, {1, 0, 0}).item());
}

TEST(BalancedBce, ExactTargetsNearZero) {
  auto pred = Tensor::vector({1e-6, 1 - 1e-6, 1 - 1e-6});
  EXPECT_LT(balanced_bce(pred, {0, 1, 1}).item(), 1e-5);
}

TEST(BalancedBce, MaskExcludesEntries) {
  auto pred = Tensor::vector({0.8, 0.3, 0.01});
  EXPECT_DOUBLE_EQ(balanced_bce(pred, {1, 0, 1}, {1, 1, 0}).item(),
                   balanced_bce(Tensor::vector({0.8, 0.3}), {1, 0}).item());
}

TEST(BalancedBce, SaturatedPredictionStaysFinite) {
  auto pred = Tensor::vector({0.0, 1.0}, true);
  auto loss = balanced_bce(pred, {1, 0});
  EXPECT_TRUE(std::isfinite(loss.item()));
  loss.backward();
  for (double g : pred.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(BalancedBce, GradientCheck) {
  rng gen(1);
  std::vector<double> p(12), t(12);
  for (std::size_t i = 0; i < 12; ++i) {
    p[i] = gen.uniform(0.05, 0.95);
    t[i] = gen.uniform() > 0.7 ? 1.0 : 0.0;
  }
  EXPECT_LT(grad_check([&](const Tensor& x) { return balanced_bce(x, t); }, Tensor::vector(p)), 1e-4);
}

TEST(SmoothL1, PiecewiseValues) {
  EXPECT_EQ(smooth_l1_loss(Tensor::vector({0.5}), {0.0}).item(), 0.125);
  EXPECT_EQ(smooth_l1_loss(Tensor::vector({2.0}), {0.0}).item(), 1.5);
  EXPECT_EQ(smooth_l1_loss(Tensor::vector({0.3, 0.7}), {0.3, 0.7}).item(), 0.0);
  EXPECT_EQ(smooth_l1_loss(Tensor::vector({0.5, 9.0}), {0.0, 0.0}, {1, 0}).item(), 0.125);
}

TEST(SmoothL1, ContinuousAndC1AtTransition) {
  const double h = 1e-7;
  auto f = [](double d) { return smooth_l1_loss(Tensor::vector({d}), {0.0}).item(); };
  EXPECT_NEAR(f(1 - h), f(1 + h), 1e-6);
  EXPECT_NEAR((f(1) - f(1 - h)) / h, (f(1 + h) - f(1)) / h, 1e-5);
}

TEST(SmoothL1, GradientCheck) {
  std::vector<double> t{0.1, -0.2, 0.5, 3.0};
  EXPECT_LT(grad_check([&](const Tensor& x) { return smooth_l1_loss(x, t); },
                       Tensor::vector({0.4, 1.5, -2.0, 3.2})), 1e-4);
}

TEST(RegressionMask, PositivesPlusEqualNegatives) {
  std::vector<double> labels{0.9, 0.1, 0.0, 0.35, 0.2, 0.05, 0.3, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = regression_mask(labels, {}, seed);
    EXPECT_EQ(m[0] + m[3], 2.0);
    EXPECT_EQ(std::accumulate(m.begin(), m.end(), 0.0), 4.0);
    EXPECT_EQ(m, regression_mask(labels, {}, seed));
  }
}

TEST(LossClip, SingleAnchorExactRegressionIsZero) {
  // Anchor [0, 4] against gt [0, 12] x 1/3: tIoU = 1/3 with both in seconds.
  const double label = action_label_tiou({0, 4}, {{0, 12}});
  EXPECT_NEAR(label, 1.0 / 3.0, 1e-15);
  auto reg = smooth_l1_loss(Tensor::vector({label}), {label}, regression_mask({label}, {}, 1));
  EXPECT_EQ(reg.item(), 0.0);
}

TEST(TotalLoss, EqualsSumOfPartsAndReachesEveryHead) {
  auto mc = small_config(6);
  auto data = small_dataset(mc, 1);
  model net(mc, 3);
  auto out = net.forward(data[0].features.features, data[0].grid);
  auto l = total_loss(out, data[0].labels, 5);
  EXPECT_EQ(l.total.item(), l.boundary.item() + (l.frame.item() + l.clip.item()));
  EXPECT_EQ(l.boundary.item(), loss_bp(out.boundary, data[0].labels.boundary, data[0].labels.step_mask).item());
  l.total.backward();
  for (const char* prefix : {"clip.classification_head", "clip.regression_head", "clip.background_head",
                             "frame.action_head", "frame.background_head", "bp.head", "reduce"}) {
    bool found = false;
    for (const auto& [name, t] : net.parameters()) {
      if (name.rfind(prefix, 0) != 0) continue;
      found = true;
      ASSERT_TRUE(t.has_grad()) << name;
      double norm = 0;
      for (double g : t.grad()) norm += std::abs(g);
      EXPECT_GT(norm, 0.0) << name;
    }
    EXPECT_TRUE(found) << prefix;
  }
}

TEST(TotalLoss, LossBpSymmetricUnderRoleSwap) {
  auto mc = small_config(6);
  auto data = small_dataset(mc, 1);
  model net(mc, 3);
  auto out = net.forward(data[0].features.features, data[0].grid);
  boundary_outputs<double> swapped{out.boundary.end, out.boundary.start};
  boundary_labels swapped_labels{data[0].labels.boundary.end, data[0].labels.boundary.start};
  EXPECT_DOUBLE_EQ(loss_bp(out.boundary, data[0].labels.boundary).item(),
                   loss_bp(swapped, swapped_labels).item());
}

TEST(Schedule, StepDecay) {
  train_config c;
  EXPECT_EQ(c.lr_at(1), 1e-4);
  EXPECT_EQ(c.lr_at(10), 1e-4);
  EXPECT_NEAR(c.lr_at(11), 1e-5, 1e-20);
  EXPECT_NEAR(c.lr_at(21), 1e-6, 1e-21);
}

TEST(TrainConfig, Validation) {
  train_config c;
  c.lr = 0;
  EXPECT_THROW(c.validate(), config_error);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), config_error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = Tensor::vector({1.0, -2.0}, true);
  adam opt({{"w", w}});
  sum(mul(w, Tensor::vector({3.0, -0.5}))).backward();
  opt.step(0.1);
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(w[0], 0.9, 1e-8);
  EXPECT_NEAR(w[1], -1.9, 1e-8);
}

TEST(Trainer, DeterministicGivenSeed) {
  auto mc = small_config(6);
  auto data = small_dataset(mc);
  train_config tc;
  tc.model = mc;
  tc.epochs = 3;
  tc.seed = 11;
  tc.lr = 1e-3;
  trainer a(tc), b(tc);
  a.fit(data);
  b.fit(data);
  EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(Trainer, LossDecreasesOnSyntheticSet) {
  auto mc = small_config(6);
  auto data = small_dataset(mc, 4);
  train_config tc;
  tc.model = mc;
  tc.epochs = 50;
  tc.lr = 1e-3;
  tc.decay_every = 100;
  trainer t(tc);
  auto logs = t.fit(data);
  ASSERT_EQ(logs.size(), 50u);
  EXPECT_LT(logs.back().total, logs.front().total);
  EXPECT_LT(logs.back().boundary, logs.front().boundary);
}

TEST(Trainer, ResumeContinuesTrajectory) {
  auto mc = small_config(6);
  auto data = small_dataset(mc);
  train_config tc;
  tc.model = mc;
  tc.epochs = 4;
  tc.lr = 1e-3;
  tc.batch = 2;
  trainer full(tc);
  auto full_logs = full.fit(data);

  tc.epochs = 2;
  trainer first(tc);
  first.fit(data);
  trainer second(first.snapshot());
  second.set_total_epochs(4);
  auto rest = second.fit(data);
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest[1].total, full_logs[3].total);
  EXPECT_EQ(second.snapshot().parameters, full.snapshot().parameters);
}

TEST(Trainer, NonFiniteLossIsReportedWithContext) {
  auto mc = small_config(6);
  auto data = small_dataset(mc, 1);
  auto bad = data[0];
  auto values = bad.features.features.to_vector();
  values[0] = 1e308;
  values[1] = 1e308;
  bad.features.features = Tensor::from_values(bad.features.features.shape(), values);
  train_config tc;
  tc.model = mc;
  trainer t(tc);
  try {
    t.run_epoch({bad});
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find(bad.features.video_id), std::string::npos) << msg;
  }
}
