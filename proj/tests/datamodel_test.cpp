#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bcnet/datamodel.hpp"

using namespace bcnet;

namespace {

video_features ramp(std::size_t t, std::size_t c, double dt = 1.0) {
  std::vector<double> v(t * c);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t k = 0; k < c; ++k) v[i * c + k] = 2.0 * static_cast<double>(i) - 3.0 * static_cast<double>(k);
  }
  return {"ramp", Tensor::from_values({t, c}, std::move(v)), dt, t, 0.0};
}

}  // namespace

TEST(Validate, RejectsShortAndBadStep) {
  auto v = ramp(1, 2);
  EXPECT_THROW(validate(v), data_error);
  auto w = ramp(4, 2);
  w.seconds_per_step = 0.0;
  EXPECT_THROW(validate(w), data_error);
  annotation_set a{"x", 10.0, {{{5.0, 5.0}, ""}}};
  EXPECT_THROW(validate(a), data_error);
}

TEST(Rescale, IdentityWhenTargetEqualsLength) {
  auto v = ramp(7, 3);
  auto r = rescale_linear(v, 7);
  EXPECT_EQ(r.features.to_vector(), v.features.to_vector());
  EXPECT_EQ(r.seconds_per_step, v.seconds_per_step);
}

TEST(Rescale, TwoStepsToThree) {
  video_features v{"x", Tensor::matrix(2, 1, {0.0, 10.0}), 1.0, 2, 0.0};
  auto r = rescale_linear(v, 3);
  EXPECT_EQ(r.features.to_vector(), (std::vector<double>{0.0, 5.0, 10.0}));
}

TEST(Rescale, DurationPreserved) {
  for (std::size_t t : {2u, 5u, 17u, 256u}) {
    for (std::size_t target : {2u, 3u, 100u}) {
      auto v = ramp(t, 2, 0.64);
      auto r = rescale_linear(v, target);
      EXPECT_NEAR(static_cast<double>(t - 1) * v.seconds_per_step,
                  static_cast<double>(target - 1) * r.seconds_per_step, 1e-12);
    }
  }
}

TEST(Rescale, ExactOnLinearInput) {
  auto v = ramp(37, 4);
  auto r = rescale_linear(v, 100);
  for (std::size_t j = 0; j < 100; ++j) {
    const double x = static_cast<double>(j) * 36.0 / 99.0;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(r.features.at(j, k), 2.0 * x - 3.0 * static_cast<double>(k), 1e-12);
    }
  }
}

TEST(Rescale, TargetBelowTwoIsContractError) {
  EXPECT_THROW(rescale_linear(ramp(4, 1), 1), contract_error);
}

TEST(Window, FullLengthGivesOneWindow) {
  auto w = window_split(ramp(256, 2), {256, 128}, {});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].features.valid_length, 256u);
}

TEST(Window, StrideArithmetic) {
  auto w = window_split(ramp(384, 2), {256, 128}, {});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].features.offset_seconds, 0.0);
  EXPECT_EQ(w[1].features.offset_seconds, 128.0);
  EXPECT_EQ(w[1].features.valid_length, 256u);
}

TEST(Window, PartialWindowIsZeroPadded) {
  auto w = window_split(ramp(300, 2), {256, 128}, {});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1].features.valid_length, 172u);
  EXPECT_EQ(w[1].features.length(), 256u);
  EXPECT_EQ(w[1].features.features.at(200, 1), 0.0);
  EXPECT_EQ(w[1].features.features.at(0, 0), 2.0 * 128.0);
}

TEST(Window, AnnotationsAreClippedAndShifted) {
  annotation_set anns{"ramp", 384, {{{140.0, 160.0}, "a"}, {{250.0, 300.0}, "b"}, {{255.5, 256.2}, "c"}}};
  auto w = window_split(ramp(384, 1), {256, 128}, anns);
  ASSERT_EQ(w.size(), 2u);
  // The second instance is clipped at the window edge; the third is shorter
  // than one step in either window and is dropped.
  ASSERT_EQ(w[0].annotations.instances.size(), 2u);
  EXPECT_EQ(w[0].annotations.instances[1].segment, (interval{250.0, 256.0}));
  ASSERT_EQ(w[1].annotations.instances.size(), 2u);
  EXPECT_EQ(w[1].annotations.instances[0].segment, (interval{12.0, 32.0}));
  EXPECT_EQ(w[1].annotations.instances[1].segment, (interval{122.0, 172.0}));
}

TEST(Window, StitchedWindowsCoverEveryStep) {
  for (std::size_t t : {2u, 50u, 255u, 256u, 257u, 384u, 1000u}) {
    for (window_spec spec : {window_spec{256, 128}, window_spec{64, 64}, window_spec{10, 3}}) {
      std::vector<int> seen(t, 0);
      for (std::size_t s : window_starts(t, spec)) {
        for (std::size_t i = s; i < std::min(t, s + spec.length); ++i) seen[i] = 1;
      }
      for (std::size_t i = 0; i < t; ++i) EXPECT_EQ(seen[i], 1) << "T=" << t << " step " << i;
    }
  }
}

TEST(Window, InvalidSpec) {
  EXPECT_THROW(window_split(ramp(10, 1), {4, 0}, {}), contract_error);
  EXPECT_THROW(window_split(ramp(10, 1), {4, 5}, {}), contract_error);
}

TEST(Synth, DeterministicBySeed) {
  auto a = synth_generate(5, 3, 32, 4, 3);
  auto b = synth_generate(5, 3, 32, 4, 3);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features.features.to_vector(), b[i].features.features.to_vector());
    EXPECT_EQ(a[i].annotations.segments(), b[i].annotations.segments());
  }
  auto c = synth_generate(6, 3, 32, 4, 3);
  EXPECT_NE(a[0].features.features.to_vector(), c[0].features.features.to_vector());
}

TEST(Synth, NoInstancesMeansEmptyAnnotations) {
  for (const auto& v : synth_generate(1, 4, 16, 2, 0)) EXPECT_TRUE(v.annotations.instances.empty());
}

TEST(Synth, InstancesDisjointAndInsideDuration) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    synth_options opt;
    opt.hard_background = seed % 3;
    for (const auto& v : synth_generate(seed, 5, 64, 3, 3, opt)) {
      auto segs = v.annotations.segments();
      EXPECT_GE(segs.size(), 1u);
      for (std::size_t i = 0; i < segs.size(); ++i) {
        EXPECT_LT(segs[i].start, segs[i].end);
        EXPECT_GE(segs[i].start, 0.0);
        EXPECT_LE(segs[i].end, v.annotations.duration);
        for (std::size_t j = i + 1; j < segs.size(); ++j) {
          EXPECT_EQ(intersection_length(segs[i], segs[j]), 0.0);
        }
      }
    }
  }
}

TEST(Synth, ClassMeansSitAtConfiguredMargin) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    synth_options opt;
    opt.margin = 1.0 + static_cast<double>(seed % 5);
    auto p = synth_mean_patterns(seed, 8, opt);
    std::vector<std::vector<double>> others = p.classes;
    others.push_back(p.distractor);
    for (const auto& m : others) {
      double d = 0.0;
      for (std::size_t k = 0; k < 8; ++k) d += (m[k] - p.background[k]) * (m[k] - p.background[k]);
      EXPECT_NEAR(std::sqrt(d), opt.margin, 1e-12);
    }
  }
}

TEST(Synth, InstanceFeaturesSeparateFromBackground) {
  synth_options opt;
  opt.noise = 0.1;
  auto videos = synth_generate(3, 4, 64, 8, 2, opt);
  auto p = synth_mean_patterns(3, 8, opt);
  for (const auto& v : videos) {
    for (std::size_t t = 0; t < 64; ++t) {
      double d = 0.0;
      for (std::size_t k = 0; k < 8; ++k) {
        const double x = v.features.features.at(t, k) - p.background[k];
        d += x * x;
      }
      const double centre = static_cast<double>(t) + 0.5;
      bool in_action = false;
      for (const auto& s : v.annotations.segments()) in_action = in_action || (s.start < centre && centre < s.end);
      if (in_action) {
        EXPECT_GT(std::sqrt(d), 1.5);
      } else {
        EXPECT_LT(std::sqrt(d), 1.5);
      }
    }
  }
}
