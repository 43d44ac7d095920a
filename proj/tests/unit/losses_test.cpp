#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gsroad/error.hpp"
#include "gsroad/losses.hpp"
#include "oracles.hpp"

namespace gsroad {
namespace {

struct Frame {
  std::vector<double> rendered;
  ImageF target;
  ImageU8 mask;
};

Frame random_frame(std::uint64_t seed, int w, int h, double masked_fraction) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f;
  f.rendered.resize(3 * w * h);
  f.target = ImageF(w, h, 3);
  f.mask = ImageU8(w, h, 1);
  for (auto& v : f.rendered) v = u(rng);
  for (auto& v : f.target.data) v = static_cast<float>(u(rng));
  for (auto& v : f.mask.data) v = u(rng) < masked_fraction;
  return f;
}

TEST(ColorLoss, IdenticalImagesGiveZero) {
  Frame f = random_frame(1, 8, 6, 1.0);
  for (std::size_t i = 0; i < f.rendered.size(); ++i) f.rendered[i] = f.target.data[i];
  EXPECT_EQ(color_loss(f.rendered, f.target, f.mask, {}), 0.0);
}

TEST(ColorLoss, BlackAgainstWhiteIsOne) {
  Frame f = random_frame(2, 8, 6, 2.0);
  std::fill(f.rendered.begin(), f.rendered.end(), 0.0);
  std::fill(f.target.data.begin(), f.target.data.end(), 1.0f);
  EXPECT_DOUBLE_EQ(color_loss(f.rendered, f.target, f.mask, {}), 1.0);
}

TEST(ColorLoss, MatchesScalarLoopAndGradient) {
  const Frame f = random_frame(3, 17, 11, 0.5);
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    if (!f.mask.data[px]) continue;
    ++m;
    for (int c = 0; c < 3; ++c) sum += std::abs(f.rendered[3 * px + c] - f.target.data[3 * px + c]);
  }
  std::vector<double> grad(f.rendered.size());
  EXPECT_NEAR(color_loss(f.rendered, f.target, f.mask, grad), sum / (3.0 * m), 1e-12);
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    for (int c = 0; c < 3; ++c) {
      const double d = f.rendered[3 * px + c] - f.target.data[3 * px + c];
      const double expected = f.mask.data[px] ? (d > 0 ? 1.0 : -1.0) / (3.0 * m) : 0.0;
      EXPECT_DOUBLE_EQ(grad[3 * px + c], expected);
    }
  }
}

TEST(ColorLoss, IgnoresMaskedOutPixels) {
  Frame f = random_frame(4, 9, 9, 0.5);
  const double before = color_loss(f.rendered, f.target, f.mask, {});
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    if (f.mask.data[px]) continue;
    f.rendered[3 * px] += 10.0;
    f.target.data[3 * px + 2] = -3.0f;
  }
  EXPECT_EQ(color_loss(f.rendered, f.target, f.mask, {}), before);
}

TEST(ColorLoss, EmptyMaskThrows) {
  const Frame f = random_frame(5, 4, 4, 0.0);
  try {
    color_loss(f.rendered, f.target, f.mask, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

struct SemFrame {
  std::vector<double> logits;
  LabelImage labels;
  ImageU8 mask;
};

SemFrame sem_frame(std::uint64_t seed, int C, int w, int h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> cls(0, C - 1);
  SemFrame f;
  f.logits.resize(static_cast<std::size_t>(C) * w * h);
  f.labels = LabelImage(w, h, 1);
  f.mask = ImageU8(w, h, 1);
  for (auto& v : f.logits) v = u(rng);
  for (auto& v : f.labels.data) v = cls(rng);
  for (auto& v : f.mask.data) v = u(rng) > -1.0;
  return f;
}

TEST(SemanticLoss, UniformOverFourClassesIsLnFour) {
  SemFrame f = sem_frame(6, 4, 5, 5);
  std::fill(f.logits.begin(), f.logits.end(), 0.3);
  EXPECT_NEAR(semantic_loss(f.logits, 4, f.labels, f.mask, {}), std::log(4.0), 1e-12);
}

TEST(SemanticLoss, ConfidentCorrectPredictionIsZero) {
  SemFrame f = sem_frame(7, 3, 5, 5);
  std::fill(f.logits.begin(), f.logits.end(), 0.0);
  for (std::size_t px = 0; px < f.labels.data.size(); ++px) f.logits[3 * px + f.labels.data[px]] = 40.0;
  EXPECT_LT(semantic_loss(f.logits, 3, f.labels, f.mask, {}), 1e-6);
}

TEST(SemanticLoss, MatchesScalarCrossEntropyAndGradient) {
  const int C = 5;
  const SemFrame f = sem_frame(8, C, 13, 7);
  double sum = 0.0;
  std::size_t m = 0;
  std::vector<double> expected_grad(f.logits.size(), 0.0);
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    if (!f.mask.data[px]) continue;
    ++m;
  }
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    if (!f.mask.data[px]) continue;
    double z = 0.0;
    for (int k = 0; k < C; ++k) z += std::exp(f.logits[C * px + k]);
    sum += -std::log(std::exp(f.logits[C * px + f.labels.data[px]]) / z);
    for (int k = 0; k < C; ++k) {
      expected_grad[C * px + k] = (std::exp(f.logits[C * px + k]) / z - (k == f.labels.data[px])) / m;
    }
  }
  std::vector<double> grad(f.logits.size());
  EXPECT_NEAR(semantic_loss(f.logits, C, f.labels, f.mask, grad), sum / m, 1e-12);
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_NEAR(grad[i], expected_grad[i], 1e-12);
}

TEST(SemanticLoss, IgnoresMaskedOutPixels) {
  SemFrame f = sem_frame(9, 3, 8, 8);
  const double before = semantic_loss(f.logits, 3, f.labels, f.mask, {});
  for (std::size_t px = 0; px < f.mask.data.size(); ++px) {
    if (f.mask.data[px]) continue;
    f.logits[3 * px] = 99.0;
    f.labels.data[px] = 2;
  }
  EXPECT_EQ(semantic_loss(f.logits, 3, f.labels, f.mask, {}), before);
}

TEST(SmoothLoss, ConstantElevationIsZero) {
  const auto s = testing::scene_from_mask(4, 4, std::vector<std::uint8_t>(16, 1));
  const NeighborTable nt = NeighborTable::build(s);
  const std::vector<double> z(16, 3.0);
  EXPECT_EQ(smooth_loss(z, nt, {}), 0.0);
}

TEST(SmoothLoss, TwoByOneHandExample) {
  const auto s = testing::scene_from_mask(1, 2, {1, 1});
  const NeighborTable nt = NeighborTable::build(s);
  const std::vector<double> z{0.0, 1.0};
  std::vector<double> g(2, 0.0);
  EXPECT_DOUBLE_EQ(smooth_loss(z, nt, g), 0.5);
  EXPECT_DOUBLE_EQ(g[0], -1.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

TEST(SmoothLoss, MatchesBruteForceNeighbors) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::uint8_t> mask(400);
  for (auto& m : mask) m = u(rng) > -0.6;
  const auto s = testing::scene_from_mask(20, 20, mask);
  std::vector<double> z(s.size());
  for (auto& v : z) v = u(rng);
  double expected = 0.0;
  for (Direction d : kAllDirections) {
    const auto nb = testing::brute_force_neighbors(s, d);
    for (std::size_t i = 0; i < s.size(); ++i) expected += (z[i] - z[nb[i]]) * (z[i] - z[nb[i]]);
  }
  EXPECT_NEAR(smooth_loss(z, NeighborTable::build(s), {}), expected / 4.0, 1e-10);
}

TEST(SmoothLoss, TranslationInvariantWithZeroSumGradient) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto s = testing::scene_from_mask(9, 7, std::vector<std::uint8_t>(63, 1));
  const NeighborTable nt = NeighborTable::build(s);
  std::vector<double> z(s.size());
  for (auto& v : z) v = u(rng);
  std::vector<double> g(z.size(), 0.0);
  const double a = smooth_loss(z, nt, g);
  double gsum = 0.0;
  for (double v : g) gsum += v;
  EXPECT_NEAR(gsum, 0.0, 1e-12);
  for (auto& v : z) v += 4.25;
  EXPECT_NEAR(smooth_loss(z, nt, {}), a, 1e-12);
}

TEST(ElevationLoss, SingleResidual) {
  SurfelScene s = testing::scene_from_mask(1, 1, {1});
  PointCloud cloud;
  cloud.points.emplace_back(s.x[0], s.y[0], 0.5);
  EXPECT_DOUBLE_EQ(elevation_loss(s, cloud), 0.25);
  s.z[0] = 0.5;
  EXPECT_DOUBLE_EQ(elevation_loss(s, cloud), 0.0);
}

TEST(ElevationLoss, UnmatchedSurfelsContributeNothing) {
  SurfelScene s = testing::scene_from_mask(1, 2, {1, 1}, 1.0);
  PointCloud cloud;
  cloud.points.emplace_back(s.x[0] + 0.02, s.y[0], 0.3);
  cloud.points.emplace_back(s.x[1] + 0.5, s.y[1], 9.0);
  const ElevationTargets t = ElevationTargets::build(s, cloud, 0.1);
  EXPECT_EQ(t.matched_count, 1u);
  std::vector<double> g(2, 0.0);
  EXPECT_NEAR(elevation_loss(s.z, t, g), 0.09, 1e-15);
  EXPECT_NEAR(g[0], -0.6, 1e-15);
  EXPECT_EQ(g[1], 0.0);
}

TEST(ElevationLoss, MatchesNearestInRadiusScan) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfelScene s = testing::scene_from_mask(15, 15, std::vector<std::uint8_t>(225, 1));
  for (auto& z : s.z) z = 0.1 * u(rng);
  PointCloud cloud;
  for (int k = 0; k < 150; ++k) {
    cloud.points.emplace_back(s.lattice.origin.x() + 0.8 * u(rng), s.lattice.origin.y() + 0.8 * u(rng), 0.2 * u(rng));
  }
  double expected = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double best = 0.04 * 0.04;
    int hit = -1;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      const double d2 = std::pow(cloud.points[j].x() - s.x[i], 2) + std::pow(cloud.points[j].y() - s.y[i], 2);
      if (d2 < best || (hit < 0 && d2 == best)) {
        best = d2;
        hit = static_cast<int>(j);
      }
    }
    if (hit >= 0) expected += std::pow(s.z[i] - cloud.points[hit].z(), 2);
  }
  EXPECT_NEAR(elevation_loss(s, cloud, 0.04), expected, 1e-12);
}

TEST(TotalLoss, WeightedSums) {
  const LossWeights w;
  EXPECT_NEAR(total_loss({1, 1, 1, 1}, w, true), 2.08, 1e-12);
  EXPECT_NEAR(total_loss({1, 1, 1, 0}, w, false), 1.063, 1e-12);
  EXPECT_EQ(total_loss({0, 0, 0, 0}, w, true), 0.0);
  EXPECT_NEAR(total_loss({0, 0, 0, 5}, w, false), 0.0, 0.0);
}

TEST(TotalLoss, NonFiniteComponentIsNamed) {
  try {
    total_loss({1, std::nan(""), 0, 0}, LossWeights{}, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("semantic"), std::string::npos);
  }
}

}  // namespace
}  // namespace gsroad
