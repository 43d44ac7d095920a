#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "gsroad/error.hpp"
#include "gsroad/scene.hpp"
#include "oracles.hpp"

namespace gsroad {
namespace {

std::vector<Pose> straight(double length, double step) {
  std::vector<Pose> poses;
  for (double x = 0.0; x <= length + 1e-9; x += step) {
    Pose p;
    p.translation = Vec3(x, 0, 0);
    poses.push_back(p);
  }
  return poses;
}

TEST(BuildLayout, StraightHundredMeterRoadFillsTheLattice) {
  LayoutOptions opt;
  opt.resolution = 0.05;
  opt.expand = 10.0;
  const SurfelScene s = build_layout(straight(100.0, 1.0), opt);
  EXPECT_EQ(s.lattice.cols, 2401);
  EXPECT_EQ(s.lattice.rows, 401);
  // Every cell lies within 10 m (Chebyshev) of the x axis segment.
  EXPECT_EQ(s.size(), 2401u * 401u);
}

TEST(BuildLayout, MaskMatchesIndependentRasterization) {
  LayoutOptions opt;
  opt.resolution = 0.1;
  opt.expand = 0.5;
  std::vector<Pose> poses = straight(3.0, 0.5);
  for (auto& p : poses) p.translation.y() = 0.25 * p.translation.x();
  const SurfelScene s = build_layout(poses, opt);
  const Lattice& lat = s.lattice;
  std::size_t expected = 0;
  for (int r = 0; r < lat.rows; ++r) {
    for (int c = 0; c < lat.cols; ++c) {
      // Chebyshev distance, in cells, from this cell to the cells swept by the polyline.
      bool near = false;
      for (double t = 0.0; t <= 3.0 && !near; t += 0.001) {
        const Vec2 p(t, 0.25 * t);
        const int pr = static_cast<int>(std::floor((p.y() - lat.origin.y()) / lat.resolution + 0.5));
        const int pc = static_cast<int>(std::floor((p.x() - lat.origin.x()) / lat.resolution + 0.5));
        near = std::max(std::abs(pr - r), std::abs(pc - c)) <= 5;
      }
      expected += near;
    }
  }
  EXPECT_EQ(s.size(), expected);
}

TEST(BuildLayout, SingleRepeatedPoseNeedsExpand) {
  const std::vector<Pose> poses(3);
  LayoutOptions opt;
  opt.expand = 0.0;
  try {
    build_layout(poses, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateExtent);
  }
  opt.expand = 1.0;
  EXPECT_GT(build_layout(poses, opt).size(), 0u);
}

TEST(BuildLayout, LatticeIndexIsABijection) {
  LayoutOptions opt;
  opt.resolution = 0.1;
  opt.expand = 1.0;
  opt.layout = Layout::Layout2;
  const SurfelScene s = build_layout(straight(5.0, 0.5), opt);
  std::vector<int> seen(s.size(), 0);
  for (int r = 0; r < s.lattice.rows; ++r) {
    for (int c = 0; c < s.lattice.cols; ++c) {
      const auto idx = s.lattice.vertex_index[static_cast<std::size_t>(r) * s.lattice.cols + c];
      if (idx == kEmptyCell) continue;
      ++seen[idx];
      const auto cell = s.lattice.cell_of(Vec2(s.x[idx], s.y[idx]));
      EXPECT_EQ(cell[0], r);
      EXPECT_EQ(cell[1], c);
    }
  }
  for (auto idx : s.lattice.center_index) {
    if (idx != kEmptyCell) ++seen[idx];
  }
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(BuildLayout, LayoutTwoAddsInteriorCenters) {
  // 4x5 fully masked lattice: 20 vertices and 3x4 = 12 interior cells.
  const std::vector<Pose> poses = straight(0.0, 1.0);
  LayoutOptions opt;
  opt.resolution = 0.1;
  opt.expand = 0.2;
  const SurfelScene l1 = build_layout(poses, opt);
  opt.layout = Layout::Layout2;
  const SurfelScene l2 = build_layout(poses, opt);
  ASSERT_EQ(l1.size(), 25u);
  EXPECT_EQ(l2.size(), 25u + 16u);
  EXPECT_LT(l1.size(), l2.size());
}

TEST(BuildLayout, SurfelsAreFlatDisks) {
  LayoutOptions opt;
  opt.resolution = 0.05;
  opt.expand = 0.3;
  const SurfelScene s = build_layout(straight(1.0, 0.5), opt);
  for (std::size_t i = 0; i < s.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(covariance_3d(s.surfel(i)));
    EXPECT_LT(std::abs(es.eigenvalues()[0]), 1e-12);
  }
}

TEST(NeighborIndices, DenseGridCenterLooksUp) {
  const auto s = testing::scene_from_mask(3, 3, std::vector<std::uint8_t>(9, 1));
  const auto up = neighbor_indices(s, Direction::Up);
  // Center is vertex (1,1) -> index 4; up is row 0 -> index 1.
  EXPECT_EQ(up[4], 1);
}

TEST(NeighborIndices, BorderFallsBackToSelf) {
  std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 0};
  const auto s = testing::scene_from_mask(2, 3, mask);
  const auto right = neighbor_indices(s, Direction::Right);
  EXPECT_EQ(right[1], 1);  // (0,1) has an unmasked right neighbor
  EXPECT_EQ(right[0], 1);
}

TEST(NeighborIndices, MatchesBruteForceOnRandomMasks) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 40);
  std::bernoulli_distribution on(0.7);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = size(rng), cols = size(rng);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * cols);
    for (auto& m : mask) m = on(rng);
    const auto s = testing::scene_from_mask(rows, cols, mask);
    for (Direction d : kAllDirections) EXPECT_EQ(neighbor_indices(s, d), testing::brute_force_neighbors(s, d));
  }
}

TEST(NeighborIndices, LayoutTwoCentersMatchBruteForce) {
  LayoutOptions opt;
  opt.resolution = 0.1;
  opt.expand = 0.4;
  opt.layout = Layout::Layout2;
  std::vector<Pose> poses = straight(2.0, 0.25);
  for (auto& p : poses) p.translation.y() = 0.3 * std::sin(p.translation.x());
  const SurfelScene s = build_layout(poses, opt);
  for (Direction d : kAllDirections) EXPECT_EQ(neighbor_indices(s, d), testing::brute_force_neighbors(s, d));
}

}  // namespace
}  // namespace gsroad
