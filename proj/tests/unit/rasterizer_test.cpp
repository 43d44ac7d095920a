#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"
#include "oracles.hpp"

namespace gsroad {
namespace {

// Single-vertex scene under a downward camera, the surfel at the principal pixel.
struct OneSurfel {
  SurfelScene scene;
  Pose vehicle;
  CameraModel cam;
};

OneSurfel one_surfel(int count = 1) {
  OneSurfel o;
  o.scene = testing::scene_from_mask(1, count, std::vector<std::uint8_t>(count, 1), 0.05, 2);
  for (std::size_t i = 0; i < o.scene.size(); ++i) o.scene.x[i] = o.scene.x[0];
  std::tie(o.vehicle, o.cam) = testing::downward_camera(Vec2(o.scene.x[0], o.scene.y[0]), 1.0, 9, 9, 100.0);
  return o;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

struct RandomScene {
  SurfelScene scene;
  Pose vehicle;
  CameraModel cam;
};

RandomScene random_scene(std::uint64_t seed, bool orthographic = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution on(0.8);
  RandomScene r;
  std::vector<std::uint8_t> mask(100);
  for (auto& m : mask) m = on(rng);
  r.scene = testing::scene_from_mask(10, 10, mask, 0.1, 3);
  testing::randomize_parameters(r.scene, rng, 0.1);
  const Vec2 center(r.scene.lattice.origin + Vec2(0.45, 0.45));
  std::tie(r.vehicle, r.cam) = testing::downward_camera(center, 1.2, 48 + static_cast<int>(8 * u(rng)), 40, 40.0);
  r.cam.extrinsic.rotation = Eigen::AngleAxisd(0.3 * u(rng), Vec3::UnitX()).toRotationMatrix() *
                             Eigen::AngleAxisd(0.3 * u(rng), Vec3::UnitY()).toRotationMatrix() *
                             r.cam.extrinsic.rotation;
  r.cam.exposure_a = 0.2 * u(rng);
  r.cam.exposure_b = 0.05 * u(rng);
  if (orthographic) {
    r.cam.kind = ProjectionKind::Orthographic;
    r.cam.ortho_scale = 0.03;
  }
  return r;
}

TEST(Render, SingleOpaqueSplatAtPrincipalPixel) {
  OneSurfel o = one_surfel();
  o.scene.opacity_logit[0] = 30.0;
  o.scene.color = {1, 0, 0};
  const RenderOutput out = render(o.scene, o.vehicle, o.cam, all_surfels(o.scene));
  const std::size_t px = 4 * 9 + 4;
  EXPECT_NEAR(out.color[3 * px], 1.0, 1e-9);
  EXPECT_NEAR(out.color[3 * px + 1], 0.0, 1e-12);
  EXPECT_NEAR(out.alpha_accum[px], 1.0, 1e-9);
}

TEST(Render, TwoCoincidentHalfOpaqueSplats) {
  OneSurfel o = one_surfel(2);
  o.scene.z[1] = -0.01;  // farther from the camera
  // Wide footprint so g is 1 to first order at the center pixel.
  for (double& s : o.scene.log_scale) s = std::log(5.0);
  o.scene.opacity_logit = {0.0, 0.0};
  o.scene.color = {1, 0, 0, 0, 1, 0};
  const RenderOutput out = render(o.scene, o.vehicle, o.cam, all_surfels(o.scene));
  const std::size_t px = 4 * 9 + 4;
  EXPECT_NEAR(out.color[3 * px], 0.5, 1e-9);
  EXPECT_NEAR(out.color[3 * px + 1], 0.25, 1e-9);
  EXPECT_NEAR(out.alpha_accum[px], 0.75, 1e-9);
}

TEST(Render, ExposureIsAffineInRawColor) {
  RandomScene r = random_scene(41);
  r.cam.exposure_a = 0.0;
  r.cam.exposure_b = 0.0;
  const auto culled = all_surfels(r.scene);
  const RenderOutput base = render(r.scene, r.vehicle, r.cam, culled);
  r.cam.exposure_a = std::log(2.0);
  r.cam.exposure_b = 0.1;
  const RenderOutput shifted = render(r.scene, r.vehicle, r.cam, culled);
  for (std::size_t i = 0; i < base.color.size(); ++i) EXPECT_NEAR(shifted.color[i], 2.0 * base.color[i] + 0.1, 1e-12);
  EXPECT_EQ(shifted.semantics, base.semantics);
}

TEST(Render, MatchesNaivePerPixelEvaluation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (bool ortho : {false, true}) {
      const RandomScene r = random_scene(100 + seed, ortho);
      const RenderOutput out = render(r.scene, r.vehicle, r.cam, all_surfels(r.scene));
      const testing::NaiveImage ref = testing::naive_render(r.scene, r.vehicle, r.cam);
      EXPECT_LT(max_abs_diff(out.color, ref.color), 1e-6) << "seed " << seed;
      EXPECT_LT(max_abs_diff(out.semantics, ref.semantics), 1e-6) << "seed " << seed;
      EXPECT_LT(max_abs_diff(out.alpha_accum, ref.alpha), 1e-6) << "seed " << seed;
    }
  }
}

TEST(Render, TransmittanceAndAlphaSumToOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RandomScene r = random_scene(200 + seed);
    const RenderOutput out = render(r.scene, r.vehicle, r.cam, all_surfels(r.scene));
    for (std::size_t px = 0; px < out.pixel_count(); ++px) {
      EXPECT_NEAR(out.transmittance[px] + out.alpha_accum[px], 1.0, 1e-6);
      EXPECT_GE(out.alpha_accum[px], 0.0);
      EXPECT_LE(out.alpha_accum[px], 1.0);
    }
  }
}

TEST(Render, SubmissionOrderDoesNotMatter) {
  const RandomScene r = random_scene(51);
  auto order = all_surfels(r.scene);
  const RenderOutput a = render(r.scene, r.vehicle, r.cam, order);
  std::mt19937_64 rng(52);
  std::shuffle(order.begin(), order.end(), rng);
  const RenderOutput b = render(r.scene, r.vehicle, r.cam, order);
  EXPECT_EQ(a.color, b.color);
  EXPECT_EQ(a.semantics, b.semantics);
}

TEST(Render, BandHeightDoesNotChangeOutput) {
  const RandomScene r = random_scene(53);
  RenderSettings st;
  const RenderOutput a = render(r.scene, r.vehicle, r.cam, all_surfels(r.scene), st);
  st.band_rows = 5;
  const RenderOutput b = render(r.scene, r.vehicle, r.cam, all_surfels(r.scene), st);
  EXPECT_EQ(a.color, b.color);
}

TEST(Render, BehindCameraSurfelsAreIgnored) {
  OneSurfel o = one_surfel();
  o.scene.z[0] = 2.0;  // above the camera
  const RenderOutput out = render(o.scene, o.vehicle, o.cam, all_surfels(o.scene));
  EXPECT_TRUE(out.projected.empty());
  EXPECT_EQ(*std::max_element(out.alpha_accum.begin(), out.alpha_accum.end()), 0.0);
}

TEST(Render, EdgeOnSurfelIsSkippedAndCounted) {
  OneSurfel o = one_surfel();
  // Rotate the disk to contain the viewing ray and collapse the remaining axis.
  const Vec4 q(std::cos(M_PI / 4), std::sin(M_PI / 4), 0, 0);
  for (int k = 0; k < 4; ++k) o.scene.quaternion[k] = q[k];
  o.scene.log_scale[1] = -40.0;
  RenderSettings st;
  st.lowpass = 0.0;
  const RenderOutput out = render(o.scene, o.vehicle, o.cam, all_surfels(o.scene), st);
  EXPECT_EQ(out.singular_count, 1u);
}

TEST(RenderBackward, ExposureBiasGradientIsOnePerPixel) {
  const RandomScene r = random_scene(61);
  const RenderOutput out = render(r.scene, r.vehicle, r.cam, all_surfels(r.scene));
  std::vector<double> d_color(out.color.size(), 0.0);
  d_color[3 * 100 + 1] = 1.0;
  GradientBuffer g;
  g.resize(r.scene, 1);
  g.zero();
  render_backward(r.scene, r.cam, 0, out, d_color, {}, g);
  EXPECT_DOUBLE_EQ(g.exposure_b[0], 1.0);
}

TEST(RenderBackward, SingleSurfelColorGradientIsAlphaTimesFalloff) {
  OneSurfel o = one_surfel();
  o.scene.opacity_logit[0] = 0.7;
  const RenderOutput out = render(o.scene, o.vehicle, o.cam, all_surfels(o.scene));
  for (int px : {40, 41, 31}) {
    std::vector<double> d_color(out.color.size(), 0.0);
    d_color[3 * px] = 1.0;
    GradientBuffer g;
    g.resize(o.scene, 1);
    g.zero();
    render_backward(o.scene, o.cam, 0, out, d_color, {}, g);
    const testing::NaiveImage ref = testing::naive_render(o.scene, o.vehicle, o.cam);
    EXPECT_NEAR(g.color[0], ref.alpha[px], 1e-12);
  }
}

TEST(CullFrustum, ForwardBoxExamples) {
  std::vector<std::uint8_t> mask(3, 1);
  SurfelScene s = testing::scene_from_mask(1, 3, mask);
  s.x = {10, 50, -5};
  s.y = {0, 0, 0};
  Pose cam;  // looking along world +x: camera z axis = world x
  cam.rotation << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  const auto kept = cull_frustum(s, cam, CameraModel{});
  EXPECT_EQ(kept, std::vector<std::uint32_t>{0});
}

TEST(CullFrustum, KeepsEveryContributingSurfel) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    // 35 m x 25 m patch, entirely ahead of the camera and inside the box.
    std::vector<std::uint8_t> mask(70 * 50, 1);
    SurfelScene s = testing::scene_from_mask(50, 70, mask, 0.5);
    CameraModel cam;
    cam.width = 64;
    cam.height = 48;
    cam.fx = cam.fy = 32;
    cam.cx = 31.5;
    cam.cy = 23.5;
    const double yaw = 0.2 * u(rng);
    cam.extrinsic.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix() *
                             Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix();
    cam.extrinsic.rotation = cam.extrinsic.rotation * (Mat3() << 0, 0, 1, -1, 0, 0, 0, -1, 0).finished();
    cam.extrinsic.translation = Vec3(s.lattice.origin.x() - 3, s.lattice.origin.y() + 12.5, 1.6);
    const Pose vehicle;
    const RenderOutput full = render(s, vehicle, cam, all_surfels(s));
    const auto kept = cull_frustum(s, vehicle * cam.extrinsic, cam);
    for (const auto& list : full.contributing) {
      for (const auto& c : list) {
        const auto id = full.projected[c.slot].surfel;
        EXPECT_TRUE(std::binary_search(kept.begin(), kept.end(), id)) << id;
      }
    }
  }
}

SurfelScene bev_scene(int rows, int cols) {
  std::mt19937_64 rng(81);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * cols, 1);
  SurfelScene s = testing::scene_from_mask(rows, cols, mask, 0.05, 3);
  testing::randomize_parameters(s, rng, 0.02);
  return s;
}

TEST(RenderBevChunked, TwoByTwoTilesEqualMonolithic) {
  const SurfelScene s = bev_scene(30, 40);
  const BevGrid grid = BevGrid::covering(s.lattice, 0.05);
  const BevMaps mono = render_bev_chunked(s, grid, 1 << 20);
  const BevMaps tiled = render_bev_chunked(s, grid, 24);
  ASSERT_EQ(grid.width, 40);
  EXPECT_EQ(tiled.rgb, mono.rgb);
  EXPECT_EQ(tiled.labels, mono.labels);
  EXPECT_EQ(tiled.alpha, mono.alpha);
  for (std::size_t i = 0; i < mono.elevation.data.size(); ++i) {
    const double a = mono.elevation.data[i], b = tiled.elevation.data[i];
    EXPECT_TRUE(a == b || (std::isnan(a) && std::isnan(b)));
  }
}

TEST(RenderBevChunked, MatchesOrthographicOracle) {
  const SurfelScene s = bev_scene(12, 15);
  const BevGrid grid = BevGrid::covering(s.lattice, 0.05);
  const BevMaps bev = render_bev_chunked(s, grid, 7);
  const CameraModel cam = bev_camera(grid, 100.0);
  const testing::NaiveImage ref = testing::naive_render(s, Pose{}, cam);
  EXPECT_LT(max_abs_diff(bev.rgb.data, ref.color), 1e-6);
  EXPECT_LT(max_abs_diff(bev.alpha.data, ref.alpha), 1e-6);
}

TEST(BevGrid, HundredMetersIsOneDefaultTile) {
  Lattice lat;
  lat.rows = lat.cols = 2000;
  lat.resolution = 0.05;
  const BevGrid grid = BevGrid::covering(lat, 0.05);
  EXPECT_EQ(grid.width, 2000);
  EXPECT_EQ(grid.height, 2000);
}

}  // namespace
}  // namespace gsroad
