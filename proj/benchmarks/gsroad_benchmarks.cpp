#include <random>

#include <benchmark/benchmark.h>

#include "gsroad/initializer.hpp"
#include "gsroad/losses.hpp"
#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"

namespace {

using namespace gsroad;

std::vector<Pose> straight(double length) {
  std::vector<Pose> poses;
  for (double x = 0.0; x <= length; x += 1.0) {
    Pose p;
    p.translation = Vec3(x, 0, 0);
    poses.push_back(p);
  }
  return poses;
}

SurfelScene road(double length, double expand) {
  LayoutOptions opt;
  opt.expand = expand;
  opt.class_count = 7;
  return build_layout(straight(length), opt);
}

CameraModel front_camera(int width, int height) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.5 * width;
  cam.cx = 0.5 * width - 0.5;
  cam.cy = 0.5 * height - 0.5;
  cam.extrinsic.rotation = Eigen::AngleAxisd(0.35, Vec3::UnitY()).toRotationMatrix() *
                           (Mat3() << 0, 0, 1, -1, 0, 0, 0, -1, 0).finished();
  cam.extrinsic.translation = Vec3(0, 0, 1.6);
  return cam;
}

void BM_RenderPerspective(benchmark::State& state) {
  const SurfelScene scene = road(30.0, 5.0);
  const CameraModel cam = front_camera(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) * 3 / 4);
  Pose vehicle;
  vehicle.translation = Vec3(2, 0, 0);
  const auto culled = cull_frustum(scene, vehicle * cam.extrinsic, cam);
  RenderOutput out;
  for (auto _ : state) {
    render_into(scene, vehicle, cam, culled, RenderSettings{}, PixelWindow::full(cam), out);
    benchmark::DoNotOptimize(out.color.data());
  }
  state.counters["surfels"] = static_cast<double>(culled.size());
}
BENCHMARK(BM_RenderPerspective)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const SurfelScene scene = road(30.0, 5.0);
  const CameraModel cam = front_camera(160, 120);
  Pose vehicle;
  vehicle.translation = Vec3(2, 0, 0);
  const auto culled = cull_frustum(scene, vehicle * cam.extrinsic, cam);
  const RenderOutput out = render(scene, vehicle, cam, culled);
  const std::vector<double> d_color(out.color.size(), 1e-3);
  const std::vector<double> d_sem(out.semantics.size(), 1e-3);
  GradientBuffer g;
  g.resize(scene, 1);
  for (auto _ : state) {
    g.zero();
    render_backward(scene, cam, 0, out, d_color, d_sem, g);
    benchmark::DoNotOptimize(g.z.data());
  }
}
BENCHMARK(BM_RenderBackward)->Unit(benchmark::kMillisecond);

void BM_RenderBev(benchmark::State& state) {
  const SurfelScene scene = road(20.0, 4.0);
  const BevGrid grid = BevGrid::covering(scene.lattice, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(render_bev_chunked(scene, grid, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_RenderBev)->Arg(2000)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_NeighborTable(benchmark::State& state) {
  const SurfelScene scene = road(static_cast<double>(state.range(0)), 5.0);
  for (auto _ : state) benchmark::DoNotOptimize(NeighborTable::build(scene));
  state.counters["surfels"] = static_cast<double>(scene.size());
}
BENCHMARK(BM_NeighborTable)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_NearestPose(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  std::vector<Pose> poses(static_cast<std::size_t>(state.range(0)));
  for (auto& p : poses) p.translation = Vec3(u(rng), u(rng), 0);
  const PoseIndex index(poses, 2.0);
  std::vector<Vec2> queries(1024);
  for (auto& q : queries) q = Vec2(u(rng), u(rng));
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(index.nearest(queries[k++ & 1023]));
}
BENCHMARK(BM_NearestPose)->Arg(1000)->Arg(100000);

void BM_InitFromPoses(benchmark::State& state) {
  const auto poses = straight(100.0);
  const SurfelScene base = road(100.0, 5.0);
  for (auto _ : state) {
    SurfelScene s = base;
    init_from_poses(s, poses, InitMode::Full);
    benchmark::DoNotOptimize(s.z.data());
  }
}
BENCHMARK(BM_InitFromPoses)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
