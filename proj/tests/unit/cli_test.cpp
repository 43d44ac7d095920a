#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "gsroad/error.hpp"
#include "gsroad/io.hpp"

namespace gsroad::cli {
namespace {

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "gsroad");
  args.insert(args.begin() + 1, {"--log-level", "warn"});
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

// One smoke scene, reconstructed once for two epochs, shared by the tests below.
class CliSmoke : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "gsroad_cli_test";
    fs::remove_all(root_);
    ASSERT_EQ(run_args({"synth", (fs::path(GSROAD_SPEC_DIR) / "smoke.spec").string(), "-o", scene().string()}), 0);
    ASSERT_EQ(run_args({"reconstruct", scene().string(), "-o", out().string(), "--epochs", "2", "--expand", "3",
                        "--resolution", "0.1"}),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path scene() { return root_ / "smoke"; }
  static fs::path out() { return root_ / "run"; }
  static inline fs::path root_;
};

TEST_F(CliSmoke, ReconstructWritesAllOutputs) {
  for (const char* f : {"checkpoint.bin", "bev/rgb.png", "bev/semantic.png", "bev/elevation.f32", "bev/elevation.json",
                        "metrics.jsonl", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out() / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_text(out() / "manifest.json"));
  EXPECT_TRUE(manifest.contains("seed"));
  EXPECT_TRUE(manifest.contains("config"));
}

TEST_F(CliSmoke, MetricsLogHasOneRecordPerEpoch) {
  int epochs = 0;
  for (const auto& rec : read_jsonl(out() / "metrics.jsonl")) {
    if (rec.value("type", "") != "epoch") continue;
    ++epochs;
    EXPECT_TRUE(rec.contains("psnr"));
  }
  EXPECT_EQ(epochs, 2);
}

TEST_F(CliSmoke, EvaluateAgainstTrainingScene) {
  EvaluateOptions o;
  o.checkpoints = {out() / "checkpoint.bin"};
  o.ground_truth = scene();
  o.report = root_ / "report.json";
  const auto rows = cmd_evaluate(o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].scene, "smoke");
  EXPECT_TRUE(std::isfinite(rows[0].psnr));
  EXPECT_TRUE(std::isfinite(rows[0].miou));
  EXPECT_TRUE(std::isfinite(rows[0].elevation_rmse));
  EXPECT_EQ(rows[1].scene, "mean");
  EXPECT_TRUE(fs::exists(o.report));
}

TEST_F(CliSmoke, EvaluateSortsRowsByScene) {
  // Second checkpoint under a directory name that sorts first.
  fs::create_directories(root_ / "aaa");
  fs::copy_file(out() / "checkpoint.bin", root_ / "aaa" / "checkpoint.bin", fs::copy_options::overwrite_existing);
  EvaluateOptions o;
  o.checkpoints = {out() / "checkpoint.bin", root_ / "aaa" / "checkpoint.bin"};
  o.ground_truth = scene() / "analytic_gt";
  o.report = root_ / "report_a.json";
  const auto rows = cmd_evaluate(o);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].scene, "aaa");
  EXPECT_EQ(rows[1].scene, "smoke");
  EXPECT_EQ(rows[0].psnr, rows[1].psnr);
  std::swap(o.checkpoints[0], o.checkpoints[1]);
  o.report = root_ / "report_b.json";
  cmd_evaluate(o);
  EXPECT_EQ(read_text(root_ / "report_a.json"), read_text(root_ / "report_b.json"));
}

TEST_F(CliSmoke, AnalyticGroundTruthAgainstItself) {
  const GroundTruthBev gt = load_analytic_gt(scene() / "analytic_gt");
  EXPECT_EQ(psnr(gt.rgb, gt.rgb, gt.valid), kPsnrCap);
  EXPECT_EQ(miou(gt.labels, gt.labels, gt.valid, 7), 1.0);
}

TEST_F(CliSmoke, UseLidarWithoutSweepsNamesTheFolder) {
  ReconstructOptions o;
  o.scene_dir = scene();
  o.out_dir = root_ / "lidar_run";
  o.use_lidar = true;
  try {
    cmd_reconstruct(o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lidar"), std::string::npos) << e.what();
  }
  EXPECT_EQ(run_args({"reconstruct", scene().string(), "-o", (root_ / "lidar_run").string(), "--use-lidar"}), 1);
}

TEST_F(CliSmoke, EvaluateWithoutGroundTruthFails) {
  fs::create_directories(root_ / "empty");
  EXPECT_EQ(run_args({"evaluate", (out() / "checkpoint.bin").string(), "--gt", (root_ / "empty").string()}), 1);
}

TEST(CliSynth, MalformedSpecFailsNamingTheField) {
  const fs::path dir = fs::temp_directory_path() / "gsroad_cli_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text(dir / "bad.spec", "length = 5\ncamera_count = many\n");
  testing::internal::CaptureStderr();
  const int code = run_args({"synth", (dir / "bad.spec").string(), "-o", (dir / "out").string()});
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_NE(code, 0);
  EXPECT_NE(err.find("camera_count"), std::string::npos) << err;
  fs::remove_all(dir);
}

TEST(CliSynth, SameSeedTwiceGivesIdenticalDirectories) {
  const fs::path dir = fs::temp_directory_path() / "gsroad_cli_seed";
  fs::remove_all(dir);
  const std::string spec = (fs::path(GSROAD_SPEC_DIR) / "smoke.spec").string();
  cmd_synth(spec, 11, dir / "a");
  cmd_synth(spec, 11, dir / "b");
  EXPECT_EQ(hash_directory(dir / "a"), hash_directory(dir / "b"));
  fs::remove_all(dir);
}

TEST(CliRun, UnknownSubcommandIsAnInputError) {
  EXPECT_NE(run_args({"frobnicate"}), 0);
  EXPECT_EQ(run_args({"reconstruct", "/nonexistent/scene", "-o", "/tmp/gsroad_never"}), 1);
}

}  // namespace
}  // namespace gsroad::cli
