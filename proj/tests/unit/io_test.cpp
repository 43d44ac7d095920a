#include <filesystem>

#include <gtest/gtest.h>

#include "gsroad/error.hpp"
#include "gsroad/io.hpp"

namespace gsroad {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("gsroad_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Png, RgbAndGrayRoundTrip) {
  TempDir dir;
  ImageU8 rgb(7, 3, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<std::uint8_t>(i * 13);
  write_png(dir.path / "rgb.png", rgb);
  EXPECT_EQ(read_png(dir.path / "rgb.png"), rgb);
  ImageU8 gray(4, 5, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<std::uint8_t>(255 - i);
  write_png(dir.path / "gray.png", gray);
  EXPECT_EQ(read_png(dir.path / "gray.png"), gray);
}

TEST(Png, IndexedReadsBackIndices) {
  TempDir dir;
  ImageU8 idx(3, 2, 1);
  idx.data = {0, 1, 2, 2, 1, 0};
  write_png_indexed(dir.path / "idx.png", idx, {{{0, 0, 0}}, {{255, 0, 0}}, {{0, 255, 0}}});
  EXPECT_EQ(read_png(dir.path / "idx.png"), idx);
  idx.data[0] = 3;
  EXPECT_THROW(write_png_indexed(dir.path / "bad.png", idx, {{{0, 0, 0}}}), Error);
}

TEST(Png, MissingFileIsAnInputError) {
  EXPECT_THROW(read_png("/nonexistent/file.png"), Error);
}

TEST(Quantize, ClampsAndRounds) {
  ImageD img(4, 1, 1);
  img.data = {-0.5, 0.5, 1.5, 0.1};
  const ImageU8 q = quantize(img);
  EXPECT_EQ(q.data, (std::vector<std::uint8_t>{0, 128, 255, 26}));
  const ImageF back = to_unit_float(q);
  EXPECT_FLOAT_EQ(back.data[2], 1.0f);
}

TEST(FloatGrid, RoundTrip) {
  TempDir dir;
  ImageD g(3, 2, 1);
  g.data = {0.5, -1.25, 3.0, 1e-3, 7.0, -0.0};
  write_float_grid(dir.path / "g.f32", g);
  const ImageD back = read_float_grid(dir.path / "g.f32", 3, 2);
  for (std::size_t i = 0; i < g.data.size(); ++i) EXPECT_EQ(back.data[i], static_cast<float>(g.data[i]));
  EXPECT_EQ(fs::file_size(dir.path / "g.f32"), 24u);
  EXPECT_THROW(read_float_grid(dir.path / "g.f32", 4, 2), Error);
}

TEST(Hashing, Fnv1aKnownValuesAndDirectoryDigest) {
  EXPECT_EQ(fnv1a("", 0), 14695981039346656037ull);
  EXPECT_EQ(fnv1a("a", 1), 0xaf63dc4c8601ec8cull);
  TempDir dir;
  write_text(dir.path / "a.txt", "one");
  write_text(dir.path / "b.txt", "two");
  const std::string h = hash_directory(dir.path);
  EXPECT_EQ(h, hash_directory(dir.path));
  write_text(dir.path / "b.txt", "tw0");
  EXPECT_NE(h, hash_directory(dir.path));
  EXPECT_EQ(to_hex(255), "00000000000000ff");
}

}  // namespace
}  // namespace gsroad
