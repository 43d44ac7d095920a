#include "gsroad/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gsroad/error.hpp"

namespace gsroad {
namespace {

struct File {
  std::FILE* f = nullptr;
  ~File() {
    if (f) std::fclose(f);
  }
};

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Writes an 8-bit PNG. Returns an error message on failure (empty on success). No C++ objects
// with destructors are created between setjmp and the libpng calls.
std::string write_png_raw(std::FILE* fp, int width, int height, int color_type, const std::uint8_t* data, int channels,
                          const png_color* palette, int palette_size) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return "png_create_write_struct failed";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return "png_create_info_struct failed";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return "libpng write error";
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (palette) png_set_PLTE(png, info, palette, palette_size);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return {};
}

struct ReadResult {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::string error;
};

// Two-phase read: header first, then rows into caller-provided storage.
ReadResult read_png_raw(std::FILE* fp, std::vector<std::uint8_t>& pixels) {
  ReadResult r;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    r.error = "png_create_read_struct failed";
    return r;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    r.error = "png_create_info_struct failed";
    return r;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    r.error = "libpng read error";
    return r;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (depth < 8) {
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
      png_set_packing(png);
    } else {
      png_set_expand_gray_1_2_4_to_8(png);
    }
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(r.width) * r.channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    r.error = "unsupported PNG layout";
    return r;
  }
  pixels.resize(stride * r.height);
  for (int y = 0; y < r.height; ++y) png_read_row(png, pixels.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

void write_png(const fs::path& path, const ImageU8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::InputError, "write_png supports 1 or 3 channels, got " + std::to_string(image.channels));
  }
  if (image.width <= 0 || image.height <= 0) throw Error(ErrorCode::InputError, "write_png: empty image");
  ensure_parent(path);
  File file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw Error(ErrorCode::InputError, "cannot open " + path.string() + " for writing");
  const int type = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const auto err = write_png_raw(file.f, image.width, image.height, type, image.data.data(), image.channels, nullptr, 0);
  if (!err.empty()) throw Error(ErrorCode::InputError, err + " (" + path.string() + ")");
}

void write_png_indexed(const fs::path& path, const ImageU8& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (indices.channels != 1) throw Error(ErrorCode::InputError, "indexed PNG needs a single-channel index image");
  if (palette.empty() || palette.size() > 256) throw Error(ErrorCode::InputError, "palette must have 1..256 entries");
  for (auto v : indices.data) {
    if (v >= palette.size()) throw Error(ErrorCode::InputError, "index " + std::to_string(v) + " outside palette");
  }
  std::vector<png_color> pal(palette.size());
  for (std::size_t i = 0; i < palette.size(); ++i) pal[i] = {palette[i][0], palette[i][1], palette[i][2]};
  ensure_parent(path);
  File file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw Error(ErrorCode::InputError, "cannot open " + path.string() + " for writing");
  const auto err = write_png_raw(file.f, indices.width, indices.height, PNG_COLOR_TYPE_PALETTE, indices.data.data(), 1,
                                 pal.data(), static_cast<int>(pal.size()));
  if (!err.empty()) throw Error(ErrorCode::InputError, err + " (" + path.string() + ")");
}

ImageU8 read_png(const fs::path& path) {
  File file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw Error(ErrorCode::InputError, "cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::InputError, path.string() + " is not a PNG file");
  }
  std::rewind(file.f);
  std::vector<std::uint8_t> pixels;
  const auto r = read_png_raw(file.f, pixels);
  if (!r.error.empty()) throw Error(ErrorCode::InputError, r.error + " (" + path.string() + ")");
  ImageU8 out;
  out.width = r.width;
  out.height = r.height;
  out.channels = r.channels;
  out.data = std::move(pixels);
  return out;
}

ImageU8 quantize(const ImageD& image) {
  ImageU8 out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = to_byte(image.data[i]);
  return out;
}

ImageU8 quantize(const ImageF& image) {
  ImageU8 out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = to_byte(image.data[i]);
  return out;
}

ImageF to_unit_float(const ImageU8& image) {
  ImageF out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = static_cast<float>(image.data[i] / 255.0);
  return out;
}

void write_float_grid(const fs::path& path, const ImageD& grid) {
  static_assert(std::endian::native == std::endian::little, "float grids are written in native little-endian order");
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InputError, "cannot open " + path.string() + " for writing");
  std::vector<float> buf(grid.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(grid.data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

ImageD read_float_grid(const fs::path& path, int width, int height) {
  const auto bytes = read_bytes(path);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (bytes.size() != n * sizeof(float)) {
    throw Error(ErrorCode::InputError, path.string() + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                                           std::to_string(n * sizeof(float)));
  }
  ImageD out(width, height, 1);
  for (std::size_t i = 0; i < n; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + i * sizeof(float), sizeof(float));
    out.data[i] = v;
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InputError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InputError, "cannot open " + path.string() + " for writing");
  out << text;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InputError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return fnv1a(bytes.data(), bytes.size());
}

std::string hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    h = fnv1a(name.data(), name.size(), h);
    const auto bytes = read_bytes(dir / rel);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return to_hex(h);
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace gsroad
