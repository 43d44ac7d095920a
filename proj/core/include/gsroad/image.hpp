#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace gsroad {

/// Interleaved row-major image: element (x, y, c) lives at ((y * width + x) * channels + c).
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(int w, int h) const { return width == w && height == h; }

  T& operator()(int x, int y, int c = 0) {
    assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& operator()(int x, int y, int c = 0) const {
    assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

using ImageF = Image<float>;
using ImageD = Image<double>;
using ImageU8 = Image<std::uint8_t>;
using LabelImage = Image<std::int32_t>;

}  // namespace gsroad
