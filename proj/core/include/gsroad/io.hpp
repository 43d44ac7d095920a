#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsroad/image.hpp"

namespace gsroad {

namespace fs = std::filesystem;

/// 8-bit PNG with 1 (gray) or 3 (RGB) channels.
void write_png(const fs::path& path, const ImageU8& image);
/// 8-bit palette PNG; `indices` is single-channel and every value must index into `palette`.
void write_png_indexed(const fs::path& path, const ImageU8& indices, const std::vector<std::array<std::uint8_t, 3>>& palette);
/// Reads an 8-bit PNG. Palette images return their indices (1 channel); alpha is dropped and
/// 16-bit samples are reduced to 8 bits.
ImageU8 read_png(const fs::path& path);

/// [0,1] floats -> 8-bit with clamping and rounding.
ImageU8 quantize(const ImageD& image);
ImageU8 quantize(const ImageF& image);
ImageF to_unit_float(const ImageU8& image);

/// Raw little-endian float32 grid, row-major.
void write_float_grid(const fs::path& path, const ImageD& grid);
ImageD read_float_grid(const fs::path& path, int width, int height);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const fs::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a_file(const fs::path& path);
/// Hex digest of every regular file under `dir` (sorted by relative path, name and contents hashed).
std::string hash_directory(const fs::path& dir);
std::string to_hex(std::uint64_t value);

}  // namespace gsroad
