#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace glasshands {

using TimestampMs = std::int64_t;

/// Row-major RGB8 raster.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  TimestampMs timestamp_ms = 0;

  Frame() = default;
  Frame(int w, int h, TimestampMs t = 0)
      : width(w), height(h), rgb(static_cast<size_t>(3) * w * h, 0), timestamp_ms(t) {}

  bool valid() const {
    return width > 0 && height > 0 && rgb.size() == static_cast<size_t>(3) * width * height;
  }
  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
};

/// 8-bit single channel mask, row-major; used for debug dumps.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

namespace io {

/// Binary PPM (P6, maxval 255). Throws IoError on write failure.
void write_ppm(const std::filesystem::path& path, const Frame& frame);

/// Throws InputNotFound when missing, CorruptFrame on a malformed header or short payload.
Frame read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

void write_png(const std::filesystem::path& path, const Frame& frame);

}  // namespace io
}  // namespace glasshands
