#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace topoloc {

/// Row-major image buffer, row 0 at the top.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Depth in meters. Values <= 0 or non-finite mean "no depth".
using DepthImage = Image<float>;
using IntensityImage = Image<std::uint8_t>;

inline constexpr float kNoDepth = 0.0f;

inline bool valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }

/// Pixel whose center (at integer coordinates) is closest to (u, v).
struct PixelIndex {
  int x = 0;
  int y = 0;
};

inline PixelIndex nearest_pixel(double u, double v) {
  return {static_cast<int>(std::floor(u + 0.5)), static_cast<int>(std::floor(v + 0.5))};
}

}  // namespace topoloc
