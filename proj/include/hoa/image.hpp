#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace hoa {

template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t size() const { return data.size(); }
  bool sameSize(int w, int h) const { return width == w && height == h; }
};

using ImageD = Image<double>;
using ImageU8 = Image<uint8_t>;

inline constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

// Segmentation labels used in observation masks and hard rasterization.
enum MaskLabel : uint8_t { kLabelBackground = 0, kLabelHand = 1, kLabelObject = 2 };

}  // namespace hoa
