#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace leanloc {

/// Row-major single-channel image, origin at the top-left pixel.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int col, int row) { return data[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int col, int row) const { return data[static_cast<std::size_t>(row) * width + col]; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Image&) const = default;
};

}  // namespace leanloc
