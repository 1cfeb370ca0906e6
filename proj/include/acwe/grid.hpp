#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace acwe {

/// Dense row-major 2D grid. Backs every pixel-valued type in the toolkit.
template <typename T>
class Grid {
public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(check_dims(height, width)) , fill) {}

  Grid(int height, int width, std::vector<T> values)
      : height_(height), width_(width), data_(std::move(values)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width)
      throw std::invalid_argument("grid: value count does not match " +
                                  std::to_string(height) + "x" + std::to_string(width));
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  const std::vector<T>& values() const { return data_; }
  std::vector<T>& values() { return data_; }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Clamped access, replicating the border pixel.
  const T& at_clamped(int y, int x) const {
    if (y < 0) y = 0;
    if (y >= height_) y = height_ - 1;
    if (x < 0) x = 0;
    if (x >= width_) x = width_ - 1;
    return (*this)(y, x);
  }

  bool operator==(const Grid& other) const = default;

private:
  static long check_dims(int height, int width) {
    if (height < 1 || width < 1)
      throw std::invalid_argument("grid: dimensions must be positive, got " +
                                  std::to_string(height) + "x" + std::to_string(width));
    return static_cast<long>(height) * width;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

}  // namespace acwe
