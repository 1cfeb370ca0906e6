#pragma once

#include <cstdint>
#include <utility>

#include "acwe/grid.hpp"

namespace acwe {

/// 2D non-negative intensity grid. Intensities are arbitrary counts until
/// normalize() maps them into [0,1].
struct Image {
  Grid<double> data;

  Image() = default;
  explicit Image(Grid<double> g) : data(std::move(g)) {}
  Image(int height, int width, double fill = 0.0) : data(height, width, fill) {}

  int height() const { return data.height(); }
  int width() const { return data.width(); }
  std::size_t size() const { return data.size(); }
  double& operator()(int y, int x) { return data(y, x); }
  const double& operator()(int y, int x) const { return data(y, x); }
  double& operator[](std::size_t i) { return data[i]; }
  const double& operator[](std::size_t i) const { return data[i]; }
};

/// Hard {0,1} segmentation. Ground-truth labels and thresholded predictions.
struct BinaryMask {
  Grid<std::uint8_t> data;

  BinaryMask() = default;
  explicit BinaryMask(Grid<std::uint8_t> g) : data(std::move(g)) {}
  BinaryMask(int height, int width, std::uint8_t fill = 0) : data(height, width, fill) {}

  int height() const { return data.height(); }
  int width() const { return data.width(); }
  std::size_t size() const { return data.size(); }
  std::uint8_t& operator()(int y, int x) { return data(y, x); }
  const std::uint8_t& operator()(int y, int x) const { return data(y, x); }
  std::uint8_t& operator[](std::size_t i) { return data[i]; }
  const std::uint8_t& operator[](std::size_t i) const { return data[i]; }

  bool operator==(const BinaryMask& other) const = default;
};

/// Relaxed segmentation with per-pixel weights in [0,1].
struct SoftMask {
  Grid<double> data;

  SoftMask() = default;
  explicit SoftMask(Grid<double> g) : data(std::move(g)) {}
  SoftMask(int height, int width, double fill = 0.0) : data(height, width, fill) {}

  int height() const { return data.height(); }
  int width() const { return data.width(); }
  std::size_t size() const { return data.size(); }
  double& operator()(int y, int x) { return data(y, x); }
  const double& operator()(int y, int x) const { return data(y, x); }
  double& operator[](std::size_t i) { return data[i]; }
  const double& operator[](std::size_t i) const { return data[i]; }
};

/// Raw real-valued network output; the sign decides foreground vs background.
struct ScoreField {
  Grid<double> data;

  ScoreField() = default;
  explicit ScoreField(Grid<double> g) : data(std::move(g)) {}
  ScoreField(int height, int width, double fill = 0.0) : data(height, width, fill) {}

  int height() const { return data.height(); }
  int width() const { return data.width(); }
  std::size_t size() const { return data.size(); }
  double& operator()(int y, int x) { return data(y, x); }
  const double& operator()(int y, int x) const { return data(y, x); }
  double& operator[](std::size_t i) { return data[i]; }
  const double& operator[](std::size_t i) const { return data[i]; }
};

/// Mean intensities inside (c1) and outside (c2) the current segmentation.
struct RegionStats {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Weights of the region-based energy and its relaxed loss form.
///
/// mu      length weight (baseline solver only; the training loss keeps it 0)
/// nu      area weight
/// lambda1 inside-residual weight
/// lambda2 outside-residual weight
/// alpha   label-loss weight in the combined loss
/// beta    sharpness of the sigmoid that relaxes the hard foreground indicator
/// eps_tv  smoothing floor under the gradient-magnitude square root
struct HyperParams {
  double mu = 0.0;
  double nu = 0.004;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double alpha = 0.4;
  double beta = 1.0;
  double eps_tv = 1e-8;
};

}  // namespace acwe
