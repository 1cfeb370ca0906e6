#include "acwe/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acwe {

Image normalize(const Image& image) {
  double max_val = 0.0;
  for (double v : image.data.values()) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("normalize: image values must be finite and non-negative");
    max_val = std::max(max_val, v);
  }
  if (max_val <= 0.0)
    throw std::invalid_argument("normalize: blank image (all pixels zero)");

  Image out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] / max_val;
  return out;
}

BinaryMask threshold(const ScoreField& score) {
  BinaryMask mask(score.height(), score.width());
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (!std::isfinite(score[i]))
      throw std::invalid_argument("threshold: score field contains non-finite values");
    mask[i] = score[i] > 0.0 ? 1 : 0;
  }
  return mask;
}

RegionStats region_means(const Image& image, const SoftMask& weights) {
  if (image.height() != weights.height() || image.width() != weights.width())
    throw std::invalid_argument("region_means: image and weights shapes differ");

  double sum_in = 0.0, mass_in = 0.0;
  double sum_out = 0.0, mass_out = 0.0;
  double sum_all = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double w = weights[i];
    const double g = image[i];
    sum_in += w * g;
    mass_in += w;
    sum_out += (1.0 - w) * g;
    mass_out += 1.0 - w;
    sum_all += g;
  }
  const double global_mean = sum_all / static_cast<double>(image.size());

  RegionStats stats;
  stats.c1 = mass_in < 1e-12 ? global_mean : sum_in / mass_in;
  stats.c2 = mass_out < 1e-12 ? global_mean : sum_out / mass_out;
  return stats;
}

RegionStats region_means(const Image& image, const BinaryMask& mask) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw std::invalid_argument("region_means: image and mask shapes differ");
  SoftMask weights(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) weights[i] = mask[i] ? 1.0 : 0.0;
  return region_means(image, weights);
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("dice: mask shapes differ");

  long intersection = 0, count_a = 0, count_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    count_a += a[i] != 0;
    count_b += b[i] != 0;
    intersection += (a[i] != 0) && (b[i] != 0);
  }
  if (count_a + count_b == 0) return 1.0;
  return 2.0 * static_cast<double>(intersection) / static_cast<double>(count_a + count_b);
}

namespace detail {

double mask_perimeter(const BinaryMask& mask) {
  // Each unordered 4-neighbor pair is visited once via its right/down edge.
  long changes = 0;
  const int h = mask.height(), w = mask.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && mask(y, x) != mask(y, x + 1)) ++changes;
      if (y + 1 < h && mask(y, x) != mask(y + 1, x)) ++changes;
    }
  return 0.5 * static_cast<double>(changes);
}

}  // namespace detail

double acwe_energy(const Image& image, const BinaryMask& mask, const HyperParams& hp) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw std::invalid_argument("acwe_energy: image and mask shapes differ");

  const RegionStats stats = region_means(image, mask);
  double inside_residual = 0.0, outside_residual = 0.0;
  long area = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask[i]) {
      const double d = image[i] - stats.c1;
      inside_residual += d * d;
      ++area;
    } else {
      const double d = image[i] - stats.c2;
      outside_residual += d * d;
    }
  }
  return hp.mu * detail::mask_perimeter(mask) + hp.nu * static_cast<double>(area) +
         hp.lambda1 * inside_residual + hp.lambda2 * outside_residual;
}

}  // namespace acwe
