#pragma once

#include "acwe/types.hpp"

namespace acwe {

/// Scales an image by its maximum so values land in [0,1]. Rejects blank
/// (all-zero) images.
Image normalize(const Image& image);

/// Hard foreground decision: mask[i] = 1 iff score[i] > 0. Zero is background.
BinaryMask threshold(const ScoreField& score);

/// Weighted region means: c1 over `weights`, c2 over the complement.
/// A region whose weight mass falls below 1e-12 gets the global image mean,
/// so downstream energies stay finite on degenerate masks.
RegionStats region_means(const Image& image, const SoftMask& weights);

/// Convenience overload for hard masks.
RegionStats region_means(const Image& image, const BinaryMask& mask);

/// Dice similarity 2|a∩b| / (|a|+|b|). Two empty masks count as a perfect
/// match (1.0).
double dice(const BinaryMask& a, const BinaryMask& b);

/// Region-based segmentation energy of a hard mask:
///   mu*Length + nu*Area + lambda1*sum_in (g-c1)^2 + lambda2*sum_out (g-c2)^2
/// with c1,c2 the mask's region means. Length is the discrete perimeter:
/// 0.5 x the number of 4-neighbor pixel pairs with differing labels.
double acwe_energy(const Image& image, const BinaryMask& mask, const HyperParams& hp);

namespace detail {
/// Discrete perimeter used by acwe_energy; exposed for the baseline reports.
double mask_perimeter(const BinaryMask& mask);
}  // namespace detail

}  // namespace acwe
