#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "acwe/types.hpp"

namespace acwe::phantom {

enum class NoiseModel { none, poisson };

/// Recipe for one synthetic phantom: bright elliptical/capsule structures on
/// a dark background, degraded by Gaussian blur and optional Poisson noise.
/// The ground-truth label is the crisp pre-blur, pre-noise shape.
struct PhantomSpec {
  int height = 64;
  int width = 64;
  int n_structures = 3;            // 1..8
  double fg_lo = 0.8;              // foreground intensity range; lo must exceed bg
  double fg_hi = 1.2;
  double bg_intensity = 0.2;
  double blur_sigma = 1.0;         // pixels; 0 disables blurring
  NoiseModel noise = NoiseModel::poisson;
  double noise_scale = 50.0;       // counts per unit intensity for the Poisson model
  std::uint64_t seed = 0;

  void validate() const;
};

struct ManifestItem {
  std::string image_path;   // relative to the manifest directory
  std::string label_path;   // empty when the item carries no label
  std::uint64_t seed = 0;
  std::string split;        // "train" | "test"
};

/// Index of a generated dataset. Serialized as JSON with stable key order.
struct DatasetManifest {
  int version = 1;
  PhantomSpec spec;
  std::vector<ManifestItem> items;
  std::filesystem::path root;  // directory the manifest was loaded from / written to

  std::vector<const ManifestItem*> split_items(const std::string& split) const;
};

/// Generates one phantom. Deterministic in spec.seed; the same spec always
/// produces bit-identical output. Throws if no structure arrangement
/// satisfying the margin and foreground-fraction bounds is found within
/// 1000 attempts.
std::pair<Image, BinaryMask> generate_phantom(const PhantomSpec& spec);

/// Writes n_train+n_test phantom pairs plus manifest.json under out_dir.
/// Item i uses seed spec.seed + i.
DatasetManifest generate_dataset(const PhantomSpec& spec, int n_train, int n_test,
                                 const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Checks that every referenced file exists and matches the declared shape
/// and that the splits are disjoint. Throws on the first violation.
void validate_manifest(const DatasetManifest& manifest);

/// Separable Gaussian blur with kernel radius ceil(3*sigma) and clamped
/// (edge-replicating) borders. Exposed for tests.
Grid<double> gaussian_blur(const Grid<double>& grid, double sigma);

}  // namespace acwe::phantom
