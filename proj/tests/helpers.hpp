#pragma once

// Shared fixtures for the test binaries: scratch directories, tiny
// deterministic datasets, and simple geometric inputs.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "acwe/phantom.hpp"
#include "acwe/types.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Unique scratch directory, removed (recursively) on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    std::ostringstream name;
    name << "acwe_test_" << std::hex << rd() << "_" << counter.fetch_add(1);
    path_ = fs::temp_directory_path() / name.str();
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

/// Small clean phantom spec: one structure, light blur, no noise. Fast to
/// generate and easy for a segmenter to get exactly right.
inline acwe::phantom::PhantomSpec tiny_spec(int size = 16, std::uint64_t seed = 7) {
  acwe::phantom::PhantomSpec spec;
  spec.height = size;
  spec.width = size;
  spec.n_structures = 1;
  spec.blur_sigma = 0.5;
  spec.noise = acwe::phantom::NoiseModel::none;
  spec.seed = seed;
  return spec;
}

inline acwe::phantom::DatasetManifest tiny_dataset(const fs::path& dir, int n_train = 6,
                                                   int n_test = 3, int size = 16,
                                                   std::uint64_t seed = 7) {
  return acwe::phantom::generate_dataset(tiny_spec(size, seed), n_train, n_test, dir);
}

inline acwe::BinaryMask disk_mask(int h, int w, double cy, double cx, double r) {
  acwe::BinaryMask mask(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = y - cy, dx = x - cx;
      mask(y, x) = dy * dy + dx * dx <= r * r ? 1 : 0;
    }
  return mask;
}

inline acwe::Image disk_image(int h, int w, double cy, double cx, double r, double fg = 1.0,
                              double bg = 0.0) {
  acwe::Image image(h, w, bg);
  const acwe::BinaryMask mask = disk_mask(h, w, cy, cx, r);
  for (std::size_t i = 0; i < image.size(); ++i)
    if (mask[i]) image[i] = fg;
  return image;
}

/// Uniform values in (lo, hi), deterministic in seed.
inline acwe::Image random_image(int h, int w, std::uint64_t seed, double lo = 0.05,
                                double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  acwe::Image image(h, w);
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = unif(rng);
  return image;
}

inline std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace testutil
