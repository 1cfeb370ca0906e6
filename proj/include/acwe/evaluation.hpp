#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "acwe/levelset.hpp"
#include "acwe/network.hpp"
#include "acwe/phantom.hpp"
#include "acwe/types.hpp"

namespace acwe::eval {

/// Per-item DSC plus summary statistics. stddev is the population std
/// (N divisor), which the report writers note in their headers.
struct DscResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_item;
  std::vector<std::string> names;  // image paths, aligned with per_item
};

using Segmenter = std::function<BinaryMask(const Image&)>;

/// DSC of threshold(forward(image)) against ground truth over a labeled
/// split. Throws when the split is empty or any item lacks a label.
DscResult evaluate_dsc(net::NetworkParams& params, const phantom::DatasetManifest& manifest,
                       const std::string& split, int batch_size = 8);

/// Same contract for an arbitrary segmenter (oracle harnesses, baseline).
DscResult evaluate_dsc(const Segmenter& segmenter, const phantom::DatasetManifest& manifest,
                       const std::string& split);

struct TimingResult {
  double network_mean = 0.0;
  double network_std = 0.0;
  double levelset_mean = 0.0;
  double levelset_std = 0.0;
  double ratio = 0.0;  // levelset_mean / network_mean
  int images = 0;
  int repeats = 0;
  bool low_sample_warning = false;  // repeats == 1: std is degenerate, reported as 0
};

/// Per-image wall time of (a) eval-mode network forward + threshold and
/// (b) the level-set solver, over the split's first max_images images
/// (0 = all; at least 10 required). One untimed warm-up pass per method is
/// excluded; statistics cover repeats * images samples. No disk I/O inside
/// the timed regions.
TimingResult benchmark_timing(net::NetworkParams& params,
                              const phantom::DatasetManifest& manifest,
                              const std::string& split,
                              const levelset::LevelSetParams& ls_params, int repeats,
                              int max_images = 0);

/// Side-by-side PGM panels (input | prediction overlay | label overlay), one
/// file per case, named case_000.pgm, case_001.pgm, ... The label column is
/// omitted when labels is null.
std::vector<std::filesystem::path> render_gallery(const std::vector<Image>& images,
                                                  const std::vector<BinaryMask>& predictions,
                                                  const std::vector<BinaryMask>* labels,
                                                  const std::filesystem::path& out_dir);

void write_dsc_csv(const std::filesystem::path& path, const DscResult& result);
void write_dsc_markdown(const std::filesystem::path& path, const std::string& title,
                        const DscResult& result);
void write_timing_csv(const std::filesystem::path& path, const TimingResult& result);
void write_timing_markdown(const std::filesystem::path& path, const TimingResult& result);

}  // namespace acwe::eval
