#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "acwe/losses.hpp"
#include "acwe/network.hpp"
#include "acwe/phantom.hpp"
#include "acwe/types.hpp"

namespace acwe::train {

/// mode1: self-supervised region loss only, labels ignored.
/// mode2: mode1 to completion, then fine-tune on 10 labels.
/// mode3: mode1 to completion, then fine-tune on 80 labels.
/// mode4: joint region + label loss on all labeled images, from scratch.
enum class TrainMode { mode1 = 1, mode2 = 2, mode3 = 3, mode4 = 4 };

struct TrainConfig {
  TrainMode mode = TrainMode::mode1;
  int label_budget = -1;  // -1 = mode default (mode2: 10, mode3: 80, mode4: all)
  int epochs = 20;        // main phase
  int batch_size = 8;
  double learning_rate = 1e-3;
  int fine_tune_epochs = 10;        // modes 2-3
  bool fine_tune_combined = false;  // fine-tune on region+label instead of label alone
  std::uint64_t seed = 0;           // shuffling and subset selection
  HyperParams hp;
  net::NetworkConfig net;
};

struct EpochRecord {
  int epoch = 0;      // 1-based, counting across phases
  std::string phase;  // "main" | "fine_tune"
  losses::LossReport mean_loss;
  double val_dsc = 0.0;  // NaN when the validation split carries no labels
  double seconds = 0.0;
  // The region loss is complement-symmetric up to the area term; phases that
  // use it keep the bright-inside orientation by flipping the output sign
  // whenever an epoch ends with c1 < c2. True when this epoch flipped.
  bool polarity_flip = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  std::string checkpoint;  // path reference, filled by callers that save one
};

/// Seed-deterministic uniform sample of training items without replacement,
/// returned in manifest order. Selections nest: the budget-10 set is a subset
/// of the budget-80 set for the same seed.
std::vector<const phantom::ManifestItem*> select_label_subset(
    const phantom::DatasetManifest& manifest, int budget, std::uint64_t seed);

/// Runs the configured mode on the manifest's train split with adaptive-moment
/// updates (decay 0.9/0.999, stabilizer 1e-8); the optimizer state restarts at
/// the fine-tune phase boundary. Validation DSC is measured on the test split
/// in eval mode each epoch. Single-threaded and deterministic in (config,
/// seed). When log is non-null, one JSON line is appended per epoch.
std::pair<net::NetworkParams, TrainHistory> train(const phantom::DatasetManifest& manifest,
                                                  const TrainConfig& config,
                                                  std::ostream* log = nullptr);

std::string epoch_record_json_line(const EpochRecord& record);

const char* mode_name(TrainMode mode);
TrainMode mode_from_name(const std::string& name);

}  // namespace acwe::train
