#include "acwe/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "acwe/core.hpp"
#include "acwe/io.hpp"

namespace acwe::train {

namespace {

struct Sample {
  Image image;       // normalized
  BinaryMask label;  // empty grid when unlabeled
  bool has_label = false;
};

std::vector<Sample> load_split(const phantom::DatasetManifest& manifest,
                               const std::string& split, bool need_labels, const char* why) {
  std::vector<Sample> out;
  for (const phantom::ManifestItem* item : manifest.split_items(split)) {
    Sample s;
    s.image = normalize(read_image(manifest.root / item->image_path));
    if (!item->label_path.empty()) {
      s.label = read_mask(manifest.root / item->label_path);
      s.has_label = true;
    } else if (need_labels) {
      throw std::invalid_argument(std::string(why) + ": item " + item->image_path +
                                  " has no label");
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Adaptive-moment optimizer over the aligned trainable tensor list.
struct Adam {
  double lr;
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<std::vector<float>> m, v;

  explicit Adam(const std::vector<std::vector<float>*>& params, double rate) : lr(rate) {
    for (const auto* p : params) {
      m.emplace_back(p->size(), 0.0f);
      v.emplace_back(p->size(), 0.0f);
    }
  }

  void update(const std::vector<std::vector<float>*>& params,
              const std::vector<std::vector<float>*>& grads) {
    step += 1;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t t = 0; t < params.size(); ++t) {
      std::vector<float>& p = *params[t];
      const std::vector<float>& g = *grads[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[t][i] = static_cast<float>(b1 * m[t][i] + (1.0 - b1) * g[i]);
        v[t][i] = static_cast<float>(b2 * v[t][i] + (1.0 - b2) * static_cast<double>(g[i]) * g[i]);
        const double mhat = m[t][i] / bc1;
        const double vhat = v[t][i] / bc2;
        p[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

enum class LossKind { acwe_only, combined, label_only };

// The region loss is invariant under mask complement up to the small area
// term, so unsupervised runs can settle on the inverted partition. The
// phantom corpus defines foreground as the brighter region, and the trainer
// keeps that orientation: when an epoch ends with c1 < c2 the output sign is
// flipped exactly by negating the exit kernel, normalization shift, and
// running mean (scale, slopes, and all other layers stay put).
void flip_output_polarity(net::NetworkParams& params) {
  for (float& x : params.exit.conv.w) x = -x;
  for (float& x : params.exit.norm.shift) x = -x;
  for (float& x : params.exit.norm.running_mean) x = -x;
}

double validation_dsc(net::NetworkParams& params, const std::vector<Sample>& val,
                      int batch_size) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  long counted = 0;
  for (std::size_t start = 0; start < val.size(); start += batch_size) {
    const std::size_t end = std::min(val.size(), start + batch_size);
    std::vector<Image> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(val[i].image);
    std::vector<ScoreField> scores = net::forward(params, batch, net::Mode::eval);
    for (std::size_t i = start; i < end; ++i) {
      if (!val[i].has_label) continue;
      sum += dice(threshold(scores[i - start]), val[i].label);
      counted += 1;
    }
  }
  if (counted == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(counted);
}

void accumulate(losses::LossReport& into, const losses::LossReport& item) {
  into.total += item.total;
  into.acwe_term += item.acwe_term;
  into.label_term += item.label_term;
  into.area_term += item.area_term;
  into.inside_residual += item.inside_residual;
  into.outside_residual += item.outside_residual;
  into.c1 += item.c1;
  into.c2 += item.c2;
}

void scale(losses::LossReport& report, double factor) {
  report.total *= factor;
  report.acwe_term *= factor;
  report.label_term *= factor;
  report.area_term *= factor;
  report.inside_residual *= factor;
  report.outside_residual *= factor;
  report.c1 *= factor;
  report.c2 *= factor;
}

// One phase: epochs over the given sample indices with fresh optimizer state.
void run_phase(net::NetworkParams& params, const std::vector<Sample>& samples,
               const std::vector<std::size_t>& pool, const std::vector<Sample>& val,
               const TrainConfig& config, int epochs, LossKind kind, const char* phase,
               std::mt19937_64& shuffle_rng, TrainHistory& history, std::ostream* log) {
  if (epochs <= 0 || pool.empty()) return;
  std::vector<std::vector<float>*> tensors = net::trainable_tensors(params);
  Adam adam(tensors, config.learning_rate);

  std::vector<std::size_t> order = pool;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    losses::LossReport epoch_sum;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t b = end - start;
      std::vector<Image> batch;
      batch.reserve(b);
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]].image);

      net::ForwardTape tape;
      std::vector<ScoreField> scores = net::forward(params, batch, net::Mode::train, &tape);

      std::vector<Grid<double>> dscores;
      dscores.reserve(b);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const Sample& sample = samples[order[start + i]];
        losses::LossReport report;
        Grid<double> grad;
        if (kind == LossKind::label_only) {
          losses::LossValue lab = losses::label_loss(scores[i], sample.label, config.hp);
          report.label_term = lab.value;
          report.total = lab.value;
          grad = std::move(lab.grad);
        } else {
          const BinaryMask* label =
              (kind == LossKind::combined && sample.has_label) ? &sample.label : nullptr;
          losses::CombinedLoss combined =
              losses::combined_loss(scores[i], sample.image, label, config.hp);
          report = combined.report;
          grad = std::move(combined.grad);
        }
        accumulate(epoch_sum, report);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= inv_b;
        dscores.push_back(std::move(grad));
      }

      net::NetworkGrads grads = net::backward(params, tape, dscores);
      std::vector<std::vector<float>*> gtensors = net::grad_tensors(grads);
      adam.update(tensors, gtensors);
    }

    EpochRecord record;
    record.epoch = static_cast<int>(history.epochs.size()) + 1;
    record.phase = phase;
    record.mean_loss = epoch_sum;
    scale(record.mean_loss, 1.0 / static_cast<double>(order.size()));
    if (kind != LossKind::label_only && record.mean_loss.c1 < record.mean_loss.c2) {
      flip_output_polarity(params);
      for (std::size_t t = 0; t < tensors.size(); ++t) {
        if (tensors[t] == &params.exit.conv.w || tensors[t] == &params.exit.norm.shift)
          for (float& x : adam.m[t]) x = -x;
      }
      record.polarity_flip = true;
    }
    record.val_dsc = validation_dsc(params, val, config.batch_size);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log != nullptr) *log << epoch_record_json_line(record) << "\n";
    history.epochs.push_back(std::move(record));
  }
}

}  // namespace

std::vector<const phantom::ManifestItem*> select_label_subset(
    const phantom::DatasetManifest& manifest, int budget, std::uint64_t seed) {
  std::vector<const phantom::ManifestItem*> items = manifest.split_items("train");
  if (budget < 0 || budget > static_cast<int>(items.size()))
    throw std::invalid_argument("select_label_subset: budget " + std::to_string(budget) +
                                " exceeds training-set size " + std::to_string(items.size()));
  std::vector<std::size_t> perm(items.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(budget);
  std::sort(perm.begin(), perm.end());

  std::vector<const phantom::ManifestItem*> out;
  out.reserve(budget);
  for (std::size_t idx : perm) out.push_back(items[idx]);
  return out;
}

std::pair<net::NetworkParams, TrainHistory> train(const phantom::DatasetManifest& manifest,
                                                  const TrainConfig& config,
                                                  std::ostream* log) {
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (config.epochs < 0 || config.fine_tune_epochs < 0)
    throw std::invalid_argument("train: epoch counts must be non-negative");

  TrainHistory history;

  // Resolve the label budget before touching any data.
  const bool fine_tuned = config.mode == TrainMode::mode2 || config.mode == TrainMode::mode3;
  int budget = config.label_budget;
  if (fine_tuned) {
    const int mode_default = config.mode == TrainMode::mode2 ? 10 : 80;
    if (budget < 0) {
      budget = mode_default;
    } else if (budget != mode_default) {
      history.warnings.push_back("label budget overridden to " + std::to_string(budget) +
                                 " (default for " + mode_name(config.mode) + " is " +
                                 std::to_string(mode_default) + ")");
    }
  } else if (budget >= 0) {
    history.warnings.push_back(std::string("label budget is ignored in ") +
                               mode_name(config.mode));
  }

  const bool need_labels = config.mode == TrainMode::mode4;
  std::vector<Sample> samples = load_split(manifest, "train", need_labels, "train");
  if (samples.empty()) throw std::invalid_argument("train: manifest has no train items");
  std::vector<Sample> val = load_split(manifest, "test", false, "train");

  // Fine-tuned modes need labels on the selected subset before training starts.
  std::vector<std::size_t> subset_pool;
  if (fine_tuned) {
    const std::vector<const phantom::ManifestItem*> items = manifest.split_items("train");
    std::vector<const phantom::ManifestItem*> picked =
        select_label_subset(manifest, budget, config.seed);
    for (const phantom::ManifestItem* item : picked) {
      const auto it = std::find(items.begin(), items.end(), item);
      const std::size_t idx = static_cast<std::size_t>(it - items.begin());
      if (!samples[idx].has_label)
        throw std::invalid_argument("train: fine-tuning item " + item->image_path +
                                    " has no label");
      subset_pool.push_back(idx);
    }
  }

  net::NetworkParams params = net::init_params(config.net);
  std::mt19937_64 shuffle_rng(config.seed);

  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);

  const LossKind main_kind =
      config.mode == TrainMode::mode4 ? LossKind::combined : LossKind::acwe_only;
  run_phase(params, samples, all, val, config, config.epochs, main_kind, "main", shuffle_rng,
            history, log);

  if (fine_tuned) {
    const LossKind ft_kind =
        config.fine_tune_combined ? LossKind::combined : LossKind::label_only;
    run_phase(params, samples, subset_pool, val, config, config.fine_tune_epochs, ft_kind,
              "fine_tune", shuffle_rng, history, log);
  }
  return {std::move(params), std::move(history)};
}

std::string epoch_record_json_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["phase"] = record.phase;
  j["total"] = record.mean_loss.total;
  j["acwe_term"] = record.mean_loss.acwe_term;
  j["label_term"] = record.mean_loss.label_term;
  j["area_term"] = record.mean_loss.area_term;
  j["inside_residual"] = record.mean_loss.inside_residual;
  j["outside_residual"] = record.mean_loss.outside_residual;
  j["c1"] = record.mean_loss.c1;
  j["c2"] = record.mean_loss.c2;
  j["val_dsc"] = record.val_dsc;
  j["seconds"] = record.seconds;
  j["polarity_flip"] = record.polarity_flip;
  return j.dump();
}

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::mode1: return "mode1";
    case TrainMode::mode2: return "mode2";
    case TrainMode::mode3: return "mode3";
    case TrainMode::mode4: return "mode4";
  }
  throw std::invalid_argument("mode_name: unknown mode");
}

TrainMode mode_from_name(const std::string& name) {
  if (name == "mode1") return TrainMode::mode1;
  if (name == "mode2") return TrainMode::mode2;
  if (name == "mode3") return TrainMode::mode3;
  if (name == "mode4") return TrainMode::mode4;
  throw std::invalid_argument("unknown training mode: " + name);
}

}  // namespace acwe::train
