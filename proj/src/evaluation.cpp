#include "acwe/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "acwe/core.hpp"
#include "acwe/io.hpp"

namespace acwe::eval {

namespace {

struct LabeledCase {
  std::string name;
  Image image;  // normalized
  BinaryMask label;
};

std::vector<LabeledCase> load_labeled(const phantom::DatasetManifest& manifest,
                                      const std::string& split, const char* who) {
  const auto items = manifest.split_items(split);
  if (items.empty())
    throw std::invalid_argument(std::string(who) + ": split '" + split + "' is empty");
  std::vector<LabeledCase> cases;
  cases.reserve(items.size());
  for (const phantom::ManifestItem* item : items) {
    if (item->label_path.empty())
      throw std::invalid_argument(std::string(who) + ": item " + item->image_path +
                                  " has no label");
    cases.push_back({item->image_path, normalize(read_image(manifest.root / item->image_path)),
                     read_mask(manifest.root / item->label_path)});
  }
  return cases;
}

void finish_stats(DscResult& result) {
  double sum = 0.0, sumsq = 0.0;
  for (double d : result.per_item) {
    sum += d;
    sumsq += d * d;
  }
  const double n = static_cast<double>(result.per_item.size());
  result.mean = sum / n;
  result.stddev = std::sqrt(std::max(0.0, sumsq / n - result.mean * result.mean));
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

DscResult evaluate_dsc(net::NetworkParams& params, const phantom::DatasetManifest& manifest,
                       const std::string& split, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("evaluate_dsc: batch_size must be >= 1");
  std::vector<LabeledCase> cases = load_labeled(manifest, split, "evaluate_dsc");

  DscResult result;
  for (std::size_t start = 0; start < cases.size(); start += batch_size) {
    const std::size_t end = std::min(cases.size(), start + batch_size);
    std::vector<Image> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(cases[i].image);
    std::vector<ScoreField> scores = net::forward(params, batch, net::Mode::eval);
    for (std::size_t i = start; i < end; ++i) {
      result.per_item.push_back(dice(threshold(scores[i - start]), cases[i].label));
      result.names.push_back(cases[i].name);
    }
  }
  finish_stats(result);
  return result;
}

DscResult evaluate_dsc(const Segmenter& segmenter, const phantom::DatasetManifest& manifest,
                       const std::string& split) {
  std::vector<LabeledCase> cases = load_labeled(manifest, split, "evaluate_dsc");
  DscResult result;
  for (const LabeledCase& c : cases) {
    result.per_item.push_back(dice(segmenter(c.image), c.label));
    result.names.push_back(c.name);
  }
  finish_stats(result);
  return result;
}

TimingResult benchmark_timing(net::NetworkParams& params,
                              const phantom::DatasetManifest& manifest,
                              const std::string& split,
                              const levelset::LevelSetParams& ls_params, int repeats,
                              int max_images) {
  if (repeats < 1) throw std::invalid_argument("benchmark_timing: repeats must be >= 1");
  const auto items = manifest.split_items(split);
  std::vector<Image> images;
  for (const phantom::ManifestItem* item : items) {
    if (max_images > 0 && static_cast<int>(images.size()) >= max_images) break;
    images.push_back(normalize(read_image(manifest.root / item->image_path)));
  }
  if (images.size() < 10)
    throw std::invalid_argument("benchmark_timing: need at least 10 images, got " +
                                std::to_string(images.size()));

  // Warm-up, excluded from statistics.
  (void)threshold(net::forward(params, {images[0]}, net::Mode::eval)[0]);
  (void)levelset::run(images[0], ls_params);

  std::vector<double> net_times, ls_times;
  net_times.reserve(static_cast<std::size_t>(repeats) * images.size());
  ls_times.reserve(static_cast<std::size_t>(repeats) * images.size());
  for (int r = 0; r < repeats; ++r) {
    for (const Image& img : images) {
      const double t0 = now_seconds();
      (void)threshold(net::forward(params, {img}, net::Mode::eval)[0]);
      net_times.push_back(now_seconds() - t0);
    }
    for (const Image& img : images) {
      const double t0 = now_seconds();
      (void)levelset::run(img, ls_params);
      ls_times.push_back(now_seconds() - t0);
    }
  }

  TimingResult result;
  result.images = static_cast<int>(images.size());
  result.repeats = repeats;
  result.network_mean = mean_of(net_times);
  result.levelset_mean = mean_of(ls_times);
  if (repeats == 1) {
    result.low_sample_warning = true;  // degenerate statistics, by contract
    result.network_std = 0.0;
    result.levelset_std = 0.0;
  } else {
    result.network_std = population_std(net_times);
    result.levelset_std = population_std(ls_times);
  }
  result.ratio = result.levelset_mean / result.network_mean;
  return result;
}

std::vector<std::filesystem::path> render_gallery(const std::vector<Image>& images,
                                                  const std::vector<BinaryMask>& predictions,
                                                  const std::vector<BinaryMask>* labels,
                                                  const std::filesystem::path& out_dir) {
  if (images.size() != predictions.size() ||
      (labels != nullptr && labels->size() != images.size()))
    throw std::invalid_argument("render_gallery: input lists are not aligned");

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> files;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    const int h = img.height(), w = img.width();
    if (predictions[i].height() != h || predictions[i].width() != w ||
        (labels != nullptr && ((*labels)[i].height() != h || (*labels)[i].width() != w)))
      throw std::invalid_argument("render_gallery: case " + std::to_string(i) +
                                  " shapes are not aligned");

    double max_val = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k) max_val = std::max(max_val, img[k]);
    if (max_val <= 0.0) max_val = 1.0;

    const int cols = labels != nullptr ? 3 : 2;
    const int sep = 2;
    Grid<double> panel(h, cols * w + (cols - 1) * sep, 1.0);
    auto paint = [&](int col, auto&& pixel) {
      const int x0 = col * (w + sep);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) panel(y, x0 + x) = pixel(y, x);
    };
    paint(0, [&](int y, int x) { return img(y, x) / max_val; });
    paint(1, [&](int y, int x) {
      return 0.5 * img(y, x) / max_val + (predictions[i](y, x) ? 0.5 : 0.0);
    });
    if (labels != nullptr)
      paint(2, [&](int y, int x) {
        return 0.5 * img(y, x) / max_val + ((*labels)[i](y, x) ? 0.5 : 0.0);
      });

    char name[32];
    std::snprintf(name, sizeof(name), "case_%03zu.pgm", i);
    const std::filesystem::path file = out_dir / name;
    write_gray_pgm(file, panel);
    files.push_back(file);
  }
  return files;
}

void write_dsc_csv(const std::filesystem::path& path, const DscResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_dsc_csv: cannot open " + path.string());
  os << "image,dsc\n";
  for (std::size_t i = 0; i < result.per_item.size(); ++i)
    os << result.names[i] << "," << result.per_item[i] << "\n";
  os << "mean," << result.mean << "\n";
  os << "std_population," << result.stddev << "\n";
  if (!os) throw std::runtime_error("write_dsc_csv: write failed for " + path.string());
}

void write_dsc_markdown(const std::filesystem::path& path, const std::string& title,
                        const DscResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_dsc_markdown: cannot open " + path.string());
  os << "# " << title << "\n\n";
  os << "Std is the population standard deviation (N divisor).\n\n";
  os << "| images | mean DSC | std |\n|---|---|---|\n";
  os << "| " << result.per_item.size() << " | " << result.mean << " | " << result.stddev
     << " |\n";
  if (!os) throw std::runtime_error("write_dsc_markdown: write failed for " + path.string());
}

void write_timing_csv(const std::filesystem::path& path, const TimingResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_timing_csv: cannot open " + path.string());
  os << "method,mean_seconds,std_seconds_population\n";
  os << "network," << result.network_mean << "," << result.network_std << "\n";
  os << "levelset," << result.levelset_mean << "," << result.levelset_std << "\n";
  os << "ratio_levelset_over_network," << result.ratio << ",\n";
  if (result.low_sample_warning) os << "warning,single repeat: std degenerate,\n";
  if (!os) throw std::runtime_error("write_timing_csv: write failed for " + path.string());
}

void write_timing_markdown(const std::filesystem::path& path, const TimingResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_timing_markdown: cannot open " + path.string());
  os << "# Per-image segmentation time\n\n";
  os << "Mean over " << result.repeats << " repeat(s) x " << result.images
     << " images, warm-up excluded. Std is the population standard deviation.\n\n";
  os << "| method | time per image (s) |\n|---|---|\n";
  os << "| network | " << result.network_mean << " ± " << result.network_std << " |\n";
  os << "| level set | " << result.levelset_mean << " ± " << result.levelset_std << " |\n\n";
  os << "Speed ratio (level set / network): " << result.ratio << "\n";
  if (result.low_sample_warning)
    os << "\nWarning: a single repeat gives degenerate std estimates.\n";
  if (!os) throw std::runtime_error("write_timing_markdown: write failed for " + path.string());
}

}  // namespace acwe::eval
