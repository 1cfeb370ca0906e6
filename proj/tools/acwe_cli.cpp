// acwe: synthetic-phantom segmentation toolkit.
//
// Subcommands: gen-data, train, segment, baseline, eval, bench.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acwe/core.hpp"
#include "acwe/evaluation.hpp"
#include "acwe/io.hpp"
#include "acwe/levelset.hpp"
#include "acwe/losses.hpp"
#include "acwe/network.hpp"
#include "acwe/phantom.hpp"
#include "acwe/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

fs::path manifest_path(const fs::path& data) {
  if (fs::is_directory(data)) return data / "manifest.json";
  return data;
}

void write_resolved_config(const fs::path& out_dir, const ordered_json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "config.resolved.json");
  os << resolved.dump(2) << "\n";
  if (!os)
    throw std::runtime_error("cannot write " + (out_dir / "config.resolved.json").string());
}

// Applies a JSON config value unless the flag was given on the command line.
template <typename T>
void merge_config(const nlohmann::json& cfg, const char* key, const CLI::Option* opt,
                  T& target) {
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) target = cfg[key].get<T>();
}

struct GenDataArgs {
  std::string out;
  int n_train = 200, n_test = 50;
  int size = 64;
  int n_structures = 3;
  std::string noise = "poisson";
  double noise_scale = 50.0;
  double blur_sigma = 1.0;
  double fg_lo = 0.8, fg_hi = 1.2, bg = 0.2;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& a) {
  acwe::phantom::PhantomSpec spec;
  spec.height = a.size;
  spec.width = a.size;
  spec.n_structures = a.n_structures;
  spec.fg_lo = a.fg_lo;
  spec.fg_hi = a.fg_hi;
  spec.bg_intensity = a.bg;
  spec.blur_sigma = a.blur_sigma;
  spec.noise = a.noise == "none" ? acwe::phantom::NoiseModel::none
                                 : acwe::phantom::NoiseModel::poisson;
  spec.noise_scale = a.noise_scale;
  spec.seed = a.seed;
  spec.validate();

  const auto manifest = acwe::phantom::generate_dataset(spec, a.n_train, a.n_test, a.out);

  ordered_json resolved;
  resolved["command"] = "gen-data";
  resolved["out"] = a.out;
  resolved["n_train"] = a.n_train;
  resolved["n_test"] = a.n_test;
  resolved["size"] = a.size;
  resolved["n_structures"] = a.n_structures;
  resolved["noise"] = a.noise;
  resolved["noise_scale"] = a.noise_scale;
  resolved["blur_sigma"] = a.blur_sigma;
  resolved["fg_lo"] = a.fg_lo;
  resolved["fg_hi"] = a.fg_hi;
  resolved["bg"] = a.bg;
  resolved["seed"] = a.seed;
  write_resolved_config(a.out, resolved);

  std::cout << "wrote " << manifest.items.size() << " items under " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string config_file;
  int mode = 1;
  int epochs = 20, fine_tune_epochs = 10, batch = 8;
  double lr = 1e-3;
  double alpha = 0.4, nu = 0.004, beta = 1.0;
  double lambda1 = 1.0, lambda2 = 1.0;
  int label_budget = -1;
  bool fine_tune_combined = false;
  std::uint64_t seed = 0;
  int channels = 32, time_steps = 3;
  std::string out_ckpt;
  std::string log_path;
};

int cmd_train(TrainArgs& a, const std::map<std::string, const CLI::Option*>& opts) {
  if (!a.config_file.empty()) {
    std::ifstream is(a.config_file);
    if (!is) throw std::runtime_error("cannot open config file " + a.config_file);
    nlohmann::json cfg = nlohmann::json::parse(is);
    merge_config(cfg, "mode", opts.at("mode"), a.mode);
    merge_config(cfg, "epochs", opts.at("epochs"), a.epochs);
    merge_config(cfg, "fine_tune_epochs", opts.at("fine-tune-epochs"), a.fine_tune_epochs);
    merge_config(cfg, "batch", opts.at("batch"), a.batch);
    merge_config(cfg, "lr", opts.at("lr"), a.lr);
    merge_config(cfg, "alpha", opts.at("alpha"), a.alpha);
    merge_config(cfg, "nu", opts.at("nu"), a.nu);
    merge_config(cfg, "beta", opts.at("beta"), a.beta);
    merge_config(cfg, "lambda1", opts.at("lambda1"), a.lambda1);
    merge_config(cfg, "lambda2", opts.at("lambda2"), a.lambda2);
    merge_config(cfg, "label_budget", opts.at("label-budget"), a.label_budget);
    merge_config(cfg, "fine_tune_combined", opts.at("fine-tune-combined"),
                 a.fine_tune_combined);
    merge_config(cfg, "seed", opts.at("seed"), a.seed);
    merge_config(cfg, "channels", opts.at("channels"), a.channels);
    merge_config(cfg, "time_steps", opts.at("time-steps"), a.time_steps);
  }

  acwe::train::TrainConfig config;
  config.mode = acwe::train::mode_from_name("mode" + std::to_string(a.mode));
  config.label_budget = a.label_budget;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.lr;
  config.fine_tune_epochs = a.fine_tune_epochs;
  config.fine_tune_combined = a.fine_tune_combined;
  config.seed = a.seed;
  config.hp.alpha = a.alpha;
  config.hp.nu = a.nu;
  config.hp.beta = a.beta;
  config.hp.lambda1 = a.lambda1;
  config.hp.lambda2 = a.lambda2;
  config.net.feature_channels = a.channels;
  config.net.time_steps = a.time_steps;
  config.net.seed = a.seed;

  const auto manifest = acwe::phantom::load_manifest(manifest_path(a.data));

  const fs::path ckpt_path(a.out_ckpt);
  const fs::path out_dir = ckpt_path.has_parent_path() ? ckpt_path.parent_path() : fs::path(".");
  fs::create_directories(out_dir);
  const fs::path log_path =
      a.log_path.empty() ? fs::path(a.out_ckpt + ".log.jsonl") : fs::path(a.log_path);
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open log file " + log_path.string());

  auto [params, history] = acwe::train::train(manifest, config, &log);
  for (const std::string& warning : history.warnings)
    std::cerr << "warning: " << warning << "\n";
  acwe::net::save_checkpoint(params, ckpt_path);

  ordered_json resolved;
  resolved["command"] = "train";
  resolved["data"] = a.data;
  resolved["mode"] = a.mode;
  resolved["epochs"] = a.epochs;
  resolved["fine_tune_epochs"] = a.fine_tune_epochs;
  resolved["batch"] = a.batch;
  resolved["lr"] = a.lr;
  resolved["alpha"] = a.alpha;
  resolved["nu"] = a.nu;
  resolved["beta"] = a.beta;
  resolved["lambda1"] = a.lambda1;
  resolved["lambda2"] = a.lambda2;
  resolved["label_budget"] = a.label_budget;
  resolved["fine_tune_combined"] = a.fine_tune_combined;
  resolved["seed"] = a.seed;
  resolved["channels"] = a.channels;
  resolved["time_steps"] = a.time_steps;
  resolved["out_ckpt"] = a.out_ckpt;
  resolved["log"] = log_path.string();
  write_resolved_config(out_dir, resolved);

  if (!history.epochs.empty()) {
    const auto& last = history.epochs.back();
    std::cout << "trained " << history.epochs.size() << " epoch(s); final loss "
              << last.mean_loss.total << ", validation DSC " << last.val_dsc << "\n";
  }
  std::cout << "checkpoint: " << a.out_ckpt << "\nlog: " << log_path.string() << "\n";
  return 0;
}

struct SegmentArgs {
  std::string ckpt, image, out_mask;
};

int cmd_segment(const SegmentArgs& a) {
  acwe::net::NetworkParams params = acwe::net::load_checkpoint(a.ckpt);
  const acwe::Image image = acwe::normalize(acwe::read_image(a.image));
  const acwe::ScoreField score =
      std::move(acwe::net::forward(params, {image}, acwe::net::Mode::eval)[0]);
  const acwe::BinaryMask mask = acwe::threshold(score);

  if (a.out_mask == "-") {
    acwe::write_mask_pgm(std::cout, mask);
  } else if (fs::path(a.out_mask).extension() == ".pgm") {
    acwe::write_mask_pgm(fs::path(a.out_mask), mask);
  } else {
    acwe::write_mask(a.out_mask, mask);
  }
  return 0;
}

struct BaselineArgs {
  std::string data, out;
  std::string split = "test";
  double mu = 0.1, nu = 0.0, lambda1 = 1.0, lambda2 = 1.0;
  double dt = 0.5, epsilon = 1.0, tol = 1e-4;
  int max_iters = 500;
  std::string init = "checkerboard";
  int max_images = 0;
};

int cmd_baseline(const BaselineArgs& a) {
  const auto manifest = acwe::phantom::load_manifest(manifest_path(a.data));
  const auto items = manifest.split_items(a.split);
  if (items.empty()) throw std::runtime_error("split '" + a.split + "' is empty");

  acwe::levelset::LevelSetParams params;
  params.mu = a.mu;
  params.nu = a.nu;
  params.lambda1 = a.lambda1;
  params.lambda2 = a.lambda2;
  params.dt = a.dt;
  params.epsilon = a.epsilon;
  params.tol = a.tol;
  params.max_iters = a.max_iters;
  params.init = a.init == "circle" ? acwe::levelset::InitScheme::centered_circle
                                   : acwe::levelset::InitScheme::checkerboard;

  fs::create_directories(a.out);
  std::ofstream records(fs::path(a.out) / "records.jsonl");
  if (!records) throw std::runtime_error("cannot open records.jsonl under " + a.out);

  acwe::eval::DscResult dsc;
  bool all_labeled = true;
  int done = 0;
  for (const auto* item : items) {
    if (a.max_images > 0 && done >= a.max_images) break;
    const acwe::Image image =
        acwe::normalize(acwe::read_image(manifest.root / item->image_path));
    const auto result = acwe::levelset::run(image, params);

    ordered_json record;
    record["image"] = item->image_path;
    if (!item->label_path.empty()) {
      const double d =
          acwe::dice(result.mask, acwe::read_mask(manifest.root / item->label_path));
      record["dsc"] = d;
      dsc.per_item.push_back(d);
      dsc.names.push_back(item->image_path);
    } else {
      record["dsc"] = nullptr;
      all_labeled = false;
    }
    record["iterations"] = result.iterations;
    record["seconds"] = result.seconds;
    record["final_energy"] = result.energy_history.back();
    record["converged"] = result.converged;
    if (result.stalled) record["stalled"] = true;
    records << record.dump() << "\n";

    fs::path name(item->image_path);
    std::string stem = name.filename().string();
    if (const auto pos = stem.find(".img.f32"); pos != std::string::npos)
      stem = stem.substr(0, pos);
    else
      stem = name.stem().string();
    acwe::write_mask(fs::path(a.out) / (stem + ".mask.f32"), result.mask);
    done += 1;
  }

  if (all_labeled && !dsc.per_item.empty()) {
    double sum = 0.0, sumsq = 0.0;
    for (double d : dsc.per_item) {
      sum += d;
      sumsq += d * d;
    }
    const double n = static_cast<double>(dsc.per_item.size());
    dsc.mean = sum / n;
    dsc.stddev = std::sqrt(std::max(0.0, sumsq / n - dsc.mean * dsc.mean));
    acwe::eval::write_dsc_csv(fs::path(a.out) / "dsc.csv", dsc);
    acwe::eval::write_dsc_markdown(fs::path(a.out) / "dsc.md", "Level-set baseline DSC", dsc);
    std::cout << "baseline DSC " << dsc.mean << " +/- " << dsc.stddev << " over "
              << dsc.per_item.size() << " images\n";
  } else {
    std::cout << "baseline processed " << done << " images (no full label coverage)\n";
  }

  ordered_json resolved;
  resolved["command"] = "baseline";
  resolved["data"] = a.data;
  resolved["split"] = a.split;
  resolved["mu"] = a.mu;
  resolved["nu"] = a.nu;
  resolved["lambda1"] = a.lambda1;
  resolved["lambda2"] = a.lambda2;
  resolved["dt"] = a.dt;
  resolved["epsilon"] = a.epsilon;
  resolved["tol"] = a.tol;
  resolved["max_iters"] = a.max_iters;
  resolved["init"] = a.init;
  resolved["max_images"] = a.max_images;
  write_resolved_config(a.out, resolved);
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, out;
  std::string split = "test";
  int gallery = 0;
  int batch = 8;
};

int cmd_eval(const EvalArgs& a) {
  acwe::net::NetworkParams params = acwe::net::load_checkpoint(a.ckpt);
  const auto manifest = acwe::phantom::load_manifest(manifest_path(a.data));
  const auto result = acwe::eval::evaluate_dsc(params, manifest, a.split, a.batch);

  fs::create_directories(a.out);
  acwe::eval::write_dsc_csv(fs::path(a.out) / "dsc.csv", result);
  acwe::eval::write_dsc_markdown(fs::path(a.out) / "dsc.md", "Network DSC (" + a.split + ")",
                                 result);

  if (a.gallery > 0) {
    std::vector<acwe::Image> images;
    std::vector<acwe::BinaryMask> predictions, labels;
    for (const auto* item : manifest.split_items(a.split)) {
      if (static_cast<int>(images.size()) >= a.gallery) break;
      acwe::Image img = acwe::normalize(acwe::read_image(manifest.root / item->image_path));
      predictions.push_back(acwe::threshold(
          acwe::net::forward(params, {img}, acwe::net::Mode::eval)[0]));
      labels.push_back(acwe::read_mask(manifest.root / item->label_path));
      images.push_back(std::move(img));
    }
    acwe::eval::render_gallery(images, predictions, &labels, fs::path(a.out) / "gallery");
  }

  ordered_json resolved;
  resolved["command"] = "eval";
  resolved["ckpt"] = a.ckpt;
  resolved["data"] = a.data;
  resolved["split"] = a.split;
  resolved["gallery"] = a.gallery;
  resolved["batch"] = a.batch;
  write_resolved_config(a.out, resolved);

  std::cout << "DSC " << result.mean << " +/- " << result.stddev << " over "
            << result.per_item.size() << " images\n";
  return 0;
}

struct BenchArgs {
  std::string ckpt, data, out;
  std::string split = "test";
  int repeats = 5;
  int max_images = 0;
  double mu = 0.1, nu = 0.0, dt = 0.5, epsilon = 1.0, tol = 1e-4;
  int max_iters = 500;
};

int cmd_bench(const BenchArgs& a) {
  acwe::net::NetworkParams params = acwe::net::load_checkpoint(a.ckpt);
  const auto manifest = acwe::phantom::load_manifest(manifest_path(a.data));

  acwe::levelset::LevelSetParams ls;
  ls.mu = a.mu;
  ls.nu = a.nu;
  ls.dt = a.dt;
  ls.epsilon = a.epsilon;
  ls.tol = a.tol;
  ls.max_iters = a.max_iters;

  const auto result =
      acwe::eval::benchmark_timing(params, manifest, a.split, ls, a.repeats, a.max_images);

  fs::create_directories(a.out);
  acwe::eval::write_timing_csv(fs::path(a.out) / "timing.csv", result);
  acwe::eval::write_timing_markdown(fs::path(a.out) / "timing.md", result);

  ordered_json resolved;
  resolved["command"] = "bench";
  resolved["ckpt"] = a.ckpt;
  resolved["data"] = a.data;
  resolved["split"] = a.split;
  resolved["repeats"] = a.repeats;
  resolved["max_images"] = a.max_images;
  resolved["mu"] = a.mu;
  resolved["nu"] = a.nu;
  resolved["dt"] = a.dt;
  resolved["epsilon"] = a.epsilon;
  resolved["tol"] = a.tol;
  resolved["max_iters"] = a.max_iters;
  write_resolved_config(a.out, resolved);

  std::cout << "network " << result.network_mean << " s/image, levelset "
            << result.levelset_mean << " s/image, ratio " << result.ratio << "\n";
  if (result.low_sample_warning)
    std::cerr << "warning: single repeat, std estimates are degenerate\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Self-supervised phantom segmentation: recurrent ConvNet trained on the "
      "region-energy loss, classical level-set baseline, and evaluation tools."};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads,
                 "worker cap (this build executes single-threaded regardless; kept at 1 "
                 "for reproducibility)")
      ->capture_default_str();

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--n-train", gen.n_train, "training images")->capture_default_str();
  gen_cmd->add_option("--n-test", gen.n_test, "test images")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "image height and width")->capture_default_str();
  gen_cmd->add_option("--n-structures", gen.n_structures, "structures per phantom (1-8)")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "noise model: poisson or none")
      ->check(CLI::IsMember({"poisson", "none"}))
      ->capture_default_str();
  gen_cmd->add_option("--noise-scale", gen.noise_scale, "Poisson counts per unit intensity")
      ->capture_default_str();
  gen_cmd->add_option("--blur-sigma", gen.blur_sigma, "Gaussian blur sigma in pixels")
      ->capture_default_str();
  gen_cmd->add_option("--fg-lo", gen.fg_lo, "foreground intensity lower bound")
      ->capture_default_str();
  gen_cmd->add_option("--fg-hi", gen.fg_hi, "foreground intensity upper bound")
      ->capture_default_str();
  gen_cmd->add_option("--bg", gen.bg, "background intensity")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();

  TrainArgs tr;
  std::map<std::string, const CLI::Option*> tr_opts;
  CLI::App* tr_cmd = app.add_subcommand("train", "train the segmentation network");
  tr_cmd->add_option("--data", tr.data, "dataset directory or manifest path")->required();
  tr_cmd->add_option("--config", tr.config_file,
                     "JSON config file; command-line flags win over file values");
  tr_opts["mode"] = tr_cmd->add_option("--mode", tr.mode,
                                       "1: self-supervised; 2: +fine-tune on 10 labels; "
                                       "3: +fine-tune on 80 labels; 4: joint supervised")
                        ->check(CLI::Range(1, 4))
                        ->capture_default_str();
  tr_opts["epochs"] =
      tr_cmd->add_option("--epochs", tr.epochs, "main-phase epochs")->capture_default_str();
  tr_opts["fine-tune-epochs"] =
      tr_cmd->add_option("--fine-tune-epochs", tr.fine_tune_epochs, "fine-tune epochs (modes 2-3)")
          ->capture_default_str();
  tr_opts["batch"] = tr_cmd->add_option("--batch", tr.batch, "batch size")->capture_default_str();
  tr_opts["lr"] = tr_cmd->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
  tr_opts["alpha"] = tr_cmd->add_option("--alpha", tr.alpha, "label-loss weight")
                         ->capture_default_str();
  tr_opts["nu"] = tr_cmd->add_option("--nu", tr.nu, "area-term weight")->capture_default_str();
  tr_opts["beta"] = tr_cmd->add_option("--beta", tr.beta, "sigmoid sharpness of the soft mask")
                        ->capture_default_str();
  tr_opts["lambda1"] = tr_cmd->add_option("--lambda1", tr.lambda1, "inside-residual weight")
                           ->capture_default_str();
  tr_opts["lambda2"] = tr_cmd->add_option("--lambda2", tr.lambda2, "outside-residual weight")
                           ->capture_default_str();
  tr_opts["label-budget"] =
      tr_cmd->add_option("--label-budget", tr.label_budget,
                         "labels for fine-tuning; -1 = mode default (10 or 80)")
          ->capture_default_str();
  tr_opts["fine-tune-combined"] =
      tr_cmd->add_flag("--fine-tune-combined", tr.fine_tune_combined,
                       "fine-tune on region+label loss instead of label loss alone");
  tr_opts["seed"] = tr_cmd->add_option("--seed", tr.seed, "run seed")->capture_default_str();
  tr_opts["channels"] = tr_cmd->add_option("--channels", tr.channels, "feature channels")
                            ->capture_default_str();
  tr_opts["time-steps"] =
      tr_cmd->add_option("--time-steps", tr.time_steps, "recurrent time steps T")
          ->capture_default_str();
  tr_cmd->add_option("--out-ckpt", tr.out_ckpt, "checkpoint output path")->required();
  tr_cmd->add_option("--log", tr.log_path, "JSON-lines log path (default <out-ckpt>.log.jsonl)");

  SegmentArgs seg;
  CLI::App* seg_cmd = app.add_subcommand("segment", "segment one image with a checkpoint");
  seg_cmd->add_option("--ckpt", seg.ckpt, "checkpoint path")->required();
  seg_cmd->add_option("--image", seg.image, "input image (.f32 with JSON sidecar)")->required();
  seg_cmd->add_option("--out-mask", seg.out_mask,
                      "output mask path (.pgm for PGM, '-' for PGM on stdout)")
      ->required();

  BaselineArgs base;
  CLI::App* base_cmd =
      app.add_subcommand("baseline", "run the classical level-set solver over a split");
  base_cmd->add_option("--data", base.data, "dataset directory or manifest path")->required();
  base_cmd->add_option("--out", base.out, "output directory")->required();
  base_cmd->add_option("--split", base.split, "manifest split")->capture_default_str();
  base_cmd->add_option("--mu", base.mu, "length weight")->capture_default_str();
  base_cmd->add_option("--nu", base.nu, "area weight")->capture_default_str();
  base_cmd->add_option("--lambda1", base.lambda1, "inside-residual weight")
      ->capture_default_str();
  base_cmd->add_option("--lambda2", base.lambda2, "outside-residual weight")
      ->capture_default_str();
  base_cmd->add_option("--dt", base.dt, "descent step size")->capture_default_str();
  base_cmd->add_option("--epsilon", base.epsilon, "Heaviside smoothing width")
      ->capture_default_str();
  base_cmd->add_option("--tol", base.tol, "convergence threshold on mean |delta phi|")
      ->capture_default_str();
  base_cmd->add_option("--max-iters", base.max_iters, "iteration cap")->capture_default_str();
  base_cmd->add_option("--init", base.init, "phi init: checkerboard or circle")
      ->check(CLI::IsMember({"checkerboard", "circle"}))
      ->capture_default_str();
  base_cmd->add_option("--max-images", base.max_images, "limit processed images (0 = all)")
      ->capture_default_str();

  EvalArgs ev;
  CLI::App* ev_cmd = app.add_subcommand("eval", "DSC table for a checkpoint on a split");
  ev_cmd->add_option("--ckpt", ev.ckpt, "checkpoint path")->required();
  ev_cmd->add_option("--data", ev.data, "dataset directory or manifest path")->required();
  ev_cmd->add_option("--out", ev.out, "output directory")->required();
  ev_cmd->add_option("--split", ev.split, "manifest split")->capture_default_str();
  ev_cmd->add_option("--gallery", ev.gallery, "render the first N qualitative panels")
      ->capture_default_str();
  ev_cmd->add_option("--batch", ev.batch, "inference batch size")->capture_default_str();

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "per-image timing: network vs level-set solver");
  bench_cmd->add_option("--ckpt", bench.ckpt, "checkpoint path")->required();
  bench_cmd->add_option("--data", bench.data, "dataset directory or manifest path")->required();
  bench_cmd->add_option("--out", bench.out, "output directory")->required();
  bench_cmd->add_option("--split", bench.split, "manifest split")->capture_default_str();
  bench_cmd->add_option("--repeats", bench.repeats, "timing repeats per image")
      ->capture_default_str();
  bench_cmd->add_option("--max-images", bench.max_images,
                        "limit timed images (0 = all, minimum 10)")
      ->capture_default_str();
  bench_cmd->add_option("--mu", bench.mu, "level-set length weight")->capture_default_str();
  bench_cmd->add_option("--nu", bench.nu, "level-set area weight")->capture_default_str();
  bench_cmd->add_option("--dt", bench.dt, "level-set step size")->capture_default_str();
  bench_cmd->add_option("--epsilon", bench.epsilon, "Heaviside smoothing width")
      ->capture_default_str();
  bench_cmd->add_option("--tol", bench.tol, "level-set convergence threshold")
      ->capture_default_str();
  bench_cmd->add_option("--max-iters", bench.max_iters, "level-set iteration cap")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads < 1) {
    std::cerr << "error: --threads must be >= 1\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (tr_cmd->parsed()) return cmd_train(tr, tr_opts);
    if (seg_cmd->parsed()) return cmd_segment(seg);
    if (base_cmd->parsed()) return cmd_baseline(base);
    if (ev_cmd->parsed()) return cmd_eval(ev);
    if (bench_cmd->parsed()) return cmd_bench(bench);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
