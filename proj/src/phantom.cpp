#include "acwe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "acwe/io.hpp"

namespace acwe::phantom {

namespace {

constexpr int kMargin = 2;
constexpr int kMaxAttempts = 1000;
constexpr double kMinFgFraction = 0.01;
constexpr double kMaxFgFraction = 0.5;

struct Ellipse {
  double cy, cx, a, b, theta;  // semi-axes a (x'), b (y'), rotation theta
};

struct Capsule {
  double y0, x0, y1, x1, r;
};

bool ellipse_fits(const Ellipse& e, int h, int w) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double half_w = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
  const double half_h = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
  return e.cx - half_w >= kMargin && e.cx + half_w <= w - 1 - kMargin &&
         e.cy - half_h >= kMargin && e.cy + half_h <= h - 1 - kMargin;
}

bool capsule_fits(const Capsule& cap, int h, int w) {
  const double lo_x = std::min(cap.x0, cap.x1) - cap.r;
  const double hi_x = std::max(cap.x0, cap.x1) + cap.r;
  const double lo_y = std::min(cap.y0, cap.y1) - cap.r;
  const double hi_y = std::max(cap.y0, cap.y1) + cap.r;
  return lo_x >= kMargin && hi_x <= w - 1 - kMargin && lo_y >= kMargin && hi_y <= h - 1 - kMargin;
}

void rasterize_ellipse(BinaryMask& mask, const Ellipse& e) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const double dy = y - e.cy, dx = x - e.cx;
      const double u = (dx * c + dy * s) / e.a;
      const double v = (-dx * s + dy * c) / e.b;
      if (u * u + v * v <= 1.0) mask(y, x) = 1;
    }
}

void rasterize_capsule(BinaryMask& mask, const Capsule& cap) {
  const double vy = cap.y1 - cap.y0, vx = cap.x1 - cap.x0;
  const double len2 = vy * vy + vx * vx;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const double wy = y - cap.y0, wx = x - cap.x0;
      double t = len2 > 0.0 ? (wy * vy + wx * vx) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dy = wy - t * vy, dx = wx - t * vx;
      if (dy * dy + dx * dx <= cap.r * cap.r) mask(y, x) = 1;
    }
}

// Draws one structure arrangement; returns an empty label on placement failure.
bool draw_label(const PhantomSpec& spec, std::mt19937_64& rng, BinaryMask& label) {
  label = BinaryMask(spec.height, spec.width, 0);
  const double m = std::min(spec.height, spec.width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int k = 0; k < spec.n_structures; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const bool use_capsule = unit(rng) < 0.3;
      if (use_capsule) {
        Capsule cap;
        cap.r = std::max(2.0, (0.04 + 0.06 * unit(rng)) * m);
        const double len = (0.2 + 0.2 * unit(rng)) * m;
        const double ang = unit(rng) * 2.0 * M_PI;
        cap.y0 = kMargin + unit(rng) * (spec.height - 1 - 2 * kMargin);
        cap.x0 = kMargin + unit(rng) * (spec.width - 1 - 2 * kMargin);
        cap.y1 = cap.y0 + len * std::sin(ang);
        cap.x1 = cap.x0 + len * std::cos(ang);
        if (capsule_fits(cap, spec.height, spec.width)) {
          rasterize_capsule(label, cap);
          placed = true;
        }
      } else {
        Ellipse e;
        e.a = std::max(2.0, (0.06 + 0.12 * unit(rng)) * m);
        e.b = std::max(2.0, (0.06 + 0.12 * unit(rng)) * m);
        e.theta = unit(rng) * M_PI;
        e.cy = kMargin + unit(rng) * (spec.height - 1 - 2 * kMargin);
        e.cx = kMargin + unit(rng) * (spec.width - 1 - 2 * kMargin);
        if (ellipse_fits(e, spec.height, spec.width)) {
          rasterize_ellipse(label, e);
          placed = true;
        }
      }
    }
    if (!placed) return false;
  }
  return true;
}

double foreground_fraction(const BinaryMask& label) {
  long fg = 0;
  for (std::size_t i = 0; i < label.size(); ++i) fg += label[i] != 0;
  return static_cast<double>(fg) / static_cast<double>(label.size());
}

std::string noise_name(NoiseModel model) {
  return model == NoiseModel::poisson ? "poisson" : "none";
}

NoiseModel noise_from_name(const std::string& name) {
  if (name == "poisson") return NoiseModel::poisson;
  if (name == "none") return NoiseModel::none;
  throw std::runtime_error("manifest: unknown noise model '" + name + "'");
}

}  // namespace

void PhantomSpec::validate() const {
  if (height < 8 || width < 8)
    throw std::invalid_argument("phantom: grid must be at least 8x8");
  if (n_structures < 1 || n_structures > 8)
    throw std::invalid_argument("phantom: n_structures must be in 1..8");
  if (!(fg_lo > bg_intensity))
    throw std::invalid_argument("phantom: foreground intensity must exceed background");
  if (fg_hi < fg_lo) throw std::invalid_argument("phantom: fg_hi < fg_lo");
  if (bg_intensity < 0.0) throw std::invalid_argument("phantom: negative background");
  if (blur_sigma < 0.0) throw std::invalid_argument("phantom: negative blur sigma");
  if (noise == NoiseModel::poisson && noise_scale <= 0.0)
    throw std::invalid_argument("phantom: poisson scale must be positive");
}

Grid<double> gaussian_blur(const Grid<double>& grid, double sigma) {
  if (sigma <= 0.0) return grid;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += kernel[i + radius];
  }
  for (double& k : kernel) k /= norm;

  const int h = grid.height(), w = grid.width();
  Grid<double> tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * grid.at_clamped(y, x + i);
      tmp(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at_clamped(y + i, x);
      out(y, x) = acc;
    }
  return out;
}

std::pair<Image, BinaryMask> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  BinaryMask label;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
    if (!draw_label(spec, rng, label)) continue;
    const double frac = foreground_fraction(label);
    ok = frac >= kMinFgFraction && frac <= kMaxFgFraction;
  }
  if (!ok)
    throw std::runtime_error("phantom: no structure arrangement satisfied the "
                             "margin and foreground-fraction bounds after 1000 attempts");

  const double fg = spec.fg_lo + (spec.fg_hi - spec.fg_lo) * unit(rng);
  Image image(spec.height, spec.width);
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = spec.bg_intensity + (label[i] ? fg - spec.bg_intensity : 0.0);

  if (spec.blur_sigma > 0.0) image.data = gaussian_blur(image.data, spec.blur_sigma);

  if (spec.noise == NoiseModel::poisson) {
    for (std::size_t i = 0; i < image.size(); ++i) {
      std::poisson_distribution<long> poisson(image[i] * spec.noise_scale);
      image[i] = static_cast<double>(poisson(rng)) / spec.noise_scale;
    }
  }
  return {std::move(image), std::move(label)};
}

std::vector<const ManifestItem*> DatasetManifest::split_items(const std::string& split) const {
  std::vector<const ManifestItem*> out;
  for (const auto& item : items)
    if (item.split == split) out.push_back(&item);
  return out;
}

DatasetManifest generate_dataset(const PhantomSpec& spec, int n_train, int n_test,
                                 const std::filesystem::path& out_dir) {
  spec.validate();
  if (n_train < 0 || n_test < 0)
    throw std::invalid_argument("generate_dataset: negative item count");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("generate_dataset: cannot create " + out_dir.string());

  DatasetManifest manifest;
  manifest.spec = spec;
  manifest.root = out_dir;

  char name[64];
  for (int i = 0; i < n_train + n_test; ++i) {
    PhantomSpec item_spec = spec;
    item_spec.seed = spec.seed + static_cast<std::uint64_t>(i);
    auto [image, label] = generate_phantom(item_spec);

    const bool is_train = i < n_train;
    const int index = is_train ? i : i - n_train;
    std::snprintf(name, sizeof(name), "%s_%04d", is_train ? "train" : "test", index);

    ManifestItem item;
    item.image_path = std::string(name) + ".img.f32";
    item.label_path = std::string(name) + ".label.f32";
    item.seed = item_spec.seed;
    item.split = is_train ? "train" : "test";
    write_image(out_dir / item.image_path, image);
    write_mask(out_dir / item.label_path, label);
    manifest.items.push_back(std::move(item));
  }

  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "acwe-dataset";
  j["version"] = manifest.version;
  j["spec"] = {
      {"height", manifest.spec.height},
      {"width", manifest.spec.width},
      {"n_structures", manifest.spec.n_structures},
      {"fg_lo", manifest.spec.fg_lo},
      {"fg_hi", manifest.spec.fg_hi},
      {"bg_intensity", manifest.spec.bg_intensity},
      {"blur_sigma", manifest.spec.blur_sigma},
      {"noise", noise_name(manifest.spec.noise)},
      {"noise_scale", manifest.spec.noise_scale},
      {"seed", manifest.spec.seed},
  };
  j["items"] = nlohmann::ordered_json::array();
  for (const auto& item : manifest.items) {
    nlohmann::ordered_json ji;
    ji["image"] = item.image_path;
    ji["label"] = item.label_path;
    ji["seed"] = item.seed;
    ji["split"] = item.split;
    j["items"].push_back(std::move(ji));
  }

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest: " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("manifest write failed: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("bad manifest " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "acwe-dataset")
    throw std::runtime_error("not a dataset manifest: " + path.string());

  DatasetManifest manifest;
  manifest.version = j.value("version", 1);
  const auto& s = j.at("spec");
  manifest.spec.height = s.at("height").get<int>();
  manifest.spec.width = s.at("width").get<int>();
  manifest.spec.n_structures = s.at("n_structures").get<int>();
  manifest.spec.fg_lo = s.at("fg_lo").get<double>();
  manifest.spec.fg_hi = s.at("fg_hi").get<double>();
  manifest.spec.bg_intensity = s.at("bg_intensity").get<double>();
  manifest.spec.blur_sigma = s.at("blur_sigma").get<double>();
  manifest.spec.noise = noise_from_name(s.at("noise").get<std::string>());
  manifest.spec.noise_scale = s.at("noise_scale").get<double>();
  manifest.spec.seed = s.at("seed").get<std::uint64_t>();
  for (const auto& ji : j.at("items")) {
    ManifestItem item;
    item.image_path = ji.at("image").get<std::string>();
    item.label_path = ji.value("label", "");
    item.seed = ji.at("seed").get<std::uint64_t>();
    item.split = ji.at("split").get<std::string>();
    manifest.items.push_back(std::move(item));
  }
  manifest.root = path.parent_path();
  return manifest;
}

void validate_manifest(const DatasetManifest& manifest) {
  for (const auto& item : manifest.items) {
    if (item.split != "train" && item.split != "test")
      throw std::runtime_error("manifest: item '" + item.image_path + "' has unknown split '" +
                               item.split + "'");
    const Image image = read_image(manifest.root / item.image_path);
    if (image.height() != manifest.spec.height || image.width() != manifest.spec.width)
      throw std::runtime_error("manifest: shape mismatch for " + item.image_path);
    if (!item.label_path.empty()) {
      const BinaryMask label = read_mask(manifest.root / item.label_path);
      if (label.height() != manifest.spec.height || label.width() != manifest.spec.width)
        throw std::runtime_error("manifest: shape mismatch for " + item.label_path);
    }
  }
  // Disjoint splits: a path may appear in one split only.
  for (std::size_t i = 0; i < manifest.items.size(); ++i)
    for (std::size_t k = i + 1; k < manifest.items.size(); ++k)
      if (manifest.items[i].image_path == manifest.items[k].image_path)
        throw std::runtime_error("manifest: duplicate item " + manifest.items[i].image_path);
}

}  // namespace acwe::phantom
