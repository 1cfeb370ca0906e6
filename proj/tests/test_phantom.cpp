#include <fstream>
#include <set>
#include <stdexcept>

#include <doctest.h>

#include "acwe/core.hpp"
#include "acwe/io.hpp"
#include "acwe/phantom.hpp"
#include "helpers.hpp"

using namespace acwe;
using namespace acwe::phantom;
using testutil::TempDir;

TEST_CASE("generate_phantom is deterministic in the seed") {
  const PhantomSpec spec = testutil::tiny_spec(32, 5);
  const auto [img_a, lab_a] = generate_phantom(spec);
  const auto [img_b, lab_b] = generate_phantom(spec);
  CHECK(lab_a == lab_b);
  for (std::size_t i = 0; i < img_a.size(); ++i) CHECK(img_a[i] == img_b[i]);

  PhantomSpec other = spec;
  other.seed = 6;
  const auto [img_c, lab_c] = generate_phantom(other);
  bool identical = lab_c == lab_a;
  for (std::size_t i = 0; identical && i < img_c.size(); ++i)
    identical = img_c[i] == img_a[i];
  CHECK(!identical);
}

TEST_CASE("phantom labels are binary and respect the coverage bounds") {
  PhantomSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.n_structures = 3;
  spec.seed = 9;
  const auto [img, label] = generate_phantom(spec);

  std::size_t fg = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    CHECK((label[i] == 0 || label[i] == 1));
    fg += label[i];
  }
  const double fraction = static_cast<double>(fg) / label.size();
  CHECK(fraction >= 0.01);
  CHECK(fraction <= 0.5);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(img[i] >= 0.0);
}

TEST_CASE("clean phantoms are exactly two-valued and match the label") {
  PhantomSpec spec = testutil::tiny_spec(32, 13);
  spec.blur_sigma = 0.0;
  const auto [img, label] = generate_phantom(spec);

  std::set<double> values(img.data.values().begin(), img.data.values().end());
  REQUIRE(values.size() == 2);
  const double lo = *values.begin(), hi = *values.rbegin();
  const double mid = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK((img[i] > mid ? 1 : 0) == label[i]);
}

TEST_CASE("gaussian_blur edge cases") {
  const Grid<double> grid = testutil::random_image(9, 9, 17).data;

  SUBCASE("sigma zero is the identity") {
    const Grid<double> out = gaussian_blur(grid, 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(out[i] == grid[i]);
  }
  SUBCASE("constants are preserved exactly by the normalized kernel") {
    const Grid<double> flat(7, 5, 0.37);
    const Grid<double> out = gaussian_blur(flat, 1.3);
    for (std::size_t i = 0; i < flat.size(); ++i)
      CHECK(out[i] == doctest::Approx(0.37).epsilon(1e-12));
  }
  SUBCASE("blurring smooths a spike without moving mass off a big grid") {
    Grid<double> spike(21, 21, 0.0);
    spike(10, 10) = 1.0;
    const Grid<double> out = gaussian_blur(spike, 1.0);
    CHECK(out(10, 10) < 1.0);
    CHECK(out(10, 10) > out(10, 7));
    double mass = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) mass += out[i];
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));  // kernel support fits inside
  }
}

TEST_CASE("spec validation names each violation") {
  PhantomSpec spec;

  spec.height = 4;
  CHECK_THROWS_WITH_AS(spec.validate(), "phantom: grid must be at least 8x8",
                       std::invalid_argument);
  spec.height = 64;

  spec.n_structures = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.n_structures = 9;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.n_structures = 3;

  spec.fg_lo = 0.1;  // below bg_intensity
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.fg_lo = 0.8;

  spec.fg_hi = 0.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.fg_hi = 1.2;

  spec.bg_intensity = -0.1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.bg_intensity = 0.2;

  spec.blur_sigma = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.blur_sigma = 1.0;

  spec.noise_scale = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.noise_scale = 50.0;

  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("generate_dataset lays out files, seeds, and splits") {
  TempDir tmp;
  const DatasetManifest manifest = testutil::tiny_dataset(tmp.path(), 4, 2, 16, 100);

  REQUIRE(manifest.items.size() == 6);
  CHECK(manifest.root == tmp.path());
  CHECK(manifest.split_items("train").size() == 4);
  CHECK(manifest.split_items("test").size() == 2);
  CHECK(manifest.split_items("other").empty());

  CHECK(manifest.items[0].image_path == "train_0000.img.f32");
  CHECK(manifest.items[0].label_path == "train_0000.label.f32");
  CHECK(manifest.items[5].image_path == "test_0001.img.f32");
  for (std::size_t i = 0; i < manifest.items.size(); ++i)
    CHECK(manifest.items[i].seed == 100 + i);  // item seed = spec seed + index

  for (const auto& item : manifest.items) {
    CHECK(std::filesystem::exists(tmp.path() / item.image_path));
    CHECK(std::filesystem::exists(tmp.path() / item.label_path));
  }
  CHECK(std::filesystem::exists(tmp.path() / "manifest.json"));

  // per-item content equals a direct generate_phantom at the item seed
  PhantomSpec spec = testutil::tiny_spec(16, 100);
  spec.seed = manifest.items[2].seed;
  const auto [img, label] = generate_phantom(spec);
  const Image loaded = read_image(tmp.path() / manifest.items[2].image_path);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(loaded[i] == static_cast<double>(static_cast<float>(img[i])));

  CHECK_THROWS_AS(generate_dataset(testutil::tiny_spec(), -1, 2, tmp.path() / "neg"),
                  std::invalid_argument);
}

TEST_CASE("manifests round-trip and validate") {
  TempDir tmp;
  const DatasetManifest manifest = testutil::tiny_dataset(tmp.path(), 3, 2, 16, 55);
  CHECK_NOTHROW(validate_manifest(manifest));

  const DatasetManifest loaded = load_manifest(tmp.path() / "manifest.json");
  CHECK(loaded.version == manifest.version);
  CHECK(loaded.spec.height == manifest.spec.height);
  CHECK(loaded.spec.seed == manifest.spec.seed);
  CHECK(loaded.spec.noise == manifest.spec.noise);
  REQUIRE(loaded.items.size() == manifest.items.size());
  for (std::size_t i = 0; i < loaded.items.size(); ++i) {
    CHECK(loaded.items[i].image_path == manifest.items[i].image_path);
    CHECK(loaded.items[i].label_path == manifest.items[i].label_path);
    CHECK(loaded.items[i].seed == manifest.items[i].seed);
    CHECK(loaded.items[i].split == manifest.items[i].split);
  }

  SUBCASE("missing file") {
    std::filesystem::remove(tmp.path() / loaded.items[1].image_path);
    CHECK_THROWS_AS(validate_manifest(loaded), std::runtime_error);
  }
  SUBCASE("shape mismatch") {
    write_grid_f32(tmp.path() / loaded.items[0].image_path, Grid<double>(4, 4, 0.5));
    CHECK_THROWS_AS(validate_manifest(loaded), std::runtime_error);
  }
  SUBCASE("duplicate item") {
    DatasetManifest dup = loaded;
    dup.items.push_back(dup.items[0]);
    CHECK_THROWS_AS(validate_manifest(dup), std::runtime_error);
  }
  SUBCASE("unknown split") {
    DatasetManifest bad = loaded;
    bad.items[0].split = "validation";
    CHECK_THROWS_AS(validate_manifest(bad), std::runtime_error);
  }
}

TEST_CASE("load_manifest reports unreadable inputs") {
  TempDir tmp;
  CHECK_THROWS_AS(load_manifest(tmp / "absent.json"), std::runtime_error);

  std::ofstream(tmp / "junk.json") << "{ not json";
  CHECK_THROWS_AS(load_manifest(tmp / "junk.json"), std::runtime_error);

  std::ofstream(tmp / "alien.json") << R"({"format":"something-else","version":1})";
  CHECK_THROWS_AS(load_manifest(tmp / "alien.json"), std::runtime_error);
}

TEST_CASE("poisson noise is applied at the stated scale") {
  PhantomSpec spec = testutil::tiny_spec(32, 21);
  spec.noise = NoiseModel::poisson;
  spec.noise_scale = 50.0;
  const auto [noisy, label] = generate_phantom(spec);

  PhantomSpec clean = spec;
  clean.noise = NoiseModel::none;
  const auto [smooth, label2] = generate_phantom(clean);

  CHECK(label == label2);  // noise is applied after the geometry is fixed
  // counts/scale means every noisy value is a multiple of 1/scale
  bool differs = false;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double scaled = noisy[i] * spec.noise_scale;
    CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
    if (noisy[i] != smooth[i]) differs = true;
  }
  CHECK(differs);
}
