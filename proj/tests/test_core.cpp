#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "acwe/core.hpp"
#include "helpers.hpp"

using namespace acwe;

TEST_CASE("normalize scales by the maximum") {
  Image img(2, 3);
  img(0, 0) = 1.0;
  img(0, 1) = 4.0;
  img(1, 2) = 2.0;
  const Image out = normalize(img);
  CHECK(out(0, 0) == doctest::Approx(0.25));
  CHECK(out(0, 1) == doctest::Approx(1.0));
  CHECK(out(1, 2) == doctest::Approx(0.5));
  CHECK(out(1, 0) == 0.0);
}

TEST_CASE("normalize rejects bad inputs") {
  Image neg(2, 2, 1.0);
  neg(0, 1) = -0.5;
  CHECK_THROWS_AS(normalize(neg), std::invalid_argument);

  Image inf(2, 2, 1.0);
  inf(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(normalize(inf), std::invalid_argument);

  Image blank(3, 3, 0.0);
  CHECK_THROWS_WITH_AS(normalize(blank), "normalize: blank image (all pixels zero)",
                       std::invalid_argument);
}

TEST_CASE("threshold keeps strictly positive scores") {
  ScoreField score(1, 4);
  score[0] = -1.0;
  score[1] = 0.0;
  score[2] = 1e-12;
  score[3] = 3.0;
  const BinaryMask mask = threshold(score);
  CHECK(mask[0] == 0);
  CHECK(mask[1] == 0);  // zero is background
  CHECK(mask[2] == 1);
  CHECK(mask[3] == 1);

  score[1] = std::nan("");
  CHECK_THROWS_AS(threshold(score), std::invalid_argument);
}

TEST_CASE("dice matches hand values and is symmetric") {
  BinaryMask a(2, 2), b(2, 2);
  a(0, 0) = a(0, 1) = 1;  // |a| = 2
  b(0, 1) = b(1, 1) = 1;  // |b| = 2, overlap 1
  CHECK(dice(a, b) == doctest::Approx(0.5));
  CHECK(dice(a, b) == dice(b, a));
  CHECK(dice(a, a) == doctest::Approx(1.0));

  BinaryMask empty1(2, 2), empty2(2, 2);
  CHECK(dice(empty1, empty2) == 1.0);  // two empty masks agree perfectly
  CHECK(dice(a, empty1) == 0.0);

  BinaryMask c(2, 2), d(2, 2);
  c(0, 0) = 1;
  d(1, 1) = 1;
  CHECK(dice(c, d) == 0.0);

  BinaryMask wrong(3, 2);
  CHECK_THROWS_AS(dice(a, wrong), std::invalid_argument);
}

TEST_CASE("region_means splits a hard mask") {
  Image img(2, 2);
  img(0, 0) = 1.0;
  img(0, 1) = 3.0;
  img(1, 0) = 5.0;
  img(1, 1) = 7.0;
  BinaryMask mask(2, 2);
  mask(0, 0) = mask(0, 1) = 1;
  const RegionStats stats = region_means(img, mask);
  CHECK(stats.c1 == doctest::Approx(2.0));
  CHECK(stats.c2 == doctest::Approx(6.0));
}

TEST_CASE("region_means degenerate regions fall back to the global mean") {
  Image img(2, 2);
  img(0, 0) = 1.0;
  img(0, 1) = 2.0;
  img(1, 0) = 3.0;
  img(1, 1) = 4.0;
  const double global = 2.5;

  BinaryMask full(2, 2, 1);
  const RegionStats s1 = region_means(img, full);
  CHECK(s1.c1 == doctest::Approx(global));
  CHECK(s1.c2 == doctest::Approx(global));  // empty outside

  BinaryMask none(2, 2, 0);
  const RegionStats s2 = region_means(img, none);
  CHECK(s2.c1 == doctest::Approx(global));  // empty inside
  CHECK(s2.c2 == doctest::Approx(global));
}

TEST_CASE("region_means accepts soft weights") {
  Image img(1, 2);
  img(0, 0) = 0.0;
  img(0, 1) = 1.0;
  SoftMask w(1, 2, 0.5);  // uniform weights: both means equal the global mean
  const RegionStats stats = region_means(img, w);
  CHECK(stats.c1 == doctest::Approx(0.5));
  CHECK(stats.c2 == doctest::Approx(0.5));

  SoftMask wrong(2, 2, 0.5);
  CHECK_THROWS_AS(region_means(img, wrong), std::invalid_argument);
}

TEST_CASE("acwe_energy matches a hand computation") {
  // 2x2 image, top row inside. One vertical neighbor pair differs per column:
  // perimeter = 0.5 * 2 = 1.
  Image img(2, 2);
  img(0, 0) = 0.8;
  img(0, 1) = 1.0;
  img(1, 0) = 0.1;
  img(1, 1) = 0.3;
  BinaryMask mask(2, 2);
  mask(0, 0) = mask(0, 1) = 1;

  HyperParams hp;
  hp.mu = 2.0;
  hp.nu = 0.5;
  hp.lambda1 = 1.0;
  hp.lambda2 = 3.0;
  // c1 = 0.9, c2 = 0.2; inside residual 2*0.01, outside residual 2*0.01.
  const double expected = 2.0 * 1.0 + 0.5 * 2.0 + 1.0 * 0.02 + 3.0 * 0.02;
  CHECK(acwe_energy(img, mask, hp) == doctest::Approx(expected));

  BinaryMask wrong(1, 2);
  CHECK_THROWS_AS(acwe_energy(img, wrong, hp), std::invalid_argument);
}

TEST_CASE("mask_perimeter counts differing 4-neighbor pairs") {
  BinaryMask mask(3, 3);
  mask(1, 1) = 1;  // isolated pixel: 4 differing pairs
  CHECK(detail::mask_perimeter(mask) == doctest::Approx(2.0));

  BinaryMask uniform(3, 3, 1);
  CHECK(detail::mask_perimeter(uniform) == 0.0);
}

TEST_CASE("acwe_energy agrees with a brute-force oracle on sampled 3x3 masks") {
  const Image img = testutil::random_image(3, 3, 99);
  HyperParams hp;
  hp.mu = 0.7;
  hp.nu = 0.02;
  hp.lambda1 = 1.1;
  hp.lambda2 = 0.9;

  for (unsigned bits : {0u, 1u, 17u, 255u, 256u, 311u, 511u}) {
    BinaryMask mask(3, 3);
    for (int i = 0; i < 9; ++i) mask[i] = (bits >> i) & 1u;

    double sum_in = 0, sum_out = 0;
    int n_in = 0, n_out = 0;
    for (int i = 0; i < 9; ++i) {
      if (mask[i]) {
        sum_in += img[i];
        n_in += 1;
      } else {
        sum_out += img[i];
        n_out += 1;
      }
    }
    const double global = (sum_in + sum_out) / 9.0;
    const double c1 = n_in ? sum_in / n_in : global;
    const double c2 = n_out ? sum_out / n_out : global;

    double perim = 0;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        if (x + 1 < 3 && mask(y, x) != mask(y, x + 1)) perim += 0.5;
        if (y + 1 < 3 && mask(y, x) != mask(y + 1, x)) perim += 0.5;
      }

    double expected = hp.mu * perim + hp.nu * n_in;
    for (int i = 0; i < 9; ++i) {
      const double r = img[i] - (mask[i] ? c1 : c2);
      expected += (mask[i] ? hp.lambda1 : hp.lambda2) * r * r;
    }
    CHECK(acwe_energy(img, mask, hp) == doctest::Approx(expected).epsilon(1e-12));
  }
}
