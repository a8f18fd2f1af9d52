#include <algorithm>
#include <cmath>

#include "octseg/preprocess.hpp"
#include "support.hpp"

using namespace octseg;

namespace {

double naive_bilateral(const GrayImage& img, std::size_t r, std::size_t c, const BilateralParams& p) {
  double num = 0.0, den = 0.0;
  const double center = img.at(r, c);
  for (long dy = -p.radius; dy <= p.radius; ++dy) {
    for (long dx = -p.radius; dx <= p.radius; ++dx) {
      const long y = static_cast<long>(r) + dy, x = static_cast<long>(c) + dx;
      if (y < 0 || x < 0 || y >= static_cast<long>(img.rows()) || x >= static_cast<long>(img.cols())) continue;
      const double v = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      const double w = std::exp(-static_cast<double>(dy * dy + dx * dx) / (2 * p.sigma_d * p.sigma_d)) *
                       std::exp(-(v - center) * (v - center) / (2 * p.sigma_r * p.sigma_r));
      num += w * v;
      den += w;
    }
  }
  return num / den;
}

double two_pass_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("default radius is the 2 sigma cutoff") {
  CHECK(BilateralParams::default_radius(2.0) == 4);
  CHECK(BilateralParams::default_radius(0.3) == 1);
  CHECK(BilateralParams::default_radius(1.2) == 3);
}

TEST_CASE("bilateral keeps constant and single-pixel images") {
  CHECK(bilateral_filter(GrayImage(5, 4, 7), {}) == GrayImage(5, 4, 7));
  CHECK(bilateral_filter(GrayImage(1, 1, 42), {}) == GrayImage(1, 1, 42));
}

TEST_CASE("bilateral impulse matches the direct weighted sum") {
  GrayImage img(3, 3, 0);
  img.at(1, 1) = 90;
  const BilateralParams p{2.0, 30.0, 1};
  const GrayImage out = bilateral_filter(img, p);
  CHECK(std::abs(out.at(1, 1) - naive_bilateral(img, 1, 1, p)) <= 0.5);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.at(r, c) - naive_bilateral(img, r, c, p)) <= 0.5);
}

TEST_CASE("bilateral matches the direct oracle on random images") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage img = testing::random_image(9 + trial % 3, 11, rng);
    const BilateralParams p{rng.uniform(0.5, 3.0), rng.uniform(5.0, 60.0), 1 + static_cast<int>(rng.below(4))};
    const GrayImage out = bilateral_filter(img, p);
    for (std::size_t r = 0; r < img.rows(); ++r)
      for (std::size_t c = 0; c < img.cols(); ++c)
        CHECK(std::abs(out.at(r, c) - naive_bilateral(img, r, c, p)) <= 0.5 + 1e-9);
  }
}

TEST_CASE("bilateral output stays inside the window range") {
  SplitMix64 rng(8);
  const GrayImage img = testing::random_image(12, 12, rng);
  const BilateralParams p{2.0, 25.0, 2};
  const GrayImage out = bilateral_filter(img, p);
  for (long r = 0; r < 12; ++r) {
    for (long c = 0; c < 12; ++c) {
      int lo = 255, hi = 0;
      for (long y = std::max(0L, r - 2); y <= std::min(11L, r + 2); ++y)
        for (long x = std::max(0L, c - 2); x <= std::min(11L, c + 2); ++x) {
          lo = std::min<int>(lo, img.at(y, x));
          hi = std::max<int>(hi, img.at(y, x));
        }
      CHECK(out.at(r, c) >= lo);
      CHECK(out.at(r, c) <= hi);
    }
  }
}

TEST_CASE("bilateral commutes with an intensity shift up to rounding") {
  SplitMix64 rng(12);
  GrayImage img(10, 10);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.below(200));
  GrayImage shifted = img;
  for (auto& p : shifted.pixels()) p = static_cast<std::uint8_t>(p + 40);
  const BilateralParams p{1.5, 20.0, 3};
  const GrayImage a = bilateral_filter(img, p), b = bilateral_filter(shifted, p);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(int(b.pixels()[i]) - int(a.pixels()[i]) - 40) <= 1);
}

TEST_CASE("sigma_r estimate") {
  CHECK(estimate_sigma_r(GrayImage(20, 6, 90), 8) == 1.0);

  GrayImage alt(10, 4, 0);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) alt.at(r, c) = (c % 2) ? 10 : 0;
  CHECK(estimate_sigma_r(alt, 2) == doctest::Approx(5.0).epsilon(1e-12));

  SplitMix64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage img = testing::random_image(16, 13, rng);
    const std::size_t top = 1 + rng.below(16);
    std::vector<double> band;
    for (std::size_t r = 0; r < top; ++r)
      for (std::size_t c = 0; c < 13; ++c) band.push_back(img.at(r, c));
    CHECK(std::abs(estimate_sigma_r(img, top) - std::max(1.0, two_pass_std(band))) <= 1e-9);
  }
}

TEST_CASE("sigma_r estimate ignores row order within the band") {
  SplitMix64 rng(4);
  const GrayImage img = testing::random_image(12, 9, rng);
  GrayImage perm = img;
  const std::size_t order[] = {3, 0, 5, 1, 4, 2};
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 9; ++c) perm.at(r, c) = img.at(order[r], c);
  CHECK(std::abs(estimate_sigma_r(img, 6) - estimate_sigma_r(perm, 6)) <= 1e-12);
}

TEST_CASE("background band size") {
  CHECK(default_background_rows(64) == 8);
  CHECK(default_background_rows(640) == 64);
  CHECK(default_background_rows(5) == 5);
}

TEST_CASE("denoise uses the default radius and estimated range") {
  SplitMix64 rng(31);
  const GrayImage img = testing::random_image(24, 20, rng);
  const BilateralParams p{2.0, estimate_sigma_r(img, default_background_rows(24)), 4};
  CHECK(denoise(img, 2.0) == bilateral_filter(img, p));
}
