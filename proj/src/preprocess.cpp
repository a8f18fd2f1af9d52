#include "octseg/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "octseg/error.hpp"

namespace octseg {

int BilateralParams::default_radius(double sigma_d) {
  return std::max(1, static_cast<int>(std::ceil(2.0 * sigma_d)));
}

GrayImage bilateral_filter(const GrayImage& img, const BilateralParams& params) {
  if (!(params.sigma_d > 0.0) || !(params.sigma_r > 0.0) || params.radius < 1) {
    throw Error(ErrorKind::InvalidConfig, "bilateral parameters must be positive");
  }
  const int radius = params.radius;
  const int side = 2 * radius + 1;
  const int rows = static_cast<int>(img.rows());
  const int cols = static_cast<int>(img.cols());

  std::vector<double> spatial(static_cast<std::size_t>(side * side));
  const double two_sd2 = 2.0 * params.sigma_d * params.sigma_d;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[static_cast<std::size_t>((dy + radius) * side + dx + radius)] =
          std::exp(-static_cast<double>(dy * dy + dx * dx) / two_sd2);
    }
  }
  // Intensities are 8-bit, so the range kernel is a 256-entry table.
  std::array<double, 256> range{};
  const double two_sr2 = 2.0 * params.sigma_r * params.sigma_r;
  for (int d = 0; d < 256; ++d) range[static_cast<std::size_t>(d)] = std::exp(-static_cast<double>(d * d) / two_sr2);

  GrayImage out(img.rows(), img.cols());
  for (int r = 0; r < rows; ++r) {
    const int y0 = std::max(0, r - radius), y1 = std::min(rows - 1, r + radius);
    for (int c = 0; c < cols; ++c) {
      const int x0 = std::max(0, c - radius), x1 = std::min(cols - 1, c + radius);
      const int center = img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      double num = 0.0, norm = 0.0;
      for (int y = y0; y <= y1; ++y) {
        const int base = (y - r + radius) * side + radius - c;
        for (int x = x0; x <= x1; ++x) {
          const int v = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          const double w = spatial[static_cast<std::size_t>(base + x)] *
                           range[static_cast<std::size_t>(std::abs(v - center))];
          num += w * v;
          norm += w;
        }
      }
      const long rounded = std::lround(num / norm);
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          static_cast<std::uint8_t>(std::clamp(rounded, 0L, 255L));
    }
  }
  return out;
}

double estimate_sigma_r(const GrayImage& img, std::size_t top_rows) {
  top_rows = std::clamp<std::size_t>(top_rows, 1, img.rows());
  const std::size_t n = top_rows * img.cols();
  const auto px = img.pixels().first(n);
  double sum = 0.0;
  for (const auto v : px) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto v : px) ss += (v - mean) * (v - mean);
  return std::max(1.0, std::sqrt(ss / static_cast<double>(n)));
}

std::size_t default_background_rows(std::size_t rows) {
  return std::min(rows, std::max<std::size_t>(8, rows / 10));
}

GrayImage denoise(const GrayImage& img, double sigma_d) {
  BilateralParams p;
  p.sigma_d = sigma_d;
  p.radius = BilateralParams::default_radius(sigma_d);
  p.sigma_r = estimate_sigma_r(img, default_background_rows(img.rows()));
  return bilateral_filter(img, p);
}

}  // namespace octseg
