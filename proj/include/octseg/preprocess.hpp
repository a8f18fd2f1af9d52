#pragma once

#include <cstddef>

#include "octseg/image.hpp"

namespace octseg {

struct BilateralParams {
  double sigma_d = 2.0;   // spatial std, pixels
  double sigma_r = 10.0;  // range std, intensity units
  int radius = 4;         // window half-width

  /// Window half-width ceil(2 * sigma_d), at least 1.
  static int default_radius(double sigma_d);
};

/// Edge-preserving bilateral smoothing. Windows are clipped at the border and
/// each output is renormalised over the in-bounds neighbours.
GrayImage bilateral_filter(const GrayImage& img, const BilateralParams& params);

/// Population standard deviation of the first top_rows rows, floored at 1.
double estimate_sigma_r(const GrayImage& img, std::size_t top_rows);

/// Rows sampled for the range estimate: 10% of the image height, at least 8,
/// never more than the image has.
std::size_t default_background_rows(std::size_t rows);

/// Estimates sigma_r from the background band and filters with sigma_d.
GrayImage denoise(const GrayImage& img, double sigma_d);

}  // namespace octseg
