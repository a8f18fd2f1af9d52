#pragma once

#include <cstddef>
#include <vector>

#include "octseg/image.hpp"

namespace octseg {

inline constexpr double kDefaultMinWeight = 1e-5;

/// Normalised dark-to-light vertical response in [0, 1].
struct GradientField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> g;

  double at(std::size_t r, std::size_t c) const { return g[r * cols + c]; }
};

GradientField vertical_gradient(const GrayImage& img);

/// Weight of the edge joining two nodes with normalised gradients g_a, g_b.
constexpr double edge_weight(double g_a, double g_b, double w_min) noexcept {
  return 2.0 - (g_a + g_b) + w_min;
}

struct PathResult {
  LayerPath path;
  /// Includes the two virtual endpoint edges of weight w_min.
  double cost = 0.0;
};

/// Minimum-cost left-to-right path on the gradient graph. Each node (r, c)
/// links to (r-1, c+1), (r, c+1) and (r+1, c+1); virtual source and sink
/// columns attach to every row of the first and last columns.
PathResult shortest_layer_path(const GradientField& field, double w_min = kDefaultMinWeight);

/// Same search restricted to rows [row_lo[c], row_hi[c]] in each column.
PathResult shortest_layer_path(const GradientField& field, double w_min,
                               const std::vector<std::size_t>& row_lo,
                               const std::vector<std::size_t>& row_hi);

enum class LayerKind { ILM, ISM };

/// ISM when the region strictly above the path is brighter on average than
/// the region strictly below; ILM otherwise.
LayerKind classify_layer(const GrayImage& img, const LayerPath& path);

struct LayerPair {
  LayerPath ilm;
  LayerPath ism;
  LayerKind first_found = LayerKind::ILM;
};

/// Two-path ILM / ISM extraction: find the strongest boundary, classify it,
/// then search the subgraph on the side where the other layer must lie.
LayerPair segment_layers(const GrayImage& img, double w_min = kDefaultMinWeight);

struct RoiMask {
  BinaryMask mask;
  LayerPath ilm;
  LayerPath ism;
};

/// Pixels strictly between the two boundaries.
RoiMask roi_mask(const LayerPath& ilm, const LayerPath& ism, std::size_t rows, std::size_t cols);

}  // namespace octseg
