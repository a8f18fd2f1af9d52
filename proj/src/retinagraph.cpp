#include "octseg/retinagraph.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "octseg/error.hpp"

namespace octseg {

GradientField vertical_gradient(const GrayImage& img) {
  const std::size_t rows = img.rows(), cols = img.cols();
  if (rows < 3) throw Error(ErrorKind::ImageTooSmall, "vertical gradient needs at least 3 rows");
  GradientField field{rows, cols, std::vector<double>(rows * cols, 0.0)};
  for (std::size_t r = 1; r + 1 < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(img.at(r + 1, c)) - static_cast<double>(img.at(r - 1, c));
      field.g[r * cols + c] = std::max(0.0, d);
    }
  }
  std::copy_n(field.g.begin() + static_cast<std::ptrdiff_t>(cols), cols, field.g.begin());
  std::copy_n(field.g.begin() + static_cast<std::ptrdiff_t>((rows - 2) * cols), cols,
              field.g.begin() + static_cast<std::ptrdiff_t>((rows - 1) * cols));

  const auto [lo, hi] = std::minmax_element(field.g.begin(), field.g.end());
  const double min = *lo, span = *hi - *lo;
  if (span == 0.0) {
    std::fill(field.g.begin(), field.g.end(), 0.0);
  } else {
    for (auto& v : field.g) v = (v - min) / span;
  }
  return field;
}

PathResult shortest_layer_path(const GradientField& field, double w_min) {
  if (field.rows == 0 || field.cols == 0) throw Error(ErrorKind::EmptyField, "gradient field is empty");
  return shortest_layer_path(field, w_min, std::vector<std::size_t>(field.cols, 0),
                             std::vector<std::size_t>(field.cols, field.rows - 1));
}

PathResult shortest_layer_path(const GradientField& field, double w_min,
                               const std::vector<std::size_t>& row_lo,
                               const std::vector<std::size_t>& row_hi) {
  const std::size_t rows = field.rows, cols = field.cols;
  if (rows == 0 || cols == 0) throw Error(ErrorKind::EmptyField, "gradient field is empty");
  if (row_lo.size() != cols || row_hi.size() != cols) {
    throw Error(ErrorKind::DimMismatch, "row bounds must cover every column");
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (row_lo[c] > row_hi[c] || row_hi[c] >= rows) {
      throw Error(ErrorKind::EmptyField, "no admissible rows in column " + std::to_string(c));
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const std::size_t n = rows * cols;
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> pred(n, kNone);
  std::vector<std::uint8_t> settled(n, 0);

  // Ordered by distance, then row, then insertion sequence.
  using Entry = std::tuple<double, std::size_t, std::uint64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::uint64_t seq = 0;

  for (std::size_t r = row_lo[0]; r <= row_hi[0]; ++r) {
    dist[r * cols] = w_min;
    queue.emplace(w_min, r, seq++, r * cols);
  }

  double sink_dist = kInf;
  std::size_t sink_pred = kNone;
  while (!queue.empty()) {
    const auto [d, r, s, node] = queue.top();
    queue.pop();
    if (settled[node] || d > dist[node]) continue;
    if (d > sink_dist) break;
    settled[node] = 1;
    const std::size_t c = node % cols;
    if (c + 1 == cols) {
      const double total = d + w_min;
      if (total < sink_dist) {
        sink_dist = total;
        sink_pred = node;
      }
      continue;
    }
    const std::size_t nc = c + 1;
    const std::size_t r_first = (r == 0 ? 0 : r - 1);
    for (std::size_t nr = r_first; nr <= r + 1; ++nr) {
      if (nr < row_lo[nc] || nr > row_hi[nc]) continue;
      const std::size_t next = nr * cols + nc;
      if (settled[next]) continue;
      const double nd = d + edge_weight(field.g[node], field.g[next], w_min);
      if (nd < dist[next]) {
        dist[next] = nd;
        pred[next] = node;
        queue.emplace(nd, nr, seq++, next);
      }
    }
  }
  if (sink_pred == kNone) throw Error(ErrorKind::EmptyField, "no left-to-right path exists");

  PathResult result;
  result.cost = sink_dist;
  result.path.row_at.assign(cols, 0);
  for (std::size_t node = sink_pred; node != kNone; node = pred[node]) {
    result.path.row_at[node % cols] = node / cols;
  }
  return result;
}

LayerKind classify_layer(const GrayImage& img, const LayerPath& path) {
  if (path.cols() != img.cols()) throw Error(ErrorKind::DimMismatch, "path and image widths differ");
  double above = 0.0, below = 0.0;
  std::size_t n_above = 0, n_below = 0;
  for (std::size_t c = 0; c < img.cols(); ++c) {
    const std::size_t pr = path.row_at[c];
    if (pr >= img.rows()) throw Error(ErrorKind::DimMismatch, "path leaves the image");
    for (std::size_t r = 0; r < img.rows(); ++r) {
      if (r < pr) {
        above += img.at(r, c);
        ++n_above;
      } else if (r > pr) {
        below += img.at(r, c);
        ++n_below;
      }
    }
  }
  if (n_above == 0 || n_below == 0) {
    throw Error(ErrorKind::DegeneratePath, "path leaves no pixels on one side");
  }
  return above / static_cast<double>(n_above) > below / static_cast<double>(n_below) ? LayerKind::ISM
                                                                                     : LayerKind::ILM;
}

LayerPair segment_layers(const GrayImage& img, double w_min) {
  if (img.rows() < 5) throw Error(ErrorKind::ImageTooSmall, "layer segmentation needs at least 5 rows");
  const GradientField field = vertical_gradient(img);
  if (std::all_of(field.g.begin(), field.g.end(), [](double v) { return v == 0.0; })) {
    throw Error(ErrorKind::NoLayerContrast, "gradient field is flat");
  }
  const std::size_t rows = img.rows(), cols = img.cols();
  const LayerPath first = shortest_layer_path(field, w_min).path;
  const LayerKind kind = classify_layer(img, first);

  std::vector<std::size_t> lo(cols), hi(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t pr = first.row_at[c];
    const std::size_t available = kind == LayerKind::ISM ? pr : rows - 1 - pr;
    if (available < 3) {
      throw Error(ErrorKind::SubgraphTooThin,
                  "only " + std::to_string(available) + " rows left in column " + std::to_string(c));
    }
    if (kind == LayerKind::ISM) {
      lo[c] = 0;
      hi[c] = pr - 1;
    } else {
      lo[c] = pr + 1;
      hi[c] = rows - 1;
    }
  }
  const LayerPath second = shortest_layer_path(field, w_min, lo, hi).path;

  LayerPair pair;
  pair.first_found = kind;
  pair.ilm = kind == LayerKind::ISM ? second : first;
  pair.ism = kind == LayerKind::ISM ? first : second;
  for (std::size_t c = 0; c < cols; ++c) {
    if (pair.ilm.row_at[c] >= pair.ism.row_at[c]) {
      throw Error(ErrorKind::OrderingViolation, "ILM not above ISM in column " + std::to_string(c));
    }
  }
  return pair;
}

RoiMask roi_mask(const LayerPath& ilm, const LayerPath& ism, std::size_t rows, std::size_t cols) {
  if (ilm.cols() != cols || ism.cols() != cols) {
    throw Error(ErrorKind::DimMismatch, "layer paths must span every column");
  }
  RoiMask roi{BinaryMask(rows, cols), ilm, ism};
  for (std::size_t c = 0; c < cols; ++c) {
    if (ilm.row_at[c] >= ism.row_at[c]) {
      throw Error(ErrorKind::OrderingViolation, "ILM not above ISM in column " + std::to_string(c));
    }
    const std::size_t last = std::min(ism.row_at[c], rows);
    for (std::size_t r = ilm.row_at[c] + 1; r < last; ++r) roi.mask.set(r, c, true);
  }
  return roi;
}

}  // namespace octseg
