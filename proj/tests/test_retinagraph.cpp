#include <cmath>
#include <limits>

#include "octseg/dataio.hpp"
#include "octseg/preprocess.hpp"
#include "octseg/retinagraph.hpp"
#include "support.hpp"

using namespace octseg;

namespace {

GradientField random_field(std::size_t rows, std::size_t cols, SplitMix64& rng) {
  GradientField f{rows, cols, std::vector<double>(rows * cols)};
  for (auto& v : f.g) v = rng.uniform();
  return f;
}

struct Brute {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_path;
};

void enumerate(const GradientField& f, double w_min, std::vector<std::size_t>& path, double cost, Brute& out) {
  const std::size_t c = path.size();
  if (c == f.cols) {
    const double total = cost + w_min;
    if (total < out.best) {
      out.best = total;
      out.best_path = path;
    }
    return;
  }
  const long prev = static_cast<long>(path.back());
  for (long r = prev - 1; r <= prev + 1; ++r) {
    if (r < 0 || r >= static_cast<long>(f.rows)) continue;
    path.push_back(static_cast<std::size_t>(r));
    enumerate(f, w_min, path, cost + edge_weight(f.at(prev, c - 1), f.at(r, c), w_min), out);
    path.pop_back();
  }
}

Brute brute_force(const GradientField& f, double w_min) {
  Brute out;
  std::vector<std::size_t> path;
  for (std::size_t r = 0; r < f.rows; ++r) {
    path.assign(1, r);
    enumerate(f, w_min, path, w_min, out);
  }
  return out;
}

GrayImage banded(std::size_t rows, std::size_t cols, std::size_t boundary, std::uint8_t above, std::uint8_t below) {
  GrayImage img(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) img.at(r, c) = r < boundary ? above : below;
  return img;
}

}  // namespace

TEST_CASE("edge weight values") {
  CHECK(edge_weight(1.0, 1.0, 1e-5) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(edge_weight(0.0, 0.0, 1e-5) == doctest::Approx(2.00001).epsilon(1e-12));
  CHECK(edge_weight(0.5, 0.25, 1e-5) == doctest::Approx(1.25001).epsilon(1e-12));
  static_assert(edge_weight(1.0, 1.0, 0.5) == 0.5);
}

TEST_CASE("vertical gradient of uniform and two-band images") {
  const GradientField flat = vertical_gradient(GrayImage(6, 4, 77));
  for (double v : flat.g) CHECK(v == 0.0);

  const GradientField up = vertical_gradient(banded(8, 3, 4, 0, 255));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(up.at(3, c) == 1.0);
    CHECK(up.at(4, c) == 1.0);
    CHECK(up.at(0, c) == 0.0);
    CHECK(up.at(1, c) == 0.0);
    CHECK(up.at(6, c) == 0.0);
    CHECK(up.at(7, c) == 0.0);
  }

  const GradientField down = vertical_gradient(banded(8, 3, 4, 255, 0));
  for (double v : down.g) CHECK(v == 0.0);
  CHECK_ERROR_KIND(vertical_gradient(GrayImage(2, 5)), ErrorKind::ImageTooSmall);
}

TEST_CASE("vertical gradient matches a direct difference oracle") {
  SplitMix64 rng(17);
  const GrayImage img = testing::random_image(7, 6, rng);
  std::vector<double> d(7 * 6);
  for (std::size_t r = 0; r < 7; ++r) {
    const std::size_t rr = std::clamp<std::size_t>(r, 1, 5);
    for (std::size_t c = 0; c < 6; ++c)
      d[r * 6 + c] = std::max(0.0, double(img.at(rr + 1, c)) - double(img.at(rr - 1, c)));
  }
  const double lo = *std::min_element(d.begin(), d.end()), hi = *std::max_element(d.begin(), d.end());
  const GradientField f = vertical_gradient(img);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(f.g[i] - (d[i] - lo) / (hi - lo)) <= 1e-12);
}

TEST_CASE("single-row field gives its only path") {
  GradientField f{1, 4, {0.1, 0.9, 0.3, 0.5}};
  const PathResult res = shortest_layer_path(f, 1e-5);
  CHECK(res.path.row_at == std::vector<std::size_t>(4, 0));
  const double expected = 1e-5 + edge_weight(0.1, 0.9, 1e-5) + edge_weight(0.9, 0.3, 1e-5) +
                          edge_weight(0.3, 0.5, 1e-5) + 1e-5;
  CHECK(std::abs(res.cost - expected) <= 1e-12);
}

TEST_CASE("uniform field resolves ties toward the top row") {
  GradientField f{5, 7, std::vector<double>(35, 0.4)};
  CHECK(shortest_layer_path(f, 1e-5).path.row_at == std::vector<std::size_t>(7, 0));
  CHECK_ERROR_KIND(shortest_layer_path(GradientField{}, 1e-5), ErrorKind::EmptyField);
}

TEST_CASE("dijkstra agrees with exhaustive enumeration") {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(8);
    const GradientField f = random_field(rows, cols, rng);
    const Brute b = brute_force(f, 1e-5);
    const PathResult res = shortest_layer_path(f, 1e-5);
    CHECK(std::abs(res.cost - b.best) <= 1e-12);
    CHECK(res.path.row_at == b.best_path);
  }
}

TEST_CASE("path is connected and stays inside row bounds") {
  SplitMix64 rng(7);
  const GradientField f = random_field(12, 20, rng);
  std::vector<std::size_t> lo(20), hi(20);
  for (std::size_t c = 0; c < 20; ++c) {
    lo[c] = 3 + (c % 3);
    hi[c] = 8 + (c % 2);
  }
  const LayerPath p = shortest_layer_path(f, 1e-5, lo, hi).path;
  for (std::size_t c = 0; c < 20; ++c) {
    CHECK(p.row_at[c] >= lo[c]);
    CHECK(p.row_at[c] <= hi[c]);
    if (c) CHECK(std::abs(long(p.row_at[c]) - long(p.row_at[c - 1])) <= 1);
  }
}

TEST_CASE("shifting every edge weight keeps the optimal path") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const GradientField f = random_field(6, 8, rng);
    CHECK(shortest_layer_path(f, 1e-5).path == shortest_layer_path(f, 0.75).path);
  }
}

TEST_CASE("layer classification rule") {
  const LayerPath mid{std::vector<std::size_t>(5, 3)};
  CHECK(classify_layer(banded(8, 5, 3, 200, 20), mid) == LayerKind::ISM);
  CHECK(classify_layer(banded(8, 5, 3, 20, 200), mid) == LayerKind::ILM);
  CHECK(classify_layer(GrayImage(8, 5, 90), mid) == LayerKind::ILM);
  CHECK_ERROR_KIND(classify_layer(GrayImage(8, 5), LayerPath{std::vector<std::size_t>(5, 0)}),
                   ErrorKind::DegeneratePath);
}

TEST_CASE("segment layers on a phantom with the stronger ISM edge") {
  PhantomSpec spec;
  spec.ilm_row = 10;
  spec.ism_row = 40;
  spec.seed = 1;
  const Phantom ph = gen_phantom(spec);
  const LayerPair lp = segment_layers(denoise(ph.image, 2.0));
  CHECK(lp.first_found == LayerKind::ISM);
  for (std::size_t c = 0; c < spec.cols; ++c) {
    CHECK(std::abs(long(lp.ilm.row_at[c]) - 10) <= 1);
    CHECK(std::abs(long(lp.ism.row_at[c]) - 40) <= 1);
  }
}

TEST_CASE("segment layers on a phantom with the stronger ILM edge") {
  PhantomSpec spec;
  spec.ilm_row = 12;
  spec.ism_row = 44;
  spec.seed = 3;
  spec.vitreous_mean = 5;
  spec.retina_mean = 200;
  const Phantom ph = gen_phantom(spec);
  const LayerPair lp = segment_layers(denoise(ph.image, 2.0));
  CHECK(lp.first_found == LayerKind::ILM);
  for (std::size_t c = 0; c < spec.cols; ++c) {
    CHECK(std::abs(long(lp.ilm.row_at[c]) - 12) <= 1);
    CHECK(std::abs(long(lp.ism.row_at[c]) - 44) <= 1);
  }
}

TEST_CASE("segment layers error paths") {
  CHECK_ERROR_KIND(segment_layers(GrayImage(10, 10, 50)), ErrorKind::NoLayerContrast);
  CHECK_ERROR_KIND(segment_layers(GrayImage(4, 10, 50)), ErrorKind::ImageTooSmall);
  CHECK_ERROR_KIND(segment_layers(banded(6, 5, 4, 0, 255)), ErrorKind::SubgraphTooThin);
}

TEST_CASE("segment layers keeps ilm above ism on random phantoms") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const Phantom ph = gen_phantom(random_phantom_spec(48, 64, seed));
    const LayerPair lp = segment_layers(denoise(ph.image, 2.0));
    for (std::size_t c = 0; c < 64; ++c) CHECK(lp.ilm.row_at[c] < lp.ism.row_at[c]);
  }
}

TEST_CASE("roi mask strict interior") {
  const RoiMask roi = roi_mask(LayerPath{{2, 2}}, LayerPath{{5, 3}}, 8, 2);
  for (std::size_t r = 0; r < 8; ++r) {
    CHECK(roi.mask.at(r, 0) == (r == 3 || r == 4));
    CHECK_FALSE(roi.mask.at(r, 1));
  }
  CHECK_ERROR_KIND(roi_mask(LayerPath{{4}}, LayerPath{{4}}, 8, 1), ErrorKind::OrderingViolation);
  CHECK_ERROR_KIND(roi_mask(LayerPath{{1}}, LayerPath{{4, 5}}, 8, 2), ErrorKind::DimMismatch);
}

TEST_CASE("roi mask bit count matches the column sum") {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 10, cols = 15;
    LayerPath ilm, ism;
    std::size_t expected = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t a = rng.below(rows - 1);
      const std::size_t b = a + 1 + rng.below(rows - 1 - a);
      ilm.row_at.push_back(a);
      ism.row_at.push_back(b);
      expected += b - a - 1;
    }
    CHECK(roi_mask(ilm, ism, rows, cols).mask.count() == expected);
  }
}
