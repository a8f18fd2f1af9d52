#include <algorithm>
#include <cmath>
#include <string>

#include "octseg/dataio.hpp"
#include "octseg/error.hpp"
#include "octseg/random.hpp"

namespace octseg {

namespace {

constexpr int kPlacementAttempts = 1000;

struct Ellipse {
  double center_row, center_col, axis_row, axis_col;

  bool contains(double r, double c) const {
    const double dr = (r - center_row) / axis_row;
    const double dc = (c - center_col) / axis_col;
    return dr * dr + dc * dc <= 1.0;
  }
};

void validate(const PhantomSpec& spec) {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidConfig, "phantom: " + why); };
  if (spec.rows == 0 || spec.cols == 0) fail("empty image");
  if (!(0 < spec.ilm_row && spec.ilm_row < spec.ism_row && spec.ism_row < spec.rows)) {
    fail("need 0 < ilm_row < ism_row < rows");
  }
  if (spec.cyst_axis_min <= 0.0 || spec.cyst_axis_max < spec.cyst_axis_min) fail("bad cyst axis range");
  if (spec.speckle_sigma < 0.0) fail("negative speckle sigma");
  if (spec.n_cysts > 0) {
    const double band = static_cast<double>(spec.ism_row - spec.ilm_row) - 2.0 * static_cast<double>(spec.cyst_gap) - 2.0;
    if (2.0 * spec.cyst_axis_min > band) fail("cyst axes do not fit inside the retina band");
  }
}

double row_mean(const PhantomSpec& spec, std::size_t r) {
  if (r < spec.ilm_row) return spec.vitreous_mean;
  if (r >= spec.ism_row) {
    return r < spec.ism_row + spec.ism_band_rows ? spec.ism_band_mean : spec.choroid_mean;
  }
  if (r + spec.outer_stripe_rows >= spec.ism_row && r > spec.ilm_row) return spec.outer_stripe_mean;
  return spec.retina_mean;
}

}  // namespace

Phantom gen_phantom(const PhantomSpec& spec) {
  validate(spec);
  SplitMix64 rng(spec.seed);

  // Cyst placement region: [lo, hi] holds every mask row with clearance cyst_gap.
  const double row_lo = static_cast<double>(spec.ilm_row + spec.cyst_gap + 1);
  const double row_hi = static_cast<double>(spec.ism_row - spec.cyst_gap - 1);
  const double col_lo = 1.0;
  const double col_hi = static_cast<double>(spec.cols) - 2.0;
  const double gap = static_cast<double>(spec.cyst_gap);

  std::vector<Ellipse> cysts;
  for (std::size_t k = 0; k < spec.n_cysts; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Ellipse e{};
      e.axis_row = rng.uniform(spec.cyst_axis_min, spec.cyst_axis_max);
      e.axis_col = rng.uniform(spec.cyst_axis_min, spec.cyst_axis_max);
      const double r_min = row_lo + e.axis_row, r_max = row_hi - e.axis_row;
      const double c_min = col_lo + e.axis_col, c_max = col_hi - e.axis_col;
      if (r_min > r_max || c_min > c_max) continue;
      e.center_row = rng.uniform(r_min, r_max);
      e.center_col = rng.uniform(c_min, c_max);
      const bool clear = std::all_of(cysts.begin(), cysts.end(), [&](const Ellipse& o) {
        return std::abs(e.center_row - o.center_row) > e.axis_row + o.axis_row + gap ||
               std::abs(e.center_col - o.center_col) > e.axis_col + o.axis_col + gap;
      });
      if (clear) {
        cysts.push_back(e);
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorKind::PlacementFailure,
                  "could not place cyst " + std::to_string(k + 1) + " of " + std::to_string(spec.n_cysts));
    }
  }

  Phantom out;
  out.mask = BinaryMask(spec.rows, spec.cols);
  out.image = GrayImage(spec.rows, spec.cols);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      double mean = row_mean(spec, r);
      for (const auto& e : cysts) {
        if (e.contains(static_cast<double>(r), static_cast<double>(c))) {
          out.mask.set(r, c, true);
          mean = spec.cyst_mean;
          break;
        }
      }
      const double v = mean * (1.0 + spec.speckle_sigma * rng.gaussian());
      out.image.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  out.ilm.row_at.assign(spec.cols, spec.ilm_row);
  out.ism.row_at.assign(spec.cols, spec.ism_row);
  return out;
}

PhantomSpec random_phantom_spec(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  PhantomSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  const double r = static_cast<double>(rows);
  spec.ilm_row = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r * rng.uniform(0.12, 0.2))));
  spec.ism_row = static_cast<std::size_t>(std::lround(r * rng.uniform(0.6, 0.7)));
  spec.n_cysts = 1 + static_cast<std::size_t>(rng.below(4));
  spec.cyst_axis_min = std::max(2.0, r / 25.0);
  spec.cyst_axis_max = std::max(spec.cyst_axis_min, r / 10.0);
  spec.outer_stripe_rows = std::max<std::size_t>(2, rows / 16);
  spec.ism_band_rows = std::max<std::size_t>(2, rows / 20);
  spec.seed = derive_seed(seed, 1);
  return spec;
}

}  // namespace octseg
