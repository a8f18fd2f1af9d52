#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "octseg/samplekit.hpp"
#include "octseg/trainer.hpp"
#include "octseg/unet.hpp"

namespace octseg {

/// Every tunable of the pipeline. Defaults reproduce the full-scale setup:
/// 640x1024 frame, 16 base channels, ASPP rates {1,2,4,8,16}, batch 10,
/// 100 epochs, Adam at 1e-3, threshold 0.5.
struct Config {
  double sigma_d = 2.0;
  double w_min = 1e-5;
  std::size_t ref_rows = 640;
  std::size_t ref_cols = 1024;
  std::size_t base_channels = 16;
  std::size_t depth = 3;
  std::vector<int> aspp_rates{1, 2, 4, 8, 16};
  /// Empty means 0.1 for the first two levels and 0.2 for the rest.
  std::vector<double> dropout;
  std::size_t batch_size = 10;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool roi_clamp = true;
  double threshold = 0.5;

  UNetConfig unet() const;
  TrainConfig train() const;
  ReferenceDims ref() const { return {ref_rows, ref_cols}; }
  PrepareParams prepare() const { return {sigma_d, w_min}; }
  PredictOptions predict() const { return {threshold, roi_clamp}; }
};

/// Parses "key = value" lines; '#' starts a comment. Throws UnknownKey or
/// ParseError.
Config parse_config_text(std::string_view text);
Config parse_config(const std::filesystem::path& path);

}  // namespace octseg
