#pragma once

#include <cstddef>
#include <filesystem>

#include "octseg/image.hpp"
#include "octseg/retinagraph.hpp"

namespace octseg {

/// Common frame every scan is embedded in before it reaches the network.
struct ReferenceDims {
  std::size_t rows = 640;
  std::size_t cols = 1024;

  bool operator==(const ReferenceDims&) const = default;
};

struct Offset {
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const Offset&) const = default;
};

struct Dims {
  std::size_t rows = 0;
  std::size_t cols = 0;

  bool operator==(const Dims&) const = default;
};

/// Two-channel network input: channel 0 is the normalised denoised scan,
/// channel 1 the {0,1} ROI indicator, both centred in the reference frame.
struct Sample {
  FloatRaster values;
  Offset offset;
  Dims orig_dims;

  bool operator==(const Sample&) const = default;
};

/// Min-max scaling to [0, 1]; a constant image maps to zeros.
FloatRaster normalize(const GrayImage& img);

FloatRaster mask_to_raster(const BinaryMask& mask);

struct Padded {
  FloatRaster raster;
  Offset offset;
};

/// Centres every channel of img in the reference frame; the odd pixel of
/// slack goes to the bottom / right.
Padded pad_to_reference(const FloatRaster& img, const ReferenceDims& ref);

FloatRaster crop_from_reference(const FloatRaster& padded, const Offset& offset, const Dims& orig_dims);

Sample stack_channels(const FloatRaster& img_norm, const FloatRaster& roi, const Offset& offset,
                      const Dims& orig_dims);

struct PrepareParams {
  double sigma_d = 2.0;
  double w_min = kDefaultMinWeight;
};

struct PreparedScan {
  Sample sample;
  GrayImage denoised;
  LayerPair layers;
  RoiMask roi;
};

/// denoise -> layers -> ROI -> normalise -> pad -> stack.
PreparedScan prepare_scan(const GrayImage& img, const ReferenceDims& ref, const PrepareParams& params);
Sample prepare_sample(const GrayImage& img, const ReferenceDims& ref, const PrepareParams& params);

/// Padded single-channel target in the same frame as the sample.
FloatRaster pad_target(const BinaryMask& mask, const ReferenceDims& ref);

/// Sample on disk: an OCTF raster plus a one-line sidecar
/// "offset=<r>,<c> orig=<rows>,<cols>" at <path>.txt.
void write_sample(const Sample& sample, const std::filesystem::path& path);
Sample read_sample(const std::filesystem::path& path);

}  // namespace octseg
