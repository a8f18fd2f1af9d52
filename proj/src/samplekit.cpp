#include "octseg/samplekit.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "octseg/dataio.hpp"
#include "octseg/error.hpp"
#include "octseg/preprocess.hpp"

namespace fs = std::filesystem;

namespace octseg {

FloatRaster normalize(const GrayImage& img) {
  FloatRaster out(img.rows(), img.cols(), 1);
  const auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  if (*lo == *hi) return out;
  const float min = *lo;
  const float span = static_cast<float>(*hi) - min;
  auto values = out.values();
  for (std::size_t i = 0; i < px.size(); ++i) values[i] = (static_cast<float>(px[i]) - min) / span;
  return out;
}

FloatRaster mask_to_raster(const BinaryMask& mask) {
  FloatRaster out(mask.rows(), mask.cols(), 1);
  const auto bits = mask.bits();
  auto values = out.values();
  for (std::size_t i = 0; i < bits.size(); ++i) values[i] = bits[i] ? 1.0f : 0.0f;
  return out;
}

Padded pad_to_reference(const FloatRaster& img, const ReferenceDims& ref) {
  if (img.rows() > ref.rows || img.cols() > ref.cols) {
    throw Error(ErrorKind::TooLarge, std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                                         " exceeds reference " + std::to_string(ref.rows) + "x" +
                                         std::to_string(ref.cols));
  }
  Padded out{FloatRaster(ref.rows, ref.cols, img.channels()),
             Offset{(ref.rows - img.rows()) / 2, (ref.cols - img.cols()) / 2}};
  for (std::size_t ch = 0; ch < img.channels(); ++ch) {
    for (std::size_t r = 0; r < img.rows(); ++r) {
      for (std::size_t c = 0; c < img.cols(); ++c) {
        out.raster.at(ch, r + out.offset.row, c + out.offset.col) = img.at(ch, r, c);
      }
    }
  }
  return out;
}

FloatRaster crop_from_reference(const FloatRaster& padded, const Offset& offset, const Dims& orig_dims) {
  if (orig_dims.rows == 0 || orig_dims.cols == 0 || offset.row + orig_dims.rows > padded.rows() ||
      offset.col + orig_dims.cols > padded.cols()) {
    throw Error(ErrorKind::WindowOutOfBounds, "crop window exceeds the padded raster");
  }
  FloatRaster out(orig_dims.rows, orig_dims.cols, padded.channels());
  for (std::size_t ch = 0; ch < padded.channels(); ++ch) {
    for (std::size_t r = 0; r < orig_dims.rows; ++r) {
      for (std::size_t c = 0; c < orig_dims.cols; ++c) {
        out.at(ch, r, c) = padded.at(ch, r + offset.row, c + offset.col);
      }
    }
  }
  return out;
}

Sample stack_channels(const FloatRaster& img_norm, const FloatRaster& roi, const Offset& offset,
                      const Dims& orig_dims) {
  if (img_norm.rows() != roi.rows() || img_norm.cols() != roi.cols() || img_norm.channels() != 1 ||
      roi.channels() != 1) {
    throw Error(ErrorKind::DimMismatch, "image and ROI planes must be single-channel and equally sized");
  }
  Sample sample{FloatRaster(img_norm.rows(), img_norm.cols(), 2), offset, orig_dims};
  auto out = sample.values.values();
  const auto a = img_norm.values();
  const auto b = roi.values();
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return sample;
}

PreparedScan prepare_scan(const GrayImage& img, const ReferenceDims& ref, const PrepareParams& params) {
  GrayImage denoised = denoise(img, params.sigma_d);
  LayerPair layers = segment_layers(denoised, params.w_min);
  RoiMask roi = roi_mask(layers.ilm, layers.ism, img.rows(), img.cols());
  const Padded image_plane = pad_to_reference(normalize(denoised), ref);
  const Padded roi_plane = pad_to_reference(mask_to_raster(roi.mask), ref);
  Sample sample = stack_channels(image_plane.raster, roi_plane.raster, image_plane.offset,
                                 Dims{img.rows(), img.cols()});
  return PreparedScan{std::move(sample), std::move(denoised), std::move(layers), std::move(roi)};
}

Sample prepare_sample(const GrayImage& img, const ReferenceDims& ref, const PrepareParams& params) {
  return prepare_scan(img, ref, params).sample;
}

FloatRaster pad_target(const BinaryMask& mask, const ReferenceDims& ref) {
  return pad_to_reference(mask_to_raster(mask), ref).raster;
}

void write_sample(const Sample& sample, const fs::path& path) {
  write_float_raster(sample.values, path);
  fs::path meta = path;
  meta += ".txt";
  write_file_atomic(meta, "offset=" + std::to_string(sample.offset.row) + "," +
                              std::to_string(sample.offset.col) + " orig=" +
                              std::to_string(sample.orig_dims.rows) + "," +
                              std::to_string(sample.orig_dims.cols) + "\n");
}

Sample read_sample(const fs::path& path) {
  Sample sample;
  sample.values = read_float_raster(path);
  fs::path meta = path;
  meta += ".txt";
  const std::string text = read_file(meta);
  std::size_t r = 0, c = 0, rows = 0, cols = 0;
  if (std::sscanf(text.c_str(), "offset=%zu,%zu orig=%zu,%zu", &r, &c, &rows, &cols) != 4) {
    throw Error(ErrorKind::MalformedHeader, "bad sample sidecar " + meta.string());
  }
  sample.offset = Offset{r, c};
  sample.orig_dims = Dims{rows, cols};
  return sample;
}

}  // namespace octseg
