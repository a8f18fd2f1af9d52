#include "octseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "octseg/error.hpp"

namespace octseg {

namespace {

void check_dims(std::size_t rows, std::size_t cols, std::size_t channels, std::size_t length) {
  if (rows == 0 || cols == 0 || channels == 0) {
    throw Error(ErrorKind::DimMismatch, "raster dimensions must be positive");
  }
  if (length != rows * cols * channels) {
    throw Error(ErrorKind::DimMismatch, "buffer holds " + std::to_string(length) +
                                            " values, expected " +
                                            std::to_string(rows * cols * channels));
  }
}

}  // namespace

GrayImage::GrayImage(std::size_t rows, std::size_t cols, std::uint8_t fill)
    : rows_(rows), cols_(cols), pixels_(rows * cols, fill) {
  check_dims(rows, cols, 1, pixels_.size());
}

GrayImage::GrayImage(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
  check_dims(rows, cols, 1, pixels_.size());
}

BinaryMask::BinaryMask(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), bits_(rows * cols, 0) {
  check_dims(rows, cols, 1, bits_.size());
}

BinaryMask::BinaryMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits)
    : rows_(rows), cols_(cols), bits_(std::move(bits)) {
  check_dims(rows, cols, 1, bits_.size());
  if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; })) {
    throw Error(ErrorKind::DimMismatch, "mask values must be 0 or 1");
  }
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

FloatRaster::FloatRaster(std::size_t rows, std::size_t cols, std::size_t channels, float fill)
    : rows_(rows), cols_(cols), channels_(channels), values_(rows * cols * channels, fill) {
  check_dims(rows, cols, channels, values_.size());
}

FloatRaster::FloatRaster(std::size_t rows, std::size_t cols, std::size_t channels,
                         std::vector<float> values)
    : rows_(rows), cols_(cols), channels_(channels), values_(std::move(values)) {
  check_dims(rows, cols, channels, values_.size());
}

}  // namespace octseg
