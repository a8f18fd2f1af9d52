#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace octseg {

/// Row-major 8-bit grayscale scan.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t rows, std::size_t cols, std::uint8_t fill = 0);
  GrayImage(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t& at(std::size_t r, std::size_t c) { return pixels_[r * cols_ + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels_[r * cols_ + c]; }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Row-major {0,1} mask.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t rows, std::size_t cols);
  BinaryMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const noexcept;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Channel-major float raster (channel, row, col).
class FloatRaster {
 public:
  FloatRaster() = default;
  FloatRaster(std::size_t rows, std::size_t cols, std::size_t channels = 1, float fill = 0.0f);
  FloatRaster(std::size_t rows, std::size_t cols, std::size_t channels, std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return values_.size(); }

  float& at(std::size_t ch, std::size_t r, std::size_t c) {
    return values_[(ch * rows_ + r) * cols_ + c];
  }
  float at(std::size_t ch, std::size_t r, std::size_t c) const {
    return values_[(ch * rows_ + r) * cols_ + c];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  std::vector<float>& storage() noexcept { return values_; }

  bool operator==(const FloatRaster&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> values_;
};

/// One boundary row per column; neighbouring columns differ by at most one row.
struct LayerPath {
  std::vector<std::size_t> row_at;

  std::size_t cols() const noexcept { return row_at.size(); }
  bool operator==(const LayerPath&) const = default;
};

}  // namespace octseg
