#pragma once

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "octseg/error.hpp"
#include "octseg/image.hpp"
#include "octseg/random.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("octseg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline octseg::GrayImage random_image(std::size_t rows, std::size_t cols, octseg::SplitMix64& rng) {
  octseg::GrayImage img(rows, cols);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline octseg::BinaryMask random_mask(std::size_t rows, std::size_t cols, double density,
                                      octseg::SplitMix64& rng) {
  octseg::BinaryMask m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m.set(r, c, rng.uniform() < density);
  return m;
}

}  // namespace testing

#define CHECK_ERROR_KIND(expr, expected_kind)                   \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const octseg::Error& e_) {                         \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());   \
    }                                                           \
    CHECK_MESSAGE(thrown_, "expected " #expected_kind);         \
  } while (0)
