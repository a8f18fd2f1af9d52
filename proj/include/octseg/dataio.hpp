#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "octseg/image.hpp"

namespace octseg {

// Binary PGM ("P5", maxval 255).
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage parse_pgm(std::string_view bytes);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
/// Masks are written as 0 / 255.
void write_pgm(const BinaryMask& mask, const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);

/// Reads a PGM and maps every nonzero byte to 1.
BinaryMask read_mask_pgm(const std::filesystem::path& path);

// OCTF float raster: "OCTF", u32 version=1, u32 rows, u32 cols, u32 channels,
// then rows*cols*channels little-endian binary32 values in channel-major order.
FloatRaster read_float_raster(const std::filesystem::path& path);
FloatRaster parse_float_raster(std::string_view bytes);
void write_float_raster(const FloatRaster& raster, const std::filesystem::path& path);
std::string encode_float_raster(const FloatRaster& raster);

struct ManifestRecord {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> second_mask;
};

/// Tab-separated records. Paths are stored resolved against base_dir.
struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;
};

Manifest read_manifest(const std::filesystem::path& path);
/// Writes records with paths made relative to the manifest's directory.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Synthetic B-scan description. Rows above ilm_row are vitreous; the retina
/// runs from ilm_row down to ism_row, where a thin hyper-reflective band sits
/// on top of a darker choroid. A hypo-reflective stripe just above ism_row
/// makes the ISM a strong dark-to-light transition.
struct PhantomSpec {
  std::size_t rows = 64;
  std::size_t cols = 96;
  std::size_t ilm_row = 10;
  std::size_t ism_row = 40;
  std::size_t n_cysts = 3;
  double cyst_axis_min = 2.5;  // semi-axis length, pixels
  double cyst_axis_max = 6.0;
  double speckle_sigma = 0.2;
  std::uint64_t seed = 0;

  double vitreous_mean = 20.0;
  double retina_mean = 180.0;
  double cyst_mean = 30.0;
  double outer_stripe_mean = 70.0;
  std::size_t outer_stripe_rows = 4;
  double ism_band_mean = 250.0;
  std::size_t ism_band_rows = 3;  // the "margin" below ism_row
  double choroid_mean = 60.0;
  std::size_t cyst_gap = 2;  // minimum clearance to both boundaries and between cysts
};

struct Phantom {
  GrayImage image;
  BinaryMask mask;
  LayerPath ilm;
  LayerPath ism;
};

Phantom gen_phantom(const PhantomSpec& spec);

/// Draws boundary rows and cyst count for a rows x cols phantom from seed.
PhantomSpec random_phantom_spec(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace octseg
