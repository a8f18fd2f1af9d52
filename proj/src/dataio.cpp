#include "octseg/dataio.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "octseg/error.hpp"

namespace fs = std::filesystem;

namespace octseg {

namespace {

constexpr std::string_view kRasterMagic = "OCTF";
constexpr std::uint32_t kRasterVersion = 1;

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) throw Error(ErrorKind::MalformedHeader, "header value too large");
      ++pos_;
    }
    if (pos_ == start) throw Error(ErrorKind::MalformedHeader, "expected a decimal number");
    return value;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) noexcept { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::IoFailure, "cannot rename into " + path.string());
  }
}

GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorKind::MalformedHeader, "missing P5 magic");
  }
  HeaderReader reader(bytes);
  reader.advance(2);
  const std::size_t cols = reader.number();
  const std::size_t rows = reader.number();
  const std::size_t maxval = reader.number();
  if (cols == 0 || rows == 0) throw Error(ErrorKind::MalformedHeader, "zero image dimension");
  if (maxval != 255) {
    throw Error(ErrorKind::UnsupportedMaxval, "maxval " + std::to_string(maxval));
  }
  if (reader.pos() >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[reader.pos()]))) {
    throw Error(ErrorKind::MalformedHeader, "missing whitespace after maxval");
  }
  const std::size_t data_start = reader.pos() + 1;
  const std::size_t need = rows * cols;
  if (bytes.size() - data_start < need) {
    throw Error(ErrorKind::TruncatedData, "expected " + std::to_string(need) + " pixel bytes");
  }
  std::vector<std::uint8_t> pixels(need);
  std::memcpy(pixels.data(), bytes.data() + data_start, need);
  return GrayImage(rows, cols, std::move(pixels));
}

GrayImage read_pgm(const fs::path& path) { return parse_pgm(read_file(path)); }

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) +
                    "\n255\n";
  const auto px = img.pixels();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

void write_pgm(const GrayImage& img, const fs::path& path) {
  write_file_atomic(path, encode_pgm(img));
}

void write_pgm(const BinaryMask& mask, const fs::path& path) {
  std::vector<std::uint8_t> px(mask.size());
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = bits[i] ? 255 : 0;
  write_pgm(GrayImage(mask.rows(), mask.cols(), std::move(px)), path);
}

BinaryMask read_mask_pgm(const fs::path& path) {
  const GrayImage img = read_pgm(path);
  std::vector<std::uint8_t> bits(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = px[i] != 0 ? 1 : 0;
  return BinaryMask(img.rows(), img.cols(), std::move(bits));
}

FloatRaster parse_float_raster(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kRasterMagic) {
    throw Error(ErrorKind::BadMagic, "not an OCTF raster");
  }
  if (bytes.size() < 20) throw Error(ErrorKind::TruncatedData, "incomplete OCTF header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kRasterVersion) {
    throw Error(ErrorKind::VersionMismatch, "OCTF version " + std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes, 8);
  const std::size_t cols = get_u32(bytes, 12);
  const std::size_t channels = get_u32(bytes, 16);
  const std::size_t count = rows * cols * channels;
  if ((bytes.size() - 20) / 4 < count) {
    throw Error(ErrorKind::TruncatedData, "expected " + std::to_string(count) + " values");
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, 20 + 4 * i));
  }
  return FloatRaster(rows, cols, channels, std::move(values));
}

FloatRaster read_float_raster(const fs::path& path) { return parse_float_raster(read_file(path)); }

std::string encode_float_raster(const FloatRaster& raster) {
  std::string out(kRasterMagic);
  out.reserve(20 + 4 * raster.size());
  put_u32(out, kRasterVersion);
  put_u32(out, static_cast<std::uint32_t>(raster.rows()));
  put_u32(out, static_cast<std::uint32_t>(raster.cols()));
  put_u32(out, static_cast<std::uint32_t>(raster.channels()));
  for (const float v : raster.values()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, "raster holds a non-finite value");
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void write_float_raster(const FloatRaster& raster, const fs::path& path) {
  write_file_atomic(path, encode_float_raster(raster));
}

Manifest read_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  Manifest manifest;
  manifest.base_dir = path.parent_path();
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorKind::BadRecord, path.string() + ":" + std::to_string(line_no) + ": " +
                                            std::to_string(fields.size()) + " fields");
    }
    ManifestRecord record;
    std::vector<fs::path> resolved;
    for (const auto& f : fields) {
      if (f.empty()) throw Error(ErrorKind::BadRecord, "empty field on line " + std::to_string(line_no));
      fs::path p = manifest.base_dir / f;
      if (!fs::exists(p)) throw Error(ErrorKind::MissingFile, p.string());
      resolved.push_back(std::move(p));
    }
    record.image = resolved[0];
    record.mask = resolved[1];
    if (resolved.size() == 3) record.second_mask = resolved[2];
    manifest.records.push_back(std::move(record));
  }
  if (manifest.records.empty()) throw Error(ErrorKind::EmptyManifest, path.string());
  return manifest;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path dir = path.parent_path();
  auto rel = [&](const fs::path& p) { return fs::proximate(p, dir.empty() ? "." : dir).generic_string(); };
  std::string text;
  for (const auto& r : manifest.records) {
    text += rel(r.image) + "\t" + rel(r.mask);
    if (r.second_mask) text += "\t" + rel(*r.second_mask);
    text += "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace octseg
