#include "octseg/config.hpp"

#include <charconv>
#include <sstream>
#include <string>

#include "octseg/dataio.hpp"
#include "octseg/error.hpp"

namespace octseg {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw Error(ErrorKind::ParseError, key + ": cannot parse '" + text + "'");
  }
  return value;
}

template <typename V>
std::vector<V> parse_list(const std::string& key, const std::string& text) {
  std::vector<V> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<V>(key, trim(item)));
  if (out.empty()) throw Error(ErrorKind::ParseError, key + ": empty list");
  return out;
}

bool parse_switch(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw Error(ErrorKind::ParseError, key + ": expected on/off, got '" + text + "'");
}

}  // namespace

UNetConfig Config::unet() const {
  UNetConfig cfg;
  cfg.base_channels = base_channels;
  cfg.depth = depth;
  cfg.aspp_rates = aspp_rates;
  cfg.seed = seed;
  if (dropout.empty()) {
    cfg.dropout.clear();
    for (std::size_t l = 0; l <= depth; ++l) cfg.dropout.push_back(l < 2 ? 0.1 : 0.2);
  } else {
    cfg.dropout = dropout;
  }
  return cfg;
}

TrainConfig Config::train() const {
  TrainConfig cfg;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.adam.learning_rate = learning_rate;
  cfg.seed = seed;
  return cfg;
}

Config parse_config_text(std::string_view text) {
  Config cfg;
  std::istringstream lines{std::string(text)};
  std::string raw;
  while (std::getline(lines, raw)) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ParseError, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "sigma_d") cfg.sigma_d = parse_number<double>(key, value);
    else if (key == "w_min") cfg.w_min = parse_number<double>(key, value);
    else if (key == "ref_rows") cfg.ref_rows = parse_number<std::size_t>(key, value);
    else if (key == "ref_cols") cfg.ref_cols = parse_number<std::size_t>(key, value);
    else if (key == "base_channels") cfg.base_channels = parse_number<std::size_t>(key, value);
    else if (key == "depth") cfg.depth = parse_number<std::size_t>(key, value);
    else if (key == "aspp_rates") cfg.aspp_rates = parse_list<int>(key, value);
    else if (key == "dropout") cfg.dropout = parse_list<double>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "roi_clamp") cfg.roi_clamp = parse_switch(key, value);
    else if (key == "threshold") cfg.threshold = parse_number<double>(key, value);
    else throw Error(ErrorKind::UnknownKey, "unknown config key '" + key + "'");
  }
  if (!(cfg.sigma_d > 0.0)) throw Error(ErrorKind::ParseError, "sigma_d must be positive");
  if (!(cfg.w_min > 0.0)) throw Error(ErrorKind::ParseError, "w_min must be positive");
  if (cfg.ref_rows == 0 || cfg.ref_cols == 0) throw Error(ErrorKind::ParseError, "reference dims must be positive");
  return cfg;
}

Config parse_config(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

}  // namespace octseg
