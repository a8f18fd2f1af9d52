#include "octseg/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "octseg/dataio.hpp"
#include "octseg/random.hpp"

namespace fs = std::filesystem;

namespace octseg {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be positive");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw Error(ErrorKind::InvalidConfig, "clamp_eps must lie in (0, 0.5)");
}

double bce_loss(const Tensor<float>& pred, const Tensor<float>& target, double clamp_eps) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "bce_loss: " + shape_string(pred.shape()) + " vs " +
                                              shape_string(target.shape()));
  }
  return nn::bce_value(pred.values(), target.values(), clamp_eps);
}

template <typename T>
void adam_step(ParamStore<T>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.moments.empty()) {
    for (auto& [name, p] : params) {
      state.moments[name] = {std::vector<double>(p.value.size()), std::vector<double>(p.value.size())};
    }
  }
  if (state.moments.size() != params.size()) {
    throw Error(ErrorKind::StateShapeMismatch, "optimizer state tracks a different parameter set");
  }
  for (auto& [name, p] : params) {
    auto it = state.moments.find(name);
    if (it == state.moments.end() || it->second.m.size() != p.value.size()) {
      throw Error(ErrorKind::StateShapeMismatch, "optimizer state does not match parameter " + name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    auto& mom = state.moments[name];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
      mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = mom.m[i] / correct1;
      const double v_hat = mom.v[i] / correct2;
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                  cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

template void adam_step<float>(ParamStore<float>&, AdamState&, const AdamConfig&);
template void adam_step<double>(ParamStore<double>&, AdamState&, const AdamConfig&);

// Checkpoint format: "UNCK", u32 version, u32 config length, config text,
// u32 tensor count, then per tensor in name order: u16 name length, name,
// u8 rank, rank x u32 dims, values as f32. All integers little-endian.
namespace {

constexpr std::string_view kCheckpointMagic = "UNCK";
constexpr std::uint32_t kCheckpointVersion = 1;

void put_uint(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::TruncatedData, "checkpoint ends early");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename V>
std::string join(const std::vector<V>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::string config_text(const Checkpoint& cp) {
  const UNetConfig& c = cp.net.config();
  std::ostringstream out;
  out << "input_channels=" << c.input_channels << "\n"
      << "base_channels=" << c.base_channels << "\n"
      << "depth=" << c.depth << "\n"
      << "bottleneck_channels=" << c.bottleneck_channels << "\n"
      << "aspp_rates=" << join(c.aspp_rates) << "\n"
      << "dropout=" << join(c.dropout) << "\n"
      << "seed=" << c.seed << "\n"
      << "ref_rows=" << cp.ref.rows << "\n"
      << "ref_cols=" << cp.ref.cols << "\n";
  return out.str();
}

template <typename V>
std::vector<V> split_list(const std::string& text) {
  std::vector<V> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream conv(item);
    V v{};
    if (!(conv >> v)) throw Error(ErrorKind::ConfigMismatch, "bad list value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::uint64_t to_uint(const std::string& text) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(text, &used);
  if (used != text.size()) throw Error(ErrorKind::ConfigMismatch, "bad integer '" + text + "'");
  return v;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& cp) {
  std::string out(kCheckpointMagic);
  put_uint(out, kCheckpointVersion, 4);
  const std::string cfg = config_text(cp);
  put_uint(out, cfg.size(), 4);
  out += cfg;
  put_uint(out, cp.net.params().size(), 4);
  for (const auto& [name, p] : cp.net.params()) {
    put_uint(out, name.size(), 2);
    out += name;
    const Shape& shape = p.value.shape();
    put_uint(out, shape.size(), 1);
    for (const std::size_t d : shape) put_uint(out, d, 4);
    for (const float v : p.value.values()) put_uint(out, std::bit_cast<std::uint32_t>(v), 4);
  }
  return out;
}

void save_checkpoint(const Checkpoint& cp, const fs::path& path) {
  write_file_atomic(path, encode_checkpoint(cp));
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kCheckpointMagic) {
    throw Error(ErrorKind::BadMagic, "not a UNCK checkpoint");
  }
  ByteReader in(bytes.substr(4));
  if (in.uint(4) != kCheckpointVersion) throw Error(ErrorKind::VersionMismatch, "unsupported checkpoint version");
  const std::string cfg_text(in.take(static_cast<std::size_t>(in.uint(4))));

  UNetConfig cfg;
  ReferenceDims ref;
  std::istringstream lines(cfg_text);
  std::string line;
  try {
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::ConfigMismatch, "bad config line '" + line + "'");
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "input_channels") cfg.input_channels = to_uint(value);
      else if (key == "base_channels") cfg.base_channels = to_uint(value);
      else if (key == "depth") cfg.depth = to_uint(value);
      else if (key == "bottleneck_channels") cfg.bottleneck_channels = to_uint(value);
      else if (key == "aspp_rates") cfg.aspp_rates = split_list<int>(value);
      else if (key == "dropout") cfg.dropout = split_list<double>(value);
      else if (key == "seed") cfg.seed = to_uint(value);
      else if (key == "ref_rows") ref.rows = to_uint(value);
      else if (key == "ref_cols") ref.cols = to_uint(value);
      else throw Error(ErrorKind::ConfigMismatch, "unknown config key '" + key + "'");
    }
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::ConfigMismatch, std::string("unparsable config value: ") + e.what());
  }

  Checkpoint cp{[&] {
                  try {
                    return UNet<float>(cfg);
                  } catch (const Error& e) {
                    throw Error(ErrorKind::ConfigMismatch, e.what());
                  }
                }(),
                ref};
  const std::uint64_t count = in.uint(4);
  if (count != cp.net.params().size()) {
    throw Error(ErrorKind::ConfigMismatch, "checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                                               std::to_string(cp.net.params().size()));
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name(in.take(static_cast<std::size_t>(in.uint(2))));
    const std::size_t rank = static_cast<std::size_t>(in.uint(1));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.uint(4));
    if (!cp.net.params().contains(name)) throw Error(ErrorKind::ConfigMismatch, "unexpected tensor " + name);
    Parameter<float>& p = cp.net.params().at(name);
    if (p.value.shape() != shape) {
      throw Error(ErrorKind::ConfigMismatch, "tensor " + name + " has shape " + shape_string(shape) +
                                                 ", config needs " + shape_string(p.value.shape()));
    }
    for (auto& v : p.value.values()) v = std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4)));
  }
  return cp;
}

Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

TrainingExample make_example(const Sample& sample, const BinaryMask& target) {
  const FloatRaster& v = sample.values;
  if (v.channels() != 2) throw Error(ErrorKind::DimMismatch, "samples carry two channels");
  if (target.rows() != sample.orig_dims.rows || target.cols() != sample.orig_dims.cols) {
    throw Error(ErrorKind::DimMismatch, "target mask does not match the sample's original dims");
  }
  const FloatRaster padded = pad_to_reference(mask_to_raster(target), ReferenceDims{v.rows(), v.cols()}).raster;
  return TrainingExample{
      Tensor<float>(Shape{2, v.rows(), v.cols()}, std::vector<float>(v.values().begin(), v.values().end())),
      Tensor<float>(Shape{1, v.rows(), v.cols()},
                    std::vector<float>(padded.values().begin(), padded.values().end()))};
}

TrainResult train(const std::vector<TrainingExample>& examples, const UNetConfig& unet_cfg,
                  const TrainConfig& train_cfg, const ReferenceDims& ref,
                  const std::function<void(const EpochLoss&)>& on_epoch) {
  train_cfg.validate();
  if (examples.empty()) throw Error(ErrorKind::EmptyDataset, "no training samples");
  const Shape input_shape{unet_cfg.input_channels, ref.rows, ref.cols};
  const Shape target_shape{1, ref.rows, ref.cols};
  for (const auto& ex : examples) {
    if (ex.input.shape() != input_shape || ex.target.shape() != target_shape) {
      throw Error(ErrorKind::DimMismatch, "sample " + shape_string(ex.input.shape()) +
                                              " does not match reference frame " + shape_string(input_shape));
    }
  }

  TrainResult result{Checkpoint{UNet<float>(unet_cfg), ref}, {}};
  UNet<float>& net = result.checkpoint.net;
  AdamState adam;
  std::vector<std::size_t> order(examples.size());
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(derive_seed(train_cfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }

    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + train_cfg.batch_size);
      const float weight = 1.0f / static_cast<float>(stop - start);
      const std::uint64_t step_seed = derive_seed(train_cfg.seed ^ 0xA5A5A5A5ULL, ++step);
      net.params().zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const TrainingExample& ex = examples[order[k]];
        Tape<float> tape;
        const Var out = net.forward(tape, tape.constant(ex.input), true, derive_seed(step_seed, k - start));
        const Var loss = nn::bce(tape, out, ex.target, train_cfg.clamp_eps);
        epoch_total += static_cast<double>(tape.value(loss)[0]);
        tape.backward(loss, weight);
      }
      adam_step(net.params(), adam, train_cfg.adam);
    }
    const EpochLoss record{epoch, epoch_total / static_cast<double>(examples.size())};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

Prediction predict(Checkpoint& cp, const Sample& sample, const PredictOptions& options) {
  const FloatRaster& v = sample.values;
  if (v.rows() != cp.ref.rows || v.cols() != cp.ref.cols || v.channels() != cp.net.config().input_channels) {
    throw Error(ErrorKind::DimMismatch, "sample frame " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                                            " does not match the checkpoint's " + std::to_string(cp.ref.rows) +
                                            "x" + std::to_string(cp.ref.cols));
  }
  const Tensor<float> input(Shape{v.channels(), v.rows(), v.cols()},
                            std::vector<float>(v.values().begin(), v.values().end()));
  const Tensor<float> prob = cp.net.forward(input, false, 0);

  const FloatRaster full(v.rows(), v.cols(), 1, std::vector<float>(prob.values().begin(), prob.values().end()));
  Prediction out;
  out.probability = crop_from_reference(full, sample.offset, sample.orig_dims);
  out.mask = BinaryMask(sample.orig_dims.rows, sample.orig_dims.cols);
  for (std::size_t r = 0; r < sample.orig_dims.rows; ++r) {
    for (std::size_t c = 0; c < sample.orig_dims.cols; ++c) {
      bool fg = static_cast<double>(out.probability.at(0, r, c)) >= options.threshold;
      if (options.roi_clamp) fg = fg && v.at(1, r + sample.offset.row, c + sample.offset.col) > 0.5f;
      out.mask.set(r, c, fg);
    }
  }
  return out;
}

}  // namespace octseg
