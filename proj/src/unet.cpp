#include "octseg/unet.hpp"

#include <cmath>

#include "octseg/random.hpp"

namespace octseg {

namespace nn {

template <typename T>
GateOutput attention_gate(Tape<T>& tape, Var skip, Var gate, const AttentionGateVars& p) {
  if (tape.shape(skip).size() != 3 || tape.shape(gate).size() != 3 ||
      tape.shape(skip)[1] != tape.shape(gate)[1] || tape.shape(skip)[2] != tape.shape(gate)[2]) {
    throw Error(ErrorKind::ShapeMismatch, "attention_gate: skip " + shape_string(tape.shape(skip)) +
                                              " and gate " + shape_string(tape.shape(gate)) +
                                              " need identical spatial dims");
  }
  const Var from_skip = conv2d(tape, skip, p.w_x, p.b_xg);
  const Var from_gate = conv2d(tape, gate, p.w_g, std::nullopt);
  const Var hidden = relu(tape, add(tape, from_skip, from_gate));
  const Var alpha = sigmoid(tape, conv2d(tape, hidden, p.psi, p.b_psi));
  return GateOutput{multiply_by_map(tape, skip, alpha), alpha};
}

template <typename T>
Var aspp(Tape<T>& tape, Var x, const AsppVars& p) {
  if (p.rates.empty() || p.branch_w.size() != p.rates.size() || p.branch_b.size() != p.rates.size()) {
    throw Error(ErrorKind::ShapeMismatch, "aspp: one kernel and bias per dilation rate");
  }
  Var merged = conv2d(tape, x, p.branch_w[0], p.branch_b[0], p.rates[0]);
  for (std::size_t i = 1; i < p.rates.size(); ++i) {
    merged = concat_channels(tape, merged, conv2d(tape, x, p.branch_w[i], p.branch_b[i], p.rates[i]));
  }
  return conv2d(tape, merged, p.fuse_w, p.fuse_b);
}

template GateOutput attention_gate<float>(Tape<float>&, Var, Var, const AttentionGateVars&);
template GateOutput attention_gate<double>(Tape<double>&, Var, Var, const AttentionGateVars&);
template Var aspp<float>(Tape<float>&, Var, const AsppVars&);
template Var aspp<double>(Tape<double>&, Var, const AsppVars&);

}  // namespace nn

void UNetConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidConfig, why); };
  if (input_channels == 0) fail("input_channels must be positive");
  if (base_channels == 0) fail("base_channels must be positive");
  if (depth == 0 || depth > 8) fail("depth must lie in [1, 8]");
  if (aspp_rates.empty()) fail("aspp_rates must not be empty");
  for (const int r : aspp_rates) {
    if (r < 1) fail("aspp rates must be positive");
  }
  if (dropout.size() != depth + 1) {
    fail("dropout needs " + std::to_string(depth + 1) + " rates (encoder levels + bottleneck)");
  }
  for (const double p : dropout) {
    if (!(p >= 0.0 && p < 1.0)) fail("dropout rates must lie in [0, 1)");
  }
}

std::vector<std::pair<std::string, Shape>> unet_parameter_shapes(const UNetConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> shapes;
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    shapes.emplace_back(name + ".w", Shape{out, in, k, k});
    shapes.emplace_back(name + ".b", Shape{out});
  };
  auto level_channels = [&](std::size_t level) { return cfg.base_channels << (level - 1); };

  std::size_t in = cfg.input_channels;
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    const std::string prefix = "enc" + std::to_string(l);
    conv(prefix + ".conv1", level_channels(l), in, 3);
    conv(prefix + ".conv2", level_channels(l), level_channels(l), 3);
    in = level_channels(l);
  }
  const std::size_t mid = cfg.resolved_bottleneck();
  conv("mid.conv1", mid, in, 3);
  for (std::size_t i = 0; i < cfg.aspp_rates.size(); ++i) {
    conv("mid.aspp.branch" + std::to_string(i), mid, mid, 3);
  }
  conv("mid.aspp.fuse", mid, mid * cfg.aspp_rates.size(), 1);
  conv("mid.conv2", mid, mid, 3);

  in = mid;
  for (std::size_t l = cfg.depth; l >= 1; --l) {
    const std::string prefix = "dec" + std::to_string(l);
    const std::size_t skip = level_channels(l);
    const std::size_t inner = std::max<std::size_t>(1, skip / 2);
    shapes.emplace_back(prefix + ".up.w", Shape{skip, in, 2, 2});
    shapes.emplace_back(prefix + ".up.b", Shape{skip});
    shapes.emplace_back(prefix + ".gate.w_x", Shape{inner, skip, 1, 1});
    shapes.emplace_back(prefix + ".gate.w_g", Shape{inner, skip, 1, 1});
    shapes.emplace_back(prefix + ".gate.b_xg", Shape{inner});
    shapes.emplace_back(prefix + ".gate.psi", Shape{1, inner, 1, 1});
    shapes.emplace_back(prefix + ".gate.b_psi", Shape{1});
    conv(prefix + ".conv1", skip, 2 * skip, 3);
    conv(prefix + ".conv2", skip, skip, 3);
    in = skip;
  }
  conv("head", 1, cfg.base_channels, 1);
  return shapes;
}

template <typename T>
UNet<T>::UNet(UNetConfig cfg) : cfg_(std::move(cfg)) {
  SplitMix64 rng(cfg_.seed);
  for (auto& [name, shape] : unet_parameter_shapes(cfg_)) {
    Tensor<T> value(shape);
    if (shape.size() == 4) {
      // He-uniform. A 2x2 stride-2 transposed conv feeds each output from one
      // tap per input channel, so its fan-in is the input channel count.
      const bool transposed = name.ends_with(".up.w");
      const double fan_in = transposed ? static_cast<double>(shape[1])
                                       : static_cast<double>(shape[1] * shape[2] * shape[3]);
      const double bound = std::sqrt(6.0 / fan_in);
      for (auto& v : value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    params_.add(name, std::move(value));
  }
}

template <typename T>
Var UNet<T>::bind(Tape<T>& tape, const std::string& name) {
  return tape.parameter(params_.at(name));
}

template <typename T>
Var UNet<T>::conv_block(Tape<T>& tape, Var x, const std::string& prefix) {
  x = nn::relu(tape, nn::conv2d(tape, x, bind(tape, prefix + ".conv1.w"), bind(tape, prefix + ".conv1.b")));
  return nn::relu(tape, nn::conv2d(tape, x, bind(tape, prefix + ".conv2.w"), bind(tape, prefix + ".conv2.b")));
}

template <typename T>
Var UNet<T>::forward(Tape<T>& tape, Var input, bool training, std::uint64_t seed) {
  const Shape& s = tape.shape(input);
  const std::size_t m = spatial_multiple();
  if (s.size() != 3 || s[0] != cfg_.input_channels || s[1] == 0 || s[2] == 0 || s[1] % m != 0 ||
      s[2] % m != 0) {
    throw Error(ErrorKind::ShapeMismatch, "UNet input " + shape_string(s) + " must be [" +
                                              std::to_string(cfg_.input_channels) +
                                              ",H,W] with H and W divisible by " + std::to_string(m));
  }
  auto maybe_dropout = [&](Var x, std::size_t level) {
    const double p = cfg_.dropout[level];
    return training && p > 0.0 ? nn::dropout(tape, x, p, derive_seed(seed, level)) : x;
  };

  std::vector<Var> skips;
  Var x = input;
  for (std::size_t l = 1; l <= cfg_.depth; ++l) {
    x = maybe_dropout(conv_block(tape, x, "enc" + std::to_string(l)), l - 1);
    skips.push_back(x);
    x = nn::max_pool2(tape, x);
  }

  x = nn::relu(tape, nn::conv2d(tape, x, bind(tape, "mid.conv1.w"), bind(tape, "mid.conv1.b")));
  nn::AsppVars aspp{cfg_.aspp_rates, {}, {}, bind(tape, "mid.aspp.fuse.w"), bind(tape, "mid.aspp.fuse.b")};
  for (std::size_t i = 0; i < cfg_.aspp_rates.size(); ++i) {
    aspp.branch_w.push_back(bind(tape, "mid.aspp.branch" + std::to_string(i) + ".w"));
    aspp.branch_b.push_back(bind(tape, "mid.aspp.branch" + std::to_string(i) + ".b"));
  }
  x = nn::aspp(tape, x, aspp);
  x = nn::relu(tape, nn::conv2d(tape, x, bind(tape, "mid.conv2.w"), bind(tape, "mid.conv2.b")));
  x = maybe_dropout(x, cfg_.depth);

  for (std::size_t l = cfg_.depth; l >= 1; --l) {
    const std::string prefix = "dec" + std::to_string(l);
    const Var up = nn::conv_transpose2x2(tape, x, bind(tape, prefix + ".up.w"), bind(tape, prefix + ".up.b"));
    const nn::AttentionGateVars gate{bind(tape, prefix + ".gate.w_x"), bind(tape, prefix + ".gate.w_g"),
                                     bind(tape, prefix + ".gate.b_xg"), bind(tape, prefix + ".gate.psi"),
                                     bind(tape, prefix + ".gate.b_psi")};
    const nn::GateOutput gated = nn::attention_gate(tape, skips[l - 1], up, gate);
    x = conv_block(tape, nn::concat_channels(tape, gated.gated, up), prefix);
  }
  const Var logits = nn::conv2d(tape, x, bind(tape, "head.w"), bind(tape, "head.b"));
  return nn::sigmoid(tape, logits);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input, bool training, std::uint64_t seed) {
  Tape<T> tape;
  const Var out = forward(tape, tape.constant(input), training, seed);
  return tape.value(out);
}

template class UNet<float>;
template class UNet<double>;

}  // namespace octseg
