#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octseg/tape.hpp"

namespace octseg {

namespace nn {

/// Parameters of one additive attention gate, already on the tape.
struct AttentionGateVars {
  Var w_x;   // [F_int, C_skip, 1, 1]
  Var w_g;   // [F_int, C_gate, 1, 1]
  Var b_xg;  // [F_int]
  Var psi;   // [1, F_int, 1, 1]
  Var b_psi; // [1]
};

struct GateOutput {
  Var gated;  // alpha * skip
  Var alpha;  // [1, H, W], strictly inside (0, 1)
};

/// alpha = sigmoid(psi^T relu(W_x^T x + W_g^T g + b_xg) + b_psi); output alpha * x.
template <typename T>
GateOutput attention_gate(Tape<T>& tape, Var skip, Var gate, const AttentionGateVars& p);

struct AsppVars {
  std::vector<int> rates;
  std::vector<Var> branch_w;  // each [C, C, 3, 3]
  std::vector<Var> branch_b;
  Var fuse_w;  // [C, C * rates.size(), 1, 1]
  Var fuse_b;
};

/// Parallel dilated 3x3 branches, concatenated and fused by a 1x1 conv.
template <typename T>
Var aspp(Tape<T>& tape, Var x, const AsppVars& p);

}  // namespace nn

struct UNetConfig {
  std::size_t input_channels = 2;
  std::size_t base_channels = 16;
  std::size_t depth = 3;               // encoder levels below the bottleneck
  std::size_t bottleneck_channels = 0; // 0 means base_channels * 2^depth
  std::vector<int> aspp_rates{1, 2, 4, 8, 16};
  std::vector<double> dropout{0.1, 0.1, 0.2, 0.2};  // encoder levels, then bottleneck
  std::uint64_t seed = 0;

  std::size_t resolved_bottleneck() const { return bottleneck_channels ? bottleneck_channels : base_channels << depth; }
  /// Throws InvalidConfig.
  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

/// Attention U-Net with an ASPP block after the first bottleneck convolution.
template <typename T>
class UNet {
 public:
  explicit UNet(UNetConfig cfg);

  const UNetConfig& config() const noexcept { return cfg_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }

  /// Records a forward pass of input [C, H, W] and returns the [1, H, W]
  /// probability map. Dropout is active only when training; its masks are
  /// derived from seed.
  Var forward(Tape<T>& tape, Var input, bool training, std::uint64_t seed);

  /// Convenience wrapper: returns the probability map values.
  Tensor<T> forward(const Tensor<T>& input, bool training = false, std::uint64_t seed = 0);

  /// Required divisor of input height and width.
  std::size_t spatial_multiple() const noexcept { return std::size_t{1} << cfg_.depth; }

 private:
  Var conv_block(Tape<T>& tape, Var x, const std::string& prefix);
  Var bind(Tape<T>& tape, const std::string& name);

  UNetConfig cfg_;
  ParamStore<T> params_;
};

template <typename T>
UNet<T> build_unet(const UNetConfig& cfg) {
  return UNet<T>(cfg);
}

/// Parameter shapes of the network in creation order.
std::vector<std::pair<std::string, Shape>> unet_parameter_shapes(const UNetConfig& cfg);

}  // namespace octseg
