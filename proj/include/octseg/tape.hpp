#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "octseg/tensor.hpp"

namespace octseg {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

/// Reverse-mode recording of one forward pass. Values are kept for every
/// node; backward() walks the nodes in reverse creation order and finally
/// adds leaf gradients into the bound Parameters.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Var constant(Tensor<T> value);
  Var parameter(Parameter<T>& param);

  /// Records an op result. fn receives the output gradient and must push
  /// contributions into parents via accumulate().
  Var record(Tensor<T> value, const std::vector<Var>& parents, BackwardFn fn);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& shape(Var v) const { return nodes_.at(v.id).value.shape(); }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  /// Gradient buffer for v, allocated as zeros on first use.
  Tensor<T>& grad_buffer(Var v);
  /// Gradient of the last backward() w.r.t. v; empty if v did not contribute.
  const Tensor<T>& grad(Var v) const { return nodes_.at(v.id).grad; }

  /// Seeds d(loss) = seed and propagates. loss must hold one element.
  /// A tape supports a single backward pass.
  void backward(Var loss, T seed = T{1});

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace nn {

/// Same-padded (zero) convolution with odd kernel w[F, C, kh, kw] and tap
/// spacing `dilation`: y[f, i, j] = b[f] + sum w[f, c, u, v] x[c, i + r(u - kh/2), j + r(v - kw/2)].
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, std::optional<Var> b, int dilation = 1);

/// Stride-2 transposed convolution with a 2x2 kernel w[F, C, 2, 2]:
/// y[f, 2i + a, 2j + b] = bias[f] + sum_c x[c, i, j] w[f, c, a, b].
template <typename T>
Var conv_transpose2x2(Tape<T>& tape, Var x, Var w, std::optional<Var> b);

/// 2x2 max-pooling; gradient goes to the first maximum in row-major order.
template <typename T>
Var max_pool2(Tape<T>& tape, Var x);

template <typename T>
Var relu(Tape<T>& tape, Var x);

/// Saturates at the representable values next to 0 and 1, so the output
/// stays strictly inside (0, 1) for every finite input.
template <typename T>
Var sigmoid(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

template <typename T>
Var sum(Tape<T>& tape, Var x);

/// Channel concatenation of two [C, H, W] maps.
template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);

/// y[c, i, j] = x[c, i, j] * m[0, i, j].
template <typename T>
Var multiply_by_map(Tape<T>& tape, Var x, Var map);

/// Inverted dropout: kept activations are divided by (1 - p). The mask is a
/// pure function of seed.
template <typename T>
Var dropout(Tape<T>& tape, Var x, double p, std::uint64_t seed);

/// Mean binary cross-entropy of pred against a same-shaped {0,1} target, with
/// pred clamped to [clamp_eps, 1 - clamp_eps]. Returns a one-element tensor.
template <typename T>
Var bce(Tape<T>& tape, Var pred, const Tensor<T>& target, double clamp_eps);

double bce_value(std::span<const float> pred, std::span<const float> target, double clamp_eps);
double bce_value(std::span<const double> pred, std::span<const double> target, double clamp_eps);

}  // namespace nn

}  // namespace octseg
