#include "octseg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "octseg/random.hpp"

namespace octseg {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(Parameter<T>& param) {
  nodes_.push_back(Node{param.value, {}, &param, true, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, const std::vector<Var>& parents, BackwardFn fn) {
  bool needs = false;
  for (const Var p : parents) needs = needs || nodes_.at(p.id).needs_grad;
  nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var loss, T seed) {
  if (consumed_ || nodes_.empty() || !loss.valid() || loss.id >= nodes_.size()) {
    throw Error(ErrorKind::NoRecordedGraph, "backward() needs a recorded forward pass");
  }
  if (nodes_[loss.id].value.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "backward() starts from a scalar");
  }
  consumed_ = true;
  grad_buffer(loss)[0] = seed;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) {
      node.backward(*this, node.grad);
    } else if (node.param != nullptr) {
      auto& dst = node.param->grad;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

namespace nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

template <typename T>
void require_rank3(const Tape<T>& tape, Var x, const char* op) {
  require(tape.shape(x).size() == 3,
          std::string(op) + ": expected a [C,H,W] input, got " + shape_string(tape.shape(x)));
}

// Valid output window of one kernel tap displaced by (dy, dx).
struct TapWindow {
  std::ptrdiff_t dy, dx;
  std::size_t y0, y1, x0, x1;

  TapWindow(std::ptrdiff_t dy_, std::ptrdiff_t dx_, std::size_t h, std::size_t w) : dy(dy_), dx(dx_) {
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    y0 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-dy, 0, H));
    y1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(H - dy, 0, H));
    x0 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-dx, 0, W));
    x1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(W - dx, 0, W));
  }
  bool empty() const { return y0 >= y1 || x0 >= x1; }
  // Flat index of the input pixel read by output (y, x0).
  std::size_t source(std::size_t y, std::size_t width) const {
    return static_cast<std::size_t>((static_cast<std::ptrdiff_t>(y) + dy) * static_cast<std::ptrdiff_t>(width) +
                                    static_cast<std::ptrdiff_t>(x0) + dx);
  }
};

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, std::optional<Var> b, int dilation) {
  require_rank3(tape, x, "conv2d");
  const Shape xs = tape.shape(x);
  const Shape ws = tape.shape(w);
  require(ws.size() == 4 && ws[1] == xs[0],
          "conv2d: kernel " + shape_string(ws) + " does not match input " + shape_string(xs));
  require(ws[2] % 2 == 1 && ws[3] % 2 == 1, "conv2d: kernel extent must be odd");
  require(dilation >= 1, "conv2d: dilation must be positive");
  const std::size_t F = ws[0], C = ws[1], KH = ws[2], KW = ws[3];
  const std::size_t H = xs[1], W = xs[2], plane = H * W;
  if (b) require(tape.shape(*b) == Shape{F}, "conv2d: bias must be [F]");

  std::vector<TapWindow> taps;
  taps.reserve(KH * KW);
  for (std::size_t u = 0; u < KH; ++u) {
    for (std::size_t v = 0; v < KW; ++v) {
      taps.emplace_back((static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(KH / 2)) * dilation,
                        (static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(KW / 2)) * dilation, H, W);
    }
  }

  const Tensor<T>& xin = tape.value(x);
  const Tensor<T>& wk = tape.value(w);
  Tensor<T> out(Shape{F, H, W});
  for (std::size_t f = 0; f < F; ++f) {
    T* o = out.data() + f * plane;
    if (b) std::fill(o, o + plane, tape.value(*b)[f]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* in = xin.data() + c * plane;
      const T* wfc = wk.data() + (f * C + c) * KH * KW;
      for (std::size_t t = 0; t < taps.size(); ++t) {
        const TapWindow& tap = taps[t];
        const T wt = wfc[t];
        if (tap.empty() || wt == T{}) continue;
        const std::size_t n = tap.x1 - tap.x0;
        for (std::size_t y = tap.y0; y < tap.y1; ++y) {
          T* orow = o + y * W + tap.x0;
          const T* irow = in + tap.source(y, W);
          for (std::size_t k = 0; k < n; ++k) orow[k] += wt * irow[k];
        }
      }
    }
  }

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  return tape.record(std::move(out), parents, [=](Tape<T>& tp, const Tensor<T>& go) {
    const Tensor<T>& xin = tp.value(x);
    const Tensor<T>& wk = tp.value(w);
    if (b && tp.needs_grad(*b)) {
      Tensor<T>& gb = tp.grad_buffer(*b);
      for (std::size_t f = 0; f < F; ++f) {
        const T* g = go.data() + f * plane;
        T acc{};
        for (std::size_t i = 0; i < plane; ++i) acc += g[i];
        gb[f] += acc;
      }
    }
    Tensor<T>* gw = tp.needs_grad(w) ? &tp.grad_buffer(w) : nullptr;
    Tensor<T>* gx = tp.needs_grad(x) ? &tp.grad_buffer(x) : nullptr;
    for (std::size_t f = 0; f < F; ++f) {
      const T* g = go.data() + f * plane;
      for (std::size_t c = 0; c < C; ++c) {
        const T* in = xin.data() + c * plane;
        const std::size_t wbase = (f * C + c) * KH * KW;
        for (std::size_t t = 0; t < taps.size(); ++t) {
          const TapWindow& tap = taps[t];
          if (tap.empty()) continue;
          const T wt = wk[wbase + t];
          const std::size_t n = tap.x1 - tap.x0;
          T acc{};
          for (std::size_t y = tap.y0; y < tap.y1; ++y) {
            const T* grow = g + y * W + tap.x0;
            const std::size_t src = tap.source(y, W);
            if (gw) {
              const T* irow = in + src;
              for (std::size_t k = 0; k < n; ++k) acc += grow[k] * irow[k];
            }
            if (gx && wt != T{}) {
              T* gxrow = gx->data() + c * plane + src;
              for (std::size_t k = 0; k < n; ++k) gxrow[k] += wt * grow[k];
            }
          }
          if (gw) (*gw)[wbase + t] += acc;
        }
      }
    }
  });
}

template <typename T>
Var conv_transpose2x2(Tape<T>& tape, Var x, Var w, std::optional<Var> b) {
  require_rank3(tape, x, "conv_transpose2x2");
  const Shape xs = tape.shape(x);
  const Shape ws = tape.shape(w);
  require(ws.size() == 4 && ws[1] == xs[0] && ws[2] == 2 && ws[3] == 2,
          "conv_transpose2x2: kernel " + shape_string(ws) + " does not match input " + shape_string(xs));
  const std::size_t F = ws[0], C = ws[1], H = xs[1], W = xs[2], OW = 2 * W;
  if (b) require(tape.shape(*b) == Shape{F}, "conv_transpose2x2: bias must be [F]");

  const Tensor<T>& xin = tape.value(x);
  const Tensor<T>& wk = tape.value(w);
  Tensor<T> out(Shape{F, 2 * H, 2 * W});
  for (std::size_t f = 0; f < F; ++f) {
    T* o = out.data() + f * 4 * H * W;
    if (b) std::fill(o, o + 4 * H * W, tape.value(*b)[f]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* in = xin.data() + c * H * W;
      const T* k = wk.data() + (f * C + c) * 4;
      for (std::size_t i = 0; i < H; ++i) {
        T* top = o + (2 * i) * OW;
        T* bottom = top + OW;
        for (std::size_t j = 0; j < W; ++j) {
          const T v = in[i * W + j];
          top[2 * j] += v * k[0];
          top[2 * j + 1] += v * k[1];
          bottom[2 * j] += v * k[2];
          bottom[2 * j + 1] += v * k[3];
        }
      }
    }
  }

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  return tape.record(std::move(out), parents, [=](Tape<T>& tp, const Tensor<T>& go) {
    const Tensor<T>& xin = tp.value(x);
    const Tensor<T>& wk = tp.value(w);
    if (b && tp.needs_grad(*b)) {
      Tensor<T>& gb = tp.grad_buffer(*b);
      for (std::size_t f = 0; f < F; ++f) {
        T acc{};
        for (std::size_t i = 0; i < 4 * H * W; ++i) acc += go[f * 4 * H * W + i];
        gb[f] += acc;
      }
    }
    Tensor<T>* gw = tp.needs_grad(w) ? &tp.grad_buffer(w) : nullptr;
    Tensor<T>* gx = tp.needs_grad(x) ? &tp.grad_buffer(x) : nullptr;
    for (std::size_t f = 0; f < F; ++f) {
      const T* g = go.data() + f * 4 * H * W;
      for (std::size_t c = 0; c < C; ++c) {
        const T* in = xin.data() + c * H * W;
        const T* k = wk.data() + (f * C + c) * 4;
        T acc[4] = {};
        for (std::size_t i = 0; i < H; ++i) {
          const T* top = g + (2 * i) * OW;
          const T* bottom = top + OW;
          for (std::size_t j = 0; j < W; ++j) {
            const T g0 = top[2 * j], g1 = top[2 * j + 1], g2 = bottom[2 * j], g3 = bottom[2 * j + 1];
            if (gw) {
              const T v = in[i * W + j];
              acc[0] += g0 * v;
              acc[1] += g1 * v;
              acc[2] += g2 * v;
              acc[3] += g3 * v;
            }
            if (gx) (*gx)[c * H * W + i * W + j] += g0 * k[0] + g1 * k[1] + g2 * k[2] + g3 * k[3];
          }
        }
        if (gw) {
          for (int q = 0; q < 4; ++q) (*gw)[(f * C + c) * 4 + static_cast<std::size_t>(q)] += acc[q];
        }
      }
    }
  });
}

template <typename T>
Var max_pool2(Tape<T>& tape, Var x) {
  require_rank3(tape, x, "max_pool2");
  const Shape xs = tape.shape(x);
  const std::size_t C = xs[0], H = xs[1], W = xs[2];
  if (H % 2 != 0 || W % 2 != 0) {
    throw Error(ErrorKind::OddDimension, "max_pool2 needs even spatial dims, got " + shape_string(xs));
  }
  const std::size_t OH = H / 2, OW = W / 2;
  const Tensor<T>& xin = tape.value(x);
  Tensor<T> out(Shape{C, OH, OW});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        const std::size_t base = (c * H + 2 * i) * W + 2 * j;
        const std::size_t cand[4] = {base, base + 1, base + W, base + W + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q) {
          if (xin[cand[q]] > xin[best]) best = cand[q];
        }
        const std::size_t o = (c * OH + i) * OW + j;
        out[o] = xin[best];
        argmax[o] = best;
      }
    }
  }
  return tape.record(std::move(out), {x}, [=, argmax = std::move(argmax)](Tape<T>& tp, const Tensor<T>& go) {
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += go[o];
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.values()) v = v > T{} ? v : T{};
  return tape.record(std::move(out), {x}, [=](Tape<T>& tp, const Tensor<T>& go) {
    const Tensor<T>& xin = tp.value(x);
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xin[i] > T{}) gx[i] += go[i];
    }
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  constexpr T kSigmoidFloor = std::numeric_limits<T>::min();
  constexpr T kSigmoidCeil = T{1} - std::numeric_limits<T>::epsilon() / 2;
  Tensor<T> out = tape.value(x);
  for (auto& v : out.values()) {
    if (v >= T{}) {
      v = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T{1} + e);
    }
    v = std::clamp(v, kSigmoidFloor, kSigmoidCeil);
  }
  const Var y{tape.size()};
  return tape.record(std::move(out), {x}, [=](Tape<T>& tp, const Tensor<T>& go) {
    const Tensor<T>& s = tp.value(y);
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * s[i] * (T{1} - s[i]);
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require(tape.shape(a) == tape.shape(b), "add: shapes " + shape_string(tape.shape(a)) + " and " +
                                              shape_string(tape.shape(b)) + " differ");
  Tensor<T> out = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [=](Tape<T>& tp, const Tensor<T>& go) {
    for (const Var v : {a, b}) {
      if (!tp.needs_grad(v)) continue;
      Tensor<T>& g = tp.grad_buffer(v);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.values()) v *= factor;
  return tape.record(std::move(out), {x}, [=](Tape<T>& tp, const Tensor<T>& go) {
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * go[i];
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T acc{};
  for (const T v : tape.value(x).values()) acc += v;
  return tape.record(Tensor<T>(Shape{1}, acc), {x}, [=](Tape<T>& tp, const Tensor<T>& go) {
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[0];
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  require_rank3(tape, a, "concat_channels");
  require_rank3(tape, b, "concat_channels");
  const Shape as = tape.shape(a), bs = tape.shape(b);
  require(as[1] == bs[1] && as[2] == bs[2], "concat_channels: spatial dims differ");
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  Tensor<T> out(Shape{as[0] + bs[0], as[1], as[2]});
  std::copy(av.values().begin(), av.values().end(), out.data());
  std::copy(bv.values().begin(), bv.values().end(), out.data() + av.size());
  const std::size_t split = av.size();
  return tape.record(std::move(out), {a, b}, [=](Tape<T>& tp, const Tensor<T>& go) {
    if (tp.needs_grad(a)) {
      Tensor<T>& g = tp.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& g = tp.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[split + i];
    }
  });
}

template <typename T>
Var multiply_by_map(Tape<T>& tape, Var x, Var map) {
  require_rank3(tape, x, "multiply_by_map");
  const Shape xs = tape.shape(x);
  require(tape.shape(map) == Shape{1, xs[1], xs[2]},
          "multiply_by_map: map " + shape_string(tape.shape(map)) + " does not fit " + shape_string(xs));
  const std::size_t C = xs[0], plane = xs[1] * xs[2];
  Tensor<T> out = tape.value(x);
  const Tensor<T>& m = tape.value(map);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] *= m[i];
  }
  return tape.record(std::move(out), {x, map}, [=](Tape<T>& tp, const Tensor<T>& go) {
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& mv = tp.value(map);
    if (tp.needs_grad(x)) {
      Tensor<T>& gx = tp.grad_buffer(x);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += go[c * plane + i] * mv[i];
      }
    }
    if (tp.needs_grad(map)) {
      Tensor<T>& gm = tp.grad_buffer(map);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < plane; ++i) gm[i] += go[c * plane + i] * xv[c * plane + i];
      }
    }
  });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw Error(ErrorKind::InvalidConfig, "dropout rate must lie in [0, 1)");
  if (p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  SplitMix64 rng(seed);
  Tensor<T> mask(tape.shape(x));
  for (auto& m : mask.values()) m = rng.uniform() >= p ? keep_scale : T{};
  Tensor<T> out = tape.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return tape.record(std::move(out), {x}, [=, mask = std::move(mask)](Tape<T>& tp, const Tensor<T>& go) {
    Tensor<T>& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
  });
}

namespace {

template <typename T>
double bce_sum(std::span<const T> pred, std::span<const T> target, double clamp_eps) {
  if (pred.size() != target.size() || pred.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "bce: prediction and target sizes differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), clamp_eps, 1.0 - clamp_eps);
    const double t = static_cast<double>(target[i]);
    total += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return -total / static_cast<double>(pred.size());
}

}  // namespace

double bce_value(std::span<const float> pred, std::span<const float> target, double clamp_eps) {
  return bce_sum(pred, target, clamp_eps);
}

double bce_value(std::span<const double> pred, std::span<const double> target, double clamp_eps) {
  return bce_sum(pred, target, clamp_eps);
}

template <typename T>
Var bce(Tape<T>& tape, Var pred, const Tensor<T>& target, double clamp_eps) {
  if (tape.shape(pred) != target.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "bce: prediction " + shape_string(tape.shape(pred)) +
                                              " vs target " + shape_string(target.shape()));
  }
  const double loss = bce_sum<T>(tape.value(pred).values(), target.values(), clamp_eps);
  return tape.record(Tensor<T>(Shape{1}, static_cast<T>(loss)), {pred},
                     [=](Tape<T>& tp, const Tensor<T>& go) {
                       const Tensor<T>& pv = tp.value(pred);
                       Tensor<T>& gp = tp.grad_buffer(pred);
                       const double n = static_cast<double>(pv.size());
                       const double upstream = static_cast<double>(go[0]);
                       // The clamp only guards the logarithms; the gradient is
                       // evaluated at the clamped point and passed straight through.
                       for (std::size_t i = 0; i < pv.size(); ++i) {
                         const double p = std::clamp(static_cast<double>(pv[i]), clamp_eps, 1.0 - clamp_eps);
                         const double t = static_cast<double>(target[i]);
                         gp[i] += static_cast<T>(upstream * (p - t) / (p * (1.0 - p)) / n);
                       }
                     });
}

#define OCTSEG_INSTANTIATE_OPS(T)                                                         \
  template Var conv2d<T>(Tape<T>&, Var, Var, std::optional<Var>, int);                    \
  template Var conv_transpose2x2<T>(Tape<T>&, Var, Var, std::optional<Var>);              \
  template Var max_pool2<T>(Tape<T>&, Var);                                               \
  template Var relu<T>(Tape<T>&, Var);                                                    \
  template Var sigmoid<T>(Tape<T>&, Var);                                                 \
  template Var add<T>(Tape<T>&, Var, Var);                                                \
  template Var scale<T>(Tape<T>&, Var, T);                                                \
  template Var sum<T>(Tape<T>&, Var);                                                     \
  template Var concat_channels<T>(Tape<T>&, Var, Var);                                    \
  template Var multiply_by_map<T>(Tape<T>&, Var, Var);                                    \
  template Var dropout<T>(Tape<T>&, Var, double, std::uint64_t);                          \
  template Var bce<T>(Tape<T>&, Var, const Tensor<T>&, double);

OCTSEG_INSTANTIATE_OPS(float)
OCTSEG_INSTANTIATE_OPS(double)

#undef OCTSEG_INSTANTIATE_OPS

}  // namespace nn

template class Tape<float>;
template class Tape<double>;

}  // namespace octseg
