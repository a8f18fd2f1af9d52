#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "octseg/error.hpp"

namespace octseg {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major N-d array. Feature maps are rank 3 (channels, rows, cols);
/// convolution kernels rank 4 (out, in, kh, kw).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw Error(ErrorKind::ShapeMismatch, "data length does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t c, std::size_t r, std::size_t x) { return data_[(c * shape_[1] + r) * shape_[2] + x]; }
  const T& at(std::size_t c, std::size_t r, std::size_t x) const {
    return data_[(c * shape_[1] + r) * shape_[2] + x];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named trainable tensors, iterated in lexicographic name order.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> value) {
    if (params_.count(name)) throw Error(ErrorKind::InvalidConfig, "duplicate parameter " + name);
    Tensor<T> grad(value.shape());
    auto [it, _] = params_.emplace(name, Parameter<T>{std::move(value), std::move(grad)});
    return it->second;
  }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::ConfigMismatch, "no parameter " + name);
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.fill(T{});
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter<T>> params_;
};

}  // namespace octseg
