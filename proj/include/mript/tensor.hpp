#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mript/error.hpp"

namespace mript {

using Dims = std::vector<std::size_t>;

inline std::size_t element_count(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. Value type: copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Dims dims, T fill = T{0})
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    check_dims();
  }

  Tensor(Dims dims, std::vector<T> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != element_count(dims_)) {
      fail(ErrorCode::kDimensionMismatch,
           "tensor data length " + std::to_string(data_.size()) +
               " does not match dims " + dims_to_string(dims_));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const T* ptr() const noexcept { return data_.data(); }
  T* ptr() noexcept { return data_.data(); }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * dims_[1] + j];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  Tensor reshaped(Dims dims) const& {
    Tensor out = *this;
    out.reshape(std::move(dims));
    return out;
  }
  Tensor reshaped(Dims dims) && {
    reshape(std::move(dims));
    return std::move(*this);
  }

  void reshape(Dims dims) {
    if (element_count(dims) != data_.size()) {
      fail(ErrorCode::kDimensionMismatch,
           "cannot reshape " + dims_to_string(dims_) + " to " +
               dims_to_string(dims));
    }
    dims_ = std::move(dims);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void check_dims() const {
    for (auto d : dims_) {
      if (d == 0) {
        fail(ErrorCode::kInvalidArgument,
             "tensor dims must be positive, got " + dims_to_string(dims_));
      }
    }
  }

  Dims dims_;
  std::vector<T> data_;
};

}  // namespace mript
