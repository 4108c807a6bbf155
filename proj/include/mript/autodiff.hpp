#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "mript/tensor.hpp"

namespace mript::numerics {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape is alive.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(*this); }
  const Dims& dims() const { return value().dims(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape. Nodes are appended in evaluation order and
/// backward visits them in exactly the reverse of that order. Recorded
/// values are never mutated after they are pushed.
///
/// A tape is single-threaded; use one per sample/step.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  /// With record == false no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  Var<T> constant(Tensor<T> value) { return append(std::move(value), false, {}); }

  Var<T> variable(Tensor<T> value) {
    return append(std::move(value), record_, {});
  }

  /// Records an op result. `backward` is kept only if some input needs grad.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> inputs,
              Backward backward) {
    bool needs = false;
    if (record_) {
      for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
    }
    return append(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  bool needs_grad(Var<T> v) const { return nodes_[v.id()].needs_grad; }

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id()].value; }

  /// Gradient accumulated for `v`, or nullptr when nothing reached it.
  const Tensor<T>* grad(Var<T> v) const {
    const auto& g = nodes_[v.id()].grad;
    return g ? &*g : nullptr;
  }

  /// Mutable gradient buffer for accumulation (zero-initialised on first use).
  /// Returns nullptr when `v` does not need a gradient.
  Tensor<T>* grad_buffer(Var<T> v) {
    auto& node = nodes_[v.id()];
    if (!node.needs_grad) return nullptr;
    if (!node.grad) node.grad.emplace(node.value.dims(), T{0});
    return &*node.grad;
  }

  void accumulate(Var<T> v, const Tensor<T>& g) {
    Tensor<T>* buf = grad_buffer(v);
    if (buf == nullptr) return;
    if (buf->dims() != g.dims()) {
      fail(ErrorCode::kDimensionMismatch,
           "gradient dims " + dims_to_string(g.dims()) + " do not match value " +
               dims_to_string(buf->dims()));
    }
    auto dst = buf->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  /// Seeds d(root)/d(root) = 1 and propagates. Root must hold one element.
  void backward(Var<T> root) {
    if (value(root).size() != 1) {
      fail(ErrorCode::kInvalidArgument,
           "backward requires a scalar root, got dims " +
               dims_to_string(value(root).dims()));
    }
    if (!nodes_[root.id()].needs_grad) return;
    grad_buffer(root)->fill(T{1});
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.backward || !node.grad) continue;
      // The closure may append to other nodes' grads but never to this one.
      const Tensor<T> g = *node.grad;
      node.backward(*this, g);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    std::optional<Tensor<T>> grad;
    Backward backward;
    bool needs_grad = false;
  };

  Var<T> append(Tensor<T> value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), std::nullopt, std::move(backward),
                          needs_grad});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace mript::numerics
