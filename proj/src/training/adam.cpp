#include <cmath>

#include "mript/ops.hpp"
#include "mript/training.hpp"

namespace mript::training {

template <typename T>
numerics::Var<T> l1_loss(numerics::Var<T> pred, const Tensor<T>& target) {
  return numerics::mean_abs_error(pred, target);
}

template numerics::Var<float> l1_loss(numerics::Var<float>, const Tensor<float>&);
template numerics::Var<double> l1_loss(numerics::Var<double>, const Tensor<double>&);

double l1_loss(const Tensor<float>& pred, const Tensor<float>& target) {
  if (pred.dims() != target.dims()) {
    fail(ErrorCode::kDimensionMismatch, "l1_loss dims " + dims_to_string(pred.dims()) + " vs " +
                                            dims_to_string(target.dims()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return s / static_cast<double>(pred.size());
}

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.lr > 0) || !(config_.beta1 >= 0 && config_.beta1 < 1) ||
      !(config_.beta2 >= 0 && config_.beta2 < 1) || !(config_.eps > 0)) {
    fail(ErrorCode::kInvalidArgument, "invalid Adam hyperparameters");
  }
}

void Adam::step(ParameterStore<float>& params, const std::map<std::string, Tensor<float>>& grads) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) fail(ErrorCode::kMissingTensor, "Adam: unknown parameter '" + name + "'");
    if (it->second.dims() != g.dims()) {
      fail(ErrorCode::kDimensionMismatch, "Adam: gradient dims differ for '" + name + "'");
    }
    for (float x : g.data()) {
      if (!std::isfinite(x)) fail(ErrorCode::kNonFinite, "non-finite gradient for '" + name + "'");
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (const auto& [name, g] : grads) {
    Tensor<float>& p = params.at(name);
    auto [slot_it, fresh] = slots_.try_emplace(name);
    Slot& slot = slot_it->second;
    if (fresh) {
      slot.m = Tensor<float>(g.dims(), 0.0f);
      slot.v = Tensor<float>(g.dims(), 0.0f);
    }
    ++slot.steps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.steps));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double m = b1 * slot.m[i] + (1.0 - b1) * gi;
      const double v = b2 * slot.v[i] + (1.0 - b2) * gi * gi;
      slot.m[i] = static_cast<float>(m);
      slot.v[i] = static_cast<float>(v);
      p[i] = static_cast<float>(p[i] - config_.lr * (m / c1) / (std::sqrt(v / c2) + config_.eps));
    }
  }
}

void Adam::restore(std::uint64_t steps, std::map<std::string, Slot> slots) {
  steps_ = steps;
  slots_ = std::move(slots);
}

}  // namespace mript::training
