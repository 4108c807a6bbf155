#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "mript/autodiff.hpp"
#include "mript/tensor.hpp"

namespace mript::numerics {

/// Scalar-valued function of one tensor, built on the given tape.
using ScalarOp = std::function<Var<double>(Var<double>)>;

/// Compares the recorded gradient of `op` at `point` against central
/// differences (f(x+h_i) - f(x-h_i)) / 2h_i with h_i = h * max(1, |x_i|).
/// Returns the max over checked components of |a-b| / max(|a|,|b|,1e-8).
/// `components` restricts the check to the given flat indices (empty = all).
/// Throws kNonFinite if any evaluated value or gradient is not finite.
double grad_check(const ScalarOp& op, const Tensor<double>& point, double h = 1e-5,
                  std::span<const std::size_t> components = {});

}  // namespace mript::numerics
