#include "mript/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace mript::numerics {
namespace {

double evaluate(const ScalarOp& op, const Tensor<double>& x) {
  Tape<double> tape(false);
  const Var<double> out = op(tape.constant(x));
  if (out.value().size() != 1) {
    fail(ErrorCode::kInvalidArgument, "grad_check op must be scalar-valued, got dims " +
                                          dims_to_string(out.dims()));
  }
  const double v = out.value()[0];
  if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "grad_check: op value is not finite");
  return v;
}

}  // namespace

double grad_check(const ScalarOp& op, const Tensor<double>& point, double h,
                  std::span<const std::size_t> components) {
  if (!(h > 0)) fail(ErrorCode::kInvalidArgument, "grad_check step must be > 0");
  for (double x : point.data()) {
    if (!std::isfinite(x)) fail(ErrorCode::kNonFinite, "grad_check: point is not finite");
  }

  Tape<double> tape;
  const Var<double> x = tape.variable(point);
  const Var<double> out = op(x);
  if (out.value().size() != 1) {
    fail(ErrorCode::kInvalidArgument, "grad_check op must be scalar-valued, got dims " +
                                          dims_to_string(out.dims()));
  }
  tape.backward(out);
  const Tensor<double>* analytic = tape.grad(x);
  const Tensor<double> zeros(point.dims(), 0.0);
  if (analytic == nullptr) analytic = &zeros;

  std::vector<std::size_t> all;
  if (components.empty()) {
    all.resize(point.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    components = all;
  }

  double worst = 0;
  Tensor<double> probe = point;
  for (std::size_t i : components) {
    if (i >= point.size()) fail(ErrorCode::kInvalidArgument, "grad_check component out of range");
    const double xi = point[i];
    const double step = h * std::max(1.0, std::abs(xi));
    probe[i] = xi + step;
    const double fp = evaluate(op, probe);
    probe[i] = xi - step;
    const double fm = evaluate(op, probe);
    probe[i] = xi;
    const double numeric = (fp - fm) / (2 * step);
    const double a = (*analytic)[i];
    if (!std::isfinite(a)) {
      fail(ErrorCode::kNonFinite, "grad_check: analytic gradient component " +
                                      std::to_string(i) + " is not finite");
    }
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mript::numerics
