#include "mript/error.hpp"
#include "mript/model.hpp"
#include "mript/ops.hpp"

namespace mript::model {

std::vector<std::size_t> window_permutation(std::size_t grid, std::size_t window,
                                            std::size_t shift) {
  if (window == 0 || grid % window != 0 || shift >= window) {
    fail(ErrorCode::kInvalidArgument, "window partition needs grid % window == 0 and shift < window");
  }
  const std::size_t per_side = grid / window;
  std::vector<std::size_t> perm;
  perm.reserve(grid * grid);
  for (std::size_t wy = 0; wy < per_side; ++wy)
    for (std::size_t wx = 0; wx < per_side; ++wx)
      for (std::size_t iy = 0; iy < window; ++iy)
        for (std::size_t ix = 0; ix < window; ++ix) {
          const std::size_t r = (wy * window + iy + shift) % grid;
          const std::size_t c = (wx * window + ix + shift) % grid;
          perm.push_back(r * grid + c);
        }
  return perm;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || inv[perm[i]] != perm.size()) {
      fail(ErrorCode::kInvalidArgument, "not a permutation");
    }
    inv[perm[i]] = i;
  }
  return inv;
}

template <typename T>
Tensor<T> shifted_window_mask(std::size_t grid, std::size_t window, std::size_t shift) {
  if (window == 0 || grid % window != 0 || shift >= window) {
    fail(ErrorCode::kInvalidArgument, "window mask needs grid % window == 0 and shift < window");
  }
  // Region label of a coordinate on the rolled grid.
  auto region = [&](std::size_t x) -> std::size_t {
    if (shift == 0 || x < grid - window) return 0;
    return x < grid - shift ? 1 : 2;
  };
  const std::size_t per_side = grid / window, n = window * window;
  Tensor<T> mask({per_side * per_side, n, n}, T{0});
  for (std::size_t wy = 0; wy < per_side; ++wy)
    for (std::size_t wx = 0; wx < per_side; ++wx) {
      const std::size_t g = wy * per_side + wx;
      std::vector<std::size_t> label(n);
      for (std::size_t i = 0; i < n; ++i) {
        label[i] = region(wy * window + i / window) * 3 + region(wx * window + i % window);
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (label[i] != label[j]) mask.at(g, i, j) = static_cast<T>(numerics::kMaskedLogit);
        }
    }
  return mask;
}

std::vector<std::size_t> relative_position_index(std::size_t window) {
  const std::size_t n = window * window, span = 2 * window - 1;
  std::vector<std::size_t> idx(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dy = i / window + window - 1 - j / window;
      const std::size_t dx = i % window + window - 1 - j % window;
      idx[i * n + j] = dy * span + dx;
    }
  return idx;
}

template Tensor<float> shifted_window_mask<float>(std::size_t, std::size_t, std::size_t);
template Tensor<double> shifted_window_mask<double>(std::size_t, std::size_t, std::size_t);

}  // namespace mript::model
