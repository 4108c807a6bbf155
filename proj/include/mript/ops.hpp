#pragma once

// Differentiable tensor primitives.
//
// Every primitive exists in two forms: a plain forward kernel on Tensor<T>
// and an overload on Var<T> that records the result on a Tape together with
// its backward rule. Both forms share the same forward code path.

#include <cstddef>
#include <optional>
#include <span>

#include "mript/autodiff.hpp"
#include "mript/tensor.hpp"

namespace mript::numerics {

/// Additive bias standing in for -inf in attention masks.
inline constexpr double kMaskedLogit = -1e9;

// ---- forward kernels -------------------------------------------------------

/// input [C,H,W], weight [O,C,k,k], bias [O] -> [O,H',W'] with
/// H' = (H + 2*pad - k)/stride + 1. Zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::size_t stride, std::size_t pad);

/// input [N,Din], weight [Dout,Din], bias [Dout] -> [N,Dout].
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias);

/// Normalises over the last axis, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

template <typename T>
Tensor<T> softmax(const Tensor<T>& input, std::size_t axis);

/// Exact GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& input);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Multi-head scaled dot-product attention.
/// q [Nq,D], k [Nk,D], v [Nk,Dv]; optional additive mask [Nq,Nk].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t num_heads, const Tensor<T>* mask = nullptr);

/// Softmax weights of `attention`, dims [heads, Nq, Nk].
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k,
                            std::size_t num_heads, const Tensor<T>* mask = nullptr);

/// [r*r*C, H, W] -> [C, r*H, r*W];
/// out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r);

/// Inverse rearrangement of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r);

// ---- recorded ops ----------------------------------------------------------

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride,
              std::size_t pad);

template <typename T>
Var<T> linear(Var<T> input, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> layer_norm(Var<T> input, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

template <typename T>
Var<T> softmax(Var<T> input, std::size_t axis);

template <typename T>
Var<T> gelu(Var<T> input);

template <typename T>
Var<T> relu(Var<T> input);

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t num_heads,
                 const Tensor<T>* mask = nullptr);

/// Attention over `groups` independent row blocks: rows [g*nq, (g+1)*nq) of q
/// attend only to rows [g*nk, (g+1)*nk) of k/v. `head_bias` [heads,nq,nk] is a
/// learned additive bias shared by all groups; `group_mask` is a constant
/// additive mask of dims [groups,nq,nk] or [nq,nk].
template <typename T>
Var<T> grouped_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t num_heads,
                         std::size_t groups, std::optional<Var<T>> head_bias,
                         const Tensor<T>* group_mask);

template <typename T>
Var<T> pixel_shuffle(Var<T> input, std::size_t r);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

/// Sum of all elements -> [1].
template <typename T>
Var<T> sum(Var<T> input);

/// Sum of input * weights (weights constant, same dims) -> [1].
template <typename T>
Var<T> weighted_sum(Var<T> input, const Tensor<T>& weights);

/// mean |pred - target| -> [1]. Target is constant.
template <typename T>
Var<T> mean_abs_error(Var<T> pred, const Tensor<T>& target);

/// out.flat[i] = input.flat[indices[i]]; backward scatters with accumulation.
template <typename T>
Var<T> gather(Var<T> input, std::span<const std::size_t> indices, Dims out_dims);

/// Selects whole rows of a rank-2 tensor.
template <typename T>
Var<T> gather_rows(Var<T> input, std::span<const std::size_t> rows);

template <typename T>
Var<T> transpose2d(Var<T> input);

template <typename T>
Var<T> reshape(Var<T> input, Dims dims);

/// Stacks rank-2 tensors with equal column counts.
template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b);

}  // namespace mript::numerics
