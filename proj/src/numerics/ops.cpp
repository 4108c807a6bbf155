#include "mript/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mript::numerics {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  require(t.rank() == rank, ErrorCode::kDimensionMismatch,
          std::string(what) + " must have rank " + std::to_string(rank) +
              ", got " + dims_to_string(t.dims()));
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// ---- convolution helpers ---------------------------------------------------

struct ConvGeometry {
  std::size_t channels, height, width, out_channels, kernel, stride, pad;
  std::size_t out_h, out_w;

  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, std::size_t stride,
                           std::size_t pad) {
  require_rank(input, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  require(stride >= 1, ErrorCode::kInvalidArgument, "conv2d stride must be >= 1");
  const std::size_t k = weight.dim(2);
  require(weight.dim(3) == k, ErrorCode::kDimensionMismatch,
          "conv2d kernel must be square, got " + dims_to_string(weight.dims()));
  require(weight.dim(1) == input.dim(0), ErrorCode::kDimensionMismatch,
          "conv2d weight expects " + std::to_string(weight.dim(1)) +
              " input channels, input has " + std::to_string(input.dim(0)));
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
          ErrorCode::kDimensionMismatch,
          "conv2d bias dims " + dims_to_string(bias.dims()) +
              " do not match output channels " + std::to_string(weight.dim(0)));
  const std::size_t h = input.dim(1), w = input.dim(2);
  require(h + 2 * pad >= k && w + 2 * pad >= k, ErrorCode::kDimensionMismatch,
          "conv2d kernel larger than padded input");
  ConvGeometry g{input.dim(0), h, w, weight.dim(0), k, stride, pad, 0, 0};
  g.out_h = (h + 2 * pad - k) / stride + 1;
  g.out_w = (w + 2 * pad - k) / stride + 1;
  return g;
}

// cols [C*k*k, out_h*out_w]
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* cols) {
  const std::size_t p = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * p;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = in + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? T{0}
                          : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* in) {
  const std::size_t p = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * p;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = in + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T> make_cols(const Tensor<T>& input, const ConvGeometry& g) {
  std::vector<T> cols(g.channels * g.kernel * g.kernel * g.out_h * g.out_w);
  im2col(input.ptr(), g, cols.data());
  return cols;
}

// ---- attention core --------------------------------------------------------

struct AttentionGeometry {
  std::size_t groups, heads, nq, nk, dim, vdim;
  std::size_t head_dim() const { return dim / heads; }
  std::size_t head_vdim() const { return vdim / heads; }
};

template <typename T>
AttentionGeometry attention_geometry(const Tensor<T>& q, const Tensor<T>& k,
                                     const Tensor<T>& v, std::size_t heads,
                                     std::size_t groups) {
  require_rank(q, 2, "attention q");
  require_rank(k, 2, "attention k");
  require_rank(v, 2, "attention v");
  require(heads >= 1 && groups >= 1, ErrorCode::kInvalidArgument,
          "attention needs at least one head and one group");
  require(q.dim(1) == k.dim(1), ErrorCode::kDimensionMismatch,
          "attention q/k feature dims differ");
  require(k.dim(0) == v.dim(0), ErrorCode::kDimensionMismatch,
          "attention k/v row counts differ");
  require(q.dim(1) % heads == 0 && v.dim(1) % heads == 0,
          ErrorCode::kDimensionMismatch,
          "attention feature dim not divisible by num_heads=" + std::to_string(heads));
  require(q.dim(0) % groups == 0 && k.dim(0) % groups == 0,
          ErrorCode::kDimensionMismatch, "attention rows not divisible by groups");
  return {groups, heads, q.dim(0) / groups, k.dim(0) / groups, q.dim(1), v.dim(1)};
}

template <typename T>
void check_bias_dims(const Tensor<T>* bias, const AttentionGeometry& g,
                     bool allow_grouped, const char* what) {
  if (bias == nullptr) return;
  const Dims plain{g.nq, g.nk};
  const Dims grouped{g.groups, g.nq, g.nk};
  const bool ok = bias->dims() == plain || (allow_grouped && bias->dims() == grouped);
  require(ok, ErrorCode::kDimensionMismatch,
          std::string(what) + " dims " + dims_to_string(bias->dims()) +
              " do not match attention logits");
}

// probs: [groups, heads, nq, nk]
template <typename T>
void attention_forward(const AttentionGeometry& g, const T* q, const T* k,
                       const T* v, const T* head_bias, const Tensor<T>* mask,
                       T* out, T* probs) {
  const std::size_t dh = g.head_dim(), dvh = g.head_vdim();
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  const bool grouped_mask = mask != nullptr && mask->rank() == 3;
  std::vector<T> logits(g.nk);
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    const T* mrow_base = mask == nullptr
                             ? nullptr
                             : mask->ptr() + (grouped_mask ? grp * g.nq * g.nk : 0);
    for (std::size_t h = 0; h < g.heads; ++h) {
      for (std::size_t i = 0; i < g.nq; ++i) {
        const T* qi = q + (grp * g.nq + i) * g.dim + h * dh;
        T maxv = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < g.nk; ++j) {
          const T* kj = k + (grp * g.nk + j) * g.dim + h * dh;
          T s = 0;
          for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
          s *= scale;
          if (head_bias) s += head_bias[(h * g.nq + i) * g.nk + j];
          if (mrow_base) s += mrow_base[i * g.nk + j];
          logits[j] = s;
          maxv = std::max(maxv, s);
        }
        T total = 0;
        for (std::size_t j = 0; j < g.nk; ++j) {
          logits[j] = std::exp(logits[j] - maxv);
          total += logits[j];
        }
        T* p = probs + ((grp * g.heads + h) * g.nq + i) * g.nk;
        for (std::size_t j = 0; j < g.nk; ++j) p[j] = logits[j] / total;
        T* oi = out + (grp * g.nq + i) * g.vdim + h * dvh;
        for (std::size_t e = 0; e < dvh; ++e) oi[e] = 0;
        for (std::size_t j = 0; j < g.nk; ++j) {
          const T* vj = v + (grp * g.nk + j) * g.vdim + h * dvh;
          for (std::size_t e = 0; e < dvh; ++e) oi[e] += p[j] * vj[e];
        }
      }
    }
  }
}

template <typename T>
struct AttentionGrads {
  T* dq;
  T* dk;
  T* dv;
  T* dbias;
};

template <typename T>
void attention_backward(const AttentionGeometry& g, const T* q, const T* k,
                        const T* v, const T* probs, const T* dout,
                        AttentionGrads<T> grads) {
  const std::size_t dh = g.head_dim(), dvh = g.head_vdim();
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  std::vector<T> dp(g.nk);
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    for (std::size_t h = 0; h < g.heads; ++h) {
      for (std::size_t i = 0; i < g.nq; ++i) {
        const T* p = probs + ((grp * g.heads + h) * g.nq + i) * g.nk;
        const T* doi = dout + (grp * g.nq + i) * g.vdim + h * dvh;
        T dot = 0;
        for (std::size_t j = 0; j < g.nk; ++j) {
          const T* vj = v + (grp * g.nk + j) * g.vdim + h * dvh;
          T s = 0;
          for (std::size_t e = 0; e < dvh; ++e) s += doi[e] * vj[e];
          dp[j] = s;
          dot += s * p[j];
          if (grads.dv) {
            T* dvj = grads.dv + (grp * g.nk + j) * g.vdim + h * dvh;
            for (std::size_t e = 0; e < dvh; ++e) dvj[e] += p[j] * doi[e];
          }
        }
        const T* qi = q + (grp * g.nq + i) * g.dim + h * dh;
        T* dqi = grads.dq ? grads.dq + (grp * g.nq + i) * g.dim + h * dh : nullptr;
        for (std::size_t j = 0; j < g.nk; ++j) {
          const T ds = p[j] * (dp[j] - dot);
          if (grads.dbias) grads.dbias[(h * g.nq + i) * g.nk + j] += ds;
          const T* kj = k + (grp * g.nk + j) * g.dim + h * dh;
          if (dqi) {
            for (std::size_t d = 0; d < dh; ++d) dqi[d] += scale * ds * kj[d];
          }
          if (grads.dk) {
            T* dkj = grads.dk + (grp * g.nk + j) * g.dim + h * dh;
            for (std::size_t d = 0; d < dh; ++d) dkj[d] += scale * ds * qi[d];
          }
        }
      }
    }
  }
}

template <typename T>
T gelu_scalar(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad_scalar(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

struct SoftmaxLayout {
  std::size_t outer, n, inner;
};

template <typename T>
SoftmaxLayout softmax_layout(const Tensor<T>& t, std::size_t axis) {
  require(axis < t.rank(), ErrorCode::kInvalidArgument,
          "softmax axis " + std::to_string(axis) + " out of range for rank " +
              std::to_string(t.rank()));
  SoftmaxLayout l{1, t.dim(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= t.dim(i);
  for (std::size_t i = axis + 1; i < t.rank(); ++i) l.inner *= t.dim(i);
  return l;
}

template <typename T>
void check_layer_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, T eps) {
  require(input.rank() >= 1, ErrorCode::kDimensionMismatch, "layer_norm needs rank >= 1");
  const std::size_t d = input.dims().back();
  require(gamma.dims() == Dims{d} && beta.dims() == Dims{d},
          ErrorCode::kDimensionMismatch,
          "layer_norm gamma/beta must have dims [" + std::to_string(d) + "]");
  require(eps > 0, ErrorCode::kInvalidArgument, "layer_norm eps must be > 0");
}

}  // namespace

// ---- forward kernels -------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, weight, bias, stride, pad);
  const std::size_t p = g.out_h * g.out_w;
  const std::size_t ckk = g.channels * g.kernel * g.kernel;
  Tensor<T> out({g.out_channels, g.out_h, g.out_w});
  MapR<T> o(out.ptr(), g.out_channels, p);
  CMapR<T> w(weight.ptr(), g.out_channels, ckk);
  if (g.is_pointwise()) {
    o.noalias() = w * CMapR<T>(input.ptr(), ckk, p);
  } else {
    const std::vector<T> cols = make_cols(input, g);
    o.noalias() = w * CMapR<T>(cols.data(), ckk, p);
  }
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    T* row = out.ptr() + oc * p;
    for (std::size_t i = 0; i < p; ++i) row[i] += bias[oc];
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  require_rank(input, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  require(weight.dim(1) == input.dim(1), ErrorCode::kDimensionMismatch,
          "linear weight expects " + std::to_string(weight.dim(1)) +
              " input features, input has " + std::to_string(input.dim(1)));
  require(bias.dims() == Dims{weight.dim(0)}, ErrorCode::kDimensionMismatch,
          "linear bias dims do not match output features");
  const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(0);
  Tensor<T> out({n, dout});
  MapR<T> o(out.ptr(), n, dout);
  o.noalias() = CMapR<T>(input.ptr(), n, din) * CMapR<T>(weight.ptr(), dout, din).transpose();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dout; ++c) out.at(r, c) += bias[c];
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  check_layer_norm(input, gamma, beta, eps);
  const std::size_t d = input.dims().back();
  const std::size_t rows = input.size() / d;
  Tensor<T> out(input.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = input.ptr() + r * d;
    T* y = out.ptr() + r * d;
    T mean = 0;
    for (std::size_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) y[i] = (x[i] - mean) * rstd * gamma[i] + beta[i];
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& input, std::size_t axis) {
  const SoftmaxLayout l = softmax_layout(input, axis);
  Tensor<T> out(input.dims());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.n * l.inner + in;
      T maxv = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < l.n; ++j) maxv = std::max(maxv, input[base + j * l.inner]);
      T total = 0;
      for (std::size_t j = 0; j < l.n; ++j) {
        const T e = std::exp(input[base + j * l.inner] - maxv);
        out[base + j * l.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < l.n; ++j) out[base + j * l.inner] /= total;
    }
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& input) {
  Tensor<T> out(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = gelu_scalar(input[i]);
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0 ? input[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t num_heads, const Tensor<T>* mask) {
  const AttentionGeometry g = attention_geometry(q, k, v, num_heads, 1);
  check_bias_dims(mask, g, false, "attention mask");
  Tensor<T> out({g.nq, g.vdim});
  std::vector<T> probs(g.heads * g.nq * g.nk);
  attention_forward(g, q.ptr(), k.ptr(), v.ptr(), static_cast<const T*>(nullptr),
                    mask, out.ptr(), probs.data());
  return out;
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k,
                            std::size_t num_heads, const Tensor<T>* mask) {
  // v is irrelevant to the weights; a zero-width stand-in is not allowed, so
  // reuse k as values.
  const AttentionGeometry g = attention_geometry(q, k, k, num_heads, 1);
  check_bias_dims(mask, g, false, "attention mask");
  Tensor<T> out({g.nq, g.vdim});
  Tensor<T> probs({g.heads, g.nq, g.nk});
  attention_forward(g, q.ptr(), k.ptr(), k.ptr(), static_cast<const T*>(nullptr),
                    mask, out.ptr(), probs.ptr());
  return probs;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  require_rank(input, 3, "pixel_shuffle input");
  require(r >= 1 && input.dim(0) % (r * r) == 0, ErrorCode::kDimensionMismatch,
          "pixel_shuffle channels " + std::to_string(input.dim(0)) +
              " not divisible by r^2");
  const std::size_t c = input.dim(0) / (r * r), h = input.dim(1), w = input.dim(2);
  Tensor<T> out({c, h * r, w * r});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            out.at(ci, y * r + i, x * r + j) = input.at(ci * r * r + i * r + j, y, x);
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r) {
  require_rank(input, 3, "pixel_unshuffle input");
  require(r >= 1 && input.dim(1) % r == 0 && input.dim(2) % r == 0,
          ErrorCode::kDimensionMismatch, "pixel_unshuffle spatial dims not divisible by r");
  const std::size_t c = input.dim(0), h = input.dim(1) / r, w = input.dim(2) / r;
  Tensor<T> out({c * r * r, h, w});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            out.at(ci * r * r + i * r + j, y, x) = input.at(ci, y * r + i, x * r + j);
  return out;
}

// ---- recorded ops ----------------------------------------------------------

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride,
              std::size_t pad) {
  Tape<T>& tape = input.tape();
  Tensor<T> out = conv2d(input.value(), weight.value(), bias.value(), stride, pad);
  return tape.push(std::move(out), {input, weight, bias},
                   [input, weight, bias, stride, pad](Tape<T>& t, const Tensor<T>& gout) {
    const Tensor<T>& x = t.value(input);
    const Tensor<T>& w = t.value(weight);
    const ConvGeometry g = conv_geometry(x, w, t.value(bias), stride, pad);
    const std::size_t p = g.out_h * g.out_w;
    const std::size_t ckk = g.channels * g.kernel * g.kernel;
    CMapR<T> dout(gout.ptr(), g.out_channels, p);
    if (Tensor<T>* db = t.grad_buffer(bias)) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        T s = 0;
        for (std::size_t i = 0; i < p; ++i) s += gout[oc * p + i];
        (*db)[oc] += s;
      }
    }
    Tensor<T>* dw = t.grad_buffer(weight);
    Tensor<T>* dx = t.grad_buffer(input);
    if (dw != nullptr) {
      MapR<T> dwm(dw->ptr(), g.out_channels, ckk);
      if (g.is_pointwise()) {
        dwm.noalias() += dout * CMapR<T>(x.ptr(), ckk, p).transpose();
      } else {
        const std::vector<T> cols = make_cols(x, g);
        dwm.noalias() += dout * CMapR<T>(cols.data(), ckk, p).transpose();
      }
    }
    if (dx != nullptr) {
      CMapR<T> wm(w.ptr(), g.out_channels, ckk);
      if (g.is_pointwise()) {
        MapR<T>(dx->ptr(), ckk, p).noalias() += wm.transpose() * dout;
      } else {
        std::vector<T> dcols(ckk * p);
        MapR<T>(dcols.data(), ckk, p).noalias() = wm.transpose() * dout;
        col2im(dcols.data(), g, dx->ptr());
      }
    }
  });
}

template <typename T>
Var<T> linear(Var<T> input, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = input.tape();
  Tensor<T> out = linear(input.value(), weight.value(), bias.value());
  return tape.push(std::move(out), {input, weight, bias},
                   [input, weight, bias](Tape<T>& t, const Tensor<T>& gout) {
    const Tensor<T>& x = t.value(input);
    const Tensor<T>& w = t.value(weight);
    const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
    CMapR<T> g(gout.ptr(), n, dout);
    if (Tensor<T>* db = t.grad_buffer(bias)) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dout; ++c) (*db)[c] += gout[r * dout + c];
    }
    if (Tensor<T>* dw = t.grad_buffer(weight)) {
      MapR<T>(dw->ptr(), dout, din).noalias() += g.transpose() * CMapR<T>(x.ptr(), n, din);
    }
    if (Tensor<T>* dx = t.grad_buffer(input)) {
      MapR<T>(dx->ptr(), n, din).noalias() += g * CMapR<T>(w.ptr(), dout, din);
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> input, Var<T> gamma, Var<T> beta, T eps) {
  Tape<T>& tape = input.tape();
  Tensor<T> out = layer_norm(input.value(), gamma.value(), beta.value(), eps);
  return tape.push(std::move(out), {input, gamma, beta},
                   [input, gamma, beta, eps](Tape<T>& t, const Tensor<T>& gout) {
    const Tensor<T>& xt = t.value(input);
    const Tensor<T>& gm = t.value(gamma);
    const std::size_t d = xt.dims().back();
    const std::size_t rows = xt.size() / d;
    Tensor<T>* dx = t.grad_buffer(input);
    Tensor<T>* dg = t.grad_buffer(gamma);
    Tensor<T>* dbt = t.grad_buffer(beta);
    std::vector<T> xhat(d), dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* x = xt.ptr() + r * d;
      const T* gy = gout.ptr() + r * d;
      T mean = 0;
      for (std::size_t i = 0; i < d; ++i) mean += x[i];
      mean /= static_cast<T>(d);
      T var = 0;
      for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
      var /= static_cast<T>(d);
      const T rstd = T{1} / std::sqrt(var + eps);
      T mean_dxhat = 0, mean_dxhat_xhat = 0;
      for (std::size_t i = 0; i < d; ++i) {
        xhat[i] = (x[i] - mean) * rstd;
        dxhat[i] = gy[i] * gm[i];
        mean_dxhat += dxhat[i];
        mean_dxhat_xhat += dxhat[i] * xhat[i];
        if (dg) (*dg)[i] += gy[i] * xhat[i];
        if (dbt) (*dbt)[i] += gy[i];
      }
      mean_dxhat /= static_cast<T>(d);
      mean_dxhat_xhat /= static_cast<T>(d);
      if (dx) {
        T* dxr = dx->ptr() + r * d;
        for (std::size_t i = 0; i < d; ++i)
          dxr[i] += rstd * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
      }
    }
  });
}

template <typename T>
Var<T> softmax(Var<T> input, std::size_t axis) {
  Tape<T>& tape = input.tape();
  Tensor<T> out = softmax(input.value(), axis);
  const std::size_t out_id = tape.size();
  return tape.push(std::move(out), {input},
                   [input, axis, out_id](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    if (!dx) return;
    const Tensor<T>& y = t.value(Var<T>(&t, out_id));
    const SoftmaxLayout l = softmax_layout(y, axis);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.n * l.inner + in;
        T dot = 0;
        for (std::size_t j = 0; j < l.n; ++j)
          dot += gout[base + j * l.inner] * y[base + j * l.inner];
        for (std::size_t j = 0; j < l.n; ++j) {
          const std::size_t idx = base + j * l.inner;
          (*dx)[idx] += y[idx] * (gout[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> gelu(Var<T> input) {
  Tape<T>& tape = input.tape();
  return tape.push(gelu(input.value()), {input},
                   [input](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    const Tensor<T>& x = t.value(input);
    for (std::size_t i = 0; i < x.size(); ++i) (*dx)[i] += gout[i] * gelu_grad_scalar(x[i]);
  });
}

template <typename T>
Var<T> relu(Var<T> input) {
  Tape<T>& tape = input.tape();
  return tape.push(relu(input.value()), {input},
                   [input](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    const Tensor<T>& x = t.value(input);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0) (*dx)[i] += gout[i];
  });
}

template <typename T>
Var<T> grouped_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t num_heads,
                         std::size_t groups, std::optional<Var<T>> head_bias,
                         const Tensor<T>* group_mask) {
  Tape<T>& tape = q.tape();
  const AttentionGeometry g =
      attention_geometry(q.value(), k.value(), v.value(), num_heads, groups);
  check_bias_dims(group_mask, g, true, "attention mask");
  const T* bias_ptr = nullptr;
  if (head_bias) {
    require(head_bias->dims() == Dims{g.heads, g.nq, g.nk}, ErrorCode::kDimensionMismatch,
            "attention head bias dims " + dims_to_string(head_bias->dims()) +
                " do not match [heads,nq,nk]");
    bias_ptr = head_bias->value().ptr();
  }
  Tensor<T> out({g.groups * g.nq, g.vdim});
  Tensor<T> probs({g.groups, g.heads, g.nq, g.nk});
  attention_forward(g, q.value().ptr(), k.value().ptr(), v.value().ptr(), bias_ptr,
                    group_mask, out.ptr(), probs.ptr());
  std::optional<Var<T>> bias_var = head_bias;
  if (bias_var) {
    return tape.push(std::move(out), {q, k, v, *bias_var},
                     [q, k, v, bias_var, g, probs = std::move(probs)](
                         Tape<T>& t, const Tensor<T>& gout) {
      Tensor<T>* dq = t.grad_buffer(q);
      Tensor<T>* dk = t.grad_buffer(k);
      Tensor<T>* dv = t.grad_buffer(v);
      Tensor<T>* db = t.grad_buffer(*bias_var);
      attention_backward(g, t.value(q).ptr(), t.value(k).ptr(), t.value(v).ptr(),
                         probs.ptr(), gout.ptr(),
                         AttentionGrads<T>{dq ? dq->ptr() : nullptr,
                                           dk ? dk->ptr() : nullptr,
                                           dv ? dv->ptr() : nullptr,
                                           db ? db->ptr() : nullptr});
    });
  }
  return tape.push(std::move(out), {q, k, v},
                   [q, k, v, g, probs = std::move(probs)](Tape<T>& t,
                                                          const Tensor<T>& gout) {
    Tensor<T>* dq = t.grad_buffer(q);
    Tensor<T>* dk = t.grad_buffer(k);
    Tensor<T>* dv = t.grad_buffer(v);
    attention_backward(g, t.value(q).ptr(), t.value(k).ptr(), t.value(v).ptr(),
                       probs.ptr(), gout.ptr(),
                       AttentionGrads<T>{dq ? dq->ptr() : nullptr,
                                         dk ? dk->ptr() : nullptr,
                                         dv ? dv->ptr() : nullptr, nullptr});
  });
}

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t num_heads,
                 const Tensor<T>* mask) {
  if (mask != nullptr) {
    require(mask->rank() == 2, ErrorCode::kDimensionMismatch,
            "attention mask must be [Nq,Nk]");
  }
  return grouped_attention<T>(q, k, v, num_heads, 1, std::optional<Var<T>>{}, mask);
}

template <typename T>
Var<T> pixel_shuffle(Var<T> input, std::size_t r) {
  Tape<T>& tape = input.tape();
  return tape.push(pixel_shuffle(input.value(), r), {input},
                   [input, r](Tape<T>& t, const Tensor<T>& gout) {
    add_into(*t.grad_buffer(input), pixel_unshuffle(gout, r));
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require(a.dims() == b.dims(), ErrorCode::kDimensionMismatch,
          "add operands differ: " + dims_to_string(a.dims()) + " vs " +
              dims_to_string(b.dims()));
  Tensor<T> out = a.value();
  add_into(out, b.value());
  return a.tape().push(std::move(out), {a, b},
                       [a, b](Tape<T>& t, const Tensor<T>& gout) {
    t.accumulate(a, gout);
    t.accumulate(b, gout);
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require(a.dims() == b.dims(), ErrorCode::kDimensionMismatch,
          "mul operands differ: " + dims_to_string(a.dims()) + " vs " +
              dims_to_string(b.dims()));
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().push(std::move(out), {a, b},
                       [a, b](Tape<T>& t, const Tensor<T>& gout) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    if (Tensor<T>* da = t.grad_buffer(a))
      for (std::size_t i = 0; i < gout.size(); ++i) (*da)[i] += gout[i] * bv[i];
    if (Tensor<T>* db = t.grad_buffer(b))
      for (std::size_t i = 0; i < gout.size(); ++i) (*db)[i] += gout[i] * av[i];
  });
}

template <typename T>
Var<T> sum(Var<T> input) {
  T s = 0;
  for (T x : input.value().data()) s += x;
  return input.tape().push(Tensor<T>({1}, s), {input},
                           [input](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    for (auto& g : dx->data()) g += gout[0];
  });
}

template <typename T>
Var<T> weighted_sum(Var<T> input, const Tensor<T>& weights) {
  require(weights.dims() == input.dims(), ErrorCode::kDimensionMismatch,
          "weighted_sum weights dims differ from input");
  T s = 0;
  const Tensor<T>& x = input.value();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * weights[i];
  return input.tape().push(Tensor<T>({1}, s), {input},
                           [input, weights](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < weights.size(); ++i) (*dx)[i] += gout[0] * weights[i];
  });
}

template <typename T>
Var<T> mean_abs_error(Var<T> pred, const Tensor<T>& target) {
  require(pred.dims() == target.dims(), ErrorCode::kDimensionMismatch,
          "l1 prediction dims " + dims_to_string(pred.dims()) + " differ from target " +
              dims_to_string(target.dims()));
  const Tensor<T>& p = pred.value();
  T s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - target[i]);
  const T n = static_cast<T>(p.size());
  return pred.tape().push(Tensor<T>({1}, s / n), {pred},
                          [pred, target, n](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dp = t.grad_buffer(pred);
    const Tensor<T>& pv = t.value(pred);
    const T scale = gout[0] / n;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const T diff = pv[i] - target[i];
      if (diff > 0) (*dp)[i] += scale;
      else if (diff < 0) (*dp)[i] -= scale;
    }
  });
}

template <typename T>
Var<T> gather(Var<T> input, std::span<const std::size_t> indices, Dims out_dims) {
  require(element_count(out_dims) == indices.size(), ErrorCode::kDimensionMismatch,
          "gather index count does not match output dims");
  const Tensor<T>& x = input.value();
  Tensor<T> out(std::move(out_dims));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < x.size(), ErrorCode::kInvalidArgument, "gather index out of range");
    out[i] = x[indices[i]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return input.tape().push(std::move(out), {input},
                           [input, idx = std::move(idx)](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < idx.size(); ++i) (*dx)[idx[i]] += gout[i];
  });
}

template <typename T>
Var<T> gather_rows(Var<T> input, std::span<const std::size_t> rows) {
  require(input.value().rank() == 2, ErrorCode::kDimensionMismatch,
          "gather_rows needs a rank-2 input");
  const std::size_t cols = input.dims()[1];
  std::vector<std::size_t> idx;
  idx.reserve(rows.size() * cols);
  for (std::size_t r : rows) {
    require(r < input.dims()[0], ErrorCode::kInvalidArgument, "gather_rows row out of range");
    for (std::size_t c = 0; c < cols; ++c) idx.push_back(r * cols + c);
  }
  return gather(input, std::span<const std::size_t>(idx), Dims{rows.size(), cols});
}

template <typename T>
Var<T> transpose2d(Var<T> input) {
  const Tensor<T>& x = input.value();
  require(x.rank() == 2, ErrorCode::kDimensionMismatch, "transpose2d needs rank 2");
  const std::size_t a = x.dim(0), b = x.dim(1);
  Tensor<T> out({b, a});
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) out.at(j, i) = x.at(i, j);
  return input.tape().push(std::move(out), {input},
                           [input, a, b](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j) dx->at(i, j) += gout.at(j, i);
  });
}

template <typename T>
Var<T> reshape(Var<T> input, Dims dims) {
  Tensor<T> out = input.value().reshaped(std::move(dims));
  return input.tape().push(std::move(out), {input},
                           [input](Tape<T>& t, const Tensor<T>& gout) {
    Tensor<T>* dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < gout.size(); ++i) (*dx)[i] += gout[i];
  });
}

template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(1),
          ErrorCode::kDimensionMismatch, "concat_rows needs rank-2 inputs with equal columns");
  std::vector<T> data(av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  const std::size_t split = av.size();
  return a.tape().push(Tensor<T>({av.dim(0) + bv.dim(0), av.dim(1)}, std::move(data)),
                       {a, b}, [a, b, split](Tape<T>& t, const Tensor<T>& gout) {
    if (Tensor<T>* da = t.grad_buffer(a))
      for (std::size_t i = 0; i < split; ++i) (*da)[i] += gout[i];
    if (Tensor<T>* db = t.grad_buffer(b))
      for (std::size_t i = split; i < gout.size(); ++i) (*db)[i - split] += gout[i];
  });
}

#define MRIPT_INSTANTIATE_OPS(T)                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                            std::size_t, std::size_t);                             \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,                \
                                const Tensor<T>&, T);                              \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                       \
  template Tensor<T> gelu(const Tensor<T>&);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                       \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&,                 \
                               const Tensor<T>&, std::size_t, const Tensor<T>*);   \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&,         \
                                       std::size_t, const Tensor<T>*);             \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::size_t);               \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);        \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                  \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                           \
  template Var<T> softmax(Var<T>, std::size_t);                                    \
  template Var<T> gelu(Var<T>);                                                    \
  template Var<T> relu(Var<T>);                                                    \
  template Var<T> attention(Var<T>, Var<T>, Var<T>, std::size_t, const Tensor<T>*); \
  template Var<T> grouped_attention(Var<T>, Var<T>, Var<T>, std::size_t,           \
                                    std::size_t, std::optional<Var<T>>,            \
                                    const Tensor<T>*);                             \
  template Var<T> pixel_shuffle(Var<T>, std::size_t);                              \
  template Var<T> add(Var<T>, Var<T>);                                             \
  template Var<T> mul(Var<T>, Var<T>);                                             \
  template Var<T> sum(Var<T>);                                                     \
  template Var<T> weighted_sum(Var<T>, const Tensor<T>&);                          \
  template Var<T> mean_abs_error(Var<T>, const Tensor<T>&);                        \
  template Var<T> gather(Var<T>, std::span<const std::size_t>, Dims);              \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>);               \
  template Var<T> transpose2d(Var<T>);                                             \
  template Var<T> reshape(Var<T>, Dims);                                           \
  template Var<T> concat_rows(Var<T>, Var<T>);

MRIPT_INSTANTIATE_OPS(float)
MRIPT_INSTANTIATE_OPS(double)

#undef MRIPT_INSTANTIATE_OPS

}  // namespace mript::numerics
