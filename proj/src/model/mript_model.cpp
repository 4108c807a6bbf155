#include <algorithm>
#include <cmath>
#include <random>

#include "mript/dataio.hpp"
#include "mript/error.hpp"
#include "mript/model.hpp"
#include "mript/ops.hpp"

namespace mript::model {
namespace {

using numerics::Tape;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

template <typename T>
Tensor<T> init_parameter(const std::string& name, const Dims& dims, std::uint64_t seed) {
  Tensor<T> t(dims, T{0});
  if (ends_with(name, ".bias") || ends_with(name, ".beta")) return t;
  if (ends_with(name, ".gamma")) {
    t.fill(T{1});
    return t;
  }
  std::mt19937_64 rng(dataio::mix_seed(seed, fnv1a(name)));
  if (dims.size() == 4) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[1] * dims[2] * dims[3]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : t.data()) x = static_cast<T>(u(rng));
    return t;
  }
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& x : t.data()) {
    double v;
    do v = normal(rng);
    while (std::abs(v) > 0.04);
    x = static_cast<T>(v);
  }
  return t;
}

std::size_t index_of_family(const ModelConfig& c, MaskFamily f) {
  return static_cast<std::size_t>(
      std::find(c.trained_families.begin(), c.trained_families.end(), f) -
      c.trained_families.begin());
}

std::size_t index_of_ratio(const ModelConfig& c, double r) {
  for (std::size_t i = 0; i < c.trained_ratios.size(); ++i) {
    if (std::abs(c.trained_ratios[i] - r) < 1e-9) return i;
  }
  fail(ErrorCode::kInvalidArgument, "ratio " + format_ratio(r) + " is not trained");
}

}  // namespace

// ---- Session -----------------------------------------------------------------

template <typename T>
Session<T>::Session(const MrIpt<T>& model, Tape<T>& tape, bool trainable)
    : model_(model), tape_(tape), trainable_(trainable) {}

template <typename T>
numerics::Var<T> Session<T>::param(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  const Tensor<T>& value = model_.parameter(name);
  auto v = trainable_ ? tape_.variable(value) : tape_.constant(value);
  bound_.emplace(name, v);
  return v;
}

template <typename T>
void Session<T>::bind(const std::string& name, numerics::Var<T> value) {
  const Tensor<T>& current = model_.parameter(name);
  if (current.dims() != value.dims()) {
    fail(ErrorCode::kDimensionMismatch, "binding " + name + ": expected " +
                                            dims_to_string(current.dims()) + ", got " +
                                            dims_to_string(value.dims()));
  }
  bound_[name] = value;
}

template <typename T>
std::map<std::string, Tensor<T>> Session<T>::gradients() const {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, v] : bound_) {
    if (const Tensor<T>* g = tape_.grad(v)) out.emplace(name, *g);
  }
  return out;
}

// ---- MrIpt ------------------------------------------------------------------

template <typename T>
MrIpt<T>::MrIpt(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  for (const auto& [name, dims] : parameter_shapes(config_)) {
    params_.emplace(name, init_parameter<T>(name, dims, seed));
  }
  perm_[0] = window_permutation(config_.grid(), config_.window_size, 0);
  perm_[1] = window_permutation(config_.grid(), config_.window_size, config_.shift_size);
  for (int i = 0; i < 2; ++i) inv_perm_[i] = invert_permutation(perm_[i]);
  if (config_.shift_size > 0) {
    shift_mask_ = shifted_window_mask<T>(config_.grid(), config_.window_size, config_.shift_size);
  }
  const std::size_t n = config_.window_size * config_.window_size, h = config_.num_heads;
  const auto rel = relative_position_index(config_.window_size);
  bias_gather_.resize(h * n * n);
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t k = 0; k < n * n; ++k) bias_gather_[head * n * n + k] = rel[k] * h + head;
}

template <typename T>
MrIpt<T>::MrIpt(ModelConfig config, ParameterStore<T> parameters)
    : MrIpt(std::move(config), std::uint64_t{0}) {
  for (auto& [name, expected] : params_) {
    auto it = parameters.find(name);
    if (it == parameters.end()) fail(ErrorCode::kMissingTensor, "missing parameter '" + name + "'");
    if (it->second.dims() != expected.dims()) {
      fail(ErrorCode::kDimensionMismatch, "parameter '" + name + "' has dims " +
                                              dims_to_string(it->second.dims()) + ", expected " +
                                              dims_to_string(expected.dims()));
    }
    expected = std::move(it->second);
    parameters.erase(it);
  }
  if (!parameters.empty()) {
    fail(ErrorCode::kInvalidArgument,
         "unexpected parameter '" + parameters.begin()->first + "' for this configuration");
  }
}

template <typename T>
const Tensor<T>& MrIpt<T>::parameter(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail(ErrorCode::kMissingTensor, "no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
PairKey MrIpt<T>::route(const TaskLabel& label) const {
  return model::route(config_.variant, label, config_);
}

template <typename T>
auto MrIpt<T>::head_forward(Session<T>& s, const PairKey& key, Var image) const -> Var {
  const std::string p = "head." + key.name();
  Var f = numerics::conv2d(image, s.param(p + ".conv0.weight"), s.param(p + ".conv0.bias"), 1, 1);
  for (int r = 0; r < 2; ++r) {
    const std::string res = p + ".res" + std::to_string(r);
    Var t = numerics::conv2d(f, s.param(res + ".conv_a.weight"), s.param(res + ".conv_a.bias"), 1, 2);
    t = numerics::relu(t);
    t = numerics::conv2d(t, s.param(res + ".conv_b.weight"), s.param(res + ".conv_b.bias"), 1, 2);
    f = numerics::add(f, t);
  }
  return f;
}

template <typename T>
auto MrIpt<T>::patchify(Session<T>& s, Var features) const -> Var {
  const std::size_t p = config_.patch_size, d = config_.embed_dim;
  Var e = numerics::conv2d(features, s.param("patch.embed.weight"), s.param("patch.embed.bias"), p, 0);
  e = numerics::transpose2d(numerics::reshape(e, {d, config_.tokens()}));
  return numerics::add(e, s.param("patch.pos"));
}

template <typename T>
auto MrIpt<T>::unpatchify_to_grid(Session<T>&, Var tokens) const -> Var {
  const std::size_t g = config_.grid();
  return numerics::reshape(numerics::transpose2d(tokens), {config_.embed_dim, g, g});
}

template <typename T>
auto MrIpt<T>::encode_prompt(Session<T>& s, const TaskLabel& label) const -> Var {
  const std::size_t f =
      index_of_family(config_, resolve_family(label.family, config_.trained_families));
  const std::size_t r =
      index_of_ratio(config_, resolve_ratio(label.acceleration, config_.trained_ratios));
  const std::size_t fi[] = {f}, ri[] = {r};
  Var tokens = numerics::concat_rows(numerics::gather_rows(s.param("prompt.family"), fi),
                                     numerics::gather_rows(s.param("prompt.ratio"), ri));
  return numerics::linear(tokens, s.param("prompt.proj.weight"), s.param("prompt.proj.bias"));
}

template <typename T>
auto MrIpt<T>::norm(Session<T>& s, const std::string& prefix, Var x) const -> Var {
  return numerics::layer_norm(x, s.param(prefix + ".gamma"), s.param(prefix + ".beta"));
}

template <typename T>
auto MrIpt<T>::mlp(Session<T>& s, const std::string& prefix, Var x) const -> Var {
  Var h = numerics::linear(x, s.param(prefix + ".fc1.weight"), s.param(prefix + ".fc1.bias"));
  h = numerics::gelu(h);
  return numerics::linear(h, s.param(prefix + ".fc2.weight"), s.param(prefix + ".fc2.bias"));
}

template <typename T>
auto MrIpt<T>::attention_block(Session<T>& s, const std::string& prefix, Var query,
                               Var context) const -> Var {
  auto proj = [&](const char* name, Var in) {
    return numerics::linear(in, s.param(prefix + name + ".weight"), s.param(prefix + name + ".bias"));
  };
  Var a = numerics::attention(proj(".q", query), proj(".k", context), proj(".v", context),
                              config_.num_heads);
  return proj(".o", a);
}

template <typename T>
auto MrIpt<T>::encoder_block(Session<T>& s, std::size_t index, Var tokens) const -> Var {
  const std::string p = "encoder." + std::to_string(index);
  const bool shifted = index % 2 == 1 && config_.shift_size > 0;
  const auto& perm = perm_[shifted ? 1 : 0];
  const auto& inv = inv_perm_[shifted ? 1 : 0];
  const std::size_t n = config_.window_size * config_.window_size;
  const std::size_t windows = config_.tokens() / n;

  Var h = numerics::gather_rows(norm(s, p + ".norm1", tokens), perm);
  auto proj = [&](const char* name, Var in) {
    return numerics::linear(in, s.param(p + ".attn" + name + ".weight"),
                            s.param(p + ".attn" + name + ".bias"));
  };
  Var bias = numerics::gather(s.param(p + ".attn.rel_bias"), bias_gather_,
                              {config_.num_heads, n, n});
  Var a = numerics::grouped_attention(proj(".q", h), proj(".k", h), proj(".v", h),
                                      config_.num_heads, windows, std::optional<Var>(bias),
                                      shifted ? &*shift_mask_ : nullptr);
  Var x = numerics::add(tokens, numerics::gather_rows(proj(".o", a), inv));
  return numerics::add(x, mlp(s, p + ".mlp", norm(s, p + ".norm2", x)));
}

template <typename T>
auto MrIpt<T>::encoder_forward(Session<T>& s, Var tokens) const -> Var {
  for (std::size_t i = 0; i < config_.encoder_depth; ++i) tokens = encoder_block(s, i, tokens);
  return tokens;
}

template <typename T>
auto MrIpt<T>::decoder_forward(Session<T>& s, Var tokens, Var prompts) const -> Var {
  for (std::size_t i = 0; i < config_.decoder_depth; ++i) {
    const std::string p = "decoder." + std::to_string(i);
    Var q = norm(s, p + ".self_norm", prompts);
    prompts = numerics::add(prompts, attention_block(s, p + ".self_attn", q, q));
    Var kv = norm(s, p + ".p2i_norm_kv", tokens);
    prompts = numerics::add(
        prompts, attention_block(s, p + ".p2i_attn", norm(s, p + ".p2i_norm_q", prompts), kv));
    prompts = numerics::add(prompts, mlp(s, p + ".mlp", norm(s, p + ".mlp_norm", prompts)));
    Var pk = norm(s, p + ".i2p_norm_kv", prompts);
    tokens = numerics::add(
        tokens, attention_block(s, p + ".i2p_attn", norm(s, p + ".i2p_norm_q", tokens), pk));
  }
  return tokens;
}

template <typename T>
auto MrIpt<T>::tail_forward(Session<T>& s, const PairKey& key, Var grid) const -> Var {
  const std::string p = "tail." + key.name();
  Var up = numerics::conv2d(grid, s.param(p + ".up.weight"), s.param(p + ".up.bias"), 1, 1);
  Var x = numerics::relu(numerics::pixel_shuffle(up, config_.patch_size));
  return numerics::conv2d(x, s.param(p + ".out.weight"), s.param(p + ".out.bias"), 1, 1);
}

template <typename T>
auto MrIpt<T>::forward(Session<T>& s, Var image, const TaskLabel& label) const -> Var {
  const Dims expected{1, config_.image_size, config_.image_size};
  if (image.dims() != expected) {
    fail(ErrorCode::kDimensionMismatch, "model expects input " + dims_to_string(expected) +
                                            ", got " + dims_to_string(image.dims()));
  }
  const PairKey key = route(label);
  Var tokens = patchify(s, head_forward(s, key, image));
  tokens = encoder_forward(s, tokens);
  tokens = decoder_forward(s, tokens, encode_prompt(s, label));
  Var out = tail_forward(s, key, unpatchify_to_grid(s, tokens));
  return config_.input_skip ? numerics::add(out, image) : out;
}

template <typename T>
Tensor<T> MrIpt<T>::infer(const Tensor<T>& image, const TaskLabel& label) const {
  Tape<T> tape(false);
  Session<T> session(*this, tape, false);
  return forward(session, tape.constant(image), label).value();
}

template class Session<float>;
template class Session<double>;
template class MrIpt<float>;
template class MrIpt<double>;

}  // namespace mript::model
