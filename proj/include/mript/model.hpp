#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mript/autodiff.hpp"
#include "mript/degradation.hpp"
#include "mript/task.hpp"
#include "mript/tensor.hpp"

namespace mript::model {

using degradation::MaskFamily;

/// How head-tail pairs are shared across tasks.
///   Type  - one pair per acceleration ratio
///   Level - one pair per mask family
///   Split - one pair per (family, ratio)
enum class Variant { kType, kLevel, kSplit };

std::string_view variant_name(Variant variant);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 96;
  std::size_t encoder_depth = 6;
  std::size_t num_heads = 4;
  std::size_t window_size = 4;
  std::size_t shift_size = 2;
  std::size_t decoder_depth = 2;
  std::size_t head_channels = 32;
  std::size_t mlp_ratio = 4;
  /// Adds the degraded input to the tail output (residual reconstruction).
  bool input_skip = true;
  std::vector<MaskFamily> trained_families{std::begin(degradation::kAllFamilies),
                                           std::end(degradation::kAllFamilies)};
  std::vector<double> trained_ratios{2, 4, 6, 8, 10};
  Variant variant = Variant::kLevel;

  /// 64x64 images, 8x8 token grid, D=96, 6 encoder blocks.
  static ModelConfig desk();
  /// 224x224 images, 14x14 grid, window 7, 24 encoder blocks, D=768 (guess).
  static ModelConfig paper();
  /// 16x16 images, patch 4, D=16, 2 encoder blocks: gradient-check scale.
  static ModelConfig tiny();

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t tokens() const { return grid() * grid(); }

  /// Throws kInvalidArgument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view json);

// ---- routing -----------------------------------------------------------------

/// Identifies one head-tail pair. Which fields are set depends on the variant.
struct PairKey {
  std::optional<MaskFamily> family;
  std::optional<double> ratio;

  /// Stable text used in parameter names, e.g. "r6", "random", "random_r6".
  std::string name() const;

  friend bool operator==(const PairKey&, const PairKey&) = default;
};

/// Exact match, else the smallest trained ratio above `requested`, else the
/// largest trained ratio.
double resolve_ratio(double requested, const std::vector<double>& trained);
/// Exact match, else Cartesian random (else the first trained family).
MaskFamily resolve_family(MaskFamily requested, const std::vector<MaskFamily>& trained);

PairKey route(Variant variant, const TaskLabel& label, const ModelConfig& config);

/// Every pair the bank holds, in parameter-naming order.
std::vector<PairKey> pair_keys(const ModelConfig& config);

// ---- parameters --------------------------------------------------------------

template <typename T>
using ParameterStore = std::map<std::string, Tensor<T>>;

/// Name -> dims for every parameter of `config`.
std::map<std::string, Dims> parameter_shapes(const ModelConfig& config);

struct ParamCounts {
  std::size_t pairs = 0;
  std::size_t heads = 0;
  std::size_t tails = 0;
  std::size_t prompt_encoder = 0;
  std::size_t patch_embed = 0;
  std::size_t encoder = 0;
  std::size_t decoder = 0;
  std::size_t total = 0;
};

ParamCounts param_count(const ModelConfig& config);

// ---- shifted-window helpers ----------------------------------------------------

/// perm[p] = grid token visited at position p after rolling the grid by
/// -shift on both axes and partitioning into row-major windows, each window
/// listed row-major.
std::vector<std::size_t> window_permutation(std::size_t grid, std::size_t window,
                                            std::size_t shift);

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);

/// Additive mask [windows, w*w, w*w]: 0 within a wrapped region, -1e9 across.
template <typename T>
Tensor<T> shifted_window_mask(std::size_t grid, std::size_t window, std::size_t shift);

/// Index into the (2w-1)^2 relative-position table for every (i, j) token
/// pair of a window, row-major over (i, j).
std::vector<std::size_t> relative_position_index(std::size_t window);

// ---- model --------------------------------------------------------------------

template <typename T>
class MrIpt;

/// Per-forward binding of model parameters to tape variables. Parameters are
/// bound lazily, so only those reached by the routed path receive gradients.
template <typename T>
class Session {
 public:
  Session(const MrIpt<T>& model, numerics::Tape<T>& tape, bool trainable = true);

  numerics::Tape<T>& tape() const { return tape_; }
  numerics::Var<T> param(const std::string& name);
  /// Substitutes `value` for the named parameter (must match its dims).
  void bind(const std::string& name, numerics::Var<T> value);

  const std::map<std::string, numerics::Var<T>>& bound() const { return bound_; }
  /// Gradients of every bound parameter that received one.
  std::map<std::string, Tensor<T>> gradients() const;

 private:
  const MrIpt<T>& model_;
  numerics::Tape<T>& tape_;
  bool trainable_;
  std::map<std::string, numerics::Var<T>> bound_;
};

template <typename T>
class MrIpt {
 public:
  using Var = numerics::Var<T>;

  /// Randomly initialised model. Projections and embeddings draw from a
  /// truncated normal (std 0.02), convolutions from U(+-1/sqrt(fan_in)),
  /// biases and norm betas are zero, norm gammas one.
  MrIpt(ModelConfig config, std::uint64_t seed);
  /// Adopts existing parameters; throws kMissingTensor / kDimensionMismatch.
  MrIpt(ModelConfig config, ParameterStore<T> parameters);

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterStore<T>& parameters() const noexcept { return params_; }
  ParameterStore<T>& mutable_parameters() noexcept { return params_; }
  const Tensor<T>& parameter(const std::string& name) const;

  PairKey route(const TaskLabel& label) const;

  Var head_forward(Session<T>& s, const PairKey& key, Var image) const;
  Var patchify(Session<T>& s, Var features) const;
  Var unpatchify_to_grid(Session<T>& s, Var tokens) const;
  Var encode_prompt(Session<T>& s, const TaskLabel& label) const;
  Var encoder_block(Session<T>& s, std::size_t index, Var tokens) const;
  Var encoder_forward(Session<T>& s, Var tokens) const;
  Var decoder_forward(Session<T>& s, Var tokens, Var prompts) const;
  Var tail_forward(Session<T>& s, const PairKey& key, Var grid) const;
  Var forward(Session<T>& s, Var image, const TaskLabel& label) const;

  /// Inference without gradient recording.
  Tensor<T> infer(const Tensor<T>& image, const TaskLabel& label) const;

  template <typename U>
  MrIpt<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, t] : params_) out.emplace(name, t.template cast<U>());
    return MrIpt<U>(config_, std::move(out));
  }

 private:
  Var attention_block(Session<T>& s, const std::string& prefix, Var query, Var context) const;
  Var mlp(Session<T>& s, const std::string& prefix, Var x) const;
  Var norm(Session<T>& s, const std::string& prefix, Var x) const;

  ModelConfig config_;
  ParameterStore<T> params_;
  // Precomputed per shift value (0 and shift_size).
  std::vector<std::size_t> perm_[2], inv_perm_[2];
  std::optional<Tensor<T>> shift_mask_;
  std::vector<std::size_t> bias_gather_;
};

extern template class Session<float>;
extern template class Session<double>;
extern template class MrIpt<float>;
extern template class MrIpt<double>;

}  // namespace mript::model
