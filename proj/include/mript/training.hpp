#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mript/dataio.hpp"
#include "mript/model.hpp"

namespace mript::training {

using model::MrIpt;
using model::ParameterStore;

/// Mean absolute error, recorded on the tape.
template <typename T>
numerics::Var<T> l1_loss(numerics::Var<T> pred, const Tensor<T>& target);

/// Mean absolute error of two equally shaped tensors.
double l1_loss(const Tensor<float>& pred, const Tensor<float>& target);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments and step counts are kept per
/// parameter, so a parameter first touched late (e.g. a rarely routed head)
/// is corrected from its own first update.
class Adam {
 public:
  struct Slot {
    Tensor<float> m;
    Tensor<float> v;
    std::uint64_t steps = 0;
  };

  explicit Adam(AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  /// Updates exactly the parameters present in `grads`. Throws kNonFinite
  /// (naming the parameter) before touching anything if a gradient is not
  /// finite, and kMissingTensor for unknown names.
  void step(ParameterStore<float>& params, const std::map<std::string, Tensor<float>>& grads);

  /// Number of step() calls.
  std::uint64_t steps() const noexcept { return steps_; }
  const std::map<std::string, Slot>& slots() const noexcept { return slots_; }

  void restore(std::uint64_t steps, std::map<std::string, Slot> slots);

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Slot> slots_;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  /// When set, training stops after this many steps, cycling epochs as needed.
  std::optional<std::size_t> max_steps;
  /// Worker threads for per-sample gradients; results are identical for any count.
  std::size_t threads = 1;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<StepRecord> trace;
  std::size_t steps = 0;
};

/// Total optimiser steps implied by `config` for a stream.
std::size_t planned_steps(const TrainConfig& config, const dataio::SampleStream& stream);

/// Loss and summed parameter gradients for one sample.
struct SampleGradient {
  double loss = 0.0;
  std::map<std::string, Tensor<float>> grads;
};

SampleGradient sample_gradient(const MrIpt<float>& model, const dataio::Sample& sample);

/// Mean loss and mean gradients over a batch; the reduction order is the
/// sample order regardless of thread count.
SampleGradient batch_gradient(const MrIpt<float>& model, const std::vector<dataio::Sample>& batch,
                              std::size_t threads = 1);

/// Minimises mean L1 loss. Each step draws the next `batch_size` samples of
/// the stream's epoch order (a short final batch per epoch is kept).
TrainResult train(MrIpt<float>& model, Adam& optimizer, const dataio::SampleStream& stream,
                  const TrainConfig& config,
                  const std::function<void(const StepRecord&)>& on_step = {});

/// "step,epoch,loss" CSV.
std::string trace_to_csv(const std::vector<StepRecord>& trace);

// ---- checkpoints ---------------------------------------------------------------

struct CheckpointMeta {
  std::size_t step = 0;
  std::vector<model::TaskLabel> tasks;
};

struct Checkpoint {
  model::MrIpt<float> model;
  std::optional<Adam> optimizer;
  CheckpointMeta meta;
};

/// "MRIC" | u32 version | u64 header length | JSON header | f32 LE blobs.
std::vector<std::uint8_t> encode_checkpoint(const MrIpt<float>& model, const Adam* optimizer,
                                            const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const MrIpt<float>& model,
                     const Adam* optimizer, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Resolves MRIPT_THREADS (unset or 0: one thread).
std::size_t default_threads();

}  // namespace mript::training
