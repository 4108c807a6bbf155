#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mript/dataio.hpp"
#include "mript/metrics.hpp"
#include "mript/model.hpp"
#include "mript/training.hpp"

namespace mript::experiment {

/// Cross product of families and ratios.
struct TaskGrid {
  std::vector<degradation::MaskFamily> families;
  std::vector<double> ratios;

  std::vector<degradation::MaskSpec> specs() const;
};

/// Images either read through a manifest split or generated as phantoms.
struct DataSource {
  std::optional<std::filesystem::path> manifest;
  dataio::Split split = dataio::Split::kTrain;
  std::size_t phantom_count = 0;
  std::uint64_t phantom_seed = 0;
};

struct ExperimentConfig {
  model::ModelConfig model;
  std::uint64_t model_seed = 0;
  training::TrainConfig pretrain;
  training::TrainConfig finetune;
  TaskGrid pretrain_tasks;
  TaskGrid finetune_tasks;
  TaskGrid eval_tasks;
  DataSource train_data;
  DataSource test_data;
  std::string dataset_name = "phantom";
  std::string model_tag = "MR-IPT";
  std::filesystem::path output_dir = "mript_out";
  std::uint64_t eval_seed = 0;
  /// Number of test images for which error maps are written by eval.
  std::size_t error_maps = 2;
};

/// Parses and validates a config document. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Clean [1,S,S] images at the model's resolution.
std::vector<dataio::ImageTensor> load_images(const DataSource& source, std::size_t image_size);

/// Deterministic evaluation masks: image i under task t uses seed
/// mix_seed(mix_seed(seed, t), i).
std::vector<dataio::Sample> make_eval_samples(const std::vector<dataio::ImageTensor>& images,
                                              const std::vector<degradation::MaskSpec>& tasks,
                                              std::uint64_t seed);

/// Per-image metrics of the model (and optionally the zero-filled input,
/// tagged "zero-filled") on prepared samples.
std::vector<metrics::ImageResult> evaluate(const model::MrIpt<float>& model,
                                           const std::vector<dataio::Sample>& samples,
                                           const std::string& dataset, const std::string& tag,
                                           bool include_zero_filled);

/// Fails with kDimensionMismatch/kInvalidArgument when a checkpoint cannot
/// serve the experiment (resolution, variant).
void check_compatible(const model::ModelConfig& checkpoint, const ExperimentConfig& config);

using Logger = std::function<void(const std::string&)>;

/// Sets where progress lines go (default: standard error).
void set_logger(Logger logger);
void log(const std::string& line);

/// Exclusive ownership of an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct StabilityRow {
  std::size_t size = 0;
  std::size_t repeats = 0;
  double psnr_mean = 0, psnr_std = 0, ssim_mean = 0, ssim_std = 0;
};

/// Output: <output_dir>/pretrain.ckpt, pretrain_loss.csv. Returns the checkpoint path.
std::filesystem::path run_pretrain(const ExperimentConfig& config);
/// Output: <output_dir>/finetune.ckpt, finetune_loss.csv.
std::filesystem::path run_finetune(const ExperimentConfig& config,
                                   const std::filesystem::path& checkpoint);
/// Output: <output_dir>/<name>_report.{csv,md} and error maps, where name is
/// "eval" or "zero_shot". The checkpoint is only read.
metrics::MetricReport run_eval(const ExperimentConfig& config,
                               const std::filesystem::path& checkpoint, bool zero_shot);

/// Fine-tunes a copy of `pretrained` on `subset_size` training images drawn
/// with `seed` (0 means no fine-tuning) and returns mean PSNR/SSIM over the
/// eval samples.
std::pair<double, double> stability_trial(const model::MrIpt<float>& pretrained,
                                          const ExperimentConfig& config,
                                          const std::vector<dataio::ImageTensor>& train,
                                          const std::vector<dataio::Sample>& eval_samples,
                                          std::size_t subset_size, std::uint64_t seed);

/// Output: <output_dir>/stability.csv with one row per size.
std::vector<StabilityRow> run_stability(const ExperimentConfig& config,
                                        const std::filesystem::path& checkpoint,
                                        const std::vector<std::size_t>& sizes, std::size_t repeats);

std::string stability_to_csv(const std::vector<StabilityRow>& rows);

}  // namespace mript::experiment
