#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "mript/experiment.hpp"
#include "mript/fileutil.hpp"

namespace mript::experiment {
namespace {

std::mutex log_mutex;
Logger current_logger;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::vector<model::TaskLabel> labels_of(const TaskGrid& grid) {
  std::vector<model::TaskLabel> out;
  for (const auto& s : grid.specs()) out.push_back({s.family, s.acceleration});
  return out;
}

training::TrainResult train_logged(model::MrIpt<float>& model, training::Adam& adam,
                                   const dataio::SampleStream& stream,
                                   training::TrainConfig config, const std::string& phase) {
  config.threads = training::default_threads();
  const std::size_t total = training::planned_steps(config, stream);
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  return training::train(model, adam, stream, config, [&](const training::StepRecord& r) {
    if (r.step % every == 0 || r.step == total) {
      log(phase + " step " + std::to_string(r.step) + "/" + std::to_string(total) + " loss " +
          fmt("%.6f", r.loss));
    }
  });
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void set_logger(Logger logger) {
  std::lock_guard<std::mutex> lock(log_mutex);
  current_logger = std::move(logger);
}

void log(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex);
  if (current_logger) {
    current_logger(line);
  } else {
    std::cerr << line << '\n';
  }
}

OutputLock::OutputLock(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + dir.string() + ": " + ec.message());
  path_ = dir / ".mript.lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    fail(ErrorCode::kIo, "output directory " + dir.string() + " is in use (remove " +
                             path_.string() + " if no run is active)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

std::vector<dataio::ImageTensor> load_images(const DataSource& source, std::size_t image_size) {
  if (source.manifest) {
    auto images = dataio::load_split(dataio::Manifest::load(*source.manifest), source.split, image_size);
    if (images.empty()) {
      fail(ErrorCode::kInvalidArgument, source.manifest->string() + " has no '" +
                                            std::string(dataio::split_name(source.split)) +
                                            "' images");
    }
    return images;
  }
  return dataio::generate_phantoms(source.phantom_count, image_size, source.phantom_seed);
}

std::vector<dataio::Sample> make_eval_samples(const std::vector<dataio::ImageTensor>& images,
                                              const std::vector<degradation::MaskSpec>& tasks,
                                              std::uint64_t seed) {
  std::vector<dataio::Sample> out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      degradation::MaskSpec spec = tasks[t];
      spec.seed = dataio::mix_seed(dataio::mix_seed(seed, t), i);
      const auto mask = degradation::make_mask(spec, images[i].dim(1), images[i].dim(2));
      out.push_back({degradation::degrade(images[i], mask), images[i], {spec.family, spec.acceleration}});
    }
  }
  return out;
}

std::vector<metrics::ImageResult> evaluate(const model::MrIpt<float>& model,
                                           const std::vector<dataio::Sample>& samples,
                                           const std::string& dataset, const std::string& tag,
                                           bool include_zero_filled) {
  std::vector<metrics::ImageResult> out;
  for (const auto& s : samples) {
    const std::string family(degradation::family_name(s.label.family));
    const auto pred = model.infer(s.input, s.label);
    out.push_back({dataset, family, s.label.acceleration, tag, metrics::psnr(pred, s.target),
                   metrics::ssim(pred, s.target)});
    if (include_zero_filled) {
      out.push_back({dataset, family, s.label.acceleration, "zero-filled",
                     metrics::psnr(s.input, s.target), metrics::ssim(s.input, s.target)});
    }
  }
  return out;
}

void check_compatible(const model::ModelConfig& checkpoint, const ExperimentConfig& config) {
  if (checkpoint.image_size != config.model.image_size) {
    fail(ErrorCode::kDimensionMismatch,
         "checkpoint expects " + std::to_string(checkpoint.image_size) + "x" +
             std::to_string(checkpoint.image_size) + " images but the config uses " +
             std::to_string(config.model.image_size));
  }
  if (checkpoint.variant != config.model.variant) {
    fail(ErrorCode::kInvalidArgument,
         "checkpoint is a '" + std::string(model::variant_name(checkpoint.variant)) +
             "' model but the config asks for '" +
             std::string(model::variant_name(config.model.variant)) + "'");
  }
}

std::filesystem::path run_pretrain(const ExperimentConfig& config) {
  config.model.validate();
  auto images = load_images(config.train_data, config.model.image_size);
  model::MrIpt<float> model(config.model, config.model_seed);
  dataio::SampleStream stream(std::move(images), config.pretrain_tasks.specs(), config.pretrain.seed);

  OutputLock lock(config.output_dir);
  const auto counts = model::param_count(config.model);
  log("pretrain: " + std::to_string(stream.images_per_epoch()) + " images, " +
      std::to_string(stream.tasks().size()) + " tasks, " + std::to_string(counts.pairs) +
      " head-tail pairs, " + std::to_string(counts.total) + " parameters");
  training::Adam adam({config.pretrain.lr});
  const auto result = train_logged(model, adam, stream, config.pretrain, "pretrain");
  const auto ckpt = config.output_dir / "pretrain.ckpt";
  training::save_checkpoint(ckpt, model, &adam, {result.steps, labels_of(config.pretrain_tasks)});
  write_text_atomic(config.output_dir / "pretrain_loss.csv", training::trace_to_csv(result.trace));
  log("pretrain: wrote " + ckpt.string());
  return ckpt;
}

std::filesystem::path run_finetune(const ExperimentConfig& config,
                                   const std::filesystem::path& checkpoint) {
  auto ckpt = training::load_checkpoint(checkpoint);
  check_compatible(ckpt.model.config(), config);
  auto images = load_images(config.train_data, config.model.image_size);
  dataio::SampleStream stream(std::move(images), config.finetune_tasks.specs(), config.finetune.seed);

  OutputLock lock(config.output_dir);
  log("finetune: " + std::to_string(stream.images_per_epoch()) + " images, " +
      std::to_string(stream.tasks().size()) + " tasks from " + checkpoint.string());
  training::Adam adam({config.finetune.lr});
  const auto result = train_logged(ckpt.model, adam, stream, config.finetune, "finetune");
  auto meta = ckpt.meta;
  meta.step += result.steps;
  for (const auto& label : labels_of(config.finetune_tasks)) {
    if (std::find(meta.tasks.begin(), meta.tasks.end(), label) == meta.tasks.end()) {
      meta.tasks.push_back(label);
    }
  }
  const auto out = config.output_dir / "finetune.ckpt";
  training::save_checkpoint(out, ckpt.model, &adam, meta);
  write_text_atomic(config.output_dir / "finetune_loss.csv", training::trace_to_csv(result.trace));
  log("finetune: wrote " + out.string());
  return out;
}

metrics::MetricReport run_eval(const ExperimentConfig& config,
                               const std::filesystem::path& checkpoint, bool zero_shot) {
  const auto before = read_file(checkpoint);
  auto ckpt = training::decode_checkpoint(before);
  check_compatible(ckpt.model.config(), config);
  const auto images = load_images(config.test_data, config.model.image_size);
  const auto samples = make_eval_samples(images, config.eval_tasks.specs(), config.eval_seed);
  const std::string name = zero_shot ? "zero_shot" : "eval";
  const std::string tag = zero_shot ? config.model_tag + " (zero-shot)" : config.model_tag;

  OutputLock lock(config.output_dir);
  for (const auto& task : config.eval_tasks.specs()) {
    const auto key = ckpt.model.route({task.family, task.acceleration});
    log(name + ": " + model::to_string({task.family, task.acceleration}) + " -> pair " + key.name());
  }
  const auto results = evaluate(ckpt.model, samples, config.dataset_name, tag, true);
  const auto report = metrics::aggregate_report(results);

  std::ostringstream per_image;
  per_image << "index,dataset,family,acc,model,psnr_db,ssim\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    per_image << i / 2 << ',' << r.dataset << ',' << r.family << ','
              << model::format_ratio(r.acceleration) << ',' << r.model << ','
              << fmt("%.6f", r.psnr) << ',' << fmt("%.6f", r.ssim) << '\n';
  }
  write_text_atomic(config.output_dir / (name + "_images.csv"), per_image.str());
  write_text_atomic(config.output_dir / (name + "_report.csv"), metrics::report_to_csv(report));
  write_text_atomic(config.output_dir / (name + "_report.md"), metrics::report_to_markdown(report));
  for (std::size_t i = 0; i < std::min(config.error_maps, samples.size()); ++i) {
    const auto& s = samples[i];
    const auto pred = ckpt.model.infer(s.input, s.label);
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s_%03zu", name.c_str(), i);
    const auto clip = [](dataio::ImageTensor t) {
      for (auto& x : t.data()) x = std::clamp(x, 0.0f, 1.0f);
      return t;
    };
    dataio::save_png(config.output_dir / (std::string(stem) + "_recon.png"), clip(pred));
    dataio::save_png(config.output_dir / (std::string(stem) + "_input.png"), clip(s.input));
    dataio::save_png(config.output_dir / (std::string(stem) + "_error.png"),
                     metrics::error_map(pred, s.target));
    dataio::save_png(config.output_dir / (std::string(stem) + "_input_error.png"),
                     metrics::error_map(s.input, s.target));
  }
  if (read_file(checkpoint) != before) {
    fail(ErrorCode::kIo, "checkpoint " + checkpoint.string() + " changed during evaluation");
  }
  for (const auto& row : report.rows) {
    log(name + ": " + row.model + " " + row.family + "@" + model::format_ratio(row.acceleration) +
        "x psnr " + fmt("%.3f", row.mean_psnr) + " ssim " + fmt("%.4f", row.mean_ssim));
  }
  return report;
}

std::pair<double, double> stability_trial(const model::MrIpt<float>& pretrained,
                                          const ExperimentConfig& config,
                                          const std::vector<dataio::ImageTensor>& train,
                                          const std::vector<dataio::Sample>& eval_samples,
                                          std::size_t subset_size, std::uint64_t seed) {
  if (subset_size > train.size()) {
    fail(ErrorCode::kInvalidArgument, "subset size " + std::to_string(subset_size) +
                                          " exceeds the " + std::to_string(train.size()) +
                                          " available training images");
  }
  model::MrIpt<float> model = pretrained;
  if (subset_size > 0) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<dataio::ImageTensor> subset;
    for (std::size_t i = 0; i < subset_size; ++i) subset.push_back(train[order[i]]);
    dataio::SampleStream stream(std::move(subset), config.finetune_tasks.specs(),
                                dataio::mix_seed(seed, 1));
    training::Adam adam({config.finetune.lr});
    training::TrainConfig tc = config.finetune;
    tc.threads = training::default_threads();
    training::train(model, adam, stream, tc);
  }
  std::vector<double> psnr, ssim;
  for (const auto& r : evaluate(model, eval_samples, config.dataset_name, config.model_tag, false)) {
    if (std::isfinite(r.psnr)) psnr.push_back(r.psnr);
    ssim.push_back(r.ssim);
  }
  return {psnr.empty() ? INFINITY : mean(psnr), mean(ssim)};
}

std::vector<StabilityRow> run_stability(const ExperimentConfig& config,
                                        const std::filesystem::path& checkpoint,
                                        const std::vector<std::size_t>& sizes, std::size_t repeats) {
  if (sizes.empty()) fail(ErrorCode::kInvalidArgument, "stability needs at least one size");
  if (repeats == 0) fail(ErrorCode::kInvalidArgument, "stability needs repeats >= 1");
  auto ckpt = training::load_checkpoint(checkpoint);
  check_compatible(ckpt.model.config(), config);
  const auto train = load_images(config.train_data, config.model.image_size);
  for (std::size_t s : sizes) {
    if (s > train.size()) {
      fail(ErrorCode::kInvalidArgument, "size " + std::to_string(s) + " exceeds the " +
                                            std::to_string(train.size()) +
                                            " available training images");
    }
  }
  const auto test = load_images(config.test_data, config.model.image_size);
  const auto samples = make_eval_samples(test, config.eval_tasks.specs(), config.eval_seed);

  OutputLock lock(config.output_dir);
  std::vector<StabilityRow> rows;
  for (std::size_t size : sizes) {
    std::vector<double> psnr, ssim;
    for (std::size_t r = 0; r < repeats; ++r) {
      const std::uint64_t seed = dataio::mix_seed(dataio::mix_seed(config.finetune.seed, size), r);
      const auto [p, s] = stability_trial(ckpt.model, config, train, samples, size, seed);
      psnr.push_back(p);
      ssim.push_back(s);
      log("stability: size " + std::to_string(size) + " repeat " + std::to_string(r + 1) + "/" +
          std::to_string(repeats) + " psnr " + fmt("%.3f", p) + " ssim " + fmt("%.4f", s));
    }
    rows.push_back({size, repeats, mean(psnr), sample_std(psnr), mean(ssim), sample_std(ssim)});
  }
  write_text_atomic(config.output_dir / "stability.csv", stability_to_csv(rows));
  return rows;
}

std::string stability_to_csv(const std::vector<StabilityRow>& rows) {
  std::string out = "size,repeats,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.size) + "," + std::to_string(r.repeats) + "," +
           fmt("%.4f", r.psnr_mean) + "," + fmt("%.4f", r.psnr_std) + "," +
           fmt("%.6f", r.ssim_mean) + "," + fmt("%.6f", r.ssim_std) + "\n";
  }
  return out;
}

}  // namespace mript::experiment
