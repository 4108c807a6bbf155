// Command-line front end over the C API.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mript/mript.h"

namespace {

int report(mript_status status) {
  if (status == MRIPT_OK) return 0;
  std::fprintf(stderr, "error (%s): %s\n", mript_status_name(status), mript_last_error());
  return 1;
}

std::string png_sibling(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ".png";
  return path.substr(0, dot) + ".png";
}

int mask_gen(const std::string& family, double acc, std::size_t size, std::size_t height,
             std::size_t width, std::uint64_t seed, double center, const std::string& out,
             const std::string& png) {
  mript_mask* mask = nullptr;
  const std::size_t h = height ? height : size, w = width ? width : size;
  if (int rc = report(mript_mask_create(family.c_str(), acc, h, w, seed, center, &mask))) return rc;
  double achieved = 0;
  std::size_t kept = 0;
  mript_status s = mript_mask_save(mask, out.c_str());
  if (s == MRIPT_OK) s = mript_mask_save_png(mask, (png.empty() ? png_sibling(out) : png).c_str());
  if (s == MRIPT_OK) s = mript_mask_achieved_acceleration(mask, &achieved);
  if (s == MRIPT_OK) s = mript_mask_kept_count(mask, &kept);
  mript_mask_free(mask);
  if (int rc = report(s)) return rc;
  std::printf("achieved acceleration %.4f (%zu kept)\n", achieved, kept);
  return 0;
}

int degrade(const std::string& in, const std::string& mask_path, const std::string& out,
            const std::string& error_map) {
  mript_image* clean = nullptr;
  mript_mask* mask = nullptr;
  mript_image* degraded = nullptr;
  mript_image* emap = nullptr;
  double psnr = 0, ssim = 0;
  mript_status s = mript_image_load(in.c_str(), &clean);
  if (s == MRIPT_OK) s = mript_mask_load(mask_path.c_str(), &mask);
  if (s == MRIPT_OK) s = mript_degrade(clean, mask, &degraded);
  if (s == MRIPT_OK) s = mript_psnr(degraded, clean, &psnr);
  if (s == MRIPT_OK) s = mript_ssim(degraded, clean, 0, &ssim);
  if (s == MRIPT_OK) s = mript_image_save(degraded, out.c_str());
  if (s == MRIPT_OK && !error_map.empty()) {
    s = mript_error_map(degraded, clean, 3.0, &emap);
    if (s == MRIPT_OK) s = mript_image_save(emap, error_map.c_str());
  }
  mript_image_free(emap);
  mript_image_free(degraded);
  mript_mask_free(mask);
  mript_image_free(clean);
  if (int rc = report(s)) return rc;
  if (std::isinf(psnr)) {
    std::printf("psnr inf dB ssim %.6f\n", ssim);
  } else {
    std::printf("psnr %.4f dB ssim %.6f\n", psnr, ssim);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task MRI reconstruction: masks, phantoms, training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mript_version()));

  std::string family = "random", out, png, in, mask_path, error_map, config, checkpoint, out_dir;
  double acc = 4.0, center = -1.0;
  std::size_t size = 224, height = 0, width = 0, count = 10, test_count = 0, repeats = 3;
  std::uint64_t seed = 0;
  bool zero_shot = false;
  std::vector<std::size_t> sizes;

  auto* mask_cmd = app.add_subcommand("mask-gen", "Generate an undersampling mask");
  mask_cmd->add_option("--family", family, "random | equispaced | gaussian1d | gaussian2d")
      ->capture_default_str();
  mask_cmd->add_option("--acc", acc, "Acceleration ratio (> 1)")->capture_default_str();
  mask_cmd->add_option("--size", size, "Square mask size")->capture_default_str();
  mask_cmd->add_option("--height", height, "Mask height (overrides --size)");
  mask_cmd->add_option("--width", width, "Mask width (overrides --size)");
  mask_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  mask_cmd->add_option("--center-fraction", center, "Central fraction (default: family rule)");
  mask_cmd->add_option("--out", out, "Output MRIT raster")->required();
  mask_cmd->add_option("--png", png, "PNG preview path (default: next to --out)");

  auto* degrade_cmd = app.add_subcommand("degrade", "Apply a mask to an image in k-space");
  degrade_cmd->add_option("--in", in, "Clean image (.mrit or .png)")->required();
  degrade_cmd->add_option("--mask", mask_path, "Mask raster (.mrit)")->required();
  degrade_cmd->add_option("--out", out, "Degraded image (.mrit or .png)")->required();
  degrade_cmd->add_option("--error-map", error_map, "Optional error map vs the clean input");

  auto* phantoms_cmd = app.add_subcommand("phantoms", "Write synthetic phantoms and a manifest");
  phantoms_cmd->add_option("--count", count, "Number of phantoms")->capture_default_str();
  phantoms_cmd->add_option("--size", size, "Image size")->capture_default_str();
  phantoms_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  phantoms_cmd->add_option("--test-count", test_count, "Images assigned to the test split")
      ->capture_default_str();
  phantoms_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* check_cmd = app.add_subcommand("check-config", "Validate an experiment config");
  check_cmd->add_option("config", config, "Experiment config JSON")->required();

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Multi-task pretraining");
  pretrain_cmd->add_option("config", config, "Experiment config JSON")->required();

  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune a checkpoint on the finetune tasks");
  finetune_cmd->add_option("config", config, "Experiment config JSON")->required();
  finetune_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to start from")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the eval tasks");
  eval_cmd->add_option("config", config, "Experiment config JSON")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval_cmd->add_flag("--zero-shot", zero_shot, "Evaluate a pretrained checkpoint as-is");

  auto* stability_cmd = app.add_subcommand("stability", "Fine-tuning dataset-size sweep");
  stability_cmd->add_option("config", config, "Experiment config JSON")->required();
  stability_cmd->add_option("--checkpoint", checkpoint, "Pretrained checkpoint")->required();
  stability_cmd->add_option("--sizes", sizes, "Subset sizes, e.g. 10,50,200")
      ->delimiter(',')
      ->required();
  stability_cmd->add_option("--repeats", repeats, "Repeats per size")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*mask_cmd) return mask_gen(family, acc, size, height, width, seed, center, out, png);
  if (*degrade_cmd) return degrade(in, mask_path, out, error_map);
  if (*phantoms_cmd) {
    if (int rc = report(mript_phantoms_write(count, size, seed, test_count, out_dir.c_str()))) return rc;
    std::printf("wrote %zu phantoms to %s\n", count, out_dir.c_str());
    return 0;
  }
  if (*check_cmd) return report(mript_config_check(config.c_str()));
  if (*pretrain_cmd) return report(mript_experiment_pretrain(config.c_str()));
  if (*finetune_cmd) return report(mript_experiment_finetune(config.c_str(), checkpoint.c_str()));
  if (*eval_cmd) {
    return report(mript_experiment_eval(config.c_str(), checkpoint.c_str(), zero_shot ? 1 : 0));
  }
  if (*stability_cmd) {
    return report(mript_experiment_stability(config.c_str(), checkpoint.c_str(), sizes.data(),
                                             sizes.size(), repeats));
  }
  return 0;
}
