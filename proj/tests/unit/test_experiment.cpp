#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mript/experiment.hpp"
#include "mript/fileutil.hpp"
#include "test_util.hpp"

using namespace mript;
using namespace mript::experiment;
using degradation::MaskFamily;
using testutil::code_of;
using testutil::TempDir;

namespace {

std::string tiny_config(const std::filesystem::path& out, const std::string& variant = "type") {
  return R"({
    "model": {"preset": "tiny", "seed": 3, "variant": ")" + variant + R"("},
    "pretrain": {"max_steps": 3, "batch_size": 2, "lr": 1e-3},
    "finetune": {"max_steps": 2, "batch_size": 2, "lr": 1e-3},
    "tasks": {
      "pretrain": {"families": ["random", "equispaced"], "ratios": [2, 4, 6]},
      "eval": {"families": ["random"], "ratios": [5]}
    },
    "data": {"train": {"phantoms": {"count": 6, "seed": 1}},
             "test": {"phantoms": {"count": 2, "seed": 2}}},
    "output_dir": ")" + out.string() + R"(",
    "error_maps": 1
  })";
}

struct LogCapture {
  std::vector<std::string> lines;
  LogCapture() {
    set_logger([this](const std::string& l) { lines.push_back(l); });
  }
  ~LogCapture() { set_logger(nullptr); }
  bool contains(const std::string& needle) const {
    for (const auto& l : lines)
      if (l.find(needle) != std::string::npos) return true;
    return false;
  }
};

}  // namespace

TEST_CASE("config defaults") {
  const auto c = parse_config("{}", "/base");
  CHECK(c.model.image_size == model::ModelConfig::desk().image_size);
  CHECK(c.model.variant == model::Variant::kLevel);
  CHECK(c.pretrain_tasks.specs().size() == 20);
  CHECK(c.model.trained_ratios == std::vector<double>{2, 4, 6, 8, 10});
  CHECK(c.model.trained_families.size() == 4);
  REQUIRE(c.eval_tasks.specs().size() == 1);
  CHECK(c.eval_tasks.specs()[0].family == MaskFamily::kCartesianRandom);
  CHECK(c.eval_tasks.specs()[0].acceleration == 4.0);
  CHECK(c.finetune_tasks.specs().size() == 1);
  CHECK(c.pretrain.epochs == 5);
  CHECK(c.finetune.epochs == 15);
  CHECK(c.pretrain.lr == 1e-4);
  CHECK(c.train_data.phantom_count == 128);
  CHECK(c.test_data.phantom_count == 32);
  CHECK(c.output_dir == std::filesystem::path("/base/mript_out"));
  CHECK(c.model_tag == "MR-IPT-level");
  CHECK(parse_config(R"({"model": {"preset": "paper"}})").pretrain.lr == 1e-5);
}

TEST_CASE("config rejects bad documents") {
  CHECK(code_of([] { parse_config(R"({"epochs": 3})"); }) == int(ErrorCode::kUnknownKey));
  CHECK(code_of([] { parse_config(R"({"model": {"depth": 3}})"); }) == int(ErrorCode::kUnknownKey));
  CHECK(code_of([] { parse_config(R"({"pretrain": {"momentum": 0.9}})"); }) ==
        int(ErrorCode::kUnknownKey));
  CHECK(code_of([] { parse_config("{not json"); }) == int(ErrorCode::kInvalidArgument));
  CHECK(code_of([] { parse_config(R"({"pretrain": {"lr": 0}})"); }) ==
        int(ErrorCode::kInvalidArgument));
  CHECK(code_of([] { parse_config(R"({"tasks": {"eval": {"families": ["random"], "ratios": [1]}}})"); }) ==
        int(ErrorCode::kInvalidArgument));
  CHECK(code_of([] {
          parse_config(R"({"data": {"train": {"phantoms": {"count": 2}, "manifest": "m.csv"}}})");
        }) == int(ErrorCode::kInvalidArgument));
  CHECK(code_of([] { parse_config(R"({"model": {"preset": "huge"}})"); }) ==
        int(ErrorCode::kInvalidArgument));
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == int(ErrorCode::kIo));
}

TEST_CASE("manifest paths resolve against the config directory") {
  const auto c = parse_config(R"({"data": {"test": {"manifest": "m.csv", "split": "val"}}})", "/cfg");
  REQUIRE(c.test_data.manifest);
  CHECK(*c.test_data.manifest == std::filesystem::path("/cfg/m.csv"));
  CHECK(c.test_data.split == dataio::Split::kVal);
}

TEST_CASE("evaluating exact reconstructions footnotes infinite PSNR") {
  const auto images = dataio::generate_phantoms(2, 16, 4);
  model::ModelConfig mc = model::ModelConfig::tiny();
  const model::MrIpt<float> m(mc, 1);
  std::vector<dataio::Sample> samples;
  for (const auto& img : images) samples.push_back({img, img, {MaskFamily::kCartesianRandom, 4}});
  const auto results = evaluate(m, samples, "ph", "m", true);
  REQUIRE(results.size() == 4);
  CHECK(results[1].model == "zero-filled");
  CHECK(std::isinf(results[1].psnr));
  CHECK(results[1].ssim == 1.0);
  const auto md = metrics::report_to_markdown(metrics::aggregate_report(results));
  CHECK(md.find("inf*") != std::string::npos);
  CHECK(md.find("2 image(s) with infinite PSNR") != std::string::npos);
}

TEST_CASE("eval samples are deterministic") {
  const auto images = dataio::generate_phantoms(3, 16, 4);
  degradation::MaskSpec t;
  t.acceleration = 4;
  const auto a = make_eval_samples(images, {t, t}, 9);
  const auto b = make_eval_samples(images, {t, t}, 9);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(testutil::max_abs_diff(a[i].input, b[i].input) == 0);
  CHECK(testutil::max_abs_diff(a[0].input, a[3].input) > 0);
}

TEST_CASE("pretrain, finetune and eval pipeline") {
  TempDir dir("pipeline");
  const auto config = parse_config(tiny_config(dir.path() / "out"));
  LogCapture logs;
  const auto pre = run_pretrain(config);
  CHECK(std::filesystem::exists(pre));
  CHECK(std::filesystem::exists(dir.path() / "out" / "pretrain_loss.csv"));
  CHECK(logs.contains("pretrain step 3/3"));

  const auto fine = run_finetune(config, pre);
  CHECK(std::filesystem::exists(fine));
  CHECK(training::load_checkpoint(fine).meta.step == 5);

  const auto before = read_file(pre);
  const auto report = run_eval(config, pre, true);
  CHECK(read_file(pre) == before);
  CHECK(logs.contains("random@5x -> pair r6"));
  REQUIRE(report.rows.size() == 2);
  for (const char* f : {"zero_shot_report.csv", "zero_shot_report.md", "zero_shot_images.csv",
                        "zero_shot_000_recon.png", "zero_shot_000_error.png"}) {
    INFO(f);
    CHECK(std::filesystem::exists(dir.path() / "out" / f));
  }
  CHECK_FALSE(std::filesystem::exists(dir.path() / "out" / "zero_shot_001_recon.png"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "out" / ".mript.lock"));

  run_eval(config, fine, false);
  CHECK(std::filesystem::exists(dir.path() / "out" / "eval_report.md"));
}

TEST_CASE("stability rows") {
  TempDir dir("stability");
  const auto config = parse_config(tiny_config(dir.path() / "out"));
  LogCapture logs;
  const auto pre = run_pretrain(config);
  const auto rows = run_stability(config, pre, {0, 2}, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.repeats == 1);
    CHECK(r.psnr_std == 0.0);
    CHECK(r.ssim_std == 0.0);
    CHECK(std::isfinite(r.psnr_mean));
  }
  const auto csv = read_text(dir.path() / "out" / "stability.csv");
  CHECK(csv == stability_to_csv(rows));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(code_of([&] { run_stability(config, pre, {7}, 1); }) == int(ErrorCode::kInvalidArgument));
  CHECK(code_of([&] { run_stability(config, pre, {1}, 0); }) == int(ErrorCode::kInvalidArgument));

  const auto again = run_stability(config, pre, {0, 2}, 1);
  CHECK(again[1].psnr_mean == rows[1].psnr_mean);
  CHECK(again[1].ssim_mean == rows[1].ssim_mean);
}

TEST_CASE("checkpoint compatibility") {
  auto config = parse_config(tiny_config("/tmp/unused"));
  model::ModelConfig other = config.model;
  CHECK(code_of([&] { check_compatible(other, config); }) == 0);
  other.image_size = 32;
  CHECK(code_of([&] { check_compatible(other, config); }) == int(ErrorCode::kDimensionMismatch));
  other = config.model;
  other.variant = model::Variant::kSplit;
  CHECK(code_of([&] { check_compatible(other, config); }) == int(ErrorCode::kInvalidArgument));
}

TEST_CASE("output lock is exclusive") {
  TempDir dir("lock");
  {
    OutputLock a(dir.path() / "o");
    CHECK(code_of([&] { OutputLock b(dir.path() / "o"); }) == int(ErrorCode::kIo));
  }
  CHECK(code_of([&] { OutputLock c(dir.path() / "o"); }) == 0);
}
