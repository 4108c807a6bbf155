// Acceptance runner: one PASS/FAIL line per criterion.
//
//   mript_acceptance [--only N[,M...]] [--work DIR] [--verbose]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../common/report_fixture.hpp"
#include "../unit/test_util.hpp"
#include "mript/dataio.hpp"
#include "mript/degradation.hpp"
#include "mript/experiment.hpp"
#include "mript/fileutil.hpp"
#include "mript/gradcheck.hpp"
#include "mript/metrics.hpp"
#include "mript/model.hpp"
#include "mript/ops.hpp"
#include "mript/training.hpp"

using namespace mript;
using degradation::MaskFamily;
using degradation::MaskSpec;
using numerics::ScalarOp;
using numerics::Var;
using testutil::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool verbose = false;

void note(const std::string& line) {
  if (verbose) std::fprintf(stderr, "  %s\n", line.c_str());
}

MaskSpec spec_of(MaskFamily family, double acc, std::uint64_t seed = 0) {
  MaskSpec s;
  s.family = family;
  s.acceleration = acc;
  s.seed = seed;
  return s;
}

// ---- 1: gradients ---------------------------------------------------------------

using MultiOp = std::function<Var<double>(const std::vector<Var<double>>&)>;

double check_each_input(const MultiOp& op, const std::vector<Tensor<double>>& points,
                        std::uint64_t seed) {
  double worst = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ScalarOp scalar = [&](Var<double> x) {
      std::vector<Var<double>> vars;
      for (std::size_t j = 0; j < points.size(); ++j) {
        vars.push_back(j == i ? x : x.tape().constant(points[j]));
      }
      Var<double> out = op(vars);
      return numerics::weighted_sum(out, random_tensor<double>(out.dims(), seed * 7919 + 17));
    };
    worst = std::max(worst, numerics::grad_check(scalar, points[i]));
  }
  return worst;
}

std::map<std::string, double> primitive_errors(std::uint64_t seed) {
  using namespace numerics;
  auto r = [seed](Dims d, std::uint64_t k, double lo = -1, double hi = 1) {
    return random_tensor<double>(d, seed * 101 + k, lo, hi);
  };
  std::map<std::string, double> e;
  e["conv2d"] = std::max(
      check_each_input([](const auto& v) { return conv2d(v[0], v[1], v[2], 1, 1); },
                       {r({2, 5, 5}, 0), r({3, 2, 3, 3}, 1), r({3}, 2)}, seed),
      check_each_input([](const auto& v) { return conv2d(v[0], v[1], v[2], 2, 0); },
                       {r({2, 6, 6}, 3), r({3, 2, 2, 2}, 4), r({3}, 5)}, seed));
  e["linear"] = check_each_input([](const auto& v) { return linear(v[0], v[1], v[2]); },
                                 {r({4, 3}, 6), r({5, 3}, 7), r({5}, 8)}, seed);
  e["layer_norm"] = check_each_input([](const auto& v) { return layer_norm(v[0], v[1], v[2]); },
                                     {r({3, 6}, 9), r({6}, 10), r({6}, 11)}, seed);
  e["softmax"] = std::max(
      check_each_input([](const auto& v) { return softmax(v[0], 0); }, {r({3, 4}, 12)}, seed),
      check_each_input([](const auto& v) { return softmax(v[0], 1); }, {r({3, 4}, 13)}, seed));
  e["gelu"] = check_each_input([](const auto& v) { return gelu(v[0]); }, {r({12}, 14, -3, 3)}, seed);
  e["relu"] = check_each_input([](const auto& v) { return relu(v[0]); }, {r({12}, 15, -3, 3)}, seed);
  Tensor<double> mask({3, 4}, 0.0);
  mask.at(0, 2) = kMaskedLogit;
  e["attention"] = check_each_input(
      [&mask](const auto& v) { return attention(v[0], v[1], v[2], 2, &mask); },
      {r({3, 4}, 16), r({4, 4}, 17), r({4, 6}, 18)}, seed);
  Tensor<double> group_mask({2, 2, 2}, 0.0);
  group_mask.at(1, 0, 1) = kMaskedLogit;
  group_mask.at(1, 1, 0) = kMaskedLogit;
  e["grouped_attention"] = check_each_input(
      [&group_mask](const auto& v) {
        return grouped_attention(v[0], v[1], v[2], 2, 2, std::optional(v[3]), &group_mask);
      },
      {r({4, 4}, 19), r({4, 4}, 20), r({4, 4}, 21), r({2, 2, 2}, 22)}, seed);
  e["pixel_shuffle"] =
      check_each_input([](const auto& v) { return pixel_shuffle(v[0], 2); }, {r({8, 2, 3}, 23)}, seed);
  e["add"] = check_each_input([](const auto& v) { return add(v[0], v[1]); },
                              {r({2, 3}, 24), r({2, 3}, 25)}, seed);
  e["mul"] = check_each_input([](const auto& v) { return mul(v[0], v[1]); },
                              {r({2, 3}, 26), r({2, 3}, 27)}, seed);
  e["sum"] = check_each_input([](const auto& v) { return sum(v[0]); }, {r({7}, 28)}, seed);
  const auto target = r({3, 3}, 29);
  e["mean_abs_error"] = check_each_input(
      [&target](const auto& v) { return mean_abs_error(v[0], target); }, {r({3, 3}, 30)}, seed);
  const std::vector<std::size_t> idx{5, 0, 0, 3, 1, 5}, rows{2, 0, 2};
  e["gather"] = check_each_input([&](const auto& v) { return gather(v[0], idx, {2, 3}); },
                                 {r({6}, 31)}, seed);
  e["gather_rows"] =
      check_each_input([&](const auto& v) { return gather_rows(v[0], rows); }, {r({3, 4}, 32)}, seed);
  e["transpose2d"] =
      check_each_input([](const auto& v) { return transpose2d(v[0]); }, {r({3, 4}, 33)}, seed);
  e["reshape"] =
      check_each_input([](const auto& v) { return reshape(v[0], {6, 2}); }, {r({3, 4}, 34)}, seed);
  e["concat_rows"] = check_each_input([](const auto& v) { return concat_rows(v[0], v[1]); },
                                      {r({1, 4}, 35), r({2, 4}, 36)}, seed);
  return e;
}

double full_model_error(std::uint64_t seed) {
  using Model = model::MrIpt<double>;
  model::ModelConfig config = model::ModelConfig::tiny();
  Model m(config, 30 + seed);
  // Probe at a generic point: init-scale projections leave attention nearly
  // uniform with gradients below finite-difference resolution.
  for (auto& [name, t] : m.mutable_parameters()) {
    if (t.rank() > 2 || name.ends_with(".gamma") || name.ends_with(".beta")) continue;
    for (double& x : t.data()) x *= 10;
  }
  const model::TaskLabel label{MaskFamily::kCartesianRandom, 4};
  const auto img = random_tensor<double>({1, 16, 16}, seed + 5, 0, 1);
  const auto weights = random_tensor<double>({1, 16, 16}, seed + 7);
  double worst = numerics::grad_check(
      [&](Var<double> x) {
        model::Session<double> s(m, x.tape(), false);
        return numerics::weighted_sum(m.forward(s, x, label), weights);
      },
      img);
  std::vector<std::string> names;
  for (const auto& [name, t] : m.parameters()) names.push_back(name);
  const std::string routed = m.route(label).name();
  for (const auto& name : names) {
    const bool other_pair = (name.starts_with("head.") || name.starts_with("tail.")) &&
                            name.find("." + routed + ".") == std::string::npos;
    if (other_pair) continue;
    const Tensor<double>& point = m.parameter(name);
    std::vector<std::size_t> comps;
    const std::size_t step = std::max<std::size_t>(1, point.size() / 6);
    for (std::size_t i = 0; i < point.size(); i += step) comps.push_back(i);
    // Softmax is invariant to a per-query shift, so key biases have an exactly
    // zero gradient; a known linear term keeps the relative error meaningful.
    const bool zero_grad = name.ends_with(".k.bias");
    const auto offset = random_tensor<double>(point.dims(), seed + 11, 1e-3, 2e-3);
    const double err = numerics::grad_check(
        [&](Var<double> x) {
          model::Session<double> s(m, x.tape(), false);
          s.bind(name, x);
          auto loss = numerics::weighted_sum(m.forward(s, s.tape().constant(img), label), weights);
          return zero_grad ? numerics::add(loss, numerics::weighted_sum(x, offset)) : loss;
        },
        point, 1e-5, comps);
    if (err > 1e-3) note("full model: " + name + " rel err " + fmt("%.3g", err));
    worst = std::max(worst, err);
  }
  return worst;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double prim = 0, full = 0;
  std::string worst_prim;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& [name, err] : primitive_errors(seed)) {
      if (err > prim) {
        prim = err;
        worst_prim = name;
      }
    }
    full = std::max(full, full_model_error(seed));
  }
  const double elapsed = seconds_since(t0);
  return {prim < 1e-4 && full < 1e-3 && elapsed < 300,
          "primitives max rel err " + fmt("%.2e", prim) + " (" + worst_prim + "), full model " +
              fmt("%.2e", full) + ", 3 seeds, " + fmt("%.1f s", elapsed)};
}

// ---- 2: degradation ---------------------------------------------------------------

Outcome criterion_degradation() {
  double round_trip = 0, full_mask = 0, parseval = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto img = random_tensor<float>({1, 224, 224}, seed, 0, 1);
    const auto k = degradation::fft2c(img);
    const auto back = degradation::ifft2c(k);
    double energy = 0;
    for (std::size_t r = 0; r < 224; ++r) {
      for (std::size_t c = 0; c < 224; ++c) {
        round_trip = std::max<double>(round_trip, std::abs(back.at(r, c) - std::complex<float>(img.at(0, r, c))));
        energy += double(img.at(0, r, c)) * img.at(0, r, c);
      }
    }
    parseval = std::max(parseval, std::abs(k.energy() - energy) / energy);
    const auto full = degradation::Mask::columns(224, 224, std::vector<std::uint8_t>(224, 1));
    full_mask = std::max(full_mask, testutil::max_abs_diff(degradation::degrade(img, full), img));
  }
  bool rates_ok = true;
  std::string worst_task;
  double worst_rel = 0;
  for (MaskFamily f : degradation::kAllFamilies) {
    for (double r : {2.0, 4.0, 6.0, 8.0, 10.0}) {
      double sum = 0;
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto m = degradation::make_mask(spec_of(f, r, seed), 224, 224);
        const double a = degradation::achieved_acceleration(m);
        sum += a;
        const double rel = std::abs(a - r) / r;
        if (rel > worst_rel) {
          worst_rel = rel;
          worst_task = std::string(degradation::family_name(f)) + "@" + model::format_ratio(r);
        }
        if (rel > 0.10) rates_ok = false;
        if (f == MaskFamily::kCartesianEquispaced &&
            std::abs(double(m.kept_count()) - 224.0 / r) > 1.0) {
          rates_ok = false;
        }
      }
      if (std::abs(sum / 100 - r) > 0.02 * r) {
        rates_ok = false;
        note(std::string(degradation::family_name(f)) + "@" + model::format_ratio(r) +
             " mean acceleration " + fmt("%.4f", sum / 100));
      }
    }
  }
  const bool pass = round_trip < 1e-6 && full_mask < 1e-6 && parseval < 1e-5 && rates_ok;
  return {pass, "fft round trip " + fmt("%.1e", round_trip) + ", full-mask degrade " +
                    fmt("%.1e", full_mask) + ", Parseval " + fmt("%.1e", parseval) +
                    ", worst per-mask acceleration deviation " + fmt("%.2f%%", 100 * worst_rel) +
                    " (" + worst_task + ") over 4x5x100 masks"};
}

// ---- 3: metrics ---------------------------------------------------------------

Outcome criterion_metrics() {
  const Tensor<double> clean({1, 1, 2}, {0.0, 1.0});
  const Tensor<double> x({1, 1, 2}, {0.1, 0.9});
  const double psnr = metrics::psnr(x, clean);
  const metrics::ImageTensor a({1, 16, 16}, 0.5f), b({1, 16, 16}, 0.25f);
  metrics::SsimParams global;
  global.mode = metrics::SsimMode::kGlobal;
  const double windowed = metrics::ssim(a, b), whole = metrics::ssim(a, b, global);
  bool identity = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = random_tensor<float>({1, 32, 32}, s, 0, 1);
    identity = identity && metrics::ssim(img, img) == 1.0 && metrics::ssim(img, img, global) == 1.0;
  }
  const bool pass = std::abs(psnr - 20.0) < 1e-9 && std::abs(windowed - 0.80006) < 1e-4 &&
                    std::abs(whole - 0.80006) < 1e-4 && windowed == whole && identity;
  return {pass, "psnr " + fmt("%.12f", psnr) + " dB, ssim windowed " + fmt("%.6f", windowed) +
                    " global " + fmt("%.6f", whole) + ", ssim(x,x)=1 " + (identity ? "yes" : "no")};
}

// ---- 4: routing ---------------------------------------------------------------

Outcome criterion_routing() {
  model::ModelConfig grid = model::ModelConfig::desk();
  grid.trained_families.assign(std::begin(degradation::kAllFamilies), std::end(degradation::kAllFamilies));
  grid.trained_ratios = {2, 4, 6, 8, 10};
  auto name_of = [&](model::Variant v, MaskFamily f, double r, const model::ModelConfig& c) {
    return model::route(v, {f, r}, c).name();
  };
  std::vector<std::string> failures;
  auto expect = [&](const std::string& got, const std::string& want, const std::string& what) {
    if (got != want) failures.push_back(what + " -> " + got + " (want " + want + ")");
  };
  expect(name_of(model::Variant::kType, MaskFamily::kCartesianRandom, 5, grid), "r6", "ratio 5");
  expect(name_of(model::Variant::kType, MaskFamily::kCartesianRandom, 7, grid), "r8", "ratio 7");
  expect(name_of(model::Variant::kType, MaskFamily::kGaussian2D, 12, grid), "r10", "ratio 12");
  model::ModelConfig partial = grid;
  partial.trained_families = {MaskFamily::kCartesianEquispaced, MaskFamily::kCartesianRandom};
  expect(name_of(model::Variant::kLevel, MaskFamily::kGaussian2D, 4, partial), "random",
         "unseen family");
  expect(name_of(model::Variant::kSplit, MaskFamily::kGaussian1D, 5, partial), "random_r6",
         "unseen family and ratio");
  std::vector<std::size_t> banks;
  for (auto v : {model::Variant::kType, model::Variant::kLevel, model::Variant::kSplit}) {
    grid.variant = v;
    banks.push_back(model::pair_keys(grid).size());
  }
  if (banks != std::vector<std::size_t>{5, 4, 20}) failures.push_back("bank sizes");
  std::string detail = "5->r6, 7->r8, 12->r10, unseen family->random, banks " +
                       std::to_string(banks[0]) + "/" + std::to_string(banks[1]) + "/" +
                       std::to_string(banks[2]);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- 5: overfit ---------------------------------------------------------------

struct OverfitRun {
  double initial = 0, best_ratio = 1;
  std::size_t steps = 0;
  std::vector<double> losses;
};

OverfitRun overfit(std::size_t max_steps) {
  model::ModelConfig config = model::ModelConfig::desk();
  config.trained_families = {MaskFamily::kCartesianRandom};
  config.trained_ratios = {4};
  model::MrIpt<float> m(config, 7);
  const dataio::SampleStream stream(dataio::generate_phantoms(8, 64, 3),
                                    {spec_of(MaskFamily::kCartesianRandom, 4)}, 11);
  const auto fixed = dataio::take_samples(stream, 8);
  auto loss = [&] {
    double s = 0;
    for (const auto& x : fixed) s += training::l1_loss(m.infer(x.input, x.label), x.target);
    return s / static_cast<double>(fixed.size());
  };
  OverfitRun run;
  run.initial = loss();
  training::Adam adam({1e-4});
  training::TrainConfig tc;
  tc.batch_size = 2;
  tc.lr = 1e-4;
  tc.seed = 1;
  tc.max_steps = max_steps;
  tc.threads = training::default_threads();
  // Stop as soon as the fixed-set loss drops below the threshold.
  struct Done {};
  try {
    training::train(m, adam, stream, tc, [&](const training::StepRecord& r) {
      run.steps = r.step;
      run.losses.push_back(r.loss);
      if (r.step % 50 != 0) return;
      const double ratio = loss() / run.initial;
      run.best_ratio = std::min(run.best_ratio, ratio);
      note("overfit step " + std::to_string(r.step) + " ratio " + fmt("%.4f", ratio));
      if (ratio < 0.3) throw Done{};
    });
  } catch (const Done&) {
  }
  return run;
}

Outcome criterion_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const OverfitRun a = overfit(20), b = overfit(20);
  const bool deterministic = a.losses == b.losses && a.initial == b.initial;
  const OverfitRun run = overfit(2000);
  const double elapsed = seconds_since(t0);
  const bool pass = run.best_ratio < 0.3 && deterministic && elapsed < 900;
  return {pass, "fixed-set L1 " + fmt("%.5f", run.initial) + " -> " +
                    fmt("%.1f%%", 100 * run.best_ratio) + " of initial at step " +
                    std::to_string(run.steps) + ", repeat run bitwise identical " +
                    (deterministic ? "yes" : "no") + ", " + fmt("%.0f s", elapsed)};
}

// ---- 6, 7, 10: experiments --------------------------------------------------------

std::filesystem::path work_dir;

experiment::ExperimentConfig gain_config() {
  experiment::ExperimentConfig c = experiment::parse_config(R"({
    "model": {"preset": "desk", "seed": 7, "variant": "level"},
    "pretrain": {"max_steps": 1000, "batch_size": 4, "lr": 3e-4, "seed": 5},
    "finetune": {"epochs": 2, "batch_size": 2, "lr": 1e-4, "seed": 13},
    "tasks": {
      "pretrain": {"families": ["random", "equispaced", "gaussian1d", "gaussian2d"], "ratios": [4, 8]},
      "eval": {"families": ["random"], "ratios": [4]}
    },
    "data": {"train": {"phantoms": {"count": 128, "seed": 1}},
             "test": {"phantoms": {"count": 32, "seed": 2}}},
    "dataset_name": "phantom",
    "eval_seed": 9,
    "error_maps": 2
  })");
  c.output_dir = work_dir / "gain";
  return c;
}

std::optional<std::filesystem::path> pretrained;

std::filesystem::path pretrained_checkpoint() {
  if (!pretrained) pretrained = experiment::run_pretrain(gain_config());
  return *pretrained;
}

std::pair<const metrics::ReportRow*, const metrics::ReportRow*> model_and_baseline(
    const metrics::MetricReport& report) {
  const metrics::ReportRow *model = nullptr, *zero = nullptr;
  for (const auto& row : report.rows) (row.model == "zero-filled" ? zero : model) = &row;
  if (!model || !zero) fail(ErrorCode::kMissingTensor, "report lacks model or zero-filled rows");
  return {model, zero};
}

Outcome criterion_gain() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ckpt = pretrained_checkpoint();
  const auto report = experiment::run_eval(gain_config(), ckpt, false);
  const auto [model, zero] = model_and_baseline(report);
  const double elapsed = seconds_since(t0);
  const double gain = model->mean_psnr - zero->mean_psnr;
  const bool pass = gain >= 1.0 && model->mean_ssim > zero->mean_ssim && elapsed < 3600;
  return {pass, "random@4x on " + std::to_string(model->n) + " held-out phantoms: PSNR " +
                    fmt("%.3f", model->mean_psnr) + " vs zero-filled " + fmt("%.3f", zero->mean_psnr) +
                    " dB (" + fmt("%+.3f", gain) + "), SSIM " + fmt("%.4f", model->mean_ssim) +
                    " vs " + fmt("%.4f", zero->mean_ssim) + ", " + fmt("%.0f s", elapsed)};
}

Outcome criterion_zero_shot() {
  const auto ckpt = pretrained_checkpoint();
  experiment::ExperimentConfig c = gain_config();
  c.eval_tasks = {{MaskFamily::kCartesianRandom}, {5}};
  const auto before = read_file(ckpt);
  const auto report = experiment::run_eval(c, ckpt, true);
  const bool untouched = read_file(ckpt) == before;
  const auto [model, zero] = model_and_baseline(report);
  const double delta = model->mean_psnr - zero->mean_psnr;
  return {untouched && delta >= -0.1,
          "random@5x (unseen) PSNR " + fmt("%.3f", model->mean_psnr) + " vs zero-filled " +
              fmt("%.3f", zero->mean_psnr) + " dB (" + fmt("%+.3f", delta) + "), checkpoint " +
              (untouched ? "unchanged" : "MODIFIED")};
}

Outcome criterion_stability() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ckpt = pretrained_checkpoint();
  experiment::ExperimentConfig c = gain_config();
  c.train_data.phantom_count = 200;
  c.output_dir = work_dir / "stability";
  const auto rows = experiment::run_stability(c, ckpt, {0, 10, 50, 200}, 3);
  std::size_t rising = 0;
  std::string means;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    means += (i ? ", " : "") + std::to_string(rows[i].size) + ":" + fmt("%.3f", rows[i].psnr_mean);
    if (i > 0 && rows[i].psnr_mean >= rows[i - 1].psnr_mean) ++rising;
  }
  const double elapsed = seconds_since(t0);
  return {rising >= 2 && elapsed < 7200,
          "mean PSNR by size {" + means + "} dB, nondecreasing in " + std::to_string(rising) +
              "/3 steps, 3 repeats, " + fmt("%.0f s", elapsed)};
}

// ---- 8: persistence ---------------------------------------------------------------

Outcome criterion_persistence() {
  model::MrIpt<float> m(model::ModelConfig::desk(), 21);
  // Move off the initial point so every tensor carries arbitrary bits.
  for (auto& [name, t] : m.mutable_parameters()) {
    const auto noise = random_tensor<float>(t.dims(), std::hash<std::string>{}(name), -1e-2, 1e-2);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += noise[i];
  }
  const auto path = work_dir / "persist.ckpt";
  training::save_checkpoint(path, m, nullptr, {});
  const auto back = training::load_checkpoint(path);
  bool outputs_equal = true;
  for (MaskFamily f : degradation::kAllFamilies) {
    for (double r : {2.0, 5.0, 10.0}) {
      const auto input = random_tensor<float>({1, 64, 64}, std::size_t(r * 10) + std::size_t(f), 0, 1);
      const auto x = m.infer(input, {f, r}), y = back.model.infer(input, {f, r});
      outputs_equal = outputs_equal &&
                      std::memcmp(x.data().data(), y.data().data(), x.size() * sizeof(float)) == 0;
    }
  }
  bool rasters_equal = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto t = random_tensor<float>({1, 8 + s, 13}, s, -1e6, 1e6);
    t[0] = -0.0f;
    t[1] = std::numeric_limits<float>::denorm_min();
    const auto raster = work_dir / ("r" + std::to_string(s) + ".mrit");
    dataio::save_raster(raster, t);
    const auto u = dataio::load_raster(raster);
    rasters_equal = rasters_equal && u.dims() == t.dims() &&
                    std::memcmp(u.data().data(), t.data().data(), t.size() * sizeof(float)) == 0;
  }
  return {outputs_equal && rasters_equal,
          std::string("checkpoint forward outputs bitwise equal on 12 tasks: ") +
              (outputs_equal ? "yes" : "no") + ", 10 raster round trips bitwise: " +
              (rasters_equal ? "yes" : "no")};
}

// ---- 9: report fixture ---------------------------------------------------------------

Outcome criterion_report() {
  const std::string md = metrics::report_to_markdown(metrics::aggregate_report(fixture::table_rows()));
  const bool exact = md == fixture::kTableMarkdown;
  const bool values = md.find("| 42.48 | 0.9831 |") != std::string::npos &&
                      md.find("| 34.52 | 0.8681 |") != std::string::npos;
  return {exact && values, "markdown " + std::to_string(md.size()) + " bytes, byte-exact " +
                               (exact ? "yes" : "no") + ", contains 42.48/0.9831 and 34.52/0.8681 " +
                               (values ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string work = (std::filesystem::temp_directory_path() / "mript_acceptance").string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--work", work, "Scratch directory for checkpoints and reports")->capture_default_str();
  app.add_flag("--verbose", verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);

  work_dir = work;
  std::filesystem::remove_all(work_dir);
  std::filesystem::create_directories(work_dir);
  if (!verbose) experiment::set_logger([](const std::string&) {});

  const std::vector<Criterion> criteria{
      {1, "gradient suite", criterion_gradients},
      {2, "degradation identities", criterion_degradation},
      {3, "metric oracles", criterion_metrics},
      {4, "routing behavior", criterion_routing},
      {5, "overfit sanity", criterion_overfit},
      {6, "reconstruction gain", criterion_gain},
      {7, "zero-shot harness", criterion_zero_shot},
      {8, "persistence", criterion_persistence},
      {9, "report fixtures", criterion_report},
      {10, "stability sweep", criterion_stability},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::filesystem::remove_all(work_dir);
  return failed == 0 ? 0 : 1;
}
