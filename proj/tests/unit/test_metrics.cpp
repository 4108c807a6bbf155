#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "../common/report_fixture.hpp"
#include "doctest.h"
#include "mript/metrics.hpp"
#include "test_util.hpp"

using namespace mript;
using namespace mript::metrics;
using testutil::code_of;
using testutil::random_tensor;

namespace {

ImageTensor constant(std::size_t n, float v) { return ImageTensor({1, n, n}, v); }

SsimParams global_mode() {
  SsimParams p;
  p.mode = SsimMode::kGlobal;
  return p;
}

// Eq. 3 on whole-image moments with population statistics, written out
// directly in double precision.
double ssim_reference(const ImageTensor& x, const ImageTensor& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cxy += (x[i] - mx) * (y[i] - my);
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  const double c1 = 1e-4, c2 = 9e-4;
  return (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

TEST_CASE("psnr fixtures") {
  // max(clean) = 1, MSE = ((0.1)^2 + (0.1)^2) / 2 = 0.01 -> 10 log10(100)
  const Tensor<double> clean({1, 1, 2}, {0.0, 1.0});
  const Tensor<double> x({1, 1, 2}, {0.1, 0.9});
  CHECK(std::abs(psnr(x, clean) - 20.0) < 1e-9);
  // Same fixture stored in single precision.
  CHECK(std::abs(psnr(x.cast<float>(), clean.cast<float>()) - 20.0) < 1e-5);

  // One pixel in a hundred off by exactly 1.
  ImageTensor big({1, 10, 10}, 0.0f), ref({1, 10, 10}, 0.0f);
  ref[0] = 1.0f;
  big[0] = 1.0f;
  big[1] = 1.0f;
  CHECK(std::abs(psnr(big, ref) - 20.0) < 1e-9);

  // Peak 0.5, MSE 0.0025 -> 10 log10(0.25 / 0.0025) = 20 dB.
  const Tensor<double> half_clean({1, 1, 2}, {0.0, 0.5});
  const Tensor<double> half_x({1, 1, 2}, {0.05, 0.45});
  CHECK(std::abs(psnr(half_x, half_clean) - 20.0) < 1e-9);
}

TEST_CASE("psnr edge cases") {
  const auto x = random_tensor<float>({1, 8, 8}, 1, 0, 1);
  CHECK(std::isinf(psnr(x, x)));
  CHECK(psnr(x, x) > 0);
  CHECK(code_of([&] { psnr(x, constant(8, 0.0f)); }) == int(ErrorCode::kInvalidArgument));
  CHECK(code_of([&] { psnr(x, constant(4, 1.0f)); }) == int(ErrorCode::kDimensionMismatch));
}

TEST_CASE("psnr decreases with error") {
  const auto clean = random_tensor<float>({1, 8, 8}, 2, 0, 1);
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 10; ++k) {
    auto x = clean;
    for (auto& v : x.data()) v += 0.01f * static_cast<float>(k);
    const double p = psnr(x, clean);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("ssim constant fixture in both modes") {
  const auto x = constant(16, 0.5f), y = constant(16, 0.25f);
  const double expected = (2 * 0.5 * 0.25 + 1e-4) / (0.25 + 0.0625 + 1e-4);
  CHECK(expected == doctest::Approx(0.80006).epsilon(1e-4));
  const double windowed = ssim(x, y);
  const double global = ssim(x, y, global_mode());
  CHECK(std::abs(windowed - 0.80006) < 1e-4);
  CHECK(std::abs(global - 0.80006) < 1e-4);
  CHECK(windowed == global);
}

TEST_CASE("ssim identity, symmetry and bounds") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = random_tensor<float>({1, 12, 12}, s, 0, 1);
    const auto y = random_tensor<float>({1, 12, 12}, s + 50, 0, 1);
    CHECK(ssim(x, x) == 1.0);
    CHECK(ssim(x, x, global_mode()) == 1.0);
    CHECK(ssim(x, y) == ssim(y, x));
    CHECK(ssim(x, y, global_mode()) == ssim(y, x, global_mode()));
    CHECK(std::abs(ssim(x, y)) <= 1 + 1e-9);
    CHECK(std::abs(ssim(x, y, global_mode())) <= 1 + 1e-9);
  }
}

TEST_CASE("global ssim matches the direct formula") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = random_tensor<float>({1, 9, 9}, s, 0, 1);
    const auto y = random_tensor<float>({1, 9, 9}, s + 7, 0, 1);
    CHECK(ssim(x, y, global_mode()) == doctest::Approx(ssim_reference(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("windowed ssim is the mean over valid windows") {
  const auto x = random_tensor<float>({1, 9, 8}, 3, 0, 1);
  const auto y = random_tensor<float>({1, 9, 8}, 4, 0, 1);
  double total = 0;
  int count = 0;
  for (std::size_t r = 0; r + 7 <= 9; ++r) {
    for (std::size_t c = 0; c + 7 <= 8; ++c) {
      ImageTensor wx({1, 7, 7}), wy({1, 7, 7});
      for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) {
          wx.at(0, i, j) = x.at(0, r + i, c + j);
          wy.at(0, i, j) = y.at(0, r + i, c + j);
        }
      total += ssim_reference(wx, wy);
      ++count;
    }
  }
  CHECK(count == 6);
  CHECK(ssim(x, y) == doctest::Approx(total / count).epsilon(1e-9));
  CHECK(code_of([&] { ssim(constant(6, 0.1f), constant(6, 0.2f)); }) ==
        int(ErrorCode::kInvalidArgument));
}

TEST_CASE("error maps") {
  const auto x = random_tensor<float>({1, 8, 8}, 5, 0, 0.5);
  const auto same = error_map(x, x);
  for (float v : same.data()) CHECK(v == 0.0f);
  auto y = x;
  for (auto& v : y.data()) v += 0.1f;
  const auto tenth = error_map(y, x);
  for (float v : tenth.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-5));
  auto z = x;
  for (auto& v : z.data()) v += 0.5f;
  const auto half = error_map(z, x);
  for (float v : half.data()) CHECK(v == 1.0f);
  const auto big = random_tensor<float>({1, 8, 8}, 6, -5, 5);
  const auto wild = error_map(big, x);
  for (float v : wild.data()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("aggregation means and infinite exclusion") {
  const auto one = aggregate_report({{"ph", "random", 4, "m", 30.5, 0.9}});
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].mean_psnr == 30.5);
  CHECK(one.rows[0].mean_ssim == 0.9);
  CHECK(one.rows[0].n == 1);

  const double inf = std::numeric_limits<double>::infinity();
  const auto mixed = aggregate_report({{"ph", "random", 4, "m", 30, 0.8},
                                       {"ph", "random", 4, "m", inf, 1.0},
                                       {"ph", "random", 4, "m", 20, 0.6},
                                       {"ph", "random", 8, "m", 10, 0.5}});
  REQUIRE(mixed.rows.size() == 2);
  CHECK(mixed.rows[0].mean_psnr == 25.0);
  CHECK(mixed.rows[0].mean_ssim == doctest::Approx(0.8));
  CHECK(mixed.rows[0].n == 3);
  CHECK(mixed.rows[0].n_infinite == 1);
  CHECK(mixed.rows[1].n == 1);
  CHECK_THROWS_AS(aggregate_report({}), Error);

  // Order of results does not change the means.
  const auto reversed = aggregate_report({{"ph", "random", 4, "m", 20, 0.6},
                                          {"ph", "random", 4, "m", inf, 1.0},
                                          {"ph", "random", 4, "m", 30, 0.8}});
  CHECK(reversed.rows[0].mean_psnr == mixed.rows[0].mean_psnr);
  CHECK(reversed.rows[0].mean_ssim == mixed.rows[0].mean_ssim);
}

TEST_CASE("markdown reproduces the reference table layout") {
  const auto report = aggregate_report(fixture::table_rows());
  const std::string md = report_to_markdown(report);
  CHECK(md == fixture::kTableMarkdown);
  CHECK(md.find("| 42.48 | 0.9831 |") != std::string::npos);
  CHECK(md.find("| 34.52 | 0.8681 |") != std::string::npos);
}

TEST_CASE("markdown footnotes infinite PSNR") {
  const double inf = std::numeric_limits<double>::infinity();
  const auto report = aggregate_report({{"ph", "random", 4, "m", inf, 1.0}});
  const std::string md = report_to_markdown(report);
  CHECK(md ==
        "| Model | ph random ACC=4X PSNR [dB] | SSIM |\n"
        "|---|---:|---:|\n"
        "| m | inf* | 1.0000 |\n"
        "\n\\* 1 image(s) with infinite PSNR (exact reconstruction) excluded from the PSNR mean.\n");
}

TEST_CASE("csv emitter") {
  const auto report = aggregate_report({{"ph", "gaussian2d", 2.5, "m", 31.25, 0.75},
                                        {"ph", "gaussian2d", 2.5, "m", 32.75, 0.85}});
  CHECK(report_to_csv(report) ==
        "dataset,family,acc,model,psnr_db,ssim,n\n"
        "ph,gaussian2d,2.5,m,32.0000,0.800000,2\n");
}
