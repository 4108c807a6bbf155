#pragma once

#include <string>
#include <vector>

#include "mript/tensor.hpp"

namespace mript::metrics {

using ImageTensor = Tensor<float>;

enum class SsimMode { kWindowed, kGlobal };

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  SsimMode mode = SsimMode::kWindowed;
  std::size_t window = 7;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// 10*log10(max(clean)^2 / MSE); +infinity when the images are identical.
double psnr(const ImageTensor& x, const ImageTensor& clean);
double psnr(const Tensor<double>& x, const Tensor<double>& clean);

/// Windowed mode averages the index over every valid window x window
/// position (uniform weights); global mode evaluates it once on whole-image
/// moments. Population (1/n) variances throughout.
double ssim(const ImageTensor& x, const ImageTensor& clean, const SsimParams& params = {});

/// clamp(gain * |x - clean|, 0, 1).
ImageTensor error_map(const ImageTensor& x, const ImageTensor& clean, double gain = 3.0);

struct ImageResult {
  std::string dataset;
  std::string family;
  double acceleration = 0.0;
  std::string model;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct ReportRow {
  std::string dataset;
  std::string family;
  double acceleration = 0.0;
  std::string model;
  double mean_psnr = 0.0;  ///< over finite values; +inf if none were finite
  double mean_ssim = 0.0;
  std::size_t n = 0;
  std::size_t n_infinite = 0;  ///< images left out of mean_psnr
};

struct MetricReport {
  std::vector<ReportRow> rows;
};

/// Groups by (dataset, family, acceleration, model) in first-seen order.
/// Means do not depend on the order of the inputs.
MetricReport aggregate_report(const std::vector<ImageResult>& results);

/// `dataset,family,acc,model,psnr_db,ssim,n`.
std::string report_to_csv(const MetricReport& report);

/// One row per model, one PSNR/SSIM column pair per (dataset, family,
/// acceleration) group, e.g. `| MR-IPT-level | 42.48 | 0.9831 |`.
std::string report_to_markdown(const MetricReport& report);

}  // namespace mript::metrics
