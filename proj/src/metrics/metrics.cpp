#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mript/metrics.hpp"
#include "mript/task.hpp"

namespace mript::metrics {
namespace {

void require_same(const ImageTensor& x, const ImageTensor& clean, const char* what) {
  if (x.dims() != clean.dims()) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + ": dims " + dims_to_string(x.dims()) +
                                            " vs " + dims_to_string(clean.dims()));
  }
}

struct Moments {
  double mx, my, vx, vy, cov;
};

double ssim_index(const Moments& m, double c1, double c2) {
  return ((2 * m.mx * m.my + c1) * (2 * m.cov + c2)) /
         ((m.mx * m.mx + m.my * m.my + c1) * (m.vx + m.vy + c2));
}

// Mean that does not depend on input order and is exact when all values
// are equal.
double stable_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double base = v.front();
  double sum = 0.0;
  for (double x : v) sum += x - base;
  return base + sum / static_cast<double>(v.size());
}

// Integral image with one row/column of zero padding.
std::vector<double> integral(const std::vector<double>& v, std::size_t h, std::size_t w) {
  std::vector<double> s((h + 1) * (w + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row = 0;
    for (std::size_t c = 0; c < w; ++c) {
      row += v[r * w + c];
      s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + row;
    }
  }
  return s;
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

template <typename T>
double psnr_impl(const Tensor<T>& x, const Tensor<T>& clean) {
  if (x.dims() != clean.dims()) {
    fail(ErrorCode::kDimensionMismatch,
         "psnr: dims " + dims_to_string(x.dims()) + " vs " + dims_to_string(clean.dims()));
  }
  if (clean.empty()) fail(ErrorCode::kInvalidArgument, "psnr of empty images");
  double peak = -std::numeric_limits<double>::infinity(), se = 0.0;
  bool any_nonzero = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    peak = std::max(peak, static_cast<double>(clean[i]));
    any_nonzero = any_nonzero || clean[i] != T(0);
    const double d = static_cast<double>(x[i]) - static_cast<double>(clean[i]);
    se += d * d;
  }
  if (!any_nonzero) fail(ErrorCode::kInvalidArgument, "psnr reference image is all zero");
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const ImageTensor& x, const ImageTensor& clean) { return psnr_impl(x, clean); }

double psnr(const Tensor<double>& x, const Tensor<double>& clean) { return psnr_impl(x, clean); }

double ssim(const ImageTensor& x, const ImageTensor& clean, const SsimParams& p) {
  require_same(x, clean, "ssim");
  if (!(p.c1() > 0) || !(p.c2() > 0)) fail(ErrorCode::kInvalidArgument, "ssim constants must be > 0");
  if (x.rank() < 2) fail(ErrorCode::kDimensionMismatch, "ssim expects an image");
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  const std::size_t planes = x.size() / (h * w);

  if (p.mode == SsimMode::kGlobal) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += clean[i];
    }
    Moments m{sx / n, sy / n, 0, 0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = x[i] - m.mx, dy = clean[i] - m.my;
      m.vx += dx * dx;
      m.vy += dy * dy;
      m.cov += dx * dy;
    }
    m.vx /= n;
    m.vy /= n;
    m.cov /= n;
    return ssim_index(m, p.c1(), p.c2());
  }

  const std::size_t k = p.window;
  if (k == 0 || h < k || w < k) {
    fail(ErrorCode::kInvalidArgument, "image " + std::to_string(h) + "x" + std::to_string(w) +
                                          " is smaller than the ssim window");
  }
  const double n = static_cast<double>(k * k);
  std::vector<double> total;
  for (std::size_t plane = 0; plane < planes; ++plane) {
    std::vector<double> vx(h * w), vy(h * w), vxx(h * w), vyy(h * w), vxy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      const double a = x[plane * h * w + i], b = clean[plane * h * w + i];
      vx[i] = a;
      vy[i] = b;
      vxx[i] = a * a;
      vyy[i] = b * b;
      vxy[i] = a * b;
    }
    const auto ix = integral(vx, h, w), iy = integral(vy, h, w), ixx = integral(vxx, h, w),
               iyy = integral(vyy, h, w), ixy = integral(vxy, h, w);
    const std::size_t stride = w + 1;
    auto box = [&](const std::vector<double>& s, std::size_t r, std::size_t c) {
      return s[(r + k) * stride + c + k] - s[r * stride + c + k] - s[(r + k) * stride + c] +
             s[r * stride + c];
    };
    for (std::size_t r = 0; r + k <= h; ++r)
      for (std::size_t c = 0; c + k <= w; ++c) {
        Moments m;
        m.mx = box(ix, r, c) / n;
        m.my = box(iy, r, c) / n;
        m.vx = box(ixx, r, c) / n - m.mx * m.mx;
        m.vy = box(iyy, r, c) / n - m.my * m.my;
        m.cov = box(ixy, r, c) / n - m.mx * m.my;
        total.push_back(ssim_index(m, p.c1(), p.c2()));
      }
  }
  return stable_mean(std::move(total));
}

ImageTensor error_map(const ImageTensor& x, const ImageTensor& clean, double gain) {
  require_same(x, clean, "error_map");
  ImageTensor out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = gain * std::abs(static_cast<double>(x[i]) - static_cast<double>(clean[i]));
    out[i] = static_cast<float>(std::clamp(d, 0.0, 1.0));
  }
  return out;
}

MetricReport aggregate_report(const std::vector<ImageResult>& results) {
  if (results.empty()) fail(ErrorCode::kInvalidArgument, "cannot aggregate an empty result set");
  struct Group {
    ReportRow row;
    std::vector<double> psnr, ssim;
  };
  std::vector<Group> groups;
  for (const auto& r : results) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.row.dataset == r.dataset && g.row.family == r.family &&
             g.row.acceleration == r.acceleration && g.row.model == r.model;
    });
    if (it == groups.end()) {
      groups.push_back({{r.dataset, r.family, r.acceleration, r.model}, {}, {}});
      it = groups.end() - 1;
    }
    if (std::isinf(r.psnr) && r.psnr > 0) {
      ++it->row.n_infinite;
    } else {
      it->psnr.push_back(r.psnr);
    }
    it->ssim.push_back(r.ssim);
    ++it->row.n;
  }
  MetricReport report;
  for (auto& g : groups) {
    g.row.mean_psnr = g.psnr.empty() ? std::numeric_limits<double>::infinity()
                                     : stable_mean(g.psnr);
    g.row.mean_ssim = stable_mean(g.ssim);
    report.rows.push_back(std::move(g.row));
  }
  return report;
}

std::string report_to_csv(const MetricReport& report) {
  std::string out = "dataset,family,acc,model,psnr_db,ssim,n\n";
  for (const auto& r : report.rows) {
    out += r.dataset + "," + r.family + "," + model::format_ratio(r.acceleration) + "," + r.model +
           "," + fixed(r.mean_psnr, 4) + "," + fixed(r.mean_ssim, 6) + "," + std::to_string(r.n) +
           "\n";
  }
  return out;
}

std::string report_to_markdown(const MetricReport& report) {
  struct Column {
    std::string dataset, family;
    double acc;
  };
  std::vector<Column> columns;
  std::vector<std::string> models;
  for (const auto& r : report.rows) {
    if (std::none_of(columns.begin(), columns.end(), [&](const Column& c) {
          return c.dataset == r.dataset && c.family == r.family && c.acc == r.acceleration;
        })) {
      columns.push_back({r.dataset, r.family, r.acceleration});
    }
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }

  std::string out = "| Model |";
  std::string rule = "|---|";
  for (const auto& c : columns) {
    out += " " + c.dataset + " " + c.family + " ACC=" + model::format_ratio(c.acc) +
           "X PSNR [dB] | SSIM |";
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  std::size_t excluded = 0;
  for (const auto& m : models) {
    out += "| " + m + " |";
    for (const auto& c : columns) {
      auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ReportRow& r) {
        return r.model == m && r.dataset == c.dataset && r.family == c.family &&
               r.acceleration == c.acc;
      });
      if (it == report.rows.end()) {
        out += " - | - |";
        continue;
      }
      excluded += it->n_infinite;
      out += " " + fixed(it->mean_psnr, 2) + (it->n_infinite > 0 ? "*" : "") + " | " +
             fixed(it->mean_ssim, 4) + " |";
    }
    out += "\n";
  }
  if (excluded > 0) {
    out += "\n\\* " + std::to_string(excluded) +
           " image(s) with infinite PSNR (exact reconstruction) excluded from the PSNR mean.\n";
  }
  return out;
}

}  // namespace mript::metrics
