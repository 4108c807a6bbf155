#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <string>

#include "mript/degradation.hpp"

namespace mript::degradation {
namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

// Centered, orthonormal transform. `sign` is FFTW_FORWARD or FFTW_BACKWARD.
// Input is read through ifftshift, output written through fftshift.
std::vector<float> centered_dft(const std::vector<float>& interleaved, std::size_t h,
                                std::size_t w, int sign) {
  const std::size_t n = h * w;
  FftwBuffer in(n), out(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in.data, out.data,
                            sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) fail(ErrorCode::kUnsupported, "FFTW could not plan the transform");

  // ifftshift: shifted[r][c] = x[(r + h/2) % h][(c + w/2) % w]
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t sr = (r + h / 2) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t sc = (c + w / 2) % w;
      const std::size_t src = 2 * (sr * w + sc);
      in.data[r * w + c][0] = interleaved[src];
      in.data[r * w + c][1] = interleaved[src + 1];
    }
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<float> result(2 * n);
  // fftshift: result[(r + h/2) % h][(c + w/2) % w] = y[r][c]
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t dr = (r + h / 2) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t dc = (c + w / 2) % w;
      const std::size_t dst = 2 * (dr * w + dc);
      result[dst] = static_cast<float>(out.data[r * w + c][0] * scale);
      result[dst + 1] = static_cast<float>(out.data[r * w + c][1] * scale);
    }
  }
  return result;
}

}  // namespace

KSpace::KSpace(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(2 * height * width, 0.0f) {}

KSpace::KSpace(std::size_t height, std::size_t width, std::vector<float> interleaved)
    : height_(height), width_(width), data_(std::move(interleaved)) {
  if (data_.size() != 2 * height * width) {
    fail(ErrorCode::kDimensionMismatch, "k-space data length does not match dims");
  }
}

double KSpace::energy() const {
  double e = 0;
  for (float v : data_) e += static_cast<double>(v) * v;
  return e;
}

KSpace fft2c(const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    fail(ErrorCode::kDimensionMismatch,
         "fft2c expects a [1,H,W] image, got " + dims_to_string(image.dims()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<float> interleaved(2 * h * w, 0.0f);
  for (std::size_t i = 0; i < h * w; ++i) interleaved[2 * i] = image[i];
  return KSpace(h, w, centered_dft(interleaved, h, w, FFTW_FORWARD));
}

KSpace fft2c(const ComplexImage& image) {
  return KSpace(image.height(), image.width(),
                centered_dft(image.interleaved(), image.height(), image.width(), FFTW_FORWARD));
}

ComplexImage ifft2c(const KSpace& kspace) {
  return ComplexImage(kspace.height(), kspace.width(),
                      centered_dft(kspace.interleaved(), kspace.height(), kspace.width(),
                                   FFTW_BACKWARD));
}

KSpace apply_mask(const KSpace& kspace, const Mask& mask) {
  if (mask.height() != kspace.height() || mask.width() != kspace.width()) {
    fail(ErrorCode::kDimensionMismatch,
         "mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
             " does not match k-space " + std::to_string(kspace.height()) + "x" +
             std::to_string(kspace.width()));
  }
  KSpace out = kspace;
  for (std::size_t r = 0; r < kspace.height(); ++r)
    for (std::size_t c = 0; c < kspace.width(); ++c)
      if (!mask.at(r, c)) out.set(r, c, {0.0f, 0.0f});
  return out;
}

Tensor<float> degrade(const Tensor<float>& image, const Mask& mask) {
  if (image.rank() != 3 || image.dim(0) != 1 || image.dim(1) != mask.height() ||
      image.dim(2) != mask.width()) {
    fail(ErrorCode::kDimensionMismatch,
         "image " + dims_to_string(image.dims()) + " does not match mask " +
             std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
  }
  const ComplexImage recon = ifft2c(apply_mask(fft2c(image), mask));
  Tensor<float> out(image.dims());
  const auto& z = recon.interleaved();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::hypot(static_cast<double>(z[2 * i]),
                                           static_cast<double>(z[2 * i + 1])));
  }
  return out;
}

}  // namespace mript::degradation
