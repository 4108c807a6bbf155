#include <cmath>
#include <random>

#include "mript/dataio.hpp"

namespace mript::dataio {
namespace {

struct Ellipse {
  double cx, cy, a, b, angle, intensity;
};

void paint(ImageTensor& img, const Ellipse& e) {
  const std::size_t n = img.dim(1);
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(n) - 1.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(n) - 1.0;
      const double u = (x - e.cx) * ca + (y - e.cy) * sa;
      const double v = -(x - e.cx) * sa + (y - e.cy) * ca;
      if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) {
        img.at(0, r, c) += static_cast<float>(e.intensity);
      }
    }
  }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ImageTensor generate_phantom(const PhantomSpec& spec) {
  if (spec.image_size < 16) fail(ErrorCode::kInvalidArgument, "phantom size must be >= 16");
  if (spec.min_ellipses > spec.max_ellipses || spec.min_intensity > spec.max_intensity) {
    fail(ErrorCode::kInvalidArgument, "phantom ranges are inverted");
  }
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const std::size_t n = spec.image_size;
  ImageTensor img({1, n, n}, 0.0f);

  // Faint smooth background: a few low-frequency plane waves.
  for (int k = 0; k < 3; ++k) {
    const double fx = uniform(-1.5, 1.5) * M_PI, fy = uniform(-1.5, 1.5) * M_PI;
    const double phase = uniform(0.0, 2.0 * M_PI), amp = uniform(0.01, 0.04);
    for (std::size_t r = 0; r < n; ++r) {
      const double y = (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(n) - 1.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double x = (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(n) - 1.0;
        img.at(0, r, c) += static_cast<float>(amp * (1.0 + std::cos(fx * x + fy * y + phase)));
      }
    }
  }

  paint(img, {uniform(-0.05, 0.05), uniform(-0.05, 0.05), uniform(0.65, 0.85),
              uniform(0.75, 0.92), uniform(-0.3, 0.3), 1.0});
  const std::size_t count = std::uniform_int_distribution<std::size_t>(
      spec.min_ellipses, spec.max_ellipses)(rng);
  for (std::size_t i = 0; i < count; ++i) {
    const double radius = uniform(0.0, 0.5), theta = uniform(0.0, 2.0 * M_PI);
    paint(img, {radius * std::cos(theta), radius * std::sin(theta), uniform(0.06, 0.35),
                uniform(0.06, 0.35), uniform(0.0, M_PI),
                uniform(spec.min_intensity, spec.max_intensity)});
  }
  return normalize_minmax(img);
}

std::vector<ImageTensor> generate_phantoms(std::size_t count, std::size_t size,
                                           std::uint64_t seed) {
  std::vector<ImageTensor> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    PhantomSpec spec;
    spec.seed = mix_seed(seed, i);
    spec.image_size = size;
    out.push_back(generate_phantom(spec));
  }
  return out;
}

}  // namespace mript::dataio
