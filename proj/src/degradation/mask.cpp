#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mript/degradation.hpp"

namespace mript::degradation {
namespace {

constexpr std::size_t kMinMaskDim = 16;

std::size_t round_count(double x) {
  // std::llround rounds half away from zero.
  return static_cast<std::size_t>(std::llround(x));
}

/// Central block [start, start + n) containing index dim/2.
std::size_t center_start(std::size_t dim, std::size_t n) { return (dim - n + 1) / 2; }

double uniform_open(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = dist(rng);
  return u > 0 ? u : std::numeric_limits<double>::min();
}

/// Weighted sampling without replacement of `count` items from `candidates`
/// (Efraimidis-Spirakis keys: the top-`count` of log(u)/w are distributed as
/// sequential draws with probability proportional to w).
std::vector<std::size_t> weighted_sample(const std::vector<std::size_t>& candidates,
                                         const std::vector<double>& weights,
                                         std::size_t count, std::mt19937_64& rng) {
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double w = std::max(weights[i], 1e-300);
    keys.emplace_back(std::log(uniform_open(rng)) / w, candidates[i]);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count),
                    keys.end(), [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(keys[i].second);
  return out;
}

std::vector<std::size_t> unkept(const std::vector<std::uint8_t>& kept) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (!kept[i]) out.push_back(i);
  return out;
}

void validate(const MaskSpec& spec, std::size_t height, std::size_t width) {
  if (height < kMinMaskDim || width < kMinMaskDim) {
    fail(ErrorCode::kInvalidArgument,
         "mask dims must be >= 16 in each axis, got " + std::to_string(height) + "x" +
             std::to_string(width));
  }
  if (!(spec.acceleration > 1.0) || !std::isfinite(spec.acceleration)) {
    fail(ErrorCode::kInvalidArgument,
         "acceleration must be a finite value > 1, got " + std::to_string(spec.acceleration));
  }
  const double cf = spec.resolved_center_fraction();
  if (!(cf >= 0.0 && cf < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "center_fraction must lie in [0,1)");
  }
  if (!(spec.sigma_fraction > 0.0) || !std::isfinite(spec.sigma_fraction)) {
    fail(ErrorCode::kInvalidArgument, "sigma_fraction must be > 0");
  }
  if (spec.offset && *spec.offset < 0) {
    fail(ErrorCode::kInvalidArgument, "equispaced offset must be >= 0");
  }
}

Mask make_column_mask(const MaskSpec& spec, std::size_t height, std::size_t width) {
  const std::size_t target = target_sample_count(spec, height, width);
  const std::size_t n_center = round_count(spec.resolved_center_fraction() * width);
  if (target >= width) {
    fail(ErrorCode::kInfeasible,
         "acceleration " + std::to_string(spec.acceleration) +
             " keeps every column; no undersampling");
  }
  if (target < n_center + 1) {
    fail(ErrorCode::kInfeasible,
         "target of " + std::to_string(target) + " columns cannot hold " +
             std::to_string(n_center) + " center columns plus one sampled column");
  }

  std::vector<std::uint8_t> kept(width, 0);
  const std::size_t start = center_start(width, n_center);
  for (std::size_t c = start; c < start + n_center; ++c) kept[c] = 1;
  kept[width / 2] = 1;
  std::size_t have = static_cast<std::size_t>(std::count(kept.begin(), kept.end(), 1));
  const std::size_t need = target - have;
  std::vector<std::size_t> remaining = unkept(kept);
  std::mt19937_64 rng(spec.seed);

  switch (spec.family) {
    case MaskFamily::kCartesianRandom: {
      // Partial Fisher-Yates: the first `need` entries are a uniform draw.
      for (std::size_t i = 0; i < need; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, remaining.size() - 1);
        std::swap(remaining[i], remaining[pick(rng)]);
        kept[remaining[i]] = 1;
      }
      break;
    }
    case MaskFamily::kCartesianEquispaced: {
      // Fractional stride M/need over the non-central columns yields exactly
      // `need` lines spaced floor/ceil(M/need) apart.
      const std::size_t m = remaining.size();
      const std::size_t offset = static_cast<std::size_t>(spec.offset.value_or(0)) % m;
      for (std::size_t i = 0; i < need; ++i) {
        const std::size_t pos = (offset + (i * m) / need) % m;
        kept[remaining[pos]] = 1;
      }
      break;
    }
    case MaskFamily::kGaussian1D: {
      const double sigma = spec.sigma_fraction * static_cast<double>(width);
      std::vector<double> weights;
      weights.reserve(remaining.size());
      for (std::size_t c : remaining) {
        const double d = static_cast<double>(c) - static_cast<double>(width / 2);
        weights.push_back(std::exp(-d * d / (2 * sigma * sigma)));
      }
      for (std::size_t c : weighted_sample(remaining, weights, need, rng)) kept[c] = 1;
      break;
    }
    case MaskFamily::kGaussian2D:
      fail(ErrorCode::kInvalidArgument, "gaussian2d is not a column family");
  }
  return Mask::columns(height, width, std::move(kept));
}

Mask make_point_mask(const MaskSpec& spec, std::size_t height, std::size_t width) {
  const std::size_t total = height * width;
  const std::size_t target = target_sample_count(spec, height, width);
  const double cf = spec.resolved_center_fraction();
  const std::size_t nh = round_count(cf * height), nw = round_count(cf * width);
  if (target >= total) {
    fail(ErrorCode::kInfeasible,
         "acceleration " + std::to_string(spec.acceleration) + " keeps every point");
  }
  if (target < nh * nw + 1) {
    fail(ErrorCode::kInfeasible, "target point count cannot hold the central block");
  }
  std::vector<std::uint8_t> kept(total, 0);
  const std::size_t r0 = center_start(height, nh), c0 = center_start(width, nw);
  for (std::size_t r = r0; r < r0 + nh; ++r)
    for (std::size_t c = c0; c < c0 + nw; ++c) kept[r * width + c] = 1;
  kept[(height / 2) * width + width / 2] = 1;
  const std::size_t have = static_cast<std::size_t>(std::count(kept.begin(), kept.end(), 1));
  const std::size_t need = target - have;

  const double sh = spec.sigma_fraction * static_cast<double>(height);
  const double sw = spec.sigma_fraction * static_cast<double>(width);
  std::vector<std::size_t> remaining = unkept(kept);
  std::vector<double> weights;
  weights.reserve(remaining.size());
  for (std::size_t idx : remaining) {
    const double dr = static_cast<double>(idx / width) - static_cast<double>(height / 2);
    const double dc = static_cast<double>(idx % width) - static_cast<double>(width / 2);
    weights.push_back(std::exp(-dr * dr / (2 * sh * sh) - dc * dc / (2 * sw * sw)));
  }
  std::mt19937_64 rng(spec.seed);
  for (std::size_t idx : weighted_sample(remaining, weights, need, rng)) kept[idx] = 1;
  return Mask::points(height, width, std::move(kept));
}

}  // namespace

std::string_view family_name(MaskFamily family) {
  switch (family) {
    case MaskFamily::kCartesianRandom: return "random";
    case MaskFamily::kCartesianEquispaced: return "equispaced";
    case MaskFamily::kGaussian1D: return "gaussian1d";
    case MaskFamily::kGaussian2D: return "gaussian2d";
  }
  return "unknown";
}

MaskFamily parse_family(std::string_view name) {
  if (name == "random" || name == "cartesian_random") return MaskFamily::kCartesianRandom;
  if (name == "equispaced" || name == "cartesian_equispaced")
    return MaskFamily::kCartesianEquispaced;
  if (name == "gaussian1d" || name == "gaussian_1d") return MaskFamily::kGaussian1D;
  if (name == "gaussian2d" || name == "gaussian_2d") return MaskFamily::kGaussian2D;
  fail(ErrorCode::kInvalidArgument, "unknown mask family '" + std::string(name) + "'");
}

bool is_cartesian(MaskFamily family) {
  return family == MaskFamily::kCartesianRandom || family == MaskFamily::kCartesianEquispaced;
}

bool is_column_mask(MaskFamily family) { return family != MaskFamily::kGaussian2D; }

double MaskSpec::resolved_center_fraction() const {
  if (center_fraction) return *center_fraction;
  return is_cartesian(family) ? 0.32 / acceleration : 0.0;
}

Mask::Mask(std::size_t h, std::size_t w, bool column_mask, std::vector<std::uint8_t> kept)
    : height_(h), width_(w), column_mask_(column_mask), kept_(std::move(kept)) {
  const std::size_t expected = column_mask ? w : h * w;
  if (h == 0 || w == 0 || kept_.size() != expected) {
    fail(ErrorCode::kDimensionMismatch, "mask raster size does not match its dims");
  }
  for (auto& k : kept_) k = k ? 1 : 0;
  if (!at(h / 2, w / 2)) {
    fail(ErrorCode::kInvalidArgument, "mask must keep the DC sample at (H/2, W/2)");
  }
}

Mask Mask::columns(std::size_t height, std::size_t width, std::vector<std::uint8_t> kept) {
  return Mask(height, width, true, std::move(kept));
}

Mask Mask::points(std::size_t height, std::size_t width, std::vector<std::uint8_t> kept) {
  return Mask(height, width, false, std::move(kept));
}

Mask Mask::from_raster(const Tensor<float>& raster) {
  std::size_t h = 0, w = 0;
  if (raster.rank() == 3 && raster.dim(0) == 1) {
    h = raster.dim(1);
    w = raster.dim(2);
  } else if (raster.rank() == 2) {
    h = raster.dim(0);
    w = raster.dim(1);
  } else {
    fail(ErrorCode::kDimensionMismatch,
         "mask raster must be [1,H,W] or [H,W], got " + dims_to_string(raster.dims()));
  }
  std::vector<std::uint8_t> kept(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const float v = raster[i];
    if (v != 0.0f && v != 1.0f) {
      fail(ErrorCode::kInvalidArgument, "mask raster values must be 0 or 1");
    }
    kept[i] = v == 1.0f;
  }
  bool column_constant = true;
  for (std::size_t r = 1; r < h && column_constant; ++r)
    for (std::size_t c = 0; c < w; ++c)
      if (kept[r * w + c] != kept[c]) {
        column_constant = false;
        break;
      }
  if (column_constant) {
    kept.resize(w);
    return columns(h, w, std::move(kept));
  }
  return points(h, w, std::move(kept));
}

std::size_t Mask::kept_count() const {
  return static_cast<std::size_t>(std::count(kept_.begin(), kept_.end(), 1));
}

Tensor<float> Mask::to_raster() const {
  Tensor<float> out({1, height_, width_});
  for (std::size_t r = 0; r < height_; ++r)
    for (std::size_t c = 0; c < width_; ++c) out.at(0, r, c) = at(r, c) ? 1.0f : 0.0f;
  return out;
}

std::size_t target_sample_count(const MaskSpec& spec, std::size_t height, std::size_t width) {
  const double total = is_column_mask(spec.family) ? static_cast<double>(width)
                                                   : static_cast<double>(height * width);
  return round_count(total / spec.acceleration);
}

Mask make_mask(const MaskSpec& spec, std::size_t height, std::size_t width) {
  validate(spec, height, width);
  if (is_column_mask(spec.family)) return make_column_mask(spec, height, width);
  return make_point_mask(spec, height, width);
}

double achieved_acceleration(const Mask& mask) {
  const std::size_t kept = mask.kept_count();
  if (kept == 0) fail(ErrorCode::kInvalidArgument, "mask keeps no samples");
  const double total = mask.is_column_mask()
                           ? static_cast<double>(mask.width())
                           : static_cast<double>(mask.height() * mask.width());
  return total / static_cast<double>(kept);
}

}  // namespace mript::degradation
