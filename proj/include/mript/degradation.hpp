#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mript/tensor.hpp"

namespace mript::degradation {

enum class MaskFamily {
  kCartesianRandom,
  kCartesianEquispaced,
  kGaussian1D,
  kGaussian2D,
};

inline constexpr MaskFamily kAllFamilies[] = {
    MaskFamily::kCartesianRandom, MaskFamily::kCartesianEquispaced,
    MaskFamily::kGaussian1D, MaskFamily::kGaussian2D};

/// Canonical names: "random", "equispaced", "gaussian1d", "gaussian2d".
std::string_view family_name(MaskFamily family);
/// Accepts canonical names and a few long-form aliases
/// (e.g. "cartesian_random"). Throws kInvalidArgument otherwise.
MaskFamily parse_family(std::string_view name);

bool is_cartesian(MaskFamily family);
bool is_column_mask(MaskFamily family);

struct MaskSpec {
  MaskFamily family = MaskFamily::kCartesianRandom;
  double acceleration = 4.0;
  /// Fraction of fully sampled central columns. Unset means the family
  /// default: 0.32/acceleration for Cartesian families, 0 for Gaussian.
  std::optional<double> center_fraction;
  double sigma_fraction = 1.0 / 6.0;
  std::uint64_t seed = 0;
  /// First sampled position among the non-central columns (equispaced only).
  std::optional<std::int64_t> offset;

  double resolved_center_fraction() const;
};

/// Realised k-space sampling pattern. Column masks store one flag per column
/// and broadcast it over rows; point masks store the full H x W raster.
class Mask {
 public:
  /// Column mask (size == width).
  static Mask columns(std::size_t height, std::size_t width, std::vector<std::uint8_t> kept);
  /// Point mask (size == height * width, row-major).
  static Mask points(std::size_t height, std::size_t width, std::vector<std::uint8_t> kept);
  /// Interprets a [1,H,W] or [H,W] raster of 0/1 values; stored as a column
  /// mask when every column is constant.
  static Mask from_raster(const Tensor<float>& raster);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool is_column_mask() const noexcept { return column_mask_; }
  const std::vector<std::uint8_t>& kept() const noexcept { return kept_; }

  bool at(std::size_t row, std::size_t col) const {
    return column_mask_ ? kept_[col] != 0 : kept_[row * width_ + col] != 0;
  }
  /// Number of kept columns (column mask) or points (point mask).
  std::size_t kept_count() const;

  /// [1,H,W] raster with values 0.0 / 1.0.
  Tensor<float> to_raster() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Mask(std::size_t h, std::size_t w, bool column_mask, std::vector<std::uint8_t> kept);

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  bool column_mask_ = true;
  std::vector<std::uint8_t> kept_;
};

/// Kept-sample target used by make_mask for a given family and dims.
std::size_t target_sample_count(const MaskSpec& spec, std::size_t height, std::size_t width);

Mask make_mask(const MaskSpec& spec, std::size_t height, std::size_t width);

/// H*W / kept points, or W / kept columns for column masks.
double achieved_acceleration(const Mask& mask);

/// Centered k-space with interleaved (re, im) f32 pairs.
class KSpace {
 public:
  KSpace(std::size_t height, std::size_t width);
  KSpace(std::size_t height, std::size_t width, std::vector<float> interleaved);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<float>& interleaved() const noexcept { return data_; }
  std::vector<float>& interleaved() noexcept { return data_; }

  std::complex<float> at(std::size_t row, std::size_t col) const {
    const std::size_t i = 2 * (row * width_ + col);
    return {data_[i], data_[i + 1]};
  }
  void set(std::size_t row, std::size_t col, std::complex<float> v) {
    const std::size_t i = 2 * (row * width_ + col);
    data_[i] = v.real();
    data_[i + 1] = v.imag();
  }

  double energy() const;

 private:
  std::size_t height_, width_;
  std::vector<float> data_;
};

/// Complex image on an H x W grid, interleaved like KSpace.
using ComplexImage = KSpace;

/// Orthonormal centered 2-D DFT of a real [1,H,W] image; DC lands at
/// (H/2, W/2).
KSpace fft2c(const Tensor<float>& image);
KSpace fft2c(const ComplexImage& image);
ComplexImage ifft2c(const KSpace& kspace);

KSpace apply_mask(const KSpace& kspace, const Mask& mask);

/// |ifft2c(mask * fft2c(image))| as a [1,H,W] image.
Tensor<float> degrade(const Tensor<float>& image, const Mask& mask);

}  // namespace mript::degradation
