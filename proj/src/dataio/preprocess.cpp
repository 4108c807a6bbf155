#include <algorithm>
#include <cmath>
#include <tuple>

#include "mript/dataio.hpp"

namespace mript::dataio {
namespace {

void require_image(const ImageTensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(what) + " expects a [1,H,W] image, got " + dims_to_string(image.dims()));
  }
}

}  // namespace

ImageTensor center_crop(const ImageTensor& image, std::size_t height, std::size_t width) {
  require_image(image, "center_crop");
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (height == 0 || width == 0 || height > h || width > w) {
    fail(ErrorCode::kInvalidArgument,
         "crop " + std::to_string(height) + "x" + std::to_string(width) +
             " does not fit image " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t r0 = (h - height) / 2, c0 = (w - width) / 2;
  ImageTensor out({1, height, width});
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) out.at(0, r, c) = image.at(0, r0 + r, c0 + c);
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, std::size_t height, std::size_t width) {
  require_image(image, "resize_bilinear");
  if (height == 0 || width == 0) fail(ErrorCode::kInvalidArgument, "resize target must be >= 1");
  const std::size_t h = image.dim(1), w = image.dim(2);
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);

  // Half-pixel centres, clamped to the valid sample range.
  auto source = [](std::size_t i, double scale, std::size_t n) {
    const double s = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0,
                                static_cast<double>(n - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    return std::tuple{i0, i1, s - static_cast<double>(i0)};
  };

  ImageTensor out({1, height, width});
  for (std::size_t r = 0; r < height; ++r) {
    const auto [y0, y1, fy] = source(r, sy, h);
    for (std::size_t c = 0; c < width; ++c) {
      const auto [x0, x1, fx] = source(c, sx, w);
      const double top = image.at(0, y0, x0) * (1 - fx) + image.at(0, y0, x1) * fx;
      const double bottom = image.at(0, y1, x0) * (1 - fx) + image.at(0, y1, x1) * fx;
      out.at(0, r, c) = static_cast<float>(top * (1 - fy) + bottom * fy);
    }
  }
  return out;
}

ImageTensor normalize_minmax(const ImageTensor& image) {
  ImageTensor out(image.dims(), 0.0f);
  const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
  const double min = *lo, max = *hi;
  if (!std::isfinite(min) || !std::isfinite(max)) {
    fail(ErrorCode::kNonFinite, "normalize_minmax requires finite input");
  }
  if (max == min) return out;
  const double range = max - min;
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<float>((image[i] - min) / range);
  }
  return out;
}

ImageTensor preprocess(const ImageTensor& image, std::size_t size, std::size_t crop) {
  require_image(image, "preprocess");
  const std::size_t ch = std::min(crop, image.dim(1));
  const std::size_t cw = std::min(crop, image.dim(2));
  return normalize_minmax(resize_bilinear(center_crop(image, ch, cw), size, size));
}

}  // namespace mript::dataio
