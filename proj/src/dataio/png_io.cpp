#include <png.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "mript/dataio.hpp"
#include "mript/fileutil.hpp"

namespace mript::dataio {

void save_png(const std::filesystem::path& path, const ImageTensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    fail(ErrorCode::kDimensionMismatch,
         "save_png expects a [1,H,W] image, got " + dims_to_string(image.dims()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> pixels(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, path.string() + ": " + img.message);
  }
  std::vector<std::uint8_t> encoded(size);
  if (!png_image_write_to_memory(&img, encoded.data(), &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, path.string() + ": " + img.message);
  }
  encoded.resize(size);
  write_file_atomic(path, encoded);
}

ImageTensor load_png(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    fail(ErrorCode::kIo, path.string() + ": " + img.message);
  }
  // Sixteen-bit files are read as linear 16-bit gray, eight-bit as 8-bit gray.
  const bool sixteen = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  img.format = sixteen ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  const std::size_t h = img.height, w = img.width;
  ImageTensor out({1, h, w});
  if (sixteen) {
    std::vector<std::uint16_t> buf(h * w);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
      fail(ErrorCode::kIo, path.string() + ": " + img.message);
    }
    for (std::size_t i = 0; i < h * w; ++i) out[i] = static_cast<float>(buf[i]) / 65535.0f;
  } else {
    std::vector<std::uint8_t> buf(h * w);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
      fail(ErrorCode::kIo, path.string() + ": " + img.message);
    }
    for (std::size_t i = 0; i < h * w; ++i) out[i] = static_cast<float>(buf[i]) / 255.0f;
  }
  return out;
}

ImageTensor load_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return load_png(path);
  ImageTensor t = load_raster(path);
  if (t.rank() == 2) t.reshape({1, t.dim(0), t.dim(1)});
  if (t.rank() != 3 || t.dim(0) != 1) {
    fail(ErrorCode::kDimensionMismatch,
         path.string() + ": expected a single-channel image, got " + dims_to_string(t.dims()));
  }
  return t;
}

}  // namespace mript::dataio
