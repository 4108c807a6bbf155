#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mript/dataio.hpp"
#include "mript/fileutil.hpp"

namespace mript::dataio {
namespace {

constexpr char kMagic[4] = {'M', 'R', 'I', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_raster(const Tensor<float>& tensor) {
  if (tensor.rank() == 0 || tensor.rank() > 255) {
    fail(ErrorCode::kInvalidArgument, "raster rank must be in [1,255]");
  }
  std::vector<std::uint8_t> out;
  out.reserve(7 + 4 * tensor.rank() + 4 * tensor.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kRasterVersion);
  out.push_back(kRasterDtypeF32);
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  for (std::size_t d : tensor.dims()) {
    if (d > 0xFFFFFFFFu) fail(ErrorCode::kInvalidArgument, "raster dim exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor<float> decode_raster(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) fail(ErrorCode::kTruncated, "raster shorter than its magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "raster magic is not \"MRIT\"");
  }
  if (bytes.size() < 7) fail(ErrorCode::kTruncated, "raster header truncated");
  if (bytes[4] != kRasterVersion) {
    fail(ErrorCode::kVersionMismatch,
         "raster version " + std::to_string(bytes[4]) + " (expected 1)");
  }
  if (bytes[5] != kRasterDtypeF32) {
    fail(ErrorCode::kUnsupported, "raster dtype " + std::to_string(bytes[5]) + " unsupported");
  }
  const std::size_t ndim = bytes[6];
  if (ndim == 0) fail(ErrorCode::kCorruptHeader, "raster has zero dimensions");
  if (bytes.size() < 7 + 4 * ndim) fail(ErrorCode::kTruncated, "raster dims truncated");
  Dims dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes.data() + 7 + 4 * i);
    if (dims[i] == 0) fail(ErrorCode::kCorruptHeader, "raster has a zero dimension");
  }
  const std::size_t count = element_count(dims);
  const std::size_t offset = 7 + 4 * ndim;
  if (bytes.size() - offset < 4 * count) {
    fail(ErrorCode::kTruncated, "raster payload has " + std::to_string(bytes.size() - offset) +
                                    " bytes, expected " + std::to_string(4 * count));
  }
  if (bytes.size() - offset > 4 * count) {
    fail(ErrorCode::kCorruptHeader, "raster has trailing bytes after the payload");
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
  }
  return Tensor<float>(std::move(dims), std::move(data));
}

void save_raster(const std::filesystem::path& path, const Tensor<float>& tensor) {
  write_file_atomic(path, encode_raster(tensor));
}

Tensor<float> load_raster(const std::filesystem::path& path) {
  try {
    return decode_raster(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace mript::dataio
