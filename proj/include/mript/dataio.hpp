#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mript/degradation.hpp"
#include "mript/task.hpp"
#include "mript/tensor.hpp"

namespace mript::dataio {

/// Single-channel image, [1,H,W], values in [0,1] once normalised.
using ImageTensor = Tensor<float>;

// ---- MRIT raster format ----------------------------------------------------
//
//   "MRIT" | u8 version (1) | u8 dtype (1 = f32) | u8 ndim |
//   ndim x u32 dims (LE) | row-major f32 payload (LE)

inline constexpr std::uint8_t kRasterVersion = 1;
inline constexpr std::uint8_t kRasterDtypeF32 = 1;

std::vector<std::uint8_t> encode_raster(const Tensor<float>& tensor);
Tensor<float> decode_raster(const std::vector<std::uint8_t>& bytes);

void save_raster(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> load_raster(const std::filesystem::path& path);

// ---- PNG -------------------------------------------------------------------

/// Writes an 8-bit grayscale PNG; values are clamped to [0,1] and scaled by 255.
void save_png(const std::filesystem::path& path, const ImageTensor& image);
/// Reads 8- or 16-bit PNG (grayscale or colour, colour converted to gray) as
/// a [1,H,W] image scaled by 1/255 or 1/65535.
ImageTensor load_png(const std::filesystem::path& path);

/// Loads .mrit or .png by extension.
ImageTensor load_image(const std::filesystem::path& path);

// ---- preprocessing ---------------------------------------------------------

ImageTensor center_crop(const ImageTensor& image, std::size_t height, std::size_t width);
ImageTensor resize_bilinear(const ImageTensor& image, std::size_t height, std::size_t width);
/// (x - min) / (max - min); constant images map to all zeros.
ImageTensor normalize_minmax(const ImageTensor& image);

/// center_crop(min(crop, H), min(crop, W)) -> resize(size, size) -> normalize.
ImageTensor preprocess(const ImageTensor& image, std::size_t size, std::size_t crop = 320);

// ---- manifests -------------------------------------------------------------

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestRecord {
  std::string path;
  Split split = Split::kTrain;
};

/// CSV with header `path,split`, LF line endings. Relative paths are
/// resolved against the manifest's directory when loading images.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestRecord> records);

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string to_csv() const;

  const std::vector<ManifestRecord>& records() const noexcept { return records_; }
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

  std::vector<std::filesystem::path> paths(Split split) const;

 private:
  std::vector<ManifestRecord> records_;
  std::filesystem::path base_dir_;
};

/// Loads and preprocesses every image of `split`; errors carry the path.
std::vector<ImageTensor> load_split(const Manifest& manifest, Split split, std::size_t size);

// ---- phantoms ---------------------------------------------------------------

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::size_t image_size = 64;
  std::size_t min_ellipses = 4;
  std::size_t max_ellipses = 8;
  double min_intensity = -0.4;
  double max_intensity = 0.6;
};

/// Ellipse phantom: one bright outer ellipse, 4-8 random inner ellipses, a
/// faint smooth background, normalised to [0,1]. Pure function of `spec`.
ImageTensor generate_phantom(const PhantomSpec& spec);

/// `count` phantoms with per-image seeds derived from `seed`.
std::vector<ImageTensor> generate_phantoms(std::size_t count, std::size_t size,
                                           std::uint64_t seed);

// ---- sample stream ----------------------------------------------------------

struct Sample {
  ImageTensor input;
  ImageTensor target;
  model::TaskLabel label;
};

/// Deterministic stream of (degraded, clean, label) triples. Each epoch
/// visits every clean image once in a seeded order and draws one task per
/// image uniformly from the task set, with a fresh mask seed.
class SampleStream {
 public:
  SampleStream(std::vector<ImageTensor> images, std::vector<degradation::MaskSpec> tasks,
               std::uint64_t seed, bool randomize_offsets = true);

  std::size_t images_per_epoch() const noexcept { return images_.size(); }
  const std::vector<degradation::MaskSpec>& tasks() const noexcept { return tasks_; }
  const std::vector<ImageTensor>& images() const noexcept { return images_; }

  /// Sample at `position` (0 <= position < images_per_epoch) of `epoch`.
  Sample at(std::size_t epoch, std::size_t position) const;

  /// The mask spec (with concrete seed and offset) used for that sample.
  degradation::MaskSpec task_for(std::size_t epoch, std::size_t position) const;

  /// Image index visited at `position` of `epoch`.
  std::size_t image_index(std::size_t epoch, std::size_t position) const;

 private:
  std::vector<ImageTensor> images_;
  std::vector<degradation::MaskSpec> tasks_;
  std::uint64_t seed_;
  bool randomize_offsets_;
};

/// Builds the stream over clean images and a nonempty task set.
SampleStream build_samples(std::vector<ImageTensor> images,
                           std::vector<degradation::MaskSpec> tasks, std::uint64_t seed);

/// First `count` samples of the stream, epoch after epoch.
std::vector<Sample> take_samples(const SampleStream& stream, std::size_t count);

/// SplitMix64 finaliser, used to derive independent seeds from (seed, index...).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mript::dataio
