#include <algorithm>
#include <numeric>
#include <random>

#include "mript/dataio.hpp"

namespace mript::dataio {

SampleStream::SampleStream(std::vector<ImageTensor> images,
                           std::vector<degradation::MaskSpec> tasks, std::uint64_t seed,
                           bool randomize_offsets)
    : images_(std::move(images)),
      tasks_(std::move(tasks)),
      seed_(seed),
      randomize_offsets_(randomize_offsets) {
  if (images_.empty()) fail(ErrorCode::kInvalidArgument, "sample stream needs at least one image");
  if (tasks_.empty()) fail(ErrorCode::kInvalidArgument, "sample stream needs at least one task");
  const Dims& first = images_.front().dims();
  for (const auto& img : images_) {
    if (img.rank() != 3 || img.dim(0) != 1 || img.dims() != first) {
      fail(ErrorCode::kDimensionMismatch, "sample stream images must share one [1,H,W] shape");
    }
  }
}

std::size_t SampleStream::image_index(std::size_t epoch, std::size_t position) const {
  if (position >= images_.size()) {
    fail(ErrorCode::kInvalidArgument, "sample position beyond epoch length");
  }
  std::vector<std::size_t> order(images_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed_, 2 * epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order[position];
}

degradation::MaskSpec SampleStream::task_for(std::size_t epoch, std::size_t position) const {
  std::mt19937_64 rng(mix_seed(mix_seed(seed_, 2 * epoch + 1), position));
  const std::size_t pick =
      std::uniform_int_distribution<std::size_t>(0, tasks_.size() - 1)(rng);
  degradation::MaskSpec spec = tasks_[pick];
  spec.seed = rng();
  if (randomize_offsets_ && spec.family == degradation::MaskFamily::kCartesianEquispaced &&
      !spec.offset) {
    const auto spacing = static_cast<std::uint64_t>(std::max(1.0, std::floor(spec.acceleration)));
    spec.offset = static_cast<std::int64_t>(rng() % spacing);
  }
  return spec;
}

Sample SampleStream::at(std::size_t epoch, std::size_t position) const {
  const ImageTensor& target = images_[image_index(epoch, position)];
  const degradation::MaskSpec spec = task_for(epoch, position);
  const degradation::Mask mask = degradation::make_mask(spec, target.dim(1), target.dim(2));
  return Sample{degradation::degrade(target, mask), target,
                model::TaskLabel{spec.family, spec.acceleration}};
}

SampleStream build_samples(std::vector<ImageTensor> images,
                           std::vector<degradation::MaskSpec> tasks, std::uint64_t seed) {
  return SampleStream(std::move(images), std::move(tasks), seed);
}

std::vector<Sample> take_samples(const SampleStream& stream, std::size_t count) {
  std::vector<Sample> out;
  out.reserve(count);
  const std::size_t n = stream.images_per_epoch();
  for (std::size_t i = 0; i < count; ++i) out.push_back(stream.at(i / n, i % n));
  return out;
}

}  // namespace mript::dataio
