#include <cmath>
#include <cstdio>
#include <cstring>
#include <new>
#include <string>

#include "mript/dataio.hpp"
#include "mript/degradation.hpp"
#include "mript/experiment.hpp"
#include "mript/fileutil.hpp"
#include "mript/metrics.hpp"
#include "mript/mript.h"
#include "mript/training.hpp"

struct mript_mask {
  mript::degradation::Mask mask;
};

struct mript_image {
  mript::dataio::ImageTensor tensor;
};

struct mript_model {
  mript::model::MrIpt<float> model;
};

namespace {

thread_local std::string last_error;

template <typename F>
mript_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return MRIPT_OK;
  } catch (const mript::Error& e) {
    last_error = e.what();
    return static_cast<mript_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MRIPT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MRIPT_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return MRIPT_ERR_INTERNAL;
  }
}

template <typename T>
const T& deref(const T* p, const char* what) {
  if (p == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
  return *p;
}

template <typename T>
T** out_ptr(T** p) {
  if (p == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
  *p = nullptr;
  return p;
}

std::string str(const char* s, const char* what) {
  if (s == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
  return s;
}

bool is_png(const std::string& path) {
  return path.size() >= 4 && (path.compare(path.size() - 4, 4, ".png") == 0 ||
                              path.compare(path.size() - 4, 4, ".PNG") == 0);
}

mript::dataio::ImageTensor clamped(mript::dataio::ImageTensor t) {
  for (auto& x : t.data()) x = std::isfinite(x) ? std::clamp(x, 0.0f, 1.0f) : 0.0f;
  return t;
}

}  // namespace

extern "C" {

const char* mript_version(void) { return "0.1.0"; }

const char* mript_status_name(mript_status status) {
  if (status == MRIPT_OK) return "ok";
  if (status == MRIPT_ERR_INTERNAL) return "internal";
  if (status >= 1 && status <= 12) {
    return mript::error_code_name(static_cast<mript::ErrorCode>(static_cast<int>(status)));
  }
  return "unknown";
}

const char* mript_last_error(void) { return last_error.c_str(); }

void mript_set_log_callback(mript_log_fn fn, void* user) {
  if (fn == nullptr) {
    mript::experiment::set_logger(nullptr);
  } else {
    mript::experiment::set_logger([fn, user](const std::string& line) { fn(line.c_str(), user); });
  }
}

mript_status mript_mask_create(const char* family, double acceleration, size_t height, size_t width,
                               uint64_t seed, double center_fraction, mript_mask** out) {
  return guarded([&] {
    out_ptr(out);
    mript::degradation::MaskSpec spec;
    spec.family = mript::degradation::parse_family(str(family, "family"));
    spec.acceleration = acceleration;
    spec.seed = seed;
    if (center_fraction >= 0) spec.center_fraction = center_fraction;
    *out = new mript_mask{mript::degradation::make_mask(spec, height, width)};
  });
}

mript_status mript_mask_load(const char* path, mript_mask** out) {
  return guarded([&] {
    out_ptr(out);
    *out = new mript_mask{mript::degradation::Mask::from_raster(
        mript::dataio::load_raster(str(path, "path")))};
  });
}

mript_status mript_mask_save(const mript_mask* mask, const char* path) {
  return guarded([&] {
    mript::dataio::save_raster(str(path, "path"), deref(mask, "mask").mask.to_raster());
  });
}

mript_status mript_mask_save_png(const mript_mask* mask, const char* path) {
  return guarded([&] {
    mript::dataio::save_png(str(path, "path"), deref(mask, "mask").mask.to_raster());
  });
}

mript_status mript_mask_achieved_acceleration(const mript_mask* mask, double* out) {
  return guarded([&] {
    if (out == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
    *out = mript::degradation::achieved_acceleration(deref(mask, "mask").mask);
  });
}

mript_status mript_mask_kept_count(const mript_mask* mask, size_t* out) {
  return guarded([&] {
    if (out == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
    *out = deref(mask, "mask").mask.kept_count();
  });
}

mript_status mript_mask_dims(const mript_mask* mask, size_t* height, size_t* width) {
  return guarded([&] {
    const auto& m = deref(mask, "mask").mask;
    if (height != nullptr) *height = m.height();
    if (width != nullptr) *width = m.width();
  });
}

void mript_mask_free(mript_mask* mask) { delete mask; }

mript_status mript_image_create(size_t height, size_t width, const float* data, mript_image** out) {
  return guarded([&] {
    out_ptr(out);
    if (data == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "data is NULL");
    std::vector<float> pixels(data, data + height * width);
    *out = new mript_image{mript::dataio::ImageTensor({1, height, width}, std::move(pixels))};
  });
}

mript_status mript_image_load(const char* path, mript_image** out) {
  return guarded([&] {
    out_ptr(out);
    const std::string p = str(path, "path");
    auto t = is_png(p) ? mript::dataio::load_png(p) : mript::dataio::load_raster(p);
    if (t.rank() == 2) t.reshape({1, t.dim(0), t.dim(1)});
    if (t.rank() != 3 || t.dim(0) != 1) {
      mript::fail(mript::ErrorCode::kDimensionMismatch,
                  p + ": expected a single-channel image, got " + mript::dims_to_string(t.dims()));
    }
    *out = new mript_image{std::move(t)};
  });
}

mript_status mript_image_save(const mript_image* image, const char* path) {
  return guarded([&] {
    const std::string p = str(path, "path");
    const auto& t = deref(image, "image").tensor;
    if (is_png(p)) {
      mript::dataio::save_png(p, clamped(t));
    } else {
      mript::dataio::save_raster(p, t);
    }
  });
}

mript_status mript_image_dims(const mript_image* image, size_t* height, size_t* width) {
  return guarded([&] {
    const auto& t = deref(image, "image").tensor;
    if (height != nullptr) *height = t.dim(1);
    if (width != nullptr) *width = t.dim(2);
  });
}

const float* mript_image_data(const mript_image* image) {
  return image == nullptr ? nullptr : image->tensor.ptr();
}

void mript_image_free(mript_image* image) { delete image; }

mript_status mript_degrade(const mript_image* clean, const mript_mask* mask, mript_image** out) {
  return guarded([&] {
    out_ptr(out);
    *out = new mript_image{
        mript::degradation::degrade(deref(clean, "image").tensor, deref(mask, "mask").mask)};
  });
}

mript_status mript_psnr(const mript_image* x, const mript_image* clean, double* out) {
  return guarded([&] {
    if (out == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
    *out = mript::metrics::psnr(deref(x, "x").tensor, deref(clean, "clean").tensor);
  });
}

mript_status mript_ssim(const mript_image* x, const mript_image* clean, int global_mode,
                        double* out) {
  return guarded([&] {
    if (out == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
    mript::metrics::SsimParams params;
    if (global_mode != 0) params.mode = mript::metrics::SsimMode::kGlobal;
    *out = mript::metrics::ssim(deref(x, "x").tensor, deref(clean, "clean").tensor, params);
  });
}

mript_status mript_error_map(const mript_image* x, const mript_image* clean, double gain,
                             mript_image** out) {
  return guarded([&] {
    out_ptr(out);
    *out = new mript_image{
        mript::metrics::error_map(deref(x, "x").tensor, deref(clean, "clean").tensor, gain)};
  });
}

mript_status mript_phantoms_write(size_t count, size_t size, uint64_t seed, size_t test_count,
                                  const char* out_dir) {
  return guarded([&] {
    const std::filesystem::path dir = str(out_dir, "out_dir");
    if (count == 0) mript::fail(mript::ErrorCode::kInvalidArgument, "count must be >= 1");
    if (test_count > count) {
      mript::fail(mript::ErrorCode::kInvalidArgument, "test_count exceeds count");
    }
    const auto images = mript::dataio::generate_phantoms(count, size, seed);
    std::filesystem::create_directories(dir);
    std::vector<mript::dataio::ManifestRecord> records;
    for (std::size_t i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "phantom_%04zu.mrit", i);
      mript::dataio::save_raster(dir / name, images[i]);
      records.push_back({name, i + test_count >= count && test_count > 0
                                   ? mript::dataio::Split::kTest
                                   : mript::dataio::Split::kTrain});
    }
    mript::dataio::Manifest(std::move(records)).save(dir / "manifest.csv");
  });
}

mript_status mript_model_load(const char* checkpoint, mript_model** out) {
  return guarded([&] {
    out_ptr(out);
    auto ckpt = mript::training::load_checkpoint(str(checkpoint, "checkpoint"));
    *out = new mript_model{std::move(ckpt.model)};
  });
}

mript_status mript_model_image_size(const mript_model* model, size_t* out) {
  return guarded([&] {
    if (out == nullptr) mript::fail(mript::ErrorCode::kInvalidArgument, "output pointer is NULL");
    *out = deref(model, "model").model.config().image_size;
  });
}

mript_status mript_model_forward(const mript_model* model, const mript_image* input,
                                 const char* family, double acceleration, mript_image** out) {
  return guarded([&] {
    out_ptr(out);
    const mript::model::TaskLabel label{mript::degradation::parse_family(str(family, "family")),
                                        acceleration};
    *out = new mript_image{deref(model, "model").model.infer(deref(input, "input").tensor, label)};
  });
}

mript_status mript_model_route(const mript_model* model, const char* family, double acceleration,
                               char* buf, size_t buf_size) {
  return guarded([&] {
    const mript::model::TaskLabel label{mript::degradation::parse_family(str(family, "family")),
                                        acceleration};
    const std::string name = deref(model, "model").model.route(label).name();
    if (buf == nullptr || buf_size <= name.size()) {
      mript::fail(mript::ErrorCode::kInvalidArgument, "route buffer too small");
    }
    std::memcpy(buf, name.c_str(), name.size() + 1);
  });
}

void mript_model_free(mript_model* model) { delete model; }

mript_status mript_config_check(const char* config_path) {
  return guarded([&] { mript::experiment::load_config(str(config_path, "config_path")); });
}

mript_status mript_experiment_pretrain(const char* config_path) {
  return guarded([&] {
    mript::experiment::run_pretrain(mript::experiment::load_config(str(config_path, "config_path")));
  });
}

mript_status mript_experiment_finetune(const char* config_path, const char* checkpoint) {
  return guarded([&] {
    mript::experiment::run_finetune(mript::experiment::load_config(str(config_path, "config_path")),
                                    str(checkpoint, "checkpoint"));
  });
}

mript_status mript_experiment_eval(const char* config_path, const char* checkpoint, int zero_shot) {
  return guarded([&] {
    mript::experiment::run_eval(mript::experiment::load_config(str(config_path, "config_path")),
                                str(checkpoint, "checkpoint"), zero_shot != 0);
  });
}

mript_status mript_experiment_stability(const char* config_path, const char* checkpoint,
                                        const size_t* sizes, size_t n_sizes, size_t repeats) {
  return guarded([&] {
    if (sizes == nullptr && n_sizes > 0) {
      mript::fail(mript::ErrorCode::kInvalidArgument, "sizes is NULL");
    }
    mript::experiment::run_stability(mript::experiment::load_config(str(config_path, "config_path")),
                                     str(checkpoint, "checkpoint"),
                                     std::vector<std::size_t>(sizes, sizes + n_sizes), repeats);
  });
}

}  // extern "C"
