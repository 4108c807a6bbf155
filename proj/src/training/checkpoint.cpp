#include <bit>
#include <cstring>

#include <json.hpp>

#include "internal/config_json.hpp"
#include "mript/fileutil.hpp"
#include "mript/training.hpp"

namespace mript::training {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'M', 'R', 'I', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPrefix = 4 + 4 + 8;

using json = nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

struct BlobWriter {
  json directory = json::array();
  std::vector<std::uint8_t> blob;

  void add(const std::string& name, const Tensor<float>& t) {
    directory.push_back({{"name", name}, {"dims", t.dims()}, {"offset", blob.size()}});
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.ptr());
    blob.insert(blob.end(), p, p + t.size() * sizeof(float));
  }
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MrIpt<float>& model, const Adam* optimizer,
                                            const CheckpointMeta& meta) {
  BlobWriter w;
  for (const auto& [name, t] : model.parameters()) w.add(name, t);

  json header;
  header["config"] = model::detail::to_json(model.config());
  header["step"] = meta.step;
  json tasks = json::array();
  for (const auto& t : meta.tasks) {
    tasks.push_back({{"family", std::string(degradation::family_name(t.family))},
                     {"acceleration", t.acceleration}});
  }
  header["tasks"] = tasks;
  if (optimizer != nullptr) {
    json slot_steps = json::object();
    for (const auto& [name, slot] : optimizer->slots()) {
      w.add("adam.m." + name, slot.m);
      w.add("adam.v." + name, slot.v);
      slot_steps[name] = slot.steps;
    }
    const AdamConfig& c = optimizer->config();
    header["optimizer"] = {{"lr", c.lr},           {"beta1", c.beta1},
                           {"beta2", c.beta2},     {"eps", c.eps},
                           {"steps", optimizer->steps()}, {"slot_steps", slot_steps}};
  } else {
    header["optimizer"] = nullptr;
  }
  header["tensors"] = w.directory;

  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), w.blob.begin(), w.blob.end());
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (std::memcmp(bytes.data(), kMagic, std::min<std::size_t>(4, bytes.size())) != 0) {
    fail(ErrorCode::kBadMagic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < kPrefix) fail(ErrorCode::kTruncated, "checkpoint truncated in prefix");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kVersion) {
    fail(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                          " (expected " + std::to_string(kVersion) + ")");
  }
  const std::uint64_t header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - kPrefix) fail(ErrorCode::kTruncated, "checkpoint truncated in header");
  const auto blob = bytes.subspan(kPrefix + header_len);

  json header;
  try {
    header = json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + header_len);
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptHeader, std::string("checkpoint header: ") + e.what());
  }

  std::map<std::string, Tensor<float>> tensors;
  model::ModelConfig config;
  CheckpointMeta meta;
  std::optional<Adam> optimizer;
  try {
    config = model::detail::from_json(header.at("config"));
    config.validate();
    meta.step = header.at("step").get<std::size_t>();
    for (const auto& t : header.at("tasks")) {
      meta.tasks.push_back({degradation::parse_family(t.at("family").get<std::string>()),
                            t.at("acceleration").get<double>()});
    }
    std::size_t consumed = 0;
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dims = entry.at("dims").get<Dims>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = element_count(dims) * sizeof(float);
      if (offset > blob.size() || n > blob.size() - offset) {
        fail(ErrorCode::kTruncated, "checkpoint data truncated at tensor '" + name + "'");
      }
      std::vector<float> data(element_count(dims));
      std::memcpy(data.data(), blob.data() + offset, n);
      if (!tensors.emplace(name, Tensor<float>(dims, std::move(data))).second) {
        fail(ErrorCode::kCorruptHeader, "duplicate tensor '" + name + "'");
      }
      consumed += n;
    }
    if (consumed != blob.size()) {
      fail(ErrorCode::kCorruptHeader, "checkpoint data length does not match its directory");
    }
    const json& opt = header.at("optimizer");
    if (!opt.is_null()) {
      Adam adam({opt.at("lr").get<double>(), opt.at("beta1").get<double>(),
                 opt.at("beta2").get<double>(), opt.at("eps").get<double>()});
      std::map<std::string, Adam::Slot> slots;
      for (const auto& [name, steps] : opt.at("slot_steps").items()) {
        auto m = tensors.find("adam.m." + name), v = tensors.find("adam.v." + name);
        if (m == tensors.end() || v == tensors.end()) {
          fail(ErrorCode::kMissingTensor, "missing optimizer state for '" + name + "'");
        }
        slots[name] = {std::move(m->second), std::move(v->second), steps.get<std::uint64_t>()};
        tensors.erase(m);
        tensors.erase(v);
      }
      adam.restore(opt.at("steps").get<std::uint64_t>(), std::move(slots));
      optimizer = std::move(adam);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptHeader, std::string("checkpoint header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kUnknownKey) {
      fail(ErrorCode::kCorruptHeader, std::string("checkpoint header: ") + e.what());
    }
    throw;
  }

  MrIpt<float> model(config, std::move(tensors));
  if (optimizer) {
    for (const auto& [name, slot] : optimizer->slots()) {
      if (model.parameters().count(name) == 0) {
        fail(ErrorCode::kCorruptHeader, "optimizer state for unknown parameter '" + name + "'");
      }
    }
  }
  return Checkpoint{std::move(model), std::move(optimizer), std::move(meta)};
}

void save_checkpoint(const std::filesystem::path& path, const MrIpt<float>& model,
                     const Adam* optimizer, const CheckpointMeta& meta) {
  write_file_atomic(path, encode_checkpoint(model, optimizer, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace mript::training
