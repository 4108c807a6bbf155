#include <algorithm>
#include <set>

#include "internal/config_json.hpp"
#include "mript/error.hpp"

namespace mript::model {

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kType: return "type";
    case Variant::kLevel: return "level";
    case Variant::kSplit: return "split";
  }
  return "level";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "type") return Variant::kType;
  if (lower == "level") return Variant::kLevel;
  if (lower == "split") return Variant::kSplit;
  fail(ErrorCode::kInvalidArgument,
       "unknown variant '" + std::string(name) + "' (expected type, level or split)");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.image_size = 224;
  c.patch_size = 16;
  c.embed_dim = 768;
  c.encoder_depth = 24;
  c.num_heads = 12;
  c.window_size = 7;
  c.shift_size = 3;
  c.head_channels = 64;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.image_size = 16;
  c.patch_size = 4;
  c.embed_dim = 16;
  c.encoder_depth = 2;
  c.num_heads = 2;
  c.window_size = 2;
  c.shift_size = 1;
  c.decoder_depth = 2;
  c.head_channels = 4;
  c.mlp_ratio = 2;
  return c;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::kInvalidArgument, "model config: " + msg);
  };
  require(image_size >= 16, "image_size must be >= 16");
  require(patch_size > 0 && image_size % patch_size == 0,
          "image_size must be a multiple of patch_size");
  require(window_size > 0 && grid() % window_size == 0,
          "token grid " + std::to_string(grid()) + " must be a multiple of window_size");
  require(shift_size == 0 || shift_size == window_size / 2,
          "shift_size must be 0 or window_size / 2");
  require(embed_dim > 0 && num_heads > 0 && embed_dim % num_heads == 0,
          "embed_dim must be a positive multiple of num_heads");
  require(encoder_depth > 0, "encoder_depth must be >= 1");
  require(decoder_depth > 0, "decoder_depth must be >= 1");
  require(head_channels > 0 && mlp_ratio > 0, "head_channels and mlp_ratio must be >= 1");
  require(!trained_families.empty(), "trained_families must not be empty");
  require(std::set<MaskFamily>(trained_families.begin(), trained_families.end()).size() ==
              trained_families.size(),
          "trained_families has duplicates");
  require(!trained_ratios.empty(), "trained_ratios must not be empty");
  for (double r : trained_ratios) require(r > 1.0, "trained ratios must be > 1");
  require(std::set<double>(trained_ratios.begin(), trained_ratios.end()).size() ==
              trained_ratios.size(),
          "trained_ratios has duplicates");
}

namespace detail {

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json families = nlohmann::json::array();
  for (auto f : c.trained_families) families.push_back(std::string(degradation::family_name(f)));
  return {
      {"image_size", c.image_size},       {"patch_size", c.patch_size},
      {"embed_dim", c.embed_dim},         {"encoder_depth", c.encoder_depth},
      {"num_heads", c.num_heads},         {"window_size", c.window_size},
      {"shift_size", c.shift_size},       {"decoder_depth", c.decoder_depth},
      {"head_channels", c.head_channels}, {"mlp_ratio", c.mlp_ratio},
      {"input_skip", c.input_skip},       {"trained_families", families},
      {"trained_ratios", c.trained_ratios}, {"variant", std::string(variant_name(c.variant))},
  };
}

ModelConfig from_json(const nlohmann::json& j, ModelConfig c) {
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "model config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "image_size") c.image_size = value.get<std::size_t>();
      else if (key == "patch_size") c.patch_size = value.get<std::size_t>();
      else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
      else if (key == "encoder_depth") c.encoder_depth = value.get<std::size_t>();
      else if (key == "num_heads") c.num_heads = value.get<std::size_t>();
      else if (key == "window_size") c.window_size = value.get<std::size_t>();
      else if (key == "shift_size") c.shift_size = value.get<std::size_t>();
      else if (key == "decoder_depth") c.decoder_depth = value.get<std::size_t>();
      else if (key == "head_channels") c.head_channels = value.get<std::size_t>();
      else if (key == "mlp_ratio") c.mlp_ratio = value.get<std::size_t>();
      else if (key == "input_skip") c.input_skip = value.get<bool>();
      else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else if (key == "trained_ratios") c.trained_ratios = value.get<std::vector<double>>();
      else if (key == "trained_families") {
        c.trained_families.clear();
        for (const auto& f : value) c.trained_families.push_back(degradation::parse_family(f.get<std::string>()));
      } else {
        fail(ErrorCode::kUnknownKey, "unknown model config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace detail

std::string model_config_to_json(const ModelConfig& config) {
  return detail::to_json(config).dump(2);
}

ModelConfig model_config_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model config: ") + e.what());
  }
  ModelConfig c = detail::from_json(j);
  c.validate();
  return c;
}

}  // namespace mript::model
