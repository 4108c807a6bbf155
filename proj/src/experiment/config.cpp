#include <json.hpp>

#include "internal/config_json.hpp"
#include "mript/experiment.hpp"
#include "mript/fileutil.hpp"

namespace mript::experiment {
namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(ErrorCode::kUnknownKey, "unknown key '" + key + "' in " + where);
    }
  }
}

training::TrainConfig parse_train(const json& j, training::TrainConfig c, const std::string& where) {
  reject_unknown(j, {"epochs", "batch_size", "lr", "seed", "max_steps"}, where);
  if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("lr")) c.lr = j["lr"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("max_steps") && !j["max_steps"].is_null()) {
    c.max_steps = j["max_steps"].get<std::size_t>();
  }
  if (!(c.lr > 0)) fail(ErrorCode::kInvalidArgument, where + ": lr must be > 0");
  if (c.batch_size == 0) fail(ErrorCode::kInvalidArgument, where + ": batch_size must be >= 1");
  if (c.epochs == 0 && !c.max_steps) fail(ErrorCode::kInvalidArgument, where + ": epochs must be >= 1");
  if (c.max_steps && *c.max_steps == 0) {
    fail(ErrorCode::kInvalidArgument, where + ": max_steps must be >= 1");
  }
  return c;
}

TaskGrid parse_grid(const json& j, const std::string& where) {
  reject_unknown(j, {"families", "ratios"}, where);
  TaskGrid g;
  for (const auto& f : j.at("families")) g.families.push_back(degradation::parse_family(f.get<std::string>()));
  g.ratios = j.at("ratios").get<std::vector<double>>();
  if (g.families.empty() || g.ratios.empty()) {
    fail(ErrorCode::kInvalidArgument, where + ": task set must not be empty");
  }
  for (double r : g.ratios) {
    if (!(r > 1.0)) fail(ErrorCode::kInvalidArgument, where + ": ratios must be > 1");
  }
  return g;
}

DataSource parse_source(const json& j, DataSource d, const std::filesystem::path& base,
                        const std::string& where) {
  reject_unknown(j, {"phantoms", "manifest", "split"}, where);
  if (j.contains("phantoms") == j.contains("manifest")) {
    fail(ErrorCode::kInvalidArgument, where + " needs exactly one of 'phantoms' or 'manifest'");
  }
  if (j.contains("phantoms")) {
    const json& p = j["phantoms"];
    reject_unknown(p, {"count", "seed"}, where + ".phantoms");
    d.manifest.reset();
    d.phantom_count = p.at("count").get<std::size_t>();
    d.phantom_seed = p.value("seed", d.phantom_seed);
    if (d.phantom_count == 0) fail(ErrorCode::kInvalidArgument, where + ": phantom count must be >= 1");
  } else {
    const std::filesystem::path m = j["manifest"].get<std::string>();
    d.manifest = m.is_absolute() ? m : base / m;
    if (j.contains("split")) d.split = dataio::parse_split(j["split"].get<std::string>());
  }
  return d;
}

}  // namespace

std::vector<degradation::MaskSpec> TaskGrid::specs() const {
  std::vector<degradation::MaskSpec> out;
  for (auto f : families)
    for (double r : ratios) {
      degradation::MaskSpec s;
      s.family = f;
      s.acceleration = r;
      out.push_back(s);
    }
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    reject_unknown(j, {"model", "pretrain", "finetune", "tasks", "data", "dataset_name",
                       "model_tag", "output_dir", "eval_seed", "error_maps"},
                   "config");

    json model = j.value("model", json::object());
    reject_unknown(model, {"preset", "seed", "image_size", "patch_size", "embed_dim",
                           "encoder_depth", "num_heads", "window_size", "shift_size",
                           "decoder_depth", "head_channels", "mlp_ratio", "input_skip",
                           "trained_families", "trained_ratios", "variant"},
                   "model");
    const std::string preset = model.value("preset", std::string("desk"));
    model::ModelConfig base_model;
    if (preset == "desk") base_model = model::ModelConfig::desk();
    else if (preset == "paper") base_model = model::ModelConfig::paper();
    else if (preset == "tiny") base_model = model::ModelConfig::tiny();
    else fail(ErrorCode::kInvalidArgument, "unknown model preset '" + preset + "'");
    c.model_seed = model.value("seed", std::uint64_t{0});
    const bool explicit_families = model.contains("trained_families");
    const bool explicit_ratios = model.contains("trained_ratios");
    model.erase("preset");
    model.erase("seed");
    c.model = model::detail::from_json(model, base_model);

    const json tasks = j.value("tasks", json::object());
    reject_unknown(tasks, {"pretrain", "finetune", "eval"}, "tasks");
    c.pretrain_tasks = tasks.contains("pretrain")
                           ? parse_grid(tasks["pretrain"], "tasks.pretrain")
                           : TaskGrid{{std::begin(degradation::kAllFamilies),
                                       std::end(degradation::kAllFamilies)},
                                      {2, 4, 6, 8, 10}};
    c.eval_tasks = tasks.contains("eval") ? parse_grid(tasks["eval"], "tasks.eval")
                                          : TaskGrid{{degradation::MaskFamily::kCartesianRandom}, {4}};
    c.finetune_tasks =
        tasks.contains("finetune") ? parse_grid(tasks["finetune"], "tasks.finetune") : c.eval_tasks;
    if (!explicit_families) c.model.trained_families = c.pretrain_tasks.families;
    if (!explicit_ratios) c.model.trained_ratios = c.pretrain_tasks.ratios;
    c.model.validate();

    training::TrainConfig train_defaults;
    train_defaults.lr = preset == "paper" ? 1e-5 : 1e-4;
    train_defaults.epochs = 5;
    c.pretrain = parse_train(j.value("pretrain", json::object()), train_defaults, "pretrain");
    train_defaults.epochs = 15;
    c.finetune = parse_train(j.value("finetune", json::object()), train_defaults, "finetune");

    const json data = j.value("data", json::object());
    reject_unknown(data, {"train", "test"}, "data");
    DataSource train_default{std::nullopt, dataio::Split::kTrain, 128, 1};
    DataSource test_default{std::nullopt, dataio::Split::kTest, 32, 2};
    c.train_data = data.contains("train") ? parse_source(data["train"], train_default, base, "data.train")
                                          : train_default;
    c.test_data = data.contains("test") ? parse_source(data["test"], test_default, base, "data.test")
                                        : test_default;

    c.dataset_name = j.value("dataset_name", c.dataset_name);
    c.model_tag = j.value("model_tag", "MR-IPT-" + std::string(model::variant_name(c.model.variant)));
    const std::filesystem::path out = j.value("output_dir", std::string("mript_out"));
    c.output_dir = out.is_absolute() ? out : base / out;
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    c.error_maps = j.value("error_maps", c.error_maps);
    if (c.dataset_name.empty() || c.model_tag.empty()) {
      fail(ErrorCode::kInvalidArgument, "dataset_name and model_tag must not be empty");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text(path), path.parent_path().empty() ? "." : path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace mript::experiment
