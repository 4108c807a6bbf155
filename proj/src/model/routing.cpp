#include <algorithm>
#include <cmath>
#include <limits>

#include "mript/error.hpp"
#include "mript/model.hpp"

namespace mript::model {
namespace {

bool same_ratio(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

std::string PairKey::name() const {
  std::string ratio_text;
  if (ratio) {
    ratio_text = "r" + format_ratio(*ratio);
    std::replace(ratio_text.begin(), ratio_text.end(), '.', 'p');
  }
  if (family && ratio) return std::string(degradation::family_name(*family)) + "_" + ratio_text;
  if (family) return std::string(degradation::family_name(*family));
  if (ratio) return ratio_text;
  fail(ErrorCode::kInvalidArgument, "empty pair key");
}

double resolve_ratio(double requested, const std::vector<double>& trained) {
  if (trained.empty()) fail(ErrorCode::kInvalidArgument, "no trained ratios to route to");
  double above = std::numeric_limits<double>::infinity();
  for (double r : trained) {
    if (same_ratio(r, requested)) return r;
    if (r > requested) above = std::min(above, r);
  }
  if (std::isfinite(above)) return above;
  return *std::max_element(trained.begin(), trained.end());
}

MaskFamily resolve_family(MaskFamily requested, const std::vector<MaskFamily>& trained) {
  if (trained.empty()) fail(ErrorCode::kInvalidArgument, "no trained families to route to");
  if (std::find(trained.begin(), trained.end(), requested) != trained.end()) return requested;
  if (std::find(trained.begin(), trained.end(), MaskFamily::kCartesianRandom) != trained.end()) {
    return MaskFamily::kCartesianRandom;
  }
  return trained.front();
}

PairKey route(Variant variant, const TaskLabel& label, const ModelConfig& config) {
  PairKey key;
  if (variant != Variant::kLevel) {
    key.ratio = resolve_ratio(label.acceleration, config.trained_ratios);
  }
  if (variant != Variant::kType) {
    key.family = resolve_family(label.family, config.trained_families);
  }
  return key;
}

std::vector<PairKey> pair_keys(const ModelConfig& config) {
  std::vector<PairKey> keys;
  switch (config.variant) {
    case Variant::kType:
      for (double r : config.trained_ratios) keys.push_back({std::nullopt, r});
      break;
    case Variant::kLevel:
      for (auto f : config.trained_families) keys.push_back({f, std::nullopt});
      break;
    case Variant::kSplit:
      for (auto f : config.trained_families)
        for (double r : config.trained_ratios) keys.push_back({f, r});
      break;
  }
  return keys;
}

std::map<std::string, Dims> parameter_shapes(const ModelConfig& c) {
  c.validate();
  std::map<std::string, Dims> s;
  const std::size_t d = c.embed_dim, hc = c.head_channels, p = c.patch_size;
  const std::size_t hidden = c.mlp_ratio * d;
  auto linear = [&s](const std::string& name, std::size_t out, std::size_t in) {
    s[name + ".weight"] = {out, in};
    s[name + ".bias"] = {out};
  };
  auto conv = [&s](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    s[name + ".weight"] = {out, in, k, k};
    s[name + ".bias"] = {out};
  };
  auto norm = [&s, d](const std::string& name) {
    s[name + ".gamma"] = {d};
    s[name + ".beta"] = {d};
  };
  auto attn = [&](const std::string& name) {
    for (const char* proj : {".q", ".k", ".v", ".o"}) linear(name + proj, d, d);
  };
  auto mlp = [&](const std::string& name) {
    linear(name + ".fc1", hidden, d);
    linear(name + ".fc2", d, hidden);
  };

  for (const auto& key : pair_keys(c)) {
    const std::string head = "head." + key.name();
    conv(head + ".conv0", hc, 1, 3);
    for (int r = 0; r < 2; ++r) {
      const std::string res = head + ".res" + std::to_string(r);
      conv(res + ".conv_a", hc, hc, 5);
      conv(res + ".conv_b", hc, hc, 5);
    }
    const std::string tail = "tail." + key.name();
    conv(tail + ".up", p * p * hc, d, 3);
    conv(tail + ".out", 1, hc, 3);
  }

  conv("patch.embed", d, hc, p);
  s["patch.pos"] = {c.tokens(), d};

  s["prompt.family"] = {c.trained_families.size(), d};
  s["prompt.ratio"] = {c.trained_ratios.size(), d};
  linear("prompt.proj", d, d);

  const std::size_t table = (2 * c.window_size - 1) * (2 * c.window_size - 1);
  for (std::size_t i = 0; i < c.encoder_depth; ++i) {
    const std::string blk = "encoder." + std::to_string(i);
    norm(blk + ".norm1");
    attn(blk + ".attn");
    s[blk + ".attn.rel_bias"] = {table, c.num_heads};
    norm(blk + ".norm2");
    mlp(blk + ".mlp");
  }

  for (std::size_t i = 0; i < c.decoder_depth; ++i) {
    const std::string lyr = "decoder." + std::to_string(i);
    norm(lyr + ".self_norm");
    attn(lyr + ".self_attn");
    norm(lyr + ".p2i_norm_q");
    norm(lyr + ".p2i_norm_kv");
    attn(lyr + ".p2i_attn");
    norm(lyr + ".mlp_norm");
    mlp(lyr + ".mlp");
    norm(lyr + ".i2p_norm_q");
    norm(lyr + ".i2p_norm_kv");
    attn(lyr + ".i2p_attn");
  }
  return s;
}

ParamCounts param_count(const ModelConfig& config) {
  ParamCounts n;
  n.pairs = pair_keys(config).size();
  for (const auto& [name, dims] : parameter_shapes(config)) {
    const std::size_t k = element_count(dims);
    const std::string group = name.substr(0, name.find('.'));
    if (group == "head") n.heads += k;
    else if (group == "tail") n.tails += k;
    else if (group == "prompt") n.prompt_encoder += k;
    else if (group == "patch") n.patch_embed += k;
    else if (group == "encoder") n.encoder += k;
    else n.decoder += k;
    n.total += k;
  }
  return n;
}

}  // namespace mript::model
