#include "pki/config.hpp"

#include <functional>
#include <map>
#include <set>

#include "binary_io.hpp"
#include "config_json.hpp"
#include "pki/errors.hpp"

namespace pki {
namespace {

using nlohmann::json;

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kConfigSchemaVersion) {
    throw ConfigError("config: unsupported schema_version (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
  return j;
}

// Applies each known key's setter; rejects keys without one.
void apply_keys(const json& j, const std::map<std::string, std::function<void(const json&)>>& setters) {
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    } catch (const InvalidArgument& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

std::size_t as_count(const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("expected a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

double as_real(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number, got " + v.dump());
  return v.get<double>();
}

}  // namespace

Reduction parse_reduction(const std::string& s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  throw InvalidArgument("unknown reduction '" + s + "' (expected sum or mean)");
}

std::string to_string(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

namespace detail {

json to_json(const TrainConfig& cfg) {
  return json{{"schema_version", kConfigSchemaVersion},
              {"base_epochs", cfg.base_epochs},
              {"incr_iters", cfg.incr_iters},
              {"batch_size", cfg.batch_size},
              {"base_lr", cfg.base_lr},
              {"incr_lr", cfg.incr_lr},
              {"lr_min", cfg.lr_min},
              {"momentum", cfg.momentum},
              {"mode", to_string(cfg.ensemble.mode)},
              {"k", cfg.ensemble.k},
              {"alpha", cfg.ensemble.alpha},
              {"hidden_dim", cfg.hidden_dim},
              {"output_dim", cfg.output_dim},
              {"seed", cfg.seed},
              {"init", to_string(cfg.init_mode)},
              {"base_reduction", to_string(cfg.base_reduction)},
              {"incr_reduction", to_string(cfg.incr_reduction)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  apply_keys(j, {
      {"base_epochs", [&](const json& v) { cfg.base_epochs = as_count(v); }},
      {"incr_iters", [&](const json& v) { cfg.incr_iters = as_count(v); }},
      {"batch_size", [&](const json& v) { cfg.batch_size = as_count(v); }},
      {"base_lr", [&](const json& v) { cfg.base_lr = as_real(v); }},
      {"incr_lr", [&](const json& v) { cfg.incr_lr = as_real(v); }},
      {"lr_min", [&](const json& v) { cfg.lr_min = as_real(v); }},
      {"momentum", [&](const json& v) { cfg.momentum = as_real(v); }},
      {"mode", [&](const json& v) { cfg.ensemble.mode = parse_ensemble_mode(v.get<std::string>()); }},
      {"k", [&](const json& v) { cfg.ensemble.k = as_count(v); }},
      {"alpha", [&](const json& v) { cfg.ensemble.alpha = as_real(v); }},
      {"hidden_dim", [&](const json& v) { cfg.hidden_dim = as_count(v); }},
      {"output_dim", [&](const json& v) { cfg.output_dim = as_count(v); }},
      {"seed", [&](const json& v) { cfg.seed = v.get<std::uint64_t>(); }},
      {"init", [&](const json& v) { cfg.init_mode = parse_init_mode(v.get<std::string>()); }},
      {"base_reduction", [&](const json& v) { cfg.base_reduction = parse_reduction(v.get<std::string>()); }},
      {"incr_reduction", [&](const json& v) { cfg.incr_reduction = parse_reduction(v.get<std::string>()); }},
  });
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json to_json(const SessionLayout& layout) {
  return json{{"base_classes", layout.base_classes},
              {"num_incremental", layout.num_incremental},
              {"n_way", layout.n_way},
              {"k_shot", layout.k_shot}};
}

SessionLayout layout_from_json(const json& j) {
  SessionLayout layout;
  layout.base_classes = j.at("base_classes").get<std::size_t>();
  layout.num_incremental = j.at("num_incremental").get<std::size_t>();
  layout.n_way = j.at("n_way").get<std::size_t>();
  layout.k_shot = j.at("k_shot").get<std::size_t>();
  return layout;
}

}  // namespace detail

TrainConfig parse_train_config(const std::string& json_text) {
  return detail::train_config_from_json(parse_object(json_text));
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_train_config(text);
}

std::string dump_train_config(const TrainConfig& cfg) { return detail::to_json(cfg).dump(2) + "\n"; }

SynthSpec parse_synth_spec(const std::string& json_text) {
  const json j = parse_object(json_text);
  SynthSpec spec;
  apply_keys(j, {
      {"d", [&](const json& v) { spec.dim = as_count(v); }},
      {"base_classes", [&](const json& v) { spec.layout.base_classes = as_count(v); }},
      {"num_incremental", [&](const json& v) { spec.layout.num_incremental = as_count(v); }},
      {"n_way", [&](const json& v) { spec.layout.n_way = as_count(v); }},
      {"k_shot", [&](const json& v) { spec.layout.k_shot = as_count(v); }},
      {"cluster_std", [&](const json& v) { spec.cluster_std = as_real(v); }},
      {"center_scale", [&](const json& v) { spec.center_scale = as_real(v); }},
      {"train_per_base_class", [&](const json& v) { spec.train_per_base_class = as_count(v); }},
      {"test_per_class", [&](const json& v) { spec.test_per_class = as_count(v); }},
      {"seed", [&](const json& v) { spec.seed = v.get<std::uint64_t>(); }},
  });
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_synth_spec(text);
}

std::string dump_synth_spec(const SynthSpec& spec) {
  json j{{"schema_version", kConfigSchemaVersion},
         {"d", spec.dim},
         {"base_classes", spec.layout.base_classes},
         {"num_incremental", spec.layout.num_incremental},
         {"n_way", spec.layout.n_way},
         {"k_shot", spec.layout.k_shot},
         {"cluster_std", spec.cluster_std},
         {"center_scale", spec.center_scale},
         {"train_per_base_class", spec.train_per_base_class},
         {"test_per_class", spec.test_per_class},
         {"seed", spec.seed}};
  return j.dump(2) + "\n";
}

}  // namespace pki
