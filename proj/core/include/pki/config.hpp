#pragma once

#include <filesystem>
#include <string>

#include "pki/data.hpp"
#include "pki/trainer.hpp"

namespace pki {

// Config files are flat JSON objects carrying "schema_version": 1. Every key
// is optional except schema_version; unknown keys are rejected so a typo in
// a sweep script fails loudly. Errors throw ConfigError.
//
// Training keys: base_epochs, incr_iters, batch_size, base_lr, incr_lr,
// lr_min, momentum, mode ("pki"|"pkiv1"|"pkiv2"), k, alpha, hidden_dim,
// output_dim, seed, init ("random"|"previous"), base_reduction and
// incr_reduction ("sum"|"mean").
//
// Synthetic stream keys: d, base_classes, num_incremental, n_way, k_shot,
// cluster_std, center_scale, train_per_base_class, test_per_class, seed.
inline constexpr int kConfigSchemaVersion = 1;

TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string dump_train_config(const TrainConfig& cfg);

SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string dump_synth_spec(const SynthSpec& spec);

Reduction parse_reduction(const std::string& s);
std::string to_string(Reduction r);

}  // namespace pki
