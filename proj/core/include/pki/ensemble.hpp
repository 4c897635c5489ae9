#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pki/nn.hpp"

namespace pki {

enum class EnsembleMode {
  kPki,    // one projector per session, outputs summed
  kPkiV1,  // one running weight sum plus the current projector
  kPkiV2,  // weight sums over groups of k sessions plus a residual group
};

enum class InitMode { kRandom, kPrevious };

std::string to_string(EnsembleMode mode);
std::string to_string(InitMode mode);
EnsembleMode parse_ensemble_mode(const std::string& s);
InitMode parse_init_mode(const std::string& s);

struct EnsembleSettings {
  EnsembleMode mode = EnsembleMode::kPki;
  // Group size for kPkiV2; ignored otherwise.
  std::size_t k = 3;
  // Influence of projectors built in incremental sessions, in (0, 1].
  // PKI scales their outputs, the weight-sum variants scale their weights.
  double alpha = 1.0;

  void validate() const;
  bool operator==(const EnsembleSettings&) const = default;
};

// One forward branch: v += output_scale * mlp(weights, f).
struct EnsembleBranch {
  const Projector* weights = nullptr;
  double output_scale = 1.0;
};

// Snapshot of the projector applications needed for one forward pass.
// Holds pointers into the ensemble; rebuild after every weight update.
struct EnsemblePlan {
  static constexpr std::size_t kNoTrainable = std::numeric_limits<std::size_t>::max();

  std::vector<EnsembleBranch> branches;
  // Branch whose weights depend on the current projector, or kNoTrainable.
  std::size_t trainable_branch = kNoTrainable;
  // d(branch weights) / d(current weights) for the trainable branch.
  double trainable_weight_scale = 1.0;
  // Owns the materialized residual + current weights in the weight-sum modes.
  std::unique_ptr<Projector> owned;
};

struct EnsembleCache {
  std::vector<ForwardCache> branches;
};

class ProjectorEnsemble {
 public:
  // Session-0 ensemble whose current projector is `base`.
  ProjectorEnsemble(EnsembleSettings settings, Projector base);

  // Rebuilds an ensemble from its stored parts (checkpoint loading).
  // `stored` holds per-session projectors (PKI) or completed group sums (PKIV-2).
  static ProjectorEnsemble restore(EnsembleSettings settings, std::size_t session,
                                   std::vector<Projector> stored, std::optional<Projector> residual,
                                   std::optional<Projector> current,
                                   std::optional<Projector> last_frozen);

  const EnsembleSettings& settings() const { return settings_; }
  EnsembleMode mode() const { return settings_.mode; }
  // Index t of the session the current (or most recently frozen) projector belongs to.
  std::size_t session() const { return session_; }

  bool has_current() const { return current_.has_value(); }
  Projector& current();
  const Projector& current() const;

  // Starts session t+1. Throws InvalidState while a current projector is unfrozen.
  void add_projector(InitMode init, std::uint64_t seed);

  // Moves the current projector into frozen storage. No-op if already frozen.
  void freeze_current();

  // Per-session projectors (PKI) or completed group sums (PKIV-2); bit-immutable.
  const std::vector<Projector>& stored() const { return stored_; }
  // Running partial sum of frozen weights not yet in a completed group.
  const std::optional<Projector>& residual() const { return residual_; }
  const std::optional<Projector>& last_frozen() const { return last_frozen_; }

  // Materialized group-sum projectors including the residual+current group.
  // Throws UnsupportedMode in PKI mode.
  std::vector<Projector> effective_weight_groups() const;

  // Projector-sized weight sets that exist for forward computation.
  std::size_t materialized_count() const;

  // Hashes of stored(), in order.
  std::vector<std::uint64_t> stored_hashes() const;

  EnsemblePlan plan() const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;

 private:
  ProjectorEnsemble() = default;
  double weight_scale(std::size_t session) const;
  const Projector& any_projector() const;

  EnsembleSettings settings_;
  std::size_t session_ = 0;
  std::vector<Projector> stored_;
  std::optional<Projector> residual_;
  std::optional<Projector> current_;
  std::optional<Projector> last_frozen_;
};

// v = sum of scaled branch outputs, accumulated in branch order.
Vector ensemble_forward(const EnsemblePlan& plan, std::span<const double> f, EnsembleCache& cache);
Vector ensemble_forward(const ProjectorEnsemble& ens, std::span<const double> f);

// Accumulates d(dot(v, dv))/d(current weights) into `grads`. Frozen weights
// never receive gradient. No-op when the plan has no trainable branch.
void ensemble_backward(const EnsemblePlan& plan, const EnsembleCache& cache,
                       std::span<const double> dv, ProjectorGrads& grads);

}  // namespace pki
