#include "pki/ensemble.hpp"

#include <cmath>

#include "pki/errors.hpp"

namespace pki {
namespace {

Projector thawed(const Projector& p) {
  Projector out = p;
  out.frozen = false;
  return out;
}

// base + scale * cur, or scale * cur when there is no base. Freezing and
// forward materialization both go through here so they agree bit-for-bit.
Projector combine(const std::optional<Projector>& base, const Projector& cur, double scale) {
  if (base) {
    Projector out = thawed(*base);
    add_scaled(out, cur, scale);
    return out;
  }
  Projector out = thawed(cur);
  for (auto t : out.tensors()) {
    for (double& x : t) x *= scale;
  }
  return out;
}

void check_same_shape(const Projector& a, const Projector& b) {
  if (a.input_dim() != b.input_dim() || a.hidden_dim() != b.hidden_dim() ||
      a.output_dim() != b.output_dim()) {
    throw InvalidArgument("ensemble: all projectors must share (d, h, p)");
  }
}

}  // namespace

std::string to_string(EnsembleMode mode) {
  switch (mode) {
    case EnsembleMode::kPki: return "pki";
    case EnsembleMode::kPkiV1: return "pkiv1";
    case EnsembleMode::kPkiV2: return "pkiv2";
  }
  return "?";
}

std::string to_string(InitMode mode) { return mode == InitMode::kRandom ? "random" : "previous"; }

EnsembleMode parse_ensemble_mode(const std::string& s) {
  if (s == "pki") return EnsembleMode::kPki;
  if (s == "pkiv1") return EnsembleMode::kPkiV1;
  if (s == "pkiv2") return EnsembleMode::kPkiV2;
  throw InvalidArgument("unknown ensemble mode '" + s + "' (expected pki, pkiv1 or pkiv2)");
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "random") return InitMode::kRandom;
  if (s == "previous") return InitMode::kPrevious;
  throw InvalidArgument("unknown init mode '" + s + "' (expected random or previous)");
}

void EnsembleSettings::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("ensemble: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  if (mode == EnsembleMode::kPkiV2 && k < 1) throw InvalidArgument("ensemble: k must be >= 1");
}

ProjectorEnsemble::ProjectorEnsemble(EnsembleSettings settings, Projector base)
    : settings_(settings), current_(thawed(base)) {
  settings_.validate();
}

ProjectorEnsemble ProjectorEnsemble::restore(EnsembleSettings settings, std::size_t session,
                                             std::vector<Projector> stored,
                                             std::optional<Projector> residual,
                                             std::optional<Projector> current,
                                             std::optional<Projector> last_frozen) {
  settings.validate();
  ProjectorEnsemble ens;
  ens.settings_ = settings;
  ens.session_ = session;
  ens.stored_ = std::move(stored);
  for (auto& p : ens.stored_) p.frozen = true;
  ens.residual_ = std::move(residual);
  if (ens.residual_) ens.residual_->frozen = true;
  ens.current_ = std::move(current);
  if (ens.current_) ens.current_->frozen = false;
  ens.last_frozen_ = std::move(last_frozen);
  if (ens.last_frozen_) ens.last_frozen_->frozen = true;

  const std::size_t frozen_sessions = ens.current_ ? session : session + 1;
  switch (settings.mode) {
    case EnsembleMode::kPki:
      if (ens.residual_ || ens.stored_.size() != frozen_sessions) {
        throw InvalidArgument("ensemble restore: PKI needs one stored projector per frozen session");
      }
      break;
    case EnsembleMode::kPkiV1:
      if (!ens.stored_.empty() || (frozen_sessions > 0) != ens.residual_.has_value()) {
        throw InvalidArgument("ensemble restore: PKIV-1 stores exactly one running sum");
      }
      break;
    case EnsembleMode::kPkiV2:
      if (ens.stored_.size() != frozen_sessions / settings.k ||
          (frozen_sessions % settings.k != 0) != ens.residual_.has_value()) {
        throw InvalidArgument("ensemble restore: PKIV-2 group sums inconsistent with session and k");
      }
      break;
  }
  if (!ens.current_ && frozen_sessions == 0) {
    throw InvalidArgument("ensemble restore: no projectors");
  }
  const Projector& ref = ens.any_projector();
  for (const auto& p : ens.stored_) check_same_shape(ref, p);
  if (ens.residual_) check_same_shape(ref, *ens.residual_);
  if (ens.current_) check_same_shape(ref, *ens.current_);
  return ens;
}

Projector& ProjectorEnsemble::current() {
  if (!current_) throw InvalidState("ensemble: no trainable projector (current one is frozen)");
  return *current_;
}

const Projector& ProjectorEnsemble::current() const {
  if (!current_) throw InvalidState("ensemble: no trainable projector (current one is frozen)");
  return *current_;
}

double ProjectorEnsemble::weight_scale(std::size_t session) const {
  return session == 0 ? 1.0 : settings_.alpha;
}

const Projector& ProjectorEnsemble::any_projector() const {
  if (current_) return *current_;
  if (residual_) return *residual_;
  return stored_.front();
}

std::size_t ProjectorEnsemble::input_dim() const { return any_projector().input_dim(); }
std::size_t ProjectorEnsemble::output_dim() const { return any_projector().output_dim(); }

void ProjectorEnsemble::add_projector(InitMode init, std::uint64_t seed) {
  if (current_) {
    throw InvalidState("add_projector: current projector of session " + std::to_string(session_) +
                       " has not been frozen");
  }
  const Projector& shape = any_projector();
  if (init == InitMode::kRandom) {
    current_ = init_projector(shape.input_dim(), shape.hidden_dim(), shape.output_dim(), seed);
  } else if (settings_.mode == EnsembleMode::kPki) {
    current_ = thawed(stored_.back());
  } else {
    if (!last_frozen_) throw InvalidState("add_projector: previous projector is not available");
    current_ = thawed(*last_frozen_);
  }
  last_frozen_.reset();
  ++session_;
}

void ProjectorEnsemble::freeze_current() {
  if (!current_) return;
  Projector cur = std::move(*current_);
  current_.reset();
  cur.frozen = true;
  if (settings_.mode == EnsembleMode::kPki) {
    stored_.push_back(std::move(cur));
    return;
  }
  residual_ = combine(residual_, cur, weight_scale(session_));
  residual_->frozen = true;
  last_frozen_ = std::move(cur);
  if (settings_.mode == EnsembleMode::kPkiV2 && (session_ + 1) % settings_.k == 0) {
    stored_.push_back(std::move(*residual_));
    residual_.reset();
  }
}

std::vector<Projector> ProjectorEnsemble::effective_weight_groups() const {
  if (settings_.mode == EnsembleMode::kPki) {
    throw UnsupportedMode("effective_weight_groups: PKI mode keeps separate projectors, not group sums");
  }
  std::vector<Projector> groups;
  for (const auto& g : stored_) groups.push_back(thawed(g));
  if (current_) {
    groups.push_back(combine(residual_, *current_, weight_scale(session_)));
  } else if (residual_) {
    groups.push_back(thawed(*residual_));
  }
  return groups;
}

std::size_t ProjectorEnsemble::materialized_count() const {
  return stored_.size() + (residual_ ? 1 : 0) + (current_ ? 1 : 0);
}

std::vector<std::uint64_t> ProjectorEnsemble::stored_hashes() const {
  std::vector<std::uint64_t> out;
  out.reserve(stored_.size());
  for (const auto& p : stored_) out.push_back(hash_projector(p));
  return out;
}

EnsemblePlan ProjectorEnsemble::plan() const {
  EnsemblePlan plan;
  if (settings_.mode == EnsembleMode::kPki) {
    for (std::size_t j = 0; j < stored_.size(); ++j) {
      plan.branches.push_back({&stored_[j], weight_scale(j)});
    }
    if (current_) {
      plan.trainable_branch = plan.branches.size();
      plan.trainable_weight_scale = 1.0;
      plan.branches.push_back({&*current_, weight_scale(session_)});
    }
    return plan;
  }
  for (const auto& g : stored_) plan.branches.push_back({&g, 1.0});
  if (current_) {
    plan.owned = std::make_unique<Projector>(combine(residual_, *current_, weight_scale(session_)));
    plan.trainable_branch = plan.branches.size();
    plan.trainable_weight_scale = weight_scale(session_);
    plan.branches.push_back({plan.owned.get(), 1.0});
  } else if (residual_) {
    plan.branches.push_back({&*residual_, 1.0});
  }
  return plan;
}

Vector ensemble_forward(const EnsemblePlan& plan, std::span<const double> f, EnsembleCache& cache) {
  if (plan.branches.empty()) throw InvalidState("ensemble_forward: ensemble has no projectors");
  cache.branches.resize(plan.branches.size());
  Vector v(plan.branches.front().weights->output_dim(), 0.0);
  for (std::size_t b = 0; b < plan.branches.size(); ++b) {
    const auto& branch = plan.branches[b];
    const Vector u = mlp_forward(*branch.weights, f, cache.branches[b]);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += branch.output_scale * u[i];
  }
  return v;
}

Vector ensemble_forward(const ProjectorEnsemble& ens, std::span<const double> f) {
  EnsembleCache cache;
  return ensemble_forward(ens.plan(), f, cache);
}

void ensemble_backward(const EnsemblePlan& plan, const EnsembleCache& cache,
                       std::span<const double> dv, ProjectorGrads& grads) {
  if (plan.trainable_branch == EnsemblePlan::kNoTrainable) return;
  if (cache.branches.size() != plan.branches.size()) {
    throw InvalidState("ensemble_backward: cache does not match plan");
  }
  const auto& branch = plan.branches[plan.trainable_branch];
  const double scale = branch.output_scale * plan.trainable_weight_scale;
  mlp_backward(*branch.weights, cache.branches[plan.trainable_branch], dv, grads, scale);
}

}  // namespace pki
