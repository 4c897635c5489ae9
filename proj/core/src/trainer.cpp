#include "pki/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pki/errors.hpp"
#include "pki/rng.hpp"

namespace pki {
namespace {

constexpr std::size_t kMaxIncrIters = 100000;

// Current-projector tensors followed by classifier tensors.
struct TrainableSet {
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
};

TrainableSet trainable(Projector& current, Classifier& clf, const Objective& obj) {
  TrainableSet set;
  for (auto t : current.tensors()) set.params.push_back(t);
  for (auto t : clf.tensors()) set.params.push_back(t);
  for (auto t : obj.projector_grads.tensors()) set.grads.push_back(t);
  for (auto t : obj.classifier_grads.tensors()) set.grads.push_back(t);
  return set;
}

void step(ModelState& state, const Objective& obj, OptimizerState& opt, double lr) {
  auto set = trainable(state.ensemble.current(), state.classifier, obj);
  sgd_momentum_step(set.params, set.grads, opt, lr);
}

// Class ids of `ds` must be exactly first..first+count-1.
std::size_t check_dense_classes(const FeatureDataset& ds, std::size_t first, const char* who) {
  const auto classes = ds.classes();
  std::size_t expect = first;
  for (ClassId c : classes) {
    if (c != expect) {
      throw InvalidState(std::string(who) + ": expected class ids to continue densely from " +
                         std::to_string(first) + ", found class " + std::to_string(c));
    }
    ++expect;
  }
  return classes.size();
}

}  // namespace

void TrainConfig::validate() const {
  ensemble.validate();
  if (batch_size == 0) throw InvalidArgument("config: batch_size must be >= 1");
  if (incr_iters < 1 || incr_iters > kMaxIncrIters) {
    throw InvalidArgument("config: incr_iters must lie in [1, 100000]");
  }
  if (!(base_lr > 0.0) || !(incr_lr > 0.0)) throw InvalidArgument("config: learning rates must be > 0");
  if (lr_min < 0.0 || lr_min > base_lr || lr_min > incr_lr) {
    throw InvalidArgument("config: lr_min must lie in [0, min(base_lr, incr_lr)]");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("config: momentum must lie in [0, 1)");
}

std::uint64_t projector_seed(const TrainConfig& cfg, std::size_t session) {
  return derive_seed(cfg.seed, RngStream::kProjectorInit, session);
}

std::uint64_t classifier_seed(const TrainConfig& cfg, std::size_t session) {
  return derive_seed(cfg.seed, RngStream::kClassifierInit, session);
}

Objective compute_objective(const EnsemblePlan& plan, const Classifier& classifier,
                            std::span<const LabeledInput> examples,
                            std::span<const LabeledInput> replay, Reduction reduction) {
  Objective obj;
  if (plan.trainable_branch != EnsemblePlan::kNoTrainable) {
    const Projector& w = *plan.branches[plan.trainable_branch].weights;
    obj.projector_grads = zero_projector(w.input_dim(), w.hidden_dim(), w.output_dim());
  }
  obj.classifier_grads.w = Matrix(classifier.num_classes(), classifier.input_dim());
  obj.classifier_grads.b.assign(classifier.num_classes(), 0.0);

  EnsembleCache cache;
  NormCache norm;
  auto accumulate = [&](std::span<const LabeledInput> inputs, double& term) {
    const double weight =
        reduction == Reduction::kMean && !inputs.empty() ? 1.0 / static_cast<double>(inputs.size()) : 1.0;
    for (const auto& in : inputs) {
      const Vector v = ensemble_forward(plan, in.feature, cache);
      const Vector vhat = l2_normalize(v, norm);
      const Vector logits = classifier_forward(classifier, vhat);
      CrossEntropy ce = softmax_cross_entropy(logits, in.label);
      term += weight * ce.loss;
      if (weight != 1.0) {
        for (double& g : ce.dlogits) g *= weight;
      }
      const Vector dvhat = classifier_backward(classifier, vhat, ce.dlogits, obj.classifier_grads);
      if (plan.trainable_branch != EnsemblePlan::kNoTrainable) {
        const Vector dv = l2_normalize_backward(norm, dvhat);
        ensemble_backward(plan, cache, dv, obj.projector_grads);
      }
    }
  };
  accumulate(examples, obj.example_loss);
  accumulate(replay, obj.replay_loss);
  obj.example_terms = examples.size();
  obj.replay_terms = replay.size();
  obj.loss = obj.example_loss + obj.replay_loss;
  return obj;
}

Vector forward_logits(const ProjectorEnsemble& ensemble, const Classifier& classifier,
                      std::span<const double> f) {
  return classifier_forward(classifier, l2_normalize(ensemble_forward(ensemble, f)));
}

Vector forward_logits(const ModelState& state, std::span<const double> f) {
  return forward_logits(state.ensemble, state.classifier, f);
}

std::size_t predict(const ModelState& state, std::span<const double> f) {
  const Vector logits = forward_logits(state, f);
  // max_element returns the first maximum, i.e. the lowest class id.
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

ModelState base_train(const FeatureDataset& d0, const TrainConfig& cfg, const SessionLayout& layout) {
  cfg.validate();
  layout.validate();
  if (d0.empty()) throw InvalidArgument("base_train: base dataset is empty");
  const std::size_t num_classes = check_dense_classes(d0, 0, "base_train");
  const std::size_t d = d0.dim;
  const std::size_t h = cfg.hidden_dim ? cfg.hidden_dim : d;
  const std::size_t p = cfg.output_dim ? cfg.output_dim : d;

  ModelState state{cfg, layout, d,
                   ProjectorEnsemble(cfg.ensemble, init_projector(d, h, p, projector_seed(cfg, 0))),
                   init_classifier(num_classes, p, classifier_seed(cfg, 0)),
                   {}};

  const std::size_t n = d0.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;
  const std::size_t total_steps = cfg.base_epochs * batches_per_epoch;

  OptimizerState opt{cfg.momentum, cfg.base_lr, cfg.lr_min, std::max<std::size_t>(total_steps, 1), {}};
  std::vector<std::size_t> order(n);
  std::vector<LabeledInput> inputs;
  inputs.reserve(batch);
  std::size_t step_index = 0;
  for (std::size_t epoch = 0; epoch < cfg.base_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(cfg.seed, RngStream::kShuffle, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < n; start += batch) {
      inputs.clear();
      for (std::size_t i = start; i < std::min(start + batch, n); ++i) {
        inputs.push_back({d0.features[order[i]], d0.labels[order[i]]});
      }
      const EnsemblePlan plan = state.ensemble.plan();
      const Objective obj = compute_objective(plan, state.classifier, inputs, {}, cfg.base_reduction);
      const double lr = cosine_lr(step_index, opt.total_steps, opt.lr_max, opt.lr_min);
      step(state, obj, opt, lr);
      ++step_index;
    }
  }

  if (!all_finite(state.ensemble.current()) || !all_finite(state.classifier)) {
    throw DegenerateVector("base_train: parameters became non-finite");
  }
  state.ensemble.freeze_current();
  state.memory = state.memory.updated(class_means(d0), 0);
  return state;
}

Classifier expand_classifier(const Classifier& classifier, std::size_t new_classes,
                             std::uint64_t seed) {
  if (new_classes == 0) throw InvalidArgument("expand_classifier: new_classes must be >= 1");
  const Classifier rows = init_classifier(new_classes, classifier.input_dim(), seed);
  Classifier out = classifier;
  out.w.rows += new_classes;
  out.w.data.insert(out.w.data.end(), rows.w.data.begin(), rows.w.data.end());
  out.b.insert(out.b.end(), rows.b.begin(), rows.b.end());
  return out;
}

ModelState incremental_train(ModelState state, const FeatureDataset& dt, const TrainConfig& cfg) {
  cfg.validate();
  if (!(cfg.ensemble == state.ensemble.settings())) {
    throw InvalidState("incremental_train: ensemble mode/k/alpha differ from the trained state");
  }
  if (state.ensemble.has_current()) {
    throw InvalidState("incremental_train: previous session's projector is not frozen");
  }
  if (dt.empty()) throw InvalidArgument("incremental_train: session dataset is empty");
  if (dt.dim != state.dim) {
    throw InvalidArgument("incremental_train: feature dimension " + std::to_string(dt.dim) +
                          " differs from model dimension " + std::to_string(state.dim));
  }
  for (ClassId c : dt.classes()) {
    if (state.memory.contains(c)) {
      throw InvalidState("incremental_train: class " + std::to_string(c) +
                         " was already learned in an earlier session");
    }
  }
  const std::size_t new_classes =
      check_dense_classes(dt, state.classifier.num_classes(), "incremental_train");

  state.config = cfg;
  const std::size_t session = state.ensemble.session() + 1;
  state.ensemble.add_projector(cfg.init_mode, projector_seed(cfg, session));
  state.classifier = expand_classifier(state.classifier, new_classes, classifier_seed(cfg, session));

  std::vector<LabeledInput> examples;
  examples.reserve(dt.size());
  for (std::size_t i = 0; i < dt.size(); ++i) examples.push_back({dt.features[i], dt.labels[i]});
  std::vector<LabeledInput> replay;
  replay.reserve(state.memory.size());
  for (const auto& [c, entry] : state.memory.entries()) replay.push_back({entry.mean, c});

  OptimizerState opt{cfg.momentum, cfg.incr_lr, cfg.lr_min, cfg.incr_iters, {}};
  for (std::size_t it = 0; it < cfg.incr_iters; ++it) {
    const EnsemblePlan plan = state.ensemble.plan();
    const Objective obj = compute_objective(plan, state.classifier, examples, replay, cfg.incr_reduction);
    step(state, obj, opt, cosine_lr(it, opt.total_steps, opt.lr_max, opt.lr_min));
  }
  if (!all_finite(state.ensemble.current()) || !all_finite(state.classifier)) {
    throw DegenerateVector("incremental_train: parameters became non-finite in session " +
                           std::to_string(session));
  }

  state.ensemble.freeze_current();
  state.memory = state.memory.updated(class_means(dt), session);
  return state;
}

}  // namespace pki
