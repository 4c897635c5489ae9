#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pki/data.hpp"
#include "pki/ensemble.hpp"
#include "pki/memory.hpp"
#include "pki/nn.hpp"

namespace pki {

enum class Reduction { kSum, kMean };

struct TrainConfig {
  std::size_t base_epochs = 100;
  std::size_t incr_iters = 150;  // accepted range [1, 100000]
  std::size_t batch_size = 512;  // clamped to the dataset size
  double base_lr = 0.25;
  double incr_lr = 0.25;
  double lr_min = 0.0;
  double momentum = 0.9;
  EnsembleSettings ensemble;
  std::size_t hidden_dim = 0;  // 0: use the feature dimension
  std::size_t output_dim = 0;  // 0: use the feature dimension
  std::uint64_t seed = 1;
  InitMode init_mode = InitMode::kRandom;
  // Per mini-batch mean for base training; plain sums over new examples and
  // over replayed means for incremental sessions.
  Reduction base_reduction = Reduction::kMean;
  Reduction incr_reduction = Reduction::kSum;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Everything needed to continue the protocol: the unit of checkpointing.
struct ModelState {
  TrainConfig config;
  SessionLayout layout;
  std::size_t dim = 0;
  ProjectorEnsemble ensemble;
  Classifier classifier;
  ClassMeanMemory memory;

  std::size_t session() const { return ensemble.session(); }
};

struct LabeledInput {
  std::span<const double> feature;
  std::size_t label = 0;
};

struct Objective {
  double loss = 0.0;
  double example_loss = 0.0;
  double replay_loss = 0.0;
  std::size_t example_terms = 0;
  std::size_t replay_terms = 0;
  ProjectorGrads projector_grads;
  ClassifierGrads classifier_grads;
};

// Cross-entropy over normalized ensemble embeddings for new examples plus
// replayed class means, with gradients for the current projector and the
// classifier. Each of the two terms is a sum, or a mean under kMean.
// projector_grads is left empty when the plan has no trainable branch.
Objective compute_objective(const EnsemblePlan& plan, const Classifier& classifier,
                            std::span<const LabeledInput> examples,
                            std::span<const LabeledInput> replay, Reduction reduction);

// W * normalize(ensemble(f)) + b.
Vector forward_logits(const ModelState& state, std::span<const double> f);
Vector forward_logits(const ProjectorEnsemble& ensemble, const Classifier& classifier,
                      std::span<const double> f);

// Lowest class id among the maximal logits.
std::size_t predict(const ModelState& state, std::span<const double> f);

// Trains projector 0 and the classifier by shuffled mini-batch SGD with
// cosine-annealed momentum, freezes projector 0, and stores the base class
// means. Classes of d0 must be exactly 0..B-1.
ModelState base_train(const FeatureDataset& d0, const TrainConfig& cfg, const SessionLayout& layout);

// Appends `new_classes` rows initialized like a projector output layer.
// Existing rows are untouched. Throws InvalidArgument for zero.
Classifier expand_classifier(const Classifier& classifier, std::size_t new_classes,
                             std::uint64_t seed);

// One incremental session: new projector, expanded classifier, `incr_iters`
// full-batch steps on the new examples plus every replayed memory mean,
// then freeze and store the new class means. `cfg.ensemble` must match the
// ensemble the state was built with; the other fields may change per session.
ModelState incremental_train(ModelState state, const FeatureDataset& dt, const TrainConfig& cfg);

// Seeds used for session-local randomness.
std::uint64_t projector_seed(const TrainConfig& cfg, std::size_t session);
std::uint64_t classifier_seed(const TrainConfig& cfg, std::size_t session);

}  // namespace pki
