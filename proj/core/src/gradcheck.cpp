#include "pki/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pki/errors.hpp"
#include "pki/rng.hpp"

namespace pki {
namespace {

Projector random_projector(std::size_t d, std::size_t h, std::size_t p, SplitMix64& rng) {
  Projector proj = zero_projector(d, h, p);
  for (auto t : proj.tensors()) {
    for (double& x : t) x = rng.uniform(-1.0, 1.0);
  }
  return proj;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  if (o.new_classes == 0 || o.new_classes > o.classes) {
    throw InvalidArgument("gradcheck: need 1 <= new_classes <= classes");
  }
  SplitMix64 rng(o.seed);

  ProjectorEnsemble ens(o.ensemble, random_projector(o.d, o.h, o.p, rng));
  for (std::size_t t = 0; t < o.session; ++t) {
    ens.freeze_current();
    ens.add_projector(InitMode::kRandom, 0);
    ens.current() = random_projector(o.d, o.h, o.p, rng);
  }
  Classifier clf;
  clf.w = Matrix(o.classes, o.p);
  clf.b.assign(o.classes, 0.0);
  for (double& x : clf.w.data) x = rng.uniform(-1.0, 1.0);
  for (double& x : clf.b) x = rng.uniform(-0.5, 0.5);

  std::vector<Vector> storage;
  std::vector<std::size_t> labels;
  const std::size_t old_classes = o.classes - o.new_classes;
  for (std::size_t c = old_classes; c < o.classes; ++c) {
    for (std::size_t i = 0; i < o.examples_per_class; ++i) {
      Vector f(o.d);
      for (double& x : f) x = rng.uniform(-2.0, 2.0);
      storage.push_back(std::move(f));
      labels.push_back(c);
    }
  }
  const std::size_t num_examples = storage.size();
  for (std::size_t c = 0; c < old_classes; ++c) {
    Vector m(o.d);
    for (double& x : m) x = rng.uniform(-2.0, 2.0);
    storage.push_back(std::move(m));
    labels.push_back(c);
  }
  std::vector<LabeledInput> examples, replay;
  for (std::size_t i = 0; i < storage.size(); ++i) {
    (i < num_examples ? examples : replay).push_back({storage[i], labels[i]});
  }

  auto loss_at = [&]() {
    return compute_objective(ens.plan(), clf, examples, replay, o.reduction).loss;
  };
  const Objective analytic = compute_objective(ens.plan(), clf, examples, replay, o.reduction);

  static constexpr const char* kProjectorNames[] = {"projector.W1", "projector.b1", "projector.W2",
                                                    "projector.b2", "projector.W3", "projector.b3"};
  std::vector<std::pair<std::string, std::pair<std::span<double>, std::span<const double>>>> targets;
  {
    auto params = ens.current().tensors();
    const auto grads = analytic.projector_grads.tensors();
    for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
      targets.push_back({kProjectorNames[t], {params[t], grads[t]}});
    }
    auto cparams = clf.tensors();
    const auto cgrads = analytic.classifier_grads.tensors();
    targets.push_back({"classifier.W", {cparams[0], cgrads[0]}});
    targets.push_back({"classifier.b", {cparams[1], cgrads[1]}});
  }

  GradcheckReport report;
  for (auto& [name, tensor] : targets) {
    auto [param, grad] = tensor;
    TensorCheck check{name, param.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + o.step;
      const double up = loss_at();
      param[i] = saved - o.step;
      const double down = loss_at();
      param[i] = saved;
      const double numeric = (up - down) / (2.0 * o.step);
      check.max_rel_error = std::max(check.max_rel_error, relative_error(grad[i], numeric, o.floor));
      check.max_abs_error = std::max(check.max_abs_error, std::abs(grad[i] - numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(check);
  }
  report.passed = std::all_of(report.tensors.begin(), report.tensors.end(),
                              [&](const TensorCheck& c) { return c.max_rel_error < o.tolerance; });
  return report;
}

}  // namespace pki
