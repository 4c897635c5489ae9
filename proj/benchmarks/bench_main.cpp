#include <benchmark/benchmark.h>

#include "pki/ensemble.hpp"
#include "pki/trainer.hpp"

using namespace pki;

namespace {

Vector input(std::size_t d) {
  Vector f(d);
  for (std::size_t i = 0; i < d; ++i) f[i] = 0.01 * static_cast<double>(i % 17) - 0.08;
  return f;
}

ProjectorEnsemble grown(EnsembleSettings s, std::size_t t, std::size_t d) {
  ProjectorEnsemble ens(s, init_projector(d, d, d, 1));
  for (std::size_t j = 1; j <= t; ++j) {
    ens.freeze_current();
    ens.add_projector(InitMode::kRandom, j + 1);
  }
  return ens;
}

void BM_MlpForward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Projector p = init_projector(d, d, d, 1);
  const Vector f = input(d);
  ForwardCache cache;
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(p, f, cache));
}
BENCHMARK(BM_MlpForward)->Arg(32)->Arg(64)->Arg(512);

void BM_MlpBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Projector p = init_projector(d, d, d, 1);
  const Vector f = input(d);
  ForwardCache cache;
  mlp_forward(p, f, cache);
  ProjectorGrads g = zero_projector(d, d, d);
  const Vector dv(d, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_backward(p, cache, dv, g));
}
BENCHMARK(BM_MlpBackward)->Arg(32)->Arg(64)->Arg(512);

// Forward cost at the last session of an 8-session run, per mode.
void BM_EnsembleForward(benchmark::State& state) {
  const auto mode = static_cast<EnsembleMode>(state.range(0));
  const std::size_t d = 64;
  const ProjectorEnsemble ens = grown({mode, 3, 1.0}, 8, d);
  const EnsemblePlan plan = ens.plan();
  const Vector f = input(d);
  EnsembleCache cache;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_forward(plan, f, cache));
  state.SetLabel(to_string(mode));
}
BENCHMARK(BM_EnsembleForward)->DenseRange(0, 2);

// One full-batch incremental step: 25 new examples plus 60 replayed means.
void BM_IncrementalObjective(benchmark::State& state) {
  const auto mode = static_cast<EnsembleMode>(state.range(0));
  const std::size_t d = 64;
  const ProjectorEnsemble ens = grown({mode, 3, 1.0}, 4, d);
  const Classifier clf = init_classifier(65, d, 3);
  std::vector<Vector> feats;
  for (std::size_t i = 0; i < 85; ++i) {
    Vector f = input(d);
    f[i % d] += 1.0;
    feats.push_back(std::move(f));
  }
  std::vector<LabeledInput> examples;
  std::vector<LabeledInput> replay;
  for (std::size_t i = 0; i < 25; ++i) examples.push_back({feats[i], 60 + i % 5});
  for (std::size_t c = 0; c < 60; ++c) replay.push_back({feats[25 + c], c});
  const EnsemblePlan plan = ens.plan();
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_objective(plan, clf, examples, replay, Reduction::kSum));
  }
  state.SetLabel(to_string(mode));
}
BENCHMARK(BM_IncrementalObjective)->DenseRange(0, 2);

}  // namespace

BENCHMARK_MAIN();
