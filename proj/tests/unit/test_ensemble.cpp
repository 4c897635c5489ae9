#include <doctest.h>

#include <cmath>

#include "pki/ensemble.hpp"
#include "pki/errors.hpp"
#include "test_util.hpp"

using namespace pki;
using pki::test::random_projector;
using pki::test::random_vector;

namespace {

constexpr std::size_t kDim = 6;

// Ensemble at session t with projector j = random_projector(seed + j).
ProjectorEnsemble build(EnsembleSettings settings, std::size_t t, std::uint64_t seed,
                        std::size_t dim = kDim) {
  ProjectorEnsemble ens(settings, random_projector(dim, dim, dim, seed));
  for (std::size_t j = 1; j <= t; ++j) {
    ens.freeze_current();
    ens.add_projector(InitMode::kRandom, 0);
    ens.current() = random_projector(dim, dim, dim, seed + j);
  }
  return ens;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

EnsembleSettings pki_mode(double alpha = 1.0) { return {EnsembleMode::kPki, 3, alpha}; }
EnsembleSettings v1_mode(double alpha = 1.0) { return {EnsembleMode::kPkiV1, 3, alpha}; }
EnsembleSettings v2_mode(std::size_t k, double alpha = 1.0) { return {EnsembleMode::kPkiV2, k, alpha}; }

}  // namespace

TEST_CASE("add_projector") {
  SUBCASE("random init is deterministic in the seed") {
    ProjectorEnsemble a = build(pki_mode(), 1, 3);
    ProjectorEnsemble b = build(pki_mode(), 1, 3);
    a.freeze_current();
    b.freeze_current();
    a.add_projector(InitMode::kRandom, 77);
    b.add_projector(InitMode::kRandom, 77);
    CHECK(a.current().same_weights(b.current()));
  }
  SUBCASE("previous init copies the last frozen projector") {
    for (auto settings : {pki_mode(), v1_mode(0.5), v2_mode(2, 0.5)}) {
      ProjectorEnsemble ens = build(settings, 2, 5);
      const Projector last = ens.current();
      ens.freeze_current();
      ens.add_projector(InitMode::kPrevious, 0);
      CHECK(ens.current().same_weights(last));
      CHECK_FALSE(ens.current().frozen);
    }
  }
  SUBCASE("session counter and frozen list") {
    ProjectorEnsemble ens(pki_mode(), init_projector(4, 4, 4, 1));
    CHECK(ens.session() == 0);
    ens.freeze_current();
    ens.add_projector(InitMode::kRandom, 2);
    CHECK(ens.session() == 1);
    CHECK(ens.stored().size() == 1);
  }
  SUBCASE("unfrozen current is rejected") {
    ProjectorEnsemble ens(pki_mode(), init_projector(4, 4, 4, 1));
    CHECK_THROWS_AS(ens.add_projector(InitMode::kRandom, 2), InvalidState);
  }
}

TEST_CASE("freeze_current") {
  SUBCASE("frozen weights reject optimizer access") {
    ProjectorEnsemble ens = build(pki_mode(), 2, 1);
    ens.freeze_current();
    Projector copy = ens.stored().back();
    CHECK_THROWS_AS(copy.tensors(), FrozenParameter);
    CHECK_THROWS_AS(ens.current(), InvalidState);
  }
  SUBCASE("PKIV-1 adds the current weights into the running sum") {
    const double alpha = 0.5;
    ProjectorEnsemble ens = build(v1_mode(alpha), 2, 10);
    const Projector before = *ens.residual();
    const Projector cur = ens.current();
    ens.freeze_current();
    const auto after = ens.residual()->tensors();
    const auto b = before.tensors();
    const auto c = cur.tensors();
    for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
      for (std::size_t i = 0; i < b[t].size(); ++i) CHECK(after[t][i] == b[t][i] + alpha * c[t][i]);
    }
    CHECK(ens.stored().empty());
  }
  SUBCASE("PKIV-2 with k=3 rolls the residual into a group after three projectors") {
    ProjectorEnsemble ens = build(v2_mode(3), 2, 20);
    CHECK(ens.stored().empty());
    CHECK(ens.residual().has_value());
    ens.freeze_current();  // projectors 0, 1, 2 frozen
    CHECK(ens.stored().size() == 1);
    CHECK_FALSE(ens.residual().has_value());
  }
  SUBCASE("freezing twice is a no-op") {
    ProjectorEnsemble ens = build(pki_mode(), 1, 1);
    ens.freeze_current();
    ens.freeze_current();
    CHECK(ens.stored().size() == 2);
  }
}

TEST_CASE("single projector: all modes agree") {
  const Vector f = random_vector(kDim, 1);
  const Projector p = random_projector(kDim, kDim, kDim, 2);
  const Vector want = mlp_forward(p, f);
  for (auto settings : {pki_mode(), v1_mode(), v2_mode(1), v2_mode(3)}) {
    CHECK(ensemble_forward(ProjectorEnsemble(settings, p), f) == want);
  }
}

TEST_CASE("PKI forward is the alpha-weighted sum of projector outputs") {
  const double alpha = 0.3;
  const ProjectorEnsemble ens = build(pki_mode(alpha), 3, 40);
  const Vector f = random_vector(kDim, 41);
  Vector want = mlp_forward(random_projector(kDim, kDim, kDim, 40), f);
  for (std::size_t j = 1; j <= 3; ++j) {
    const Vector u = mlp_forward(random_projector(kDim, kDim, kDim, 40 + j), f);
    for (std::size_t i = 0; i < kDim; ++i) want[i] += alpha * u[i];
  }
  CHECK(max_abs_diff(ensemble_forward(ens, f), want) < 1e-12);
}

TEST_CASE("PKIV-1 forward uses the alpha-weighted weight sum") {
  const double alpha = 0.7;
  const ProjectorEnsemble ens = build(v1_mode(alpha), 4, 60);
  Projector sum = random_projector(kDim, kDim, kDim, 60);
  for (std::size_t j = 1; j <= 4; ++j) add_scaled(sum, random_projector(kDim, kDim, kDim, 60 + j), alpha);
  const Vector f = random_vector(kDim, 61);
  CHECK(max_abs_diff(ensemble_forward(ens, f), mlp_forward(sum, f)) < 1e-12);
}

TEST_CASE("PKIV-2 forward: disjoint groups of k plus residual") {
  // t = 8, k = 3: groups {0,1,2}, {3,4,5}, residual {6,7,8}.
  const double alpha = 0.9;
  const ProjectorEnsemble ens = build(v2_mode(3, alpha), 8, 80);
  auto w = [&](std::size_t j) { return random_projector(kDim, kDim, kDim, 80 + j); };
  auto group = [&](std::size_t lo, std::size_t hi) {
    Projector g = zero_projector(kDim, kDim, kDim);
    for (std::size_t j = lo; j <= hi; ++j) add_scaled(g, w(j), j == 0 ? 1.0 : alpha);
    return g;
  };
  const Vector f = random_vector(kDim, 81);
  Vector want(kDim, 0.0);
  for (const auto& g : {group(0, 2), group(3, 5), group(6, 8)}) {
    const Vector u = mlp_forward(g, f);
    for (std::size_t i = 0; i < kDim; ++i) want[i] += u[i];
  }
  CHECK(max_abs_diff(ensemble_forward(ens, f), want) < 1e-12);
}

TEST_CASE("mode-equivalence laws") {
  for (std::size_t t : {1, 3, 8}) {
    for (std::uint64_t draw = 0; draw < 50; ++draw) {
      const std::uint64_t seed = 1000 * t + 10 * draw;
      const Vector f = random_vector(kDim, seed + 7, -3.0, 3.0);
      const Vector pki = ensemble_forward(build(pki_mode(), t, seed), f);
      const Vector v1 = ensemble_forward(build(v1_mode(), t, seed), f);
      const Vector v2_k1 = ensemble_forward(build(v2_mode(1), t, seed), f);
      const Vector v2_big = ensemble_forward(build(v2_mode(t + 1), t, seed), f);
      CHECK(max_abs_diff(v2_k1, pki) < 1e-12);
      CHECK(max_abs_diff(v2_big, v1) < 1e-12);
      // The construction makes both identities exact.
      CHECK(v2_k1 == pki);
      CHECK(v2_big == v1);
    }
  }
}

TEST_CASE("effective_weight_groups") {
  CHECK(build(v2_mode(3), 8, 1).effective_weight_groups().size() == 3);
  CHECK(build(v1_mode(), 8, 1).effective_weight_groups().size() == 1);
  CHECK(build(v2_mode(4), 3, 1).effective_weight_groups().size() == 1);
  CHECK_THROWS_AS(build(pki_mode(), 2, 1).effective_weight_groups(), UnsupportedMode);
  for (std::size_t k = 1; k <= 5; ++k) {
    for (std::size_t t = 0; t <= 9; ++t) {
      CHECK(build(v2_mode(k), t, 2).effective_weight_groups().size() == t / k + 1);
    }
  }
}

TEST_CASE("storage law") {
  for (std::size_t t = 0; t <= 8; ++t) {
    CHECK(build(pki_mode(), t, 3).materialized_count() == t + 1);
    CHECK(build(v1_mode(), t, 3).materialized_count() == (t == 0 ? 1u : 2u));
    CHECK(build(v2_mode(3), t, 3).materialized_count() <= t / 3 + 2);
  }
  CHECK(build(pki_mode(), 8, 3).materialized_count() == 9);
}

TEST_CASE("frozen storage is immutable across later sessions") {
  for (auto settings : {pki_mode(), v2_mode(2, 0.5)}) {
    ProjectorEnsemble ens = build(settings, 3, 9);
    ens.freeze_current();
    const auto hashes = ens.stored_hashes();
    for (std::size_t s = 0; s < 4; ++s) {
      ens.add_projector(InitMode::kRandom, 100 + s);
      for (auto& x : ens.current().w1.data) x += 1.0;  // training on the current projector
      ens.freeze_current();
      const auto now = ens.stored_hashes();
      REQUIRE(now.size() >= hashes.size());
      for (std::size_t i = 0; i < hashes.size(); ++i) CHECK(now[i] == hashes[i]);
    }
  }
}

TEST_CASE("gradient isolation: only the current projector receives gradient") {
  for (auto settings : {pki_mode(0.6), v1_mode(0.6), v2_mode(2, 0.6)}) {
    ProjectorEnsemble ens = build(settings, 3, 70);
    const Vector f = random_vector(kDim, 71);
    const Vector dv = random_vector(kDim, 72);

    const EnsemblePlan plan = ens.plan();
    EnsembleCache cache;
    ensemble_forward(plan, f, cache);
    ProjectorGrads g = zero_projector(kDim, kDim, kDim);
    ensemble_backward(plan, cache, dv, g);

    auto objective = [&] {
      const Vector v = ensemble_forward(ens, f);
      double s = 0.0;
      for (std::size_t i = 0; i < kDim; ++i) s += v[i] * dv[i];
      return s;
    };
    // Analytic gradient w.r.t. the current weights matches finite differences.
    auto params = ens.current().tensors();
    const auto grads = g.tensors();
    for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        CHECK(test::rel_err(grads[t][i], test::central_diff(params[t], i, objective)) < 1e-4);
      }
    }
    // Frozen weights do influence the output but have no gradient slot.
    const Vector before = ensemble_forward(ens, f);
    ProjectorEnsemble perturbed = build(settings, 3, 70);
    if (settings.mode == EnsembleMode::kPki) {
      Projector p0 = perturbed.stored().front();
      p0.frozen = false;
      p0.b3[0] += 1e-3;
      CHECK(mlp_forward(p0, f)[0] != mlp_forward(perturbed.stored().front(), f)[0]);
    }
    CHECK(ensemble_forward(perturbed, f) == before);
  }
}

TEST_CASE("alpha near zero leaves the base projector alone in PKI mode") {
  const ProjectorEnsemble ens = build(pki_mode(1e-12), 4, 90);
  const Vector f = random_vector(kDim, 91);
  const Vector base = mlp_forward(random_projector(kDim, kDim, kDim, 90), f);
  CHECK(max_abs_diff(ensemble_forward(ens, f), base) < 1e-9);
}

TEST_CASE("settings validation") {
  CHECK_THROWS_AS(ProjectorEnsemble(pki_mode(0.0), init_projector(2, 2, 2, 1)), InvalidArgument);
  CHECK_THROWS_AS(ProjectorEnsemble(pki_mode(1.5), init_projector(2, 2, 2, 1)), InvalidArgument);
  CHECK_THROWS_AS(ProjectorEnsemble(v2_mode(0), init_projector(2, 2, 2, 1)), InvalidArgument);
  CHECK_THROWS_AS(ensemble_forward(build(pki_mode(), 1, 1), Vector(kDim + 1, 0.0)), InvalidArgument);
  CHECK(parse_ensemble_mode("pkiv2") == EnsembleMode::kPkiV2);
  CHECK_THROWS_AS(parse_ensemble_mode("pkiv3"), InvalidArgument);
}
