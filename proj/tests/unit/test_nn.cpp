#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "pki/errors.hpp"
#include "pki/nn.hpp"
#include "test_util.hpp"

using namespace pki;
using pki::test::central_diff;
using pki::test::random_projector;
using pki::test::random_vector;
using pki::test::rel_err;

namespace {

bool bytes_equal(const Projector& a, const Projector& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
    if (ta[t].size() != tb[t].size()) return false;
    if (std::memcmp(ta[t].data(), tb[t].data(), ta[t].size() * sizeof(double)) != 0) return false;
  }
  return true;
}

Projector identity_projector(std::size_t n) {
  Projector p = zero_projector(n, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    p.w1(i, i) = 1.0;
    p.w2(i, i) = 1.0;
    p.w3(i, i) = 1.0;
  }
  return p;
}

// Straight-line evaluation of the three-layer composition.
Vector reference_mlp(const Projector& p, const Vector& f) {
  const std::size_t h = p.hidden_dim(), o = p.output_dim(), d = p.input_dim();
  Vector a1(h), a2(h), v(o);
  for (std::size_t i = 0; i < h; ++i) {
    double z = p.b1[i];
    for (std::size_t j = 0; j < d; ++j) z += p.w1.data[i * d + j] * f[j];
    a1[i] = std::max(0.0, z);
  }
  for (std::size_t i = 0; i < h; ++i) {
    double z = p.b2[i];
    for (std::size_t j = 0; j < h; ++j) z += p.w2.data[i * h + j] * a1[j];
    a2[i] = std::max(0.0, z);
  }
  for (std::size_t i = 0; i < o; ++i) {
    double z = p.b3[i];
    for (std::size_t j = 0; j < h; ++j) z += p.w3.data[i * h + j] * a2[j];
    v[i] = z;
  }
  return v;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("init_projector is deterministic and seed sensitive") {
  const Projector a = init_projector(4, 4, 4, 7);
  const Projector b = init_projector(4, 4, 4, 7);
  const Projector c = init_projector(4, 4, 4, 8);
  CHECK(bytes_equal(a, b));
  CHECK_FALSE(a.same_weights(c));
}

TEST_CASE("init_projector respects the fan-in bound and zero biases") {
  const Projector p = init_projector(64, 64, 64, 0);
  for (const auto* m : {&p.w1, &p.w2, &p.w3}) {
    for (double x : m->data) {
      CHECK(x > -0.125);
      CHECK(x < 0.125);
    }
  }
  for (const auto* b : {&p.b1, &p.b2, &p.b3}) {
    for (double x : *b) CHECK(x == 0.0);
  }
}

TEST_CASE("init_projector rejects zero dimensions") {
  CHECK_THROWS_AS(init_projector(0, 4, 4, 1), InvalidArgument);
  CHECK_THROWS_AS(init_projector(4, 0, 4, 1), InvalidArgument);
  CHECK_THROWS_AS(init_projector(4, 4, 0, 1), InvalidArgument);
}

TEST_CASE("mlp_forward special cases") {
  SUBCASE("zero weights give zero output") {
    const Vector v = mlp_forward(zero_projector(3, 5, 2), Vector{1.0, -2.0, 3.0});
    CHECK(v == Vector{0.0, 0.0});
  }
  SUBCASE("identity stack passes non-negative input through") {
    const Vector f{0.5, 0.0, 2.0, 3.25};
    CHECK(mlp_forward(identity_projector(4), f) == f);
  }
  SUBCASE("matches a straight-line recomputation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Projector p = random_projector(6, 7, 5, seed);
      const Vector f = random_vector(6, seed + 100, -2.0, 2.0);
      const Vector got = mlp_forward(p, f);
      const Vector want = reference_mlp(p, f);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(mlp_forward(zero_projector(3, 3, 3), Vector{1.0, 2.0}), InvalidArgument);
  }
}

TEST_CASE("mlp_backward with zero upstream gradient is zero") {
  const Projector p = random_projector(5, 6, 4, 3);
  ForwardCache cache;
  mlp_forward(p, random_vector(5, 4), cache);
  ProjectorGrads g = zero_projector(5, 6, 4);
  const Vector df = mlp_backward(p, cache, Vector(4, 0.0), g);
  for (const auto& t : g.tensors()) {
    for (double x : t) CHECK(x == 0.0);
  }
  for (double x : df) CHECK(x == 0.0);
}

TEST_CASE("mlp_backward matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Projector p = random_projector(8, 8, 8, seed);
    Vector f = random_vector(8, seed + 50, -2.0, 2.0);
    const Vector dv = random_vector(8, seed + 99);
    ForwardCache cache;
    mlp_forward(p, f, cache);
    ProjectorGrads g = zero_projector(8, 8, 8);
    const Vector df = mlp_backward(p, cache, dv, g);

    auto objective = [&] { return dot(mlp_forward(p, f), dv); };
    double worst = 0.0;
    auto params = p.tensors();
    const auto grads = g.tensors();
    for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        worst = std::max(worst, rel_err(grads[t][i], central_diff(params[t], i, objective)));
      }
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      worst = std::max(worst, rel_err(df[i], central_diff(f, i, objective)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("mlp_backward equals closed-form gradients of a positive linear stack") {
  // Positive weights and inputs keep every ReLU in its linear regime, so
  // v = W3 W2 W1 f + W3 W2 b1 + W3 b2 + b3 and the gradients are products.
  const std::size_t n = 3;
  Projector p = random_projector(n, n, n, 11, 0.1, 1.0);
  const Vector f = random_vector(n, 12, 0.1, 1.0);
  const Vector dv = random_vector(n, 13);
  ForwardCache cache;
  mlp_forward(p, f, cache);
  ProjectorGrads g = zero_projector(n, n, n);
  const Vector df = mlp_backward(p, cache, dv, g);

  auto matvec = [&](const Matrix& m, const Vector& x) {
    Vector y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) y[r] += m(r, c) * x[c];
    return y;
  };
  auto tmatvec = [&](const Matrix& m, const Vector& x) {
    Vector y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) y[c] += m(r, c) * x[r];
    return y;
  };
  Vector a1 = matvec(p.w1, f);
  for (std::size_t i = 0; i < n; ++i) a1[i] += p.b1[i];
  Vector a2 = matvec(p.w2, a1);
  for (std::size_t i = 0; i < n; ++i) a2[i] += p.b2[i];
  const Vector g2 = tmatvec(p.w3, dv);  // dL/da2
  const Vector g1 = tmatvec(p.w2, g2);  // dL/da1
  const Vector gf = tmatvec(p.w1, g1);

  for (std::size_t r = 0; r < n; ++r) {
    CHECK(g.b3[r] == doctest::Approx(dv[r]));
    CHECK(g.b2[r] == doctest::Approx(g2[r]));
    CHECK(g.b1[r] == doctest::Approx(g1[r]));
    CHECK(df[r] == doctest::Approx(gf[r]));
    for (std::size_t c = 0; c < n; ++c) {
      CHECK(g.w3(r, c) == doctest::Approx(dv[r] * a2[c]));
      CHECK(g.w2(r, c) == doctest::Approx(g2[r] * a1[c]));
      CHECK(g.w1(r, c) == doctest::Approx(g1[r] * f[c]));
    }
  }
}

TEST_CASE("mlp_backward rejects stale or mismatched caches") {
  const Projector p = random_projector(4, 4, 4, 1);
  ProjectorGrads g = zero_projector(4, 4, 4);
  ForwardCache empty;
  CHECK_THROWS_AS(mlp_backward(p, empty, Vector(4, 1.0), g), InvalidState);

  ForwardCache other;
  mlp_forward(random_projector(4, 5, 4, 2), Vector(4, 1.0), other);
  CHECK_THROWS_AS(mlp_backward(p, other, Vector(4, 1.0), g), InvalidState);
}

TEST_CASE("l2_normalize") {
  SUBCASE("3-4-5 triangle") {
    const Vector v = l2_normalize(Vector{3.0, 4.0});
    CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("unit vector maps to itself") {
    const Vector u{0.0, 1.0, 0.0};
    CHECK(l2_normalize(u) == u);
  }
  SUBCASE("outputs have unit norm") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Vector v = l2_normalize(random_vector(1 + seed % 17, seed, -100.0, 100.0));
      double sq = 0.0;
      for (double x : v) sq += x * x;
      CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-12);
    }
  }
  SUBCASE("degenerate vectors abort") {
    CHECK_THROWS_AS(l2_normalize(Vector{0.0, 0.0}), DegenerateVector);
    CHECK_THROWS_AS(l2_normalize(Vector{1e-13, 0.0}), DegenerateVector);
  }
  SUBCASE("backward matches finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Vector v = random_vector(8, seed);
      const Vector w = random_vector(8, seed + 1000);
      NormCache cache;
      l2_normalize(v, cache);
      const Vector grad = l2_normalize_backward(cache, w);
      auto objective = [&] { return dot(l2_normalize(v), w); };
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(rel_err(grad[i], central_diff(v, i, objective)) < 1e-6);
      }
    }
  }
}

TEST_CASE("softmax_cross_entropy") {
  SUBCASE("uniform logits give ln C") {
    const auto ce = softmax_cross_entropy(Vector(4, 0.3), 2);
    CHECK(ce.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(ce.loss == doctest::Approx(1.386294).epsilon(1e-6));
  }
  SUBCASE("large logits stay finite") {
    const auto ce = softmax_cross_entropy(Vector{1000.0, 0.0}, 0);
    CHECK(std::isfinite(ce.loss));
    CHECK(ce.loss == doctest::Approx(0.0));
    CHECK(std::isfinite(ce.dlogits[0]));
  }
  SUBCASE("loss is non-negative") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Vector logits = random_vector(2 + seed % 9, seed, -50.0, 50.0);
      CHECK(softmax_cross_entropy(logits, seed % logits.size()).loss >= 0.0);
    }
  }
  SUBCASE("gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Vector logits = random_vector(10, seed, -3.0, 3.0);
      const std::size_t y = seed % 10;
      const auto ce = softmax_cross_entropy(logits, y);
      auto objective = [&] { return softmax_cross_entropy(logits, y).loss; };
      for (std::size_t i = 0; i < logits.size(); ++i) {
        CHECK(rel_err(ce.dlogits[i], central_diff(logits, i, objective)) < 1e-6);
      }
    }
  }
  SUBCASE("label out of range") {
    CHECK_THROWS_AS(softmax_cross_entropy(Vector{1.0, 2.0}, 2), InvalidArgument);
  }
}

TEST_CASE("sgd_momentum_step") {
  OptimizerState opt{0.9, 0.1, 0.0, 10, {}};
  SUBCASE("first step") {
    Vector param{1.0};
    const Vector grad{1.0};
    std::span<double> ps[] = {param};
    std::span<const double> gs[] = {grad};
    sgd_momentum_step(ps, gs, opt, 0.1);
    CHECK(param[0] == doctest::Approx(0.9));
    CHECK(opt.velocity[0][0] == 1.0);
  }
  SUBCASE("zero gradient at rest is a fixed point") {
    Vector param{0.25, -3.0};
    const Vector grad{0.0, 0.0};
    std::span<double> ps[] = {param};
    std::span<const double> gs[] = {grad};
    sgd_momentum_step(ps, gs, opt, 0.1);
    CHECK(param == Vector{0.25, -3.0});
  }
  SUBCASE("constant gradient unrolls the recurrence") {
    const double g = 2.0, lr = 0.1, mu = 0.9;
    Vector param{5.0};
    const Vector grad{g};
    std::span<double> ps[] = {param};
    std::span<const double> gs[] = {grad};
    sgd_momentum_step(ps, gs, opt, lr);
    CHECK(5.0 - param[0] == doctest::Approx(lr * g));
    const double before = param[0];
    sgd_momentum_step(ps, gs, opt, lr);
    CHECK(before - param[0] == doctest::Approx(lr * (1.0 + mu) * g));
  }
  SUBCASE("shape mismatch") {
    Vector param{1.0, 2.0};
    const Vector grad{1.0};
    std::span<double> ps[] = {param};
    std::span<const double> gs[] = {grad};
    CHECK_THROWS_AS(sgd_momentum_step(ps, gs, opt, 0.1), InvalidArgument);
  }
  SUBCASE("frozen projector rejects optimizer access") {
    Projector p = init_projector(2, 2, 2, 1);
    p.frozen = true;
    CHECK_THROWS_AS(p.tensors(), FrozenParameter);
  }
}

TEST_CASE("cosine_lr") {
  CHECK(cosine_lr(0, 100, 0.25, 0.0) == 0.25);
  CHECK(cosine_lr(100, 100, 0.25, 0.01) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(cosine_lr(50, 100, 0.25, 0.0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(cosine_lr(1, 1, 0.5, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.25, 0.0), InvalidArgument);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.25, 0.0), InvalidArgument);
  // Monotone non-increasing over the schedule.
  double prev = 1.0;
  for (std::size_t s = 0; s <= 40; ++s) {
    const double lr = cosine_lr(s, 40, 0.25, 0.0);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("classifier backward matches finite differences") {
  Classifier clf;
  clf.w = Matrix(4, 3);
  clf.b = random_vector(4, 5);
  clf.w.data = random_vector(12, 6);
  const Vector v = random_vector(3, 7);
  const std::size_t y = 1;
  const auto ce = softmax_cross_entropy(classifier_forward(clf, v), y);
  ClassifierGrads g;
  g.w = Matrix(4, 3);
  g.b.assign(4, 0.0);
  classifier_backward(clf, v, ce.dlogits, g);
  auto objective = [&] { return softmax_cross_entropy(classifier_forward(clf, v), y).loss; };
  for (std::size_t i = 0; i < clf.w.data.size(); ++i) {
    CHECK(rel_err(g.w.data[i], central_diff(clf.w.data, i, objective)) < 1e-6);
  }
  for (std::size_t i = 0; i < clf.b.size(); ++i) {
    CHECK(rel_err(g.b[i], central_diff(clf.b, i, objective)) < 1e-6);
  }
}
