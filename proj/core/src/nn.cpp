#include "pki/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "pki/errors.hpp"
#include "pki/rng.hpp"

namespace pki {
namespace {

void fill_uniform(std::span<double> out, double bound, SplitMix64& rng) {
  for (double& x : out) x = rng.uniform(-bound, bound);
}

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InvalidArgument(std::string(what) + ": expected dimension " + std::to_string(want) +
                          ", got " + std::to_string(got));
  }
}

// out = W x + b
void affine(const Matrix& w, std::span<const double> x, const Vector& b, Vector& out) {
  out.assign(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = &w.data[r * w.cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc + b[r];
  }
}

Vector relu(const Vector& z) {
  Vector a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
  return a;
}

// grads.w += scale * dz x^T; grads.b += scale * dz
void accumulate_outer(Matrix& gw, Vector& gb, std::span<const double> dz, std::span<const double> x,
                      double scale) {
  for (std::size_t r = 0; r < gw.rows; ++r) {
    const double g = scale * dz[r];
    double* row = &gw.data[r * gw.cols];
    for (std::size_t c = 0; c < gw.cols; ++c) row[c] += g * x[c];
    gb[r] += g;
  }
}

// W^T dz
Vector transpose_times(const Matrix& w, std::span<const double> dz) {
  Vector out(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double g = dz[r];
    const double* row = &w.data[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += row[c] * g;
  }
  return out;
}

bool finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::array<std::span<double>, Projector::kTensorCount> Projector::tensors() {
  if (frozen) throw FrozenParameter("projector is frozen; its weights are read-only");
  return {w1.data, b1, w2.data, b2, w3.data, b3};
}

std::array<std::span<const double>, Projector::kTensorCount> Projector::tensors() const {
  return {w1.data, b1, w2.data, b2, w3.data, b3};
}

bool Projector::same_weights(const Projector& other) const {
  return w1 == other.w1 && w2 == other.w2 && w3 == other.w3 && b1 == other.b1 &&
         b2 == other.b2 && b3 == other.b3;
}

Projector zero_projector(std::size_t d, std::size_t h, std::size_t p) {
  Projector proj;
  proj.w1 = Matrix(h, d);
  proj.w2 = Matrix(h, h);
  proj.w3 = Matrix(p, h);
  proj.b1.assign(h, 0.0);
  proj.b2.assign(h, 0.0);
  proj.b3.assign(p, 0.0);
  return proj;
}

Projector init_projector(std::size_t d, std::size_t h, std::size_t p, std::uint64_t seed) {
  if (d == 0 || h == 0 || p == 0) {
    throw InvalidArgument("init_projector: dimensions must be >= 1 (d=" + std::to_string(d) +
                          ", h=" + std::to_string(h) + ", p=" + std::to_string(p) + ")");
  }
  Projector proj = zero_projector(d, h, p);
  SplitMix64 rng(seed);
  fill_uniform(proj.w1.data, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  fill_uniform(proj.w2.data, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  fill_uniform(proj.w3.data, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  return proj;
}

void add_scaled(Projector& acc, const Projector& src, double scale) {
  auto dst = acc.tensors();
  const auto from = src.tensors();
  for (std::size_t t = 0; t < Projector::kTensorCount; ++t) {
    if (dst[t].size() != from[t].size()) {
      throw InvalidArgument("add_scaled: projector shapes differ");
    }
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * from[t][i];
  }
}

Vector mlp_forward(const Projector& proj, std::span<const double> f, ForwardCache& cache) {
  check_dim(f.size(), proj.input_dim(), "mlp_forward");
  cache.input.assign(f.begin(), f.end());
  affine(proj.w1, f, proj.b1, cache.z1);
  const Vector a1 = relu(cache.z1);
  affine(proj.w2, a1, proj.b2, cache.z2);
  const Vector a2 = relu(cache.z2);
  Vector v;
  affine(proj.w3, a2, proj.b3, v);
  cache.d = proj.input_dim();
  cache.h = proj.hidden_dim();
  cache.p = proj.output_dim();
  cache.valid = true;
  return v;
}

Vector mlp_forward(const Projector& proj, std::span<const double> f) {
  ForwardCache cache;
  return mlp_forward(proj, f, cache);
}

Vector mlp_backward(const Projector& proj, const ForwardCache& cache, std::span<const double> dv,
                    ProjectorGrads& grads, double grad_scale) {
  if (!cache.valid) throw InvalidState("mlp_backward: cache is empty");
  if (cache.d != proj.input_dim() || cache.h != proj.hidden_dim() ||
      cache.p != proj.output_dim()) {
    throw InvalidState("mlp_backward: cache was produced by a projector of different shape");
  }
  check_dim(dv.size(), proj.output_dim(), "mlp_backward");
  if (grads.w1.rows != proj.w1.rows || grads.w1.cols != proj.w1.cols ||
      grads.w3.rows != proj.w3.rows) {
    throw InvalidArgument("mlp_backward: gradient buffer shape mismatch");
  }

  const Vector a1 = relu(cache.z1);
  const Vector a2 = relu(cache.z2);

  accumulate_outer(grads.w3, grads.b3, dv, a2, grad_scale);
  Vector dz2 = transpose_times(proj.w3, dv);
  for (std::size_t i = 0; i < dz2.size(); ++i) {
    if (!(cache.z2[i] > 0.0)) dz2[i] = 0.0;
  }
  accumulate_outer(grads.w2, grads.b2, dz2, a1, grad_scale);
  Vector dz1 = transpose_times(proj.w2, dz2);
  for (std::size_t i = 0; i < dz1.size(); ++i) {
    if (!(cache.z1[i] > 0.0)) dz1[i] = 0.0;
  }
  accumulate_outer(grads.w1, grads.b1, dz1, cache.input, grad_scale);
  return transpose_times(proj.w1, dz1);
}

Vector l2_normalize(std::span<const double> v, NormCache& cache) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > kDegenerateNorm)) {
    throw DegenerateVector("l2_normalize: vector norm " + std::to_string(norm) +
                           " is at or below 1e-12; projector output collapsed");
  }
  cache.v.assign(v.begin(), v.end());
  cache.norm = norm;
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

Vector l2_normalize(std::span<const double> v) {
  NormCache cache;
  return l2_normalize(v, cache);
}

Vector l2_normalize_backward(const NormCache& cache, std::span<const double> dvhat) {
  check_dim(dvhat.size(), cache.v.size(), "l2_normalize_backward");
  const double n = cache.norm;
  double dot = 0.0;
  for (std::size_t i = 0; i < dvhat.size(); ++i) dot += cache.v[i] * dvhat[i];
  const double n3 = n * n * n;
  Vector out(dvhat.size());
  for (std::size_t i = 0; i < dvhat.size(); ++i) out[i] = dvhat[i] / n - cache.v[i] * dot / n3;
  return out;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t y) {
  if (y >= logits.size()) {
    throw InvalidArgument("softmax_cross_entropy: label " + std::to_string(y) +
                          " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  CrossEntropy out;
  out.dlogits.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.dlogits[i] = std::exp(logits[i] - mx);
    sum += out.dlogits[i];
  }
  out.loss = std::log(sum) - (logits[y] - mx);
  for (double& p : out.dlogits) p /= sum;
  out.dlogits[y] -= 1.0;
  return out;
}

Classifier init_classifier(std::size_t num_classes, std::size_t p, std::uint64_t seed) {
  if (p == 0) throw InvalidArgument("init_classifier: input dimension must be >= 1");
  Classifier clf;
  clf.w = Matrix(num_classes, p);
  clf.b.assign(num_classes, 0.0);
  SplitMix64 rng(seed);
  fill_uniform(clf.w.data, 1.0 / std::sqrt(static_cast<double>(p)), rng);
  return clf;
}

Vector classifier_forward(const Classifier& clf, std::span<const double> v) {
  check_dim(v.size(), clf.input_dim(), "classifier_forward");
  Vector logits;
  affine(clf.w, v, clf.b, logits);
  return logits;
}

Vector classifier_backward(const Classifier& clf, std::span<const double> v,
                           std::span<const double> dlogits, ClassifierGrads& grads) {
  check_dim(dlogits.size(), clf.num_classes(), "classifier_backward");
  accumulate_outer(grads.w, grads.b, dlogits, v, 1.0);
  return transpose_times(clf.w, dlogits);
}

void sgd_momentum_step(std::span<const std::span<double>> params,
                       std::span<const std::span<const double>> grads, OptimizerState& state,
                       double lr) {
  if (params.size() != grads.size()) {
    throw InvalidArgument("sgd_momentum_step: " + std::to_string(params.size()) +
                          " parameter tensors but " + std::to_string(grads.size()) + " gradients");
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const auto& p : params) state.velocity.emplace_back(p.size(), 0.0);
  }
  if (state.velocity.size() != params.size()) {
    throw InvalidArgument("sgd_momentum_step: velocity buffer count does not match parameters");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || params[t].size() != state.velocity[t].size()) {
      throw InvalidArgument("sgd_momentum_step: shape mismatch in tensor " + std::to_string(t));
    }
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& vel = state.velocity[t];
    for (std::size_t i = 0; i < vel.size(); ++i) {
      vel[i] = state.momentum * vel[i] + grads[t][i];
      params[t][i] -= lr * vel[i];
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total, double lr_max, double lr_min) {
  if (total < 1) throw InvalidArgument("cosine_lr: total must be >= 1");
  if (step > total) {
    throw InvalidArgument("cosine_lr: step " + std::to_string(step) + " exceeds total " +
                          std::to_string(total));
  }
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t h) {
  for (double x : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t hash_projector(const Projector& proj) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : proj.tensors()) h = hash_doubles(t, h);
  return h;
}

bool all_finite(const Projector& proj) {
  for (const auto& t : proj.tensors()) {
    if (!finite(t)) return false;
  }
  return true;
}

bool all_finite(const Classifier& clf) { return finite(clf.w.data) && finite(clf.b); }

}  // namespace pki
