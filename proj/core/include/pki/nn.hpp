#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pki {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

// Three-layer MLP: v = W3 relu(W2 relu(W1 f + b1) + b2) + b3.
// Shapes: W1 h x d, W2 h x h, W3 p x h.
struct Projector {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
  // Set when the projector is moved into frozen storage. Mutable tensor
  // access on a frozen projector throws FrozenParameter.
  bool frozen = false;

  static constexpr std::size_t kTensorCount = 6;

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t output_dim() const { return w3.rows; }

  // W1, b1, W2, b2, W3, b3.
  std::array<std::span<double>, kTensorCount> tensors();
  std::array<std::span<const double>, kTensorCount> tensors() const;

  // Weights only; the frozen flag is bookkeeping.
  bool same_weights(const Projector& other) const;
};

// Gradient container with the projector's shapes. Never frozen.
using ProjectorGrads = Projector;

// Zero-valued projector of the given shape.
Projector zero_projector(std::size_t d, std::size_t h, std::size_t p);

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, zero biases.
// Deterministic in (dims, seed). Throws InvalidArgument on a zero dimension.
Projector init_projector(std::size_t d, std::size_t h, std::size_t p, std::uint64_t seed);

// acc += scale * src, elementwise over all six tensors. Shapes must match.
void add_scaled(Projector& acc, const Projector& src, double scale);

// Pre-activations kept for the backward pass.
struct ForwardCache {
  Vector input;
  Vector z1;
  Vector z2;
  std::size_t d = 0, h = 0, p = 0;
  bool valid = false;
};

Vector mlp_forward(const Projector& proj, std::span<const double> f, ForwardCache& cache);
Vector mlp_forward(const Projector& proj, std::span<const double> f);

// Gradients of dot(v, dv) w.r.t. every parameter (accumulated into `grads`
// scaled by `grad_scale`) and w.r.t. the input (returned).
// Throws InvalidState if the cache is empty or was built for other dims.
Vector mlp_backward(const Projector& proj, const ForwardCache& cache, std::span<const double> dv,
                    ProjectorGrads& grads, double grad_scale = 1.0);

struct NormCache {
  Vector v;
  double norm = 0.0;
};

inline constexpr double kDegenerateNorm = 1e-12;

// v / ||v||_2. Throws DegenerateVector when ||v|| <= 1e-12.
Vector l2_normalize(std::span<const double> v, NormCache& cache);
Vector l2_normalize(std::span<const double> v);

// (I/||v|| - v v^T / ||v||^3) dvhat.
Vector l2_normalize_backward(const NormCache& cache, std::span<const double> dvhat);

struct CrossEntropy {
  double loss = 0.0;
  Vector dlogits;
};

// -log softmax(logits)[y], max-subtracted. Throws InvalidArgument if y is out of range.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t y);

// Linear classifier over the normalized embedding: logits = W v + b.
struct Classifier {
  Matrix w;  // C x p
  Vector b;  // C

  std::size_t num_classes() const { return w.rows; }
  std::size_t input_dim() const { return w.cols; }

  std::array<std::span<double>, 2> tensors() { return {w.data, b}; }
  std::array<std::span<const double>, 2> tensors() const { return {w.data, b}; }

  bool operator==(const Classifier&) const = default;
};

using ClassifierGrads = Classifier;

// Rows ~ U(-1/sqrt(p), 1/sqrt(p)), zero bias, same scheme as a projector's output layer.
Classifier init_classifier(std::size_t num_classes, std::size_t p, std::uint64_t seed);

Vector classifier_forward(const Classifier& clf, std::span<const double> v);

// Accumulates dW += dlogits v^T, db += dlogits; returns W^T dlogits.
Vector classifier_backward(const Classifier& clf, std::span<const double> v,
                           std::span<const double> dlogits, ClassifierGrads& grads);

// Heavy-ball momentum SGD:
//   velocity <- momentum * velocity + grad
//   param    <- param - lr * velocity
// Velocity buffers are created zeroed on the first step after reset().
struct OptimizerState {
  double momentum = 0.9;
  double lr_max = 0.25;
  double lr_min = 0.0;
  std::size_t total_steps = 1;
  std::vector<Vector> velocity;

  void reset() { velocity.clear(); }
};

// Throws InvalidArgument if param/grad/velocity shapes disagree.
void sgd_momentum_step(std::span<const std::span<double>> params,
                       std::span<const std::span<const double>> grads, OptimizerState& state,
                       double lr);

// eta_min + (eta_max - eta_min) * (1 + cos(pi * step / total)) / 2.
// Throws InvalidArgument unless 0 <= step <= total and total >= 1.
double cosine_lr(std::size_t step, std::size_t total, double lr_max, double lr_min);

// FNV-1a over the IEEE-754 bytes of a tensor list.
std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_projector(const Projector& proj);

bool all_finite(const Projector& proj);
bool all_finite(const Classifier& clf);

}  // namespace pki
