#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pki/ensemble.hpp"
#include "pki/trainer.hpp"

namespace pki {

struct GradcheckOptions {
  std::size_t d = 8;
  std::size_t h = 8;
  std::size_t p = 8;
  std::size_t classes = 6;    // C; the last `new_classes` are the session's new ones
  std::size_t new_classes = 2;
  std::size_t session = 3;    // t: number of frozen projectors before the current one
  std::size_t examples_per_class = 2;
  EnsembleSettings ensemble;
  Reduction reduction = Reduction::kSum;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entrywise error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-8;
};

struct TensorCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Builds a random ensemble (t frozen projectors plus a trainable one, all
// parameters random including biases), a random classifier, random new
// examples and random replayed means, then compares the analytic gradient
// of the incremental objective against central finite differences for
// every trainable entry (current projector and classifier).
// Passes iff every entry's relative error is strictly below `tolerance`.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

// Relative-error helper used by run_gradcheck.
double relative_error(double analytic, double numeric, double floor);

}  // namespace pki
