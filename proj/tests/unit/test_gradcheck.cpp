#include <doctest.h>

#include "pki/gradcheck.hpp"

using namespace pki;

TEST_CASE("gradcheck passes at default dimensions in every mode") {
  for (auto mode : {EnsembleMode::kPki, EnsembleMode::kPkiV1, EnsembleMode::kPkiV2}) {
    GradcheckOptions opt;
    opt.ensemble = {mode, 2, 0.7};
    const GradcheckReport r = run_gradcheck(opt);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-4);
    REQUIRE(r.tensors.size() == 8);
    CHECK(r.tensors[0].name == "projector.W1");
    CHECK(r.tensors[7].name == "classifier.b");
    CHECK(r.tensors[0].entries == 64);
  }
}

TEST_CASE("gradcheck with zero tolerance fails") {
  GradcheckOptions opt;
  opt.tolerance = 0.0;
  CHECK_FALSE(run_gradcheck(opt).passed);
}

TEST_CASE("gradcheck survives degenerate dimensions") {
  GradcheckOptions opt;
  opt.d = 1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    opt.seed = seed;
    CHECK(run_gradcheck(opt).passed);
  }
  opt.h = 1;
  opt.p = 2;
  CHECK(run_gradcheck(opt).passed);
}

TEST_CASE("gradcheck under mean reduction and the base session") {
  GradcheckOptions opt;
  opt.reduction = Reduction::kMean;
  CHECK(run_gradcheck(opt).passed);
  opt.session = 0;
  CHECK(run_gradcheck(opt).passed);
}

TEST_CASE("relative_error") {
  CHECK(relative_error(1.0, 1.0, 1e-8) == 0.0);
  CHECK(relative_error(2.0, 1.0, 1e-8) == 0.5);
  CHECK(relative_error(0.0, 1e-12, 1e-8) == doctest::Approx(1e-4));
}
