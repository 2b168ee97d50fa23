#include <doctest.h>

#include <cmath>

#include "dfeia/selftest.hpp"

using namespace dfeia;

TEST_CASE("finite-difference suite passes for all primitives and blocks") {
  selftest::SelftestOptions opts;
  selftest::SuiteResult res = selftest::gradient_suite(opts);
  for (const auto& f : res.failures) MESSAGE(f);
  CHECK(res.passed);
  CHECK(res.assertions > 1000);
}

TEST_CASE("value suite passes and catches a tanh-approximation mutant") {
  selftest::SelftestOptions opts;
  CHECK(selftest::values_suite(opts).passed);

  // The tanh GELU approximation is well inside float tolerance for casual
  // use, which is exactly why the harness must reject it.
  auto tanh_gelu = [](double x) {
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
  };
  selftest::SuiteResult mutant = selftest::values_suite(opts, tanh_gelu);
  CHECK_FALSE(mutant.passed);
}

TEST_CASE("thorough mode runs strictly more assertions") {
  selftest::SelftestOptions fast;
  selftest::SelftestOptions thorough;
  thorough.thorough = true;
  CHECK(selftest::wavelet_suite(thorough).assertions >
        selftest::wavelet_suite(fast).assertions);
  CHECK(selftest::metrics_suite(thorough).assertions >
        selftest::metrics_suite(fast).assertions);
}

TEST_CASE("fd harness flags a broken gradient") {
  // A parameter whose "gradient" is left at zero while the loss clearly
  // depends on it: the checker must fail.
  Rng rng(31);
  Parameter<double> w("w", rng.uniform_tensor<double>({4}, 0.5, 1.5));
  auto forward = [&](Tape<double>& t) {
    // Read the value but never register the parameter on the tape, so the
    // analytic gradient stays zero while finite differences see the slope.
    return t.recording() ? ops::sum(t, t.constant(w.value))
                         : ops::sum(t, t.constant(w.value));
  };
  selftest::FdResult res = selftest::fd_check({&w}, forward);
  CHECK_FALSE(res.passed);
  CHECK(res.max_rel_err > 0.5);
}
