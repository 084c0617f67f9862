#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qbundle/extrapolation.hpp"

using namespace qbundle;
using Catch::Approx;

namespace {
std::vector<double> sphere_hbars(std::initializer_list<double> js) {
  std::vector<double> h;
  for (double j : js) h.push_back(1.0 / std::sqrt(j * (j + 1)));
  return h;
}
}  // namespace

TEST_CASE("constant sequences extrapolate exactly") {
  const std::vector<double> h{1.0, 0.5, 0.25, 0.125};
  const std::vector<double> v{1.0, 1.0, 1.0, 1.0};
  const auto est = estimate_limit(h, v);
  CHECK(est.value == Approx(1.0));
  CHECK(est.error_bound <= 1e-12);
  CHECK(est.method == LimitEstimate::Method::cauchy_tail);
}

TEST_CASE("fuzzy-sphere norm profile extrapolates to 1 within 2e-3") {
  const auto h = sphere_hbars({5, 10, 20, 40});
  std::vector<double> v;
  for (double j : {5.0, 10.0, 20.0, 40.0}) v.push_back(std::sqrt(j / (j + 1)));
  const auto est = estimate_limit(h, v);
  CHECK(est.method == LimitEstimate::Method::richardson);
  CHECK(std::abs(est.value - 1.0) <= 2e-3);
  CHECK(est.error_bound >= std::abs(est.value - 1.0) * 0.1);
}

TEST_CASE("linear decay extrapolates to zero") {
  const std::vector<double> h{0.4, 0.2, 0.1, 0.05, 0.025};
  std::vector<double> v;
  for (double x : h) v.push_back(x);
  const auto est = estimate_limit(h, v);
  CHECK(std::abs(est.value) <= 1e-10);
}

TEST_CASE("topologist's sine profile is rejected as non-Cauchy") {
  std::vector<double> h, v;
  double x = 1.0;
  for (int i = 0; i < 10; ++i) {
    h.push_back(x);
    v.push_back(std::sin(1.0 / x));
    x *= 0.5;
  }
  CHECK_THROWS_AS(estimate_limit(h, v), NonCauchyTail);
}

TEST_CASE("too few samples is an error") {
  CHECK_THROWS_AS(estimate_limit({1.0, 0.5}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("error bound dominates the model residual on noisy power tails") {
  const std::vector<double> h{0.8, 0.4, 0.2, 0.1, 0.05};
  std::vector<double> v;
  for (std::size_t i = 0; i < h.size(); ++i)
    v.push_back(2.0 + 0.7 * h[i] + 0.05 * h[i] * h[i]);  // p=1 with a correction
  const auto est = estimate_limit(h, v);
  CHECK(std::abs(est.value - 2.0) <= est.error_bound + 5e-4);
}

TEST_CASE("slope fit classifies exact zeros and power laws") {
  const std::vector<double> h{0.4, 0.2, 0.1, 0.05};
  const auto exact = fit_slope(h, {0.0, 0.0, 1e-16, 0.0});
  CHECK(exact.exact);
  CHECK(exact.passes(1.5));

  std::vector<double> quad;
  for (double x : h) quad.push_back(3.0 * x * x);
  const auto fit = fit_slope(h, quad);
  CHECK_FALSE(fit.exact);
  CHECK(fit.slope == Approx(2.0).margin(1e-6));
  CHECK(fit.passes(1.9));

  std::vector<double> grow{0.1, 0.2, 0.4, 0.8};
  const auto bad = fit_slope(h, grow);
  CHECK_FALSE(bad.passes(0.0));
}
