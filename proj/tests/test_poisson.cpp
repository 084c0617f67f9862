#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <numbers>

#include "qbundle/fuzzy_sphere.hpp"
#include "qbundle/nc_torus.hpp"
#include "qbundle/poisson.hpp"

using namespace qbundle;
using Catch::Approx;

namespace {
Expression x(int a) { return Expression::label(static_cast<std::uint16_t>(a)); }

Bundle sphere_bundle() {
  return full_bundle(std::make_shared<FuzzySphereScheme>(
      std::vector<double>{5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0}));
}

PostQuantizationData sphere_pq() {
  return make_post_quantization(sphere_bundle(), {{"1", Expression::unit()},
                                                  {"x1", x(0)},
                                                  {"x2", x(1)},
                                                  {"x3", x(2)}});
}
}  // namespace

TEST_CASE("sphere post-quantization: table residuals vanish identically") {
  const auto pq = sphere_pq();
  Rng rng(51);
  const auto rep = check_post_quantization(pq, rng);
  CHECK(rep.pass);
  CHECK(rep.density_ok);
  CHECK(rep.commutators_ok);
  for (const auto& row : rep.rows) {
    CHECK(row.pass);
    CHECK(row.slope.exact);  // (i/hbar)[Q(x_a),Q(x_b)] = Q({x_a,x_b}) exactly
  }
}

TEST_CASE("torus post-quantization: residuals follow the sine law") {
  const Bundle bt = full_bundle(std::make_shared<NcTorusScheme>(std::vector<int>{8, 16, 32, 64}));
  std::vector<std::pair<std::string, Expression>> family{{"1", Expression::unit()}};
  for (int m1 = -2; m1 <= 2; ++m1)
    for (int m2 = -2; m2 <= 2; ++m2) {
      if (m1 == 0 && m2 == 0) continue;
      family.emplace_back("w(" + std::to_string(m1) + "," + std::to_string(m2) + ")",
                          Expression::word(mode_word({m1, m2})));
    }
  const auto pq = make_post_quantization(bt, family);
  Rng rng(52);
  const auto rep = check_post_quantization(pq, rng);
  CHECK(rep.pass);

  // anchor one row against the sine-law oracle: pair w(1,0), w(0,1)
  for (const auto& row : rep.rows) {
    if (row.pair != "{w(1,0),w(0,1)}") continue;
    for (std::size_t k = 0; k < row.hbars.size(); ++k) {
      const double N = 1.0 / row.hbars[k];
      CHECK(row.residuals[k] ==
            Approx(std::abs(2 * std::numbers::pi - 2 * N * std::sin(std::numbers::pi / N)))
                .margin(1e-9));
    }
    CHECK(row.slope.slope == Approx(2.0).margin(0.1));
  }
}

TEST_CASE("Poisson bracket at the limit: table recovery, antisymmetry, Jacobi, Leibniz") {
  const auto pq = sphere_pq();
  const ExtendedBundle eb = extend_to_limit(pq.bundle);
  const auto& s = *pq.bundle.scheme;

  // {x1, x2} -> -x3 at the limit; symbol matches -cos(theta)
  const auto br = poisson_bracket_at_limit(eb, pq, 1, 2);
  CHECK(eb.quotient_equal(br.expr, x(2) * complexd(-1, 0), 1e-3));
  REQUIRE(br.symbol.has_value());
  const auto minus_x3 = s.symbol(x(2) * complexd(-1, 0));
  for (std::size_t i = 0; i < br.symbol->size(); ++i)
    CHECK(std::abs((*br.symbol)[i] - minus_x3[i]) < 1e-13);

  // {a, a} = 0
  CHECK(poisson_bracket_at_limit(eb, pq, 1, 1).expr.is_zero());

  // antisymmetry and bilinearity modulo quotient equality
  for (std::size_t i = 1; i <= 3; ++i)
    for (std::size_t k = 1; k <= 3; ++k) {
      const Expression anti = pq.bracket(i, k) + pq.bracket(k, i);
      CHECK(eb.quotient_equal(anti, Expression::zero(), 1e-6));
    }
  const Expression lin = s.classical_bracket(x(0) * complexd(2, 0) + x(1), x(2)) -
                         (s.classical_bracket(x(0), x(2)) * complexd(2, 0) +
                          s.classical_bracket(x(1), x(2)));
  CHECK(lin.is_zero());

  // Jacobi identity on the generator table
  Expression jac = s.classical_bracket(x(0), s.classical_bracket(x(1), x(2))) +
                   s.classical_bracket(x(1), s.classical_bracket(x(2), x(0))) +
                   s.classical_bracket(x(2), s.classical_bracket(x(0), x(1)));
  CHECK(eb.quotient_equal(jac, Expression::zero(), 1e-6));

  // Leibniz modulo quotient equality: {a, bc} = {a,b}c + b{a,c}
  const Expression lhs = s.classical_bracket(x(0), x(1) * x(2));
  const Expression rhs = s.classical_bracket(x(0), x(1)) * x(2) +
                         x(1) * s.classical_bracket(x(0), x(2));
  CHECK(eb.quotient_equal(lhs, rhs, 1e-6));

  // missing table entry raises
  CHECK_THROWS_AS(pq.bracket(0, 17), MissingBracket);
}

TEST_CASE("second-order base maps recover K = |a2|") {
  auto grid = std::make_shared<SampledBaseSpace>(make_geometric_grid(0.5, 0.5, 10));
  for (double a2 : {0.0, 0.5, 1.0}) {
    const auto alpha = make_base_map(grid, grid, [a2](double h) { return h + a2 * h * h; });
    const auto rep = is_second_order(alpha);
    CHECK(rep.pass);
    CHECK(std::abs(rep.K - a2) <= 1e-2);
  }

  const auto square = make_base_map(grid, grid, [](double h) { return h * h; });
  const auto rep = is_second_order(square);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("Poisson functoriality: identity and rotation morphisms") {
  auto b = std::make_shared<Bundle>(sphere_bundle());
  const auto pq = make_post_quantization(*b, {{"1", Expression::unit()},
                                              {"x1", x(0)},
                                              {"x2", x(1)},
                                              {"x3", x(2)}});
  const ExtendedBundle eb = extend_to_limit(*b);
  Rng rng(61);
  CompatibilityConfig ccfg;

  const auto id = identity_morphism(b);
  auto rep = check_poisson_functoriality(id, pq, pq, eb, 1e-3);
  CHECK(rep.pass);
  CHECK(rep.smooth);
  CHECK(rep.second_order.pass);
  CHECK(rep.second_order.K == Approx(0.0).margin(1e-10));

  const auto rot =
      make_morphism(b, b, identity_base_map(b->base), {x(1), x(2), x(0)}, ccfg, rng);
  rep = check_poisson_functoriality(rot, pq, pq, eb, 1e-3);
  CHECK(rep.pass);  // the epsilon-tensor table is equivariant under cyclic rotation
  for (const auto& row : rep.rows) CHECK(row.coset_equal);
}

TEST_CASE("Poisson functoriality: second-order rescaling passes with a decaying bound") {
  auto b = std::make_shared<Bundle>(sphere_bundle());
  const auto pq = make_post_quantization(*b, {{"1", Expression::unit()},
                                              {"x1", x(0)},
                                              {"x2", x(1)},
                                              {"x3", x(2)}});
  const ExtendedBundle eb = extend_to_limit(*b);
  Rng rng(62);
  CompatibilityConfig ccfg;

  // alpha(hbar) = hbar + hbar^2/2 snaps to the identity on this grid but its
  // exact values carry the second-order data K = 1/2
  const auto alpha = make_base_map(b->base, b->base, [](double h) { return h + 0.5 * h * h; });
  const auto sigma = make_morphism(b, b, alpha, {x(0), x(1), x(2)}, ccfg, rng);
  const auto rep = check_poisson_functoriality(sigma, pq, pq, eb, 1e-3);
  CHECK(rep.pass);
  CHECK(rep.second_order.pass);
  CHECK(rep.second_order.K == Approx(0.5).margin(1e-2));
  for (const auto& row : rep.rows) {
    CHECK(row.coset_equal);
    CHECK(row.bound_slope.passes(0.9));  // the proof's bound sequence vanishes
  }
}

TEST_CASE("Poisson functoriality preconditions: non-smooth maps fail") {
  auto b = std::make_shared<Bundle>(sphere_bundle());
  // target family too small: the rotation image x3 -> x1 stays inside, but a
  // family missing x2 breaks smoothness for the identity map
  const auto pq_full = make_post_quantization(*b, {{"1", Expression::unit()},
                                                   {"x1", x(0)},
                                                   {"x2", x(1)},
                                                   {"x3", x(2)}});
  const auto pq_small = make_post_quantization(*b, {{"1", Expression::unit()}, {"x1", x(0)}});
  const ExtendedBundle eb = extend_to_limit(*b);
  const auto id = identity_morphism(b);
  const auto rep = check_poisson_functoriality(id, pq_full, pq_small, eb, 1e-3);
  CHECK_FALSE(rep.pass);
  CHECK_FALSE(rep.smooth);
}
