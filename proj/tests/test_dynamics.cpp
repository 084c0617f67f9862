#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "qbundle/dynamics.hpp"
#include "qbundle/fuzzy_sphere.hpp"
#include "qbundle/nc_torus.hpp"

using namespace qbundle;
using Catch::Approx;

namespace {
Expression x(int a) { return Expression::label(static_cast<std::uint16_t>(a)); }

Bundle sphere_bundle() {
  return full_bundle(std::make_shared<FuzzySphereScheme>(std::vector<double>{5.0, 10.0, 20.0, 40.0}));
}
}  // namespace

TEST_CASE("dynamical bundles require self-adjoint Hamiltonians") {
  const Bundle b = sphere_bundle();
  CHECK_NOTHROW(make_dynamical_bundle(b, x(2), {0.5}));
  CHECK_NOTHROW(make_dynamical_bundle(b, x(2) * x(2), {0.5}));
  CHECK_THROWS_AS(make_dynamical_bundle(b, x(0) * complexd(0, 1), {0.5}),
                  std::invalid_argument);
}

TEST_CASE("automorphism-group laws of the lifted dynamics") {
  const auto d = make_dynamical_bundle(sphere_bundle(), x(2), {0.1, 0.5, 1.0});
  Rng rng(21);
  const auto rep = check_dynamics_lift(d, rng);
  CHECK(rep.pass);
  CHECK(rep.identity_defect <= 1e-10);
  CHECK(rep.group_defect <= 1e-8);
  CHECK(rep.mult_defect <= 1e-9);
  CHECK(rep.star_defect <= 1e-10);
  CHECK(rep.intertwines);
}

TEST_CASE("h = x3 generates the exact spin rotation") {
  const Bundle b = sphere_bundle();
  const auto d = make_dynamical_bundle(b, x(2), {0.7});
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t k = (*b.fibers)[i];
    const double t = 0.7;
    const Matrix evolved = evolve(d, i, t, evaluate_expression(*b.scheme, x(0), k));
    const Matrix expected = std::cos(t) * evaluate_expression(*b.scheme, x(0), k) -
                            std::sin(t) * evaluate_expression(*b.scheme, x(1), k);
    CHECK(operator_norm(Matrix(evolved - expected)) < 1e-12);
  }
}

TEST_CASE("limit dynamics: the h = x3 rotation case is exact on linear generators") {
  const auto d = make_dynamical_bundle(sphere_bundle(), x(2), {0.1, 0.5, 1.0});
  const std::vector<std::pair<std::string, Expression>> gens{{"x1", x(0)}, {"x2", x(1)}};
  const auto rep = limit_dynamics(d, gens, 0.9, 1e-8);
  CHECK(rep.pass);
  for (const auto& row : rep.rows) {
    CHECK(row.exact);  // rigid rotations intertwine the symmetrized map exactly
    for (double r : row.residuals) CHECK(r <= 1e-8);
  }
}

TEST_CASE("limit dynamics: h = x3 on the quadratic generator decays at first order") {
  // the residual is the ordering defect between the evaluated section
  // Q(x1)Q(x2) and the symmetrized comparison target: O(hbar), t-independent
  const auto d = make_dynamical_bundle(sphere_bundle(), x(2), {0.1, 0.5, 1.0});
  const auto rep = limit_dynamics(d, {{"x1*x2", x(0) * x(1)}}, 0.9, 1e-8);
  CHECK(rep.pass);
  for (const auto& row : rep.rows) {
    CHECK_FALSE(row.exact);
    CHECK(row.slope.slope == Approx(1.0).margin(0.15));
    // oracle: || Q(x1)Q(x2) - sym || = (j/2)/(j(j+1)), invariant under the rotation
    for (std::size_t k = 0; k < row.residuals.size(); ++k) {
      const double j = std::vector<double>{5, 10, 20, 40}[k];
      CHECK(row.residuals[k] == Approx(0.5 * j / (j * (j + 1))).margin(1e-6));
    }
  }
}

TEST_CASE("limit dynamics: quadratic Hamiltonian gives a genuine Egorov residual") {
  const auto d = make_dynamical_bundle(sphere_bundle(), x(2) * x(2), {0.1, 0.5, 1.0});
  const auto rep = limit_dynamics(d, {{"x1", x(0)}}, 0.9, 1e-8);
  CHECK(rep.pass);
  for (const auto& row : rep.rows) {
    CHECK_FALSE(row.exact);
    CHECK(row.slope.slope >= 0.9);
    CHECK(row.slope.slope == Approx(2.0).margin(0.3));
    // t = 0 would be exact; positive times decay with hbar
    for (std::size_t k = 1; k < row.residuals.size(); ++k)
      CHECK(row.residuals[k] < row.residuals[k - 1]);
  }
}

TEST_CASE("limit dynamics at t = 0 has zero residual") {
  const auto d = make_dynamical_bundle(sphere_bundle(), x(2) * x(2), {0.0});
  const auto rep = limit_dynamics(d, {{"x1", x(0)}}, 0.9, 1e-10);
  CHECK(rep.pass);
  for (const auto& row : rep.rows)
    for (double r : row.residuals) CHECK(r <= 1e-10);
}

TEST_CASE("torus dynamics: lifted automorphisms and Egorov decay") {
  const Bundle bt = full_bundle(std::make_shared<NcTorusScheme>(std::vector<int>{8, 16, 32, 64}));
  // h = (u + u*)/2 = cos(theta1), self-adjoint
  const Expression h = (Expression::label(0) + Expression::label(0, true)) * complexd(0.5, 0);
  const auto d = make_dynamical_bundle(bt, h, {0.4});
  Rng rng(22);
  CHECK(check_dynamics_lift(d, rng).pass);

  const auto rep = limit_dynamics(d, {{"v", Expression::label(1)}}, 0.8, 1e-9);
  CHECK(rep.pass);
}
