#include <catch2/catch_amalgamated.hpp>

#include "qbundle/expression.hpp"

using namespace qbundle;

namespace {
Expression x(int label) { return Expression::label(static_cast<std::uint16_t>(label)); }
}  // namespace

TEST_CASE("expression normal form merges and cancels") {
  Expression e = x(0) * x(1) + x(0) * x(1);
  REQUIRE(e.terms().size() == 1);
  CHECK(e.terms()[0].coeff == complexd(2.0, 0.0));

  Expression z = x(0) - x(0);
  CHECK(z.is_zero());

  Expression u = Expression::unit(2.0) * Expression::unit(0.5);
  REQUIRE(u.terms().size() == 1);
  CHECK(u.terms()[0].word.empty());
  CHECK(u.terms()[0].coeff == complexd(1.0, 0.0));
}

TEST_CASE("product concatenates words and multiplies sampled coefficients") {
  GridFunction f{{complexd(1, 0), complexd(2, 0), complexd(3, 0)}};
  GridFunction g{{complexd(2, 0), complexd(0.5, 0), complexd(1, 1)}};
  const Expression a = x(0).scaled_by(f);
  const Expression b = x(1).scaled_by(g);
  const Expression ab = a * b;
  REQUIRE(ab.terms().size() == 1);
  REQUIRE(ab.terms()[0].word.size() == 2);
  REQUIRE(ab.terms()[0].fn.has_value());
  CHECK(ab.terms()[0].fn->values[1] == complexd(1.0, 0.0));
  CHECK(ab.terms()[0].fn->values[2] == complexd(3.0, 3.0));
}

TEST_CASE("star reverses words, flips adjoint flags, conjugates scalars") {
  Expression e = Expression::word({Letter{0, false}, Letter{1, true}}, complexd(0, 2));
  const Expression s = e.star();
  REQUIRE(s.terms().size() == 1);
  CHECK(s.terms()[0].coeff == complexd(0, -2));
  REQUIRE(s.terms()[0].word.size() == 2);
  CHECK(s.terms()[0].word[0] == Letter{1, false});
  CHECK(s.terms()[0].word[1] == Letter{0, true});

  // involution
  CHECK(structurally_equal(s.star(), e));
}

TEST_CASE("structural equality is order-insensitive via normalization") {
  const Expression a = x(0) + complexd(0, 1) * x(1);
  const Expression b = complexd(0, 1) * x(1) + x(0);
  CHECK(structurally_equal(a, b));
  CHECK_FALSE(structurally_equal(a, a * complexd(2, 0)));
}

TEST_CASE("degree bookkeeping") {
  CHECK(Expression::unit().max_degree() == 0);
  CHECK((x(0) * x(1) * x(2) + x(0)).max_degree() == 3);
}
