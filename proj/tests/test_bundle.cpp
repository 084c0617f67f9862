#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "qbundle/bundle.hpp"
#include "qbundle/fuzzy_sphere.hpp"
#include "qbundle/nc_torus.hpp"

using namespace qbundle;
using Catch::Approx;

namespace {
Expression x(int a) { return Expression::label(static_cast<std::uint16_t>(a)); }

Bundle sphere_bundle(std::vector<double> js) {
  return full_bundle(std::make_shared<FuzzySphereScheme>(std::move(js)));
}
}  // namespace

TEST_CASE("evaluation is a *-homomorphism on random expression pairs") {
  const Bundle b = sphere_bundle({0.5, 1.0, 2.5});
  Rng rng(41);
  for (int t = 0; t < 40; ++t) {
    const Expression e1 = detail::random_expression(*b.scheme, rng, 2, 3);
    const Expression e2 = detail::random_expression(*b.scheme, rng, 2, 3);
    const std::size_t i = rng.uniform_index(b.size());
    const Section s1 = b.section(e1), s2 = b.section(e2);
    const Matrix m1 = s1.evaluate(i), m2 = s2.evaluate(i);
    const double scale = std::max({1.0, operator_norm(m1), operator_norm(m2)});
    CHECK(operator_norm(Matrix(b.section(e1 * e2).evaluate(i) - m1 * m2)) <=
          1e-12 * scale * scale);
    CHECK(operator_norm(Matrix(b.section(e1 + e2).evaluate(i) - (m1 + m2))) <= 1e-12 * scale);
    CHECK(operator_norm(Matrix(b.section(e1.star()).evaluate(i) - Matrix(m1.adjoint()))) <=
          1e-12 * scale);
  }
}

TEST_CASE("unit section evaluates to the identity at every fiber") {
  const Bundle b = sphere_bundle({0.5, 1.0, 2.0});
  const Section u = b.section(Expression::unit());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Eigen::Index n = b.scheme->fiber_dim((*b.fibers)[i]);
    CHECK(operator_norm(Matrix(u.evaluate(i) - Matrix::Identity(n, n))) == 0.0);
  }
  const auto nf = norm_function(u);
  for (double v : nf.values) CHECK(v == Approx(1.0));
}

TEST_CASE("fuzzy-sphere x3 norm function matches the closed form") {
  const std::vector<double> js{0.5, 1.0, 2.0, 4.0};
  const Bundle b = sphere_bundle(js);
  const auto nf = norm_function(b.section(x(2)));
  for (std::size_t i = 0; i < js.size(); ++i)
    CHECK(nf.values[i] == Approx(std::sqrt(js[i] / (js[i] + 1))).epsilon(1e-12));
  CHECK(nf.values[0] == Approx(0.57735).margin(5e-6));
  CHECK(nf.values[1] == Approx(0.70711).margin(5e-6));
}

TEST_CASE("uniform continuity two-part test calibration") {
  NormFunction constant;
  for (double h : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
    constant.hbars.push_back(h);
    constant.values.push_back(2.0);
  }
  auto rep = check_uniform_continuity(constant, 10.0);
  CHECK(rep.pass);
  CHECK(rep.max_modulus == 0.0);

  NormFunction linear;
  for (double h : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
    linear.hbars.push_back(h);
    linear.values.push_back(h);
  }
  rep = check_uniform_continuity(linear, 10.0);
  CHECK(rep.pass);
  CHECK(rep.gamma == Approx(1.0).margin(0.05));

  // known-good profile sqrt(j/(j+1)) over half-integer spins up to 40
  NormFunction good;
  for (double j = 0.5; j <= 40.0; j += 0.5) {
    good.hbars.push_back(1.0 / std::sqrt(j * (j + 1)));
    good.values.push_back(std::sqrt(j / (j + 1)));
  }
  CHECK(check_uniform_continuity(good, 10.0).pass);

  // topologist's sine on a geometric grid: rejected
  NormFunction bad;
  double h = 1.0;
  for (int i = 0; i < 12; ++i) {
    bad.hbars.push_back(h);
    bad.values.push_back(std::abs(std::sin(1.0 / h)));
    h *= 0.55;
  }
  CHECK_FALSE(check_uniform_continuity(bad, 10.0).pass);

  NormFunction tiny{{1.0, 0.5}, {1.0, 1.0}};
  CHECK_THROWS_AS(check_uniform_continuity(tiny, 1.0), std::invalid_argument);
}

TEST_CASE("module action multiplies fiberwise, exactly") {
  const Bundle b = sphere_bundle({0.5, 1.0, 2.0, 4.5});
  const Section a = b.section(x(2));

  std::vector<complexd> ones(b.size(), complexd(1.0, 0.0));
  const Section same = module_action(ones, a);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(operator_norm(Matrix(same.evaluate(i) - a.evaluate(i))) == 0.0);

  std::vector<complexd> zeros(b.size(), complexd(0.0, 0.0));
  const Section zero = module_action(zeros, a);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(zero.norm_at(i) == 0.0);

  std::vector<complexd> hb;
  for (std::size_t i = 0; i < b.size(); ++i) hb.push_back(b.hbar(i));
  const Section scaled = module_action(hb, a);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(scaled.norm_at(i) == Approx(b.hbar(i) * a.norm_at(i)).epsilon(1e-13));

  // N_{fa} = |f| N_a exactly, with a complex-valued f
  std::vector<complexd> f;
  for (std::size_t i = 0; i < b.size(); ++i)
    f.push_back(complexd(std::cos(1.0 + i), std::sin(0.3 * i)) * (0.5 + 0.1 * i));
  const Section fa = module_action(f, a);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(fa.norm_at(i) == Approx(std::abs(f[i]) * a.norm_at(i)).epsilon(1e-12));

  // non-uniformly-continuous coefficients are flagged, not rejected
  std::vector<complexd> wild;
  for (std::size_t i = 0; i < b.size(); ++i)
    wild.push_back(std::sin(1.0 / b.hbar(i)));
  bool uc = true;
  CHECK_NOTHROW(module_action(wild, a, &uc));

  std::vector<complexd> wrong(b.size() + 1, complexd(1.0, 0.0));
  CHECK_THROWS_AS(module_action(wrong, a), std::invalid_argument);
}

TEST_CASE("restrict_to_vanishing") {
  const Bundle b = sphere_bundle({0.5, 1.0, 2.0, 4.0});
  const Section u = b.section(Expression::unit());

  std::vector<double> one(b.size(), 1.0);
  const Section same = restrict_to_vanishing(u, one);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(same.norm_at(i) == Approx(1.0));

  std::vector<double> zero(b.size(), 0.0);
  const Section z = restrict_to_vanishing(u, zero);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(z.norm_at(i) == 0.0);

  // cutoff min(1, hbar/hbar_mid): norm function equals the cutoff on the unit section
  const double mid = b.hbar(1);
  std::vector<double> cut;
  for (std::size_t i = 0; i < b.size(); ++i) cut.push_back(std::min(1.0, b.hbar(i) / mid));
  const Section c = restrict_to_vanishing(u, cut);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(c.norm_at(i) == Approx(cut[i]));

  std::vector<double> out_of_range(b.size(), 1.5);
  CHECK_THROWS_AS(restrict_to_vanishing(u, out_of_range), std::invalid_argument);
}

TEST_CASE("fullness: spheres and tori generate their fibers; a single diagonal does not") {
  Rng rng(9);
  FullnessConfig cfg;

  const Bundle bs = sphere_bundle({0.5, 1.0, 2.0});
  auto rep = check_fullness(bs, cfg, rng);
  CHECK(rep.pass);
  CHECK(rep.sup_norm_ok);
  for (const auto& f : rep.fibers) {
    CHECK(f.irreducible);
    if (f.rank_checked) CHECK(f.span_rank == f.dim * f.dim);
  }

  const Bundle bt = full_bundle(std::make_shared<NcTorusScheme>(std::vector<int>{2, 3, 4}));
  rep = check_fullness(bt, cfg, rng);
  CHECK(rep.pass);

  // single generator x3 at j=1 spans only the diagonal algebra
  Bundle diag = sphere_bundle({1.0});
  diag.generators = {x(2)};
  rep = check_fullness(diag, cfg, rng);
  CHECK_FALSE(rep.pass);
  CHECK_FALSE(rep.fibers[0].irreducible);
  CHECK(rep.fibers[0].rank_checked);
  CHECK(rep.fibers[0].span_rank < rep.fibers[0].dim * rep.fibers[0].dim);
}

TEST_CASE("words of length <= 2 span M_2 at j=1/2 and N=2") {
  Rng rng(10);
  FullnessConfig cfg;
  cfg.max_word_len = 2;

  const Bundle bs = sphere_bundle({0.5});
  auto rep = check_fullness(bs, cfg, rng);
  CHECK(rep.fibers[0].span_rank == 4);

  const Bundle bt = full_bundle(std::make_shared<NcTorusScheme>(std::vector<int>{2, 3}));
  rep = check_fullness(bt, cfg, rng);
  CHECK(rep.fibers[0].span_rank == 4);
}

TEST_CASE("canonical restriction truncates fibers and preserves evaluations") {
  const Bundle b = sphere_bundle({0.5, 1.0, 2.0, 4.0});

  // restrict to the full grid: identity
  const Bundle same = canonical_restriction(b, identity_base_map(b.base));
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(operator_norm(Matrix(same.section(x(0)).evaluate(i) - b.section(x(0)).evaluate(i))) ==
          0.0);

  // restrict to a sub-grid
  auto sub = std::make_shared<SampledBaseSpace>(std::vector<double>{b.hbar(1)});
  const BaseMap alpha = make_base_map(sub, b.base, [](double v) { return v; });
  const Bundle r = canonical_restriction(b, alpha);
  REQUIRE(r.size() == 1);
  CHECK(operator_norm(Matrix(r.section(x(1)).evaluate(0) - b.section(x(1)).evaluate(1))) == 0.0);

  // restriction along a composite equals composed restrictions
  auto sub2 = std::make_shared<SampledBaseSpace>(std::vector<double>{b.hbar(1), b.hbar(3)});
  const BaseMap a2 = make_base_map(sub2, b.base, [](double v) { return v; });
  const Bundle r2 = canonical_restriction(b, a2);
  auto sub3 = std::make_shared<SampledBaseSpace>(std::vector<double>{b.hbar(3)});
  const BaseMap a3 = make_base_map(sub3, r2.base, [](double v) { return v; });
  const Bundle r3 = canonical_restriction(r2, a3);
  const BaseMap direct = make_base_map(sub3, b.base, [](double v) { return v; });
  const Bundle r3d = canonical_restriction(b, direct);
  CHECK(operator_norm(Matrix(r3.section(x(2)).evaluate(0) - r3d.section(x(2)).evaluate(0))) ==
        0.0);

  // non-injective maps are rejected
  auto collapse = std::make_shared<SampledBaseSpace>(std::vector<double>{0.9, 0.8});
  CHECK_THROWS_AS(
      canonical_restriction(b, make_base_map(collapse, b.base, [&](double) { return b.hbar(0); })),
      std::invalid_argument);
}

TEST_CASE("sup norm formula and sampled-norm finiteness invariant") {
  const Bundle b = sphere_bundle({0.5, 1.5, 3.0});
  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    const Section s = b.section(detail::random_expression(*b.scheme, rng, 3, 4));
    double sup = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sup = std::max(sup, s.norm_at(i));
    CHECK(s.sup_norm() == sup);
    CHECK(std::isfinite(sup));
  }
}

TEST_CASE("Cauchy sequences of expressible sections stay expressible with convergent norms") {
  // s_k = f_k * a with f_k -> f uniformly on samples; the limit is the same
  // kind of section and its norm function is the limit of norm functions.
  const Bundle b = sphere_bundle({0.5, 1.0, 2.0, 4.0});
  const Section a = b.section(x(0) * x(2) + x(1));
  auto f_k = [&](int kk, std::size_t i) {
    return complexd(1.0 + std::pow(2.0, -kk) * std::cos(static_cast<double>(i)), 0.0);
  };
  std::vector<complexd> f_lim(b.size(), complexd(1.0, 0.0));
  const Section limit = module_action(f_lim, a);
  double prev_gap = 1e9;
  for (int kk = 2; kk <= 20; kk += 6) {
    std::vector<complexd> fv;
    for (std::size_t i = 0; i < b.size(); ++i) fv.push_back(f_k(kk, i));
    const Section sk = module_action(fv, a);
    double gap = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      gap = std::max(gap, std::abs(sk.norm_at(i) - limit.norm_at(i)));
    CHECK(gap <= std::pow(2.0, -kk) * a.sup_norm() + 1e-12);
    CHECK(gap <= prev_gap + 1e-12);
    prev_gap = gap;
  }
  // the sampled norm of the limit matches the limit of sampled norms within 1e-9
  std::vector<complexd> f_24;
  for (std::size_t i = 0; i < b.size(); ++i) f_24.push_back(f_k(34, i));
  const Section s24 = module_action(f_24, a);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(std::abs(s24.norm_at(i) - limit.norm_at(i)) <= 1e-9);
}
