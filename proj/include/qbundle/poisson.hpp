#pragma once

// Post-quantization structure: a distinguished family P closed (within the
// degree cap) under the rescaled bracket, the bracket table (a,b) -> c_{a,b},
// the Poisson bracket induced on the limit fiber, second-order base maps with
// the constant K, and the Poisson-functoriality check for smooth second-order
// morphisms.

#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qbundle/bundle.hpp"
#include "qbundle/checks.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/extrapolation.hpp"
#include "qbundle/limit.hpp"
#include "qbundle/morphism.hpp"
#include "qbundle/rng.hpp"

namespace qbundle {

struct PostQuantizationData {
  Bundle bundle;
  std::vector<std::pair<std::string, Expression>> family;  // the dense family P
  // bracket table over P-pairs, built from the scheme's classical bracket
  std::map<std::pair<std::size_t, std::size_t>, Expression> table;

  const Expression& bracket(std::size_t i, std::size_t k) const {
    if (i >= family.size() || k >= family.size())
      throw MissingBracket("no bracket table entry for pair indices (" + std::to_string(i) +
                           ", " + std::to_string(k) + ")");
    const auto it = table.find({i, k});
    if (it == table.end())
      throw MissingBracket("no bracket table entry for pair (" + family.at(i).first + ", " +
                           family.at(k).first + ")");
    return it->second;
  }
};

inline PostQuantizationData make_post_quantization(
    Bundle bundle, std::vector<std::pair<std::string, Expression>> family) {
  PostQuantizationData pq;
  pq.bundle = std::move(bundle);
  pq.family = std::move(family);
  for (std::size_t i = 0; i < pq.family.size(); ++i)
    for (std::size_t k = 0; k < pq.family.size(); ++k)
      pq.table[{i, k}] = pq.bundle.scheme->canonical_section(
          pq.bundle.scheme->classical_bracket(pq.family[i].second, pq.family[k].second));
  return pq;
}

/// The induced Poisson bracket on the limit fiber: phi_0(c_{a,b}).
inline LimitFiberElement poisson_bracket_at_limit(const ExtendedBundle& eb,
                                                  const PostQuantizationData& pq, std::size_t i,
                                                  std::size_t k) {
  return eb.limit_element(pq.bracket(i, k));
}

// ---------------------------------------------------------------------------

struct PostQuantizationRow {
  std::string pair;
  std::vector<double> hbars;
  std::vector<double> residuals;
  SlopeFit slope;
  bool pass = false;
};

struct PostQuantizationReport {
  bool density_ok = true;      // P spans the word space up to the cap (small fibers)
  bool brackets_ok = true;     // (ii) rescaled-bracket residuals decay
  bool commutators_ok = true;  // (iii) commutator norms vanish at the limit
  std::vector<PostQuantizationRow> rows;
  bool pass = false;
};

/// Def.-5.8-style audit: density surrogate, rescaled-bracket residuals with
/// slope fits, and commutator decay on random pairs.
inline PostQuantizationReport check_post_quantization(const PostQuantizationData& pq, Rng& rng,
                                                      double slope_min = 0.9,
                                                      int random_pairs = 16, int degree_cap = 2) {
  PostQuantizationReport rep;
  const auto& s = *pq.bundle.scheme;

  // (i) density surrogate: on fibers small enough for exact ranks, the span of
  // the evaluated P family contains every generator word up to the cap (the
  // cap never exceeds the family's own degree reach)
  int family_degree = 0;
  for (const auto& [name, e] : pq.family) family_degree = std::max(family_degree, e.max_degree());
  const int density_cap = std::min(degree_cap, family_degree);
  for (std::size_t i = 0; i < pq.bundle.size(); ++i) {
    const std::size_t k = (*pq.bundle.fibers)[i];
    const Eigen::Index n = s.fiber_dim(k);
    if (n > 12) continue;
    std::vector<Matrix> fam;
    for (const auto& [name, e] : pq.family) fam.push_back(evaluate_expression(s, e, k));
    Matrix stacked(n * n, static_cast<Eigen::Index>(fam.size()));
    for (std::size_t c = 0; c < fam.size(); ++c)
      stacked.col(static_cast<Eigen::Index>(c)) =
          Eigen::Map<const Eigen::VectorXcd>(fam[c].data(), n * n);
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
    qr.setThreshold(1e-10);
    for (const auto& [name, we] : generator_words(s, std::min<int>(density_cap, n - 1))) {
      const Matrix wm = evaluate_expression(s, we, k);
      const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(wm.data(), n * n);
      const Eigen::VectorXcd coeff = qr.solve(v);
      if ((stacked * coeff - v).norm() > 1e-8 * std::max(1.0, v.norm()))
        rep.density_ok = false;
    }
  }

  // (ii) rescaled-bracket residuals per table pair
  for (std::size_t i = 0; i < pq.family.size(); ++i)
    for (std::size_t k = 0; k < pq.family.size(); ++k) {
      if (pq.family[i].second.max_degree() == 0 || pq.family[k].second.max_degree() == 0)
        continue;  // brackets with scalars vanish identically
      PostQuantizationRow row;
      row.pair = "{" + pq.family[i].first + "," + pq.family[k].first + "}";
      const Expression& c = pq.bracket(i, k);
      double scale = 1.0;
      for (std::size_t p = 0; p < pq.bundle.size(); ++p) {
        const std::size_t fk = (*pq.bundle.fibers)[p];
        const double dist = pq.bundle.base->has_limit_point()
                                ? pq.bundle.base->limit_distance(p)
                                : pq.bundle.hbar(p);
        const Matrix lhs =
            scaled_bracket(evaluate_expression(s, pq.family[i].second, fk),
                           evaluate_expression(s, pq.family[k].second, fk), dist);
        const Matrix rhs = evaluate_expression(s, c, fk);
        row.hbars.push_back(pq.bundle.hbar(p));
        row.residuals.push_back(operator_norm(Matrix(lhs - rhs)));
        scale = std::max(scale, operator_norm(rhs));
      }
      row.slope = fit_slope(row.hbars, row.residuals, 4, scale);
      row.pass = row.slope.passes(slope_min);
      rep.brackets_ok = rep.brackets_ok && row.pass;
      rep.rows.push_back(std::move(row));
    }

  // (iii) commutator decay on random degree <= cap pairs
  for (int t = 0; t < random_pairs; ++t) {
    const Expression a = detail::random_expression(s, rng, degree_cap, 3);
    const Expression b = detail::random_expression(s, rng, degree_cap, 3);
    std::vector<double> hb, res;
    double scale = 1.0;
    for (std::size_t p = 0; p < pq.bundle.size(); ++p) {
      const std::size_t fk = (*pq.bundle.fibers)[p];
      const Matrix am = evaluate_expression(s, a, fk);
      const Matrix bm = evaluate_expression(s, b, fk);
      hb.push_back(pq.bundle.hbar(p));
      res.push_back(operator_norm(commutator(am, bm)));
      scale = std::max(scale, operator_norm(am) * operator_norm(bm));
    }
    const SlopeFit fit = fit_slope(hb, res, 4, scale);
    if (!fit.passes(slope_min)) rep.commutators_ok = false;
  }

  rep.pass = rep.density_ok && rep.brackets_ok && rep.commutators_ok;
  return rep;
}

// ---------------------------------------------------------------------------

struct SecondOrderReport {
  bool pass = false;
  double K = 0.0;
  double error = 0.0;
  std::vector<double> hbars;
  std::vector<double> k_sequence;  // |1/|hbar|_I - 1/|alpha(hbar)|_J|
  std::string note;
};

/// K = lim |1/|hbar|_I - 1/|alpha(hbar)|_J|, computed from alpha's exact image
/// values (snapping would inject a divergent 1/hbar^2 error along the tail).
inline SecondOrderReport is_second_order(const BaseMap& alpha, const TailConfig& cfg = {}) {
  SecondOrderReport rep;
  const std::size_t n = alpha.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double di = detail::tail_distance(*alpha.source, i);
    const double dj = alpha.image_value[i];  // default compactification: |.|_J = value
    if (alpha.limit_to_limit && di == 0.0) continue;
    rep.hbars.push_back(di);
    rep.k_sequence.push_back(std::abs(1.0 / di - 1.0 / dj));
  }
  try {
    const LimitEstimate est = estimate_limit(rep.hbars, rep.k_sequence, cfg);
    rep.K = est.value;
    rep.error = est.error_bound;
    rep.pass = true;
  } catch (const NonCauchyTail& e) {
    rep.pass = false;
    rep.note = std::string("tail divergence: ") + e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------

struct PoissonFunctorialityRow {
  std::string pair;
  bool coset_equal = false;
  std::vector<double> bound_sequence;  // k(hbar) * ||phi(beta([a,b]))||
  SlopeFit bound_slope;
};

struct PoissonFunctorialityReport {
  bool smooth = false;
  SecondOrderReport second_order;
  std::vector<PoissonFunctorialityRow> rows;
  bool pass = false;
};

namespace detail {

/// Span membership of a constant-coefficient expression in a family, solved
/// over word-coefficient vectors.
inline bool in_expression_span(const Expression& e,
                               const std::vector<std::pair<std::string, Expression>>& family) {
  std::map<Word, std::size_t> index;
  auto index_of = [&](const Word& w) {
    auto it = index.find(w);
    if (it != index.end()) return it->second;
    const std::size_t i = index.size();
    index.emplace(w, i);
    return i;
  };
  std::vector<std::tuple<std::size_t, std::size_t, complexd>> entries;
  for (std::size_t c = 0; c < family.size(); ++c)
    for (const auto& t : family[c].second.terms())
      entries.emplace_back(index_of(t.word), c, t.coeff);
  std::vector<std::pair<std::size_t, complexd>> rhs_entries;
  for (const auto& t : e.terms()) rhs_entries.emplace_back(index_of(t.word), t.coeff);

  Matrix A = Matrix::Zero(index.size(), family.size());
  for (const auto& [r, c, v] : entries) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(index.size());
  for (const auto& [r, v] : rhs_entries) rhs(static_cast<Eigen::Index>(r)) = v;
  const Eigen::VectorXcd sol = A.colPivHouseholderQr().solve(rhs);
  return (A * sol - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm());
}

}  // namespace detail

/// Prop.-5.13-style check: for a smooth second-order morphism, the limit map
/// is a Poisson morphism: {sigma0(a), sigma0(b)} = sigma0({a,b}) modulo
/// quotient equality, with the proof's bound sequence reported.
inline PoissonFunctorialityReport check_poisson_functoriality(
    const BundleMorphism& sigma, const PostQuantizationData& src, const PostQuantizationData& tgt,
    const ExtendedBundle& tgt_ext, double tol, const TailConfig& cfg = {}) {
  PoissonFunctorialityReport rep;

  rep.smooth = true;
  for (const auto& [name, p] : src.family)
    if (!detail::in_expression_span(sigma.beta(p), tgt.family)) rep.smooth = false;
  rep.second_order = is_second_order(sigma.alpha, cfg);
  if (!rep.smooth || !rep.second_order.pass) {
    rep.pass = false;
    return rep;
  }

  const auto& tgt_scheme = *tgt.bundle.scheme;
  bool all_equal = true;
  for (std::size_t i = 0; i < src.family.size(); ++i)
    for (std::size_t k = 0; k < src.family.size(); ++k) {
      const Expression& a = src.family[i].second;
      const Expression& b = src.family[k].second;
      if (a.max_degree() == 0 || b.max_degree() == 0) continue;
      PoissonFunctorialityRow row;
      row.pair = "{" + src.family[i].first + "," + src.family[k].first + "}";
      // {sigma0 a, sigma0 b} computed in the target scheme's table
      const Expression lhs = tgt_scheme.classical_bracket(sigma.beta(a), sigma.beta(b));
      const Expression rhs = sigma.beta(src.bracket(i, k));
      row.coset_equal = tgt_ext.quotient_equal(lhs, rhs, tol);
      all_equal = all_equal && row.coset_equal;

      // proof-formula bound: |1/|hbar|_I - 1/|alpha(hbar)|_J| ||phi(beta([a,b]))||
      const Expression comm_image = sigma.beta(a * b - b * a);
      double scale = 1.0;
      std::vector<double> hb;
      for (std::size_t p = 0; p < sigma.alpha.size(); ++p) {
        const double di = detail::tail_distance(*sigma.alpha.source, p);
        const double dj = sigma.alpha.image_value[p];
        const std::size_t tk = (*tgt.bundle.fibers)[sigma.alpha.image_index[p]];
        const double nrm = operator_norm(evaluate_expression(tgt_scheme, comm_image, tk));
        hb.push_back(di);
        row.bound_sequence.push_back(std::abs(1.0 / di - 1.0 / dj) * nrm);
        scale = std::max(scale, nrm);
      }
      row.bound_slope = fit_slope(hb, row.bound_sequence, 4, scale);
      rep.rows.push_back(std::move(row));
    }

  rep.pass = all_equal;
  return rep;
}

}  // namespace qbundle
