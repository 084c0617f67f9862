#pragma once

// Numeric checkers for the strict-quantization conditions: von Neumann
// (asymptotic multiplicativity), Dirac (rescaled commutator vs Poisson
// bracket), Rieffel (norm continuity, with the extrapolated limit
// cross-checked against the classical symbol), and the deformation
// requirements (nondegeneracy below the degree cap, closure under products).

#include <string>
#include <vector>

#include "qbundle/bundle.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/extrapolation.hpp"
#include "qbundle/matrix.hpp"
#include "qbundle/rng.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

struct ConvergenceReport {
  std::string name;
  std::vector<double> hbars;
  std::vector<double> values;     // magnitude of the quantity under test
  std::vector<double> residuals;  // the condition's defect per fiber
  SlopeFit slope;
  double slope_min = 0.9;
  bool pass = false;
};

namespace detail {
inline void finish_report(ConvergenceReport& r, std::size_t tail_window = 4) {
  double scale = 1.0;
  for (double v : r.values) scale = std::max(scale, std::abs(v));
  r.slope = fit_slope(r.hbars, r.residuals, tail_window, scale);
  r.pass = r.slope.passes(r.slope_min);
}
}  // namespace detail

/// r(hbar) = ||Q(a) Q(b) - Q(ab)||.
inline ConvergenceReport check_von_neumann(const QuantizationScheme& s, const Expression& a,
                                           const Expression& b, double slope_min = 0.9) {
  ConvergenceReport r;
  r.name = "von_neumann";
  r.slope_min = slope_min;
  const Expression ab = a * b;
  for (std::size_t k = 0; k < s.samples(); ++k) {
    const Matrix qa = quantize(s, a, k), qb = quantize(s, b, k);
    const Matrix defect = qa * qb - quantize(s, ab, k);
    r.hbars.push_back(s.hbar(k));
    r.values.push_back(operator_norm(Matrix(qa * qb)));
    r.residuals.push_back(operator_norm(defect));
  }
  detail::finish_report(r);
  return r;
}

/// r(hbar) = ||(i/hbar)[Q(a), Q(b)] - Q({a,b})||.
inline ConvergenceReport check_dirac(const QuantizationScheme& s, const Expression& a,
                                     const Expression& b, double slope_min = 0.9) {
  ConvergenceReport r;
  r.name = "dirac";
  r.slope_min = slope_min;
  const Expression bracket = s.classical_bracket(a, b);
  for (std::size_t k = 0; k < s.samples(); ++k) {
    const double hb = s.hbar(k);
    const Matrix lhs = scaled_bracket(quantize(s, a, k), quantize(s, b, k), hb);
    const Matrix rhs = quantize(s, bracket, k);
    r.hbars.push_back(hb);
    r.values.push_back(operator_norm(rhs));
    r.residuals.push_back(operator_norm(Matrix(lhs - rhs)));
  }
  detail::finish_report(r);
  return r;
}

struct RieffelReport {
  NormFunction norms;
  UniformContinuityReport continuity;
  LimitEstimate limit;
  double symbol_sup = 0.0;
  bool limit_matches_symbol = false;
  bool pass = false;
};

/// Norm continuity of hbar -> ||phi_hbar(a)|| plus the extrapolated limit,
/// cross-checked against the classical symbol's sup norm.
inline RieffelReport check_rieffel(const Bundle& b, const Expression& a, double cross_tol = 5e-2,
                                   const TailConfig& cfg = {}) {
  RieffelReport r;
  const Section sec = b.section(a);
  r.norms = norm_function(sec);
  r.continuity = check_uniform_continuity(r.norms, 1e9, cfg);
  if (!r.continuity.cauchy_ok) {
    r.pass = false;
    return r;
  }
  r.limit = estimate_limit(r.norms.hbars, r.norms.values, cfg);
  r.symbol_sup = b.scheme->symbol_sup(a);
  r.limit_matches_symbol =
      std::abs(r.limit.value - r.symbol_sup) <= cross_tol + r.limit.error_bound;
  r.pass = r.continuity.pass && r.limit_matches_symbol;
  return r;
}

struct DeformationReport {
  bool nondegenerate_ok = true;   // nonzero symbols below the cap quantize to nonzero
  bool zero_maps_to_zero = true;
  bool closure_ok = true;         // products stay in the quantized word span
  bool rank_ok = true;            // quantized monomial span fills M_n on small fibers
  std::vector<std::string> truncation_flags;
  bool pass = false;
};

/// Nondegeneracy and multiplicative closure of Q[P] at desk scale.  Degrees
/// above the fiber cap are flagged as truncated, not failed.
inline DeformationReport check_deformation(const Bundle& b, int trials, Rng& rng) {
  DeformationReport r;
  const auto& s = *b.scheme;

  for (int t = 0; t < trials; ++t)
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::size_t k = (*b.fibers)[i];
      const int cap = static_cast<int>(s.fiber_dim(k)) - 1;
      Expression e = detail::random_expression(s, rng, std::min(2, cap), 3, false);
      bool truncated = false;
      const Matrix q = quantize(s, e, k, &truncated);
      const double sym = s.symbol_sup(e);
      if (truncated) {
        r.truncation_flags.push_back("trial expression above degree cap at hbar=" +
                                     std::to_string(b.hbar(i)));
        continue;
      }
      if (sym > 1e-6 && operator_norm(q) <= 1e-12) r.nondegenerate_ok = false;
      if (sym <= 1e-12 && operator_norm(q) > 1e-8) r.zero_maps_to_zero = false;
    }

  // zero expression quantizes to zero (consistency direction)
  for (std::size_t i = 0; i < b.size(); ++i)
    if (operator_norm(quantize(s, Expression::zero(), (*b.fibers)[i])) != 0.0)
      r.zero_maps_to_zero = false;

  // span checks on fibers small enough for exact ranks
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t k = (*b.fibers)[i];
    const Eigen::Index n = s.fiber_dim(k);
    if (n > 12) continue;
    const int cap = static_cast<int>(n) - 1;
    // enumerate monomial words over the *-closed label set up to the cap
    std::vector<Word> words{{}};
    std::vector<Word> frontier{{}};
    for (int len = 1; len <= cap; ++len) {
      std::vector<Word> next;
      for (const auto& w : frontier)
        for (std::uint16_t l = 0; l < s.labels().size(); ++l)
          for (bool star : {false, true}) {
            Word ww = w;
            ww.push_back(Letter{l, star});
            next.push_back(std::move(ww));
          }
      words.insert(words.end(), next.begin(), next.end());
      frontier = std::move(next);
    }
    Matrix stacked(n * n, static_cast<Eigen::Index>(words.size()));
    for (std::size_t c = 0; c < words.size(); ++c) {
      const Matrix q = s.quantize_word(k, words[c], nullptr);
      stacked.col(static_cast<Eigen::Index>(c)) =
          Eigen::Map<const Eigen::VectorXcd>(q.data(), n * n);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
    qr.setThreshold(1e-10);
    if (qr.rank() != n * n) r.rank_ok = false;

    // closure: products of quantized generators stay in the quantized span
    Eigen::ColPivHouseholderQR<Matrix> solver(stacked);
    solver.setThreshold(1e-10);
    for (std::uint16_t l1 = 0; l1 < s.labels().size(); ++l1)
      for (std::uint16_t l2 = 0; l2 < s.labels().size(); ++l2) {
        const Matrix prod = s.quantize_word(k, {Letter{l1, false}}, nullptr) *
                            s.quantize_word(k, {Letter{l2, false}}, nullptr);
        const Eigen::VectorXcd rhs = Eigen::Map<const Eigen::VectorXcd>(prod.data(), n * n);
        const Eigen::VectorXcd coeff = solver.solve(rhs);
        if ((stacked * coeff - rhs).norm() > 1e-8) r.closure_ok = false;
      }
  }

  r.pass = r.nondegenerate_ok && r.zero_maps_to_zero && r.closure_ok && r.rank_ok;
  return r;
}

}  // namespace qbundle
