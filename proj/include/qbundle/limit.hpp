#pragma once

// Extension-and-restriction: limiting seminorms along the grid tail, the null
// ideal of sections whose norms vanish at the adjoined point, the quotient
// fiber over 0_I, the classical-symbol cross-representation, and the
// uniqueness cross-check between the two limit-fiber representations.
//
// The extended bundle keeps the SAME expression algebra; only evaluation at
// the adjoined point changes meaning: an expression is sent to its coset
// modulo the null ideal, represented by the expression together with its
// extrapolated limiting norm (and, when the scheme provides symbols, the
// classical function it converges to).

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qbundle/base_space.hpp"
#include "qbundle/bundle.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/extrapolation.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

/// lim_{hbar -> 0} ||phi_hbar(a)||, estimated along the grid tail.
inline LimitEstimate limiting_norm(const Section& a, const TailConfig& cfg = {}) {
  const NormFunction n = norm_function(a);
  return estimate_limit(n.hbars, n.values, cfg);
}

/// Membership in the null ideal K_0 (Lemma-level surrogate: extrapolated norm
/// below tolerance plus its own error bound).
inline bool in_null_ideal(const Section& a, double tol, const TailConfig& cfg = {}) {
  const LimitEstimate est = limiting_norm(a, cfg);
  return est.value <= tol + est.error_bound;
}

struct LimitFiberElement {
  Expression expr;
  LimitEstimate limiting_norm;
  std::optional<std::vector<complexd>> symbol;  // classical representative, when available
};

class ExtendedBundle {
 public:
  ExtendedBundle(Bundle bundle, BaseMap embedding, TailConfig cfg)
      : bundle_(std::move(bundle)), embedding_(std::move(embedding)), tail_(cfg) {
    if (!embedding_.target->has_limit_point())
      throw std::invalid_argument("extend_bundle: target base must carry the limit point");
    if (!is_dense_isometric_embedding(embedding_))
      throw std::invalid_argument("extend_bundle: alpha is not a dense isometric embedding");
  }

  const Bundle& bundle() const { return bundle_; }
  const SampledBaseSpace& extended_base() const { return *embedding_.target; }
  const BaseMap& embedding() const { return embedding_; }
  const TailConfig& tail() const { return tail_; }

  /// Evaluation at pre-existing points is untouched by the extension.
  Matrix evaluate(const Expression& e, std::size_t i) const {
    return bundle_.section(e).evaluate(i);
  }

  /// The adjoined evaluation: the coset of e modulo the null ideal.
  LimitFiberElement limit_element(const Expression& e) const {
    LimitFiberElement x;
    x.expr = e;
    x.limiting_norm = quotient_estimate(e);
    bool constant_coeffs = true;
    for (const auto& t : e.terms()) constant_coeffs = constant_coeffs && !t.fn;
    if (constant_coeffs) x.symbol = bundle_.scheme->symbol(e);
    return x;
  }

  LimitEstimate quotient_estimate(const Expression& e) const {
    return qbundle::limiting_norm(bundle_.section(e), tail_);
  }

  /// Quotient (semi)norm of the coset of e.
  double quotient_norm(const Expression& e) const { return quotient_estimate(e).value; }

  /// Coset equality: quotient seminorm of the difference below tolerance plus
  /// the estimate's own error bound.
  bool quotient_equal(const Expression& x, const Expression& y, double tol) const {
    const Expression diff = x - y;
    if (diff.is_zero()) return true;
    const LimitEstimate est = quotient_estimate(diff);
    return est.value <= tol + est.error_bound;
  }

 private:
  Bundle bundle_;
  BaseMap embedding_;
  TailConfig tail_;
};

/// Unique minimal extension of a bundle along a dense isometric embedding into
/// a compactified base.  Evaluations at embedded points are unchanged (the
/// same scheme, expressions, and fiber indices; bit-identical recomputation).
inline ExtendedBundle extend_bundle(const Bundle& b, const BaseMap& alpha,
                                    const TailConfig& cfg = {}) {
  if (alpha.source.get() != b.base.get())
    throw std::invalid_argument("extend_bundle: alpha must start at the bundle's base");
  return ExtendedBundle(b, alpha, cfg);
}

/// Convenience: extend along the canonical embedding into the one-point
/// compactification of the bundle's own base.
inline ExtendedBundle extend_to_limit(const Bundle& b, const TailConfig& cfg = {}) {
  auto target = std::make_shared<SampledBaseSpace>(one_point_compactify(*b.base));
  BaseMap iota = make_base_map(b.base, target, [](double x) { return x; });
  iota.limit_to_limit = true;
  return extend_bundle(b, iota, cfg);
}

/// Quotient seminorm of a limit-fiber element.
inline double quotient_norm(const LimitFiberElement& x) { return x.limiting_norm.value; }

/// Classical symbol of a limit-fiber element (the scheme's symbol of its
/// representative expression).
inline std::vector<complexd> classical_symbol(const QuantizationScheme& s,
                                              const LimitFiberElement& x) {
  if (x.symbol) return *x.symbol;
  return s.symbol(x.expr);
}

// ---------------------------------------------------------------------------
// Theorem-2 style uniqueness cross-check: the quotient representation and the
// classical-symbol representation of the limit fiber agree isometrically on a
// generating family, and the identification is *-compatible.

struct UniquenessRow {
  std::string label;
  double quotient_norm = 0.0;
  double quotient_error = 0.0;
  double symbol_sup = 0.0;
  bool ok = false;
};

struct UniquenessReport {
  bool pass = true;
  bool star_compatible = true;
  double worst_gap = 0.0;
  std::vector<UniquenessRow> rows;
};

inline UniquenessReport check_uniqueness(const ExtendedBundle& eb,
                                         const std::vector<std::pair<std::string, Expression>>&
                                             family,
                                         double tol) {
  UniquenessReport rep;
  const auto& scheme = *eb.bundle().scheme;
  for (const auto& [label, e] : family) {
    UniquenessRow row;
    row.label = label;
    const LimitEstimate est = eb.quotient_estimate(e);
    row.quotient_norm = est.value;
    row.quotient_error = est.error_bound;
    row.symbol_sup = scheme.symbol_sup(e);
    const double gap = std::abs(row.quotient_norm - row.symbol_sup);
    row.ok = gap <= tol + row.quotient_error;
    rep.worst_gap = std::max(rep.worst_gap, gap);
    rep.pass = rep.pass && row.ok;
    rep.rows.push_back(row);

    // *-compatibility: adjoint corresponds to complex conjugation of symbols
    const auto sym = scheme.symbol(e);
    const auto sym_star = scheme.symbol(e.star());
    double star_defect = 0.0;
    for (std::size_t i = 0; i < sym.size(); ++i)
      star_defect = std::max(star_defect, std::abs(sym_star[i] - std::conj(sym[i])));
    if (star_defect > 1e-10) rep.star_compatible = false;
  }
  rep.pass = rep.pass && rep.star_compatible;
  return rep;
}

/// All words in the scheme's generator labels up to the given degree.
inline std::vector<std::pair<std::string, Expression>> generator_words(
    const QuantizationScheme& s, int degree_cap) {
  std::vector<std::pair<std::string, Expression>> out;
  std::vector<std::pair<std::string, Word>> frontier{{"1", {}}};
  out.emplace_back("1", Expression::unit());
  for (int d = 1; d <= degree_cap; ++d) {
    std::vector<std::pair<std::string, Word>> next;
    for (const auto& [name, w] : frontier)
      for (std::uint16_t l = 0; l < s.labels().size(); ++l) {
        Word ww = w;
        ww.push_back(Letter{l, false});
        const std::string nn = (name == "1") ? s.labels()[l] : name + "*" + s.labels()[l];
        out.emplace_back(nn, Expression::word(ww));
        next.emplace_back(nn, std::move(ww));
      }
    frontier = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------

/// The commutative-algebra view of the fiber over the adjoined point:
/// generators as cosets, expression product, quotient norm and equality, and
/// the symbol view.
class LimitFiber {
 public:
  explicit LimitFiber(std::shared_ptr<const ExtendedBundle> eb) : eb_(std::move(eb)) {
    for (const auto& g : eb_->bundle().generators)
      generators_.push_back(eb_->limit_element(g));
  }

  const std::vector<LimitFiberElement>& generators() const { return generators_; }

  LimitFiberElement element(const Expression& e) const { return eb_->limit_element(e); }

  /// Product of cosets: expression concatenation (well-defined modulo the
  /// null ideal).
  LimitFiberElement product(const LimitFiberElement& a, const LimitFiberElement& b) const {
    return eb_->limit_element(a.expr * b.expr);
  }

  double norm(const LimitFiberElement& x) const { return x.limiting_norm.value; }

  bool equal(const LimitFiberElement& a, const LimitFiberElement& b, double tol) const {
    return eb_->quotient_equal(a.expr, b.expr, tol);
  }

  /// Largest quotient norm of a generator commutator: the algebra over the
  /// limit point is commutative when this vanishes within tolerance.
  double max_generator_commutator(double* error_bound = nullptr) const {
    double worst = 0.0, err = 0.0;
    const auto& gens = eb_->bundle().generators;
    for (std::size_t i = 0; i < gens.size(); ++i)
      for (std::size_t k = i + 1; k < gens.size(); ++k) {
        const Expression comm = gens[i] * gens[k] - gens[k] * gens[i];
        const LimitEstimate est = eb_->quotient_estimate(comm);
        if (est.value > worst) {
          worst = est.value;
          err = est.error_bound;
        }
      }
    if (error_bound) *error_bound = err;
    return worst;
  }

 private:
  std::shared_ptr<const ExtendedBundle> eb_;
  std::vector<LimitFiberElement> generators_;
};

inline LimitFiber limit_fiber(std::shared_ptr<const ExtendedBundle> eb) {
  return LimitFiber(std::move(eb));
}

}  // namespace qbundle
