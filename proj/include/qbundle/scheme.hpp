#pragma once

// Quantization schemes: a family of fibers M_n over a sampled parameter grid,
// generator images per fiber, a word-ordering rule for quantizing monomials,
// the classical Poisson bracket on generator expressions, and classical
// symbols sampled on a phase-space grid.
//
// Two maps live here and they are intentionally different:
//   * quantize(...)  — the linear quantization map Q_hbar with the scheme's
//     ordering rule (symmetrization / Weyl phases).  Only asymptotically
//     multiplicative; it feeds the von Neumann / Dirac / Rieffel checkers.
//   * evaluate_word(...) — the *-homomorphic evaluation of section words:
//     ordered products of quantized generators.  This is what the bundle's
//     evaluation maps use.

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qbundle/base_space.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/matrix.hpp"

namespace qbundle {

struct UnknownLabel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised by classical_bracket when a pair is not expressible in the scheme's
/// bracket table.
struct MissingBracket : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class QuantizationScheme {
 public:
  virtual ~QuantizationScheme() = default;

  const std::string& name() const { return name_; }
  const std::shared_ptr<const SampledBaseSpace>& base() const { return base_; }
  std::size_t samples() const { return base_->size(); }
  double hbar(std::size_t k) const { return base_->point(k); }

  const std::vector<std::string>& labels() const { return labels_; }
  std::uint16_t label_index(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return static_cast<std::uint16_t>(i);
    throw UnknownLabel("unknown generator label '" + std::string(label) + "' for scheme " + name_);
  }
  void require_labels(const Expression& e) const {
    for (const auto& t : e.terms())
      for (const auto& l : t.word)
        if (l.label >= labels_.size())
          throw UnknownLabel("expression references unregistered label for scheme " + name_);
  }

  virtual Eigen::Index fiber_dim(std::size_t k) const = 0;

  /// Image of a single generator letter (adjoint applied for starred letters).
  virtual Matrix letter(std::size_t k, const Letter& l) const = 0;

  /// Scheme ordering rule applied to one word.  Sets *truncated when the word
  /// exceeds the fiber's degree cap.
  virtual Matrix quantize_word(std::size_t k, const Word& w, bool* truncated) const = 0;

  /// Classical Poisson bracket of two expressions via the scheme's table.
  virtual Expression classical_bracket(const Expression& a, const Expression& b) const = 0;

  /// Classical symbol sampled on the scheme's sup-norm evaluation grid.
  virtual std::vector<complexd> symbol(const Expression& e) const = 0;

  double symbol_sup(const Expression& e) const {
    double s = 0.0;
    for (const auto& v : symbol(e)) s = std::max(s, std::abs(v));
    return s;
  }

  /// Expressions that evaluate to zero in every fiber (exact relations of the
  /// generator images); the compatibility battery builds kernel elements from
  /// these.
  virtual std::vector<Expression> relations() const { return {}; }

  /// The canonical section realizing a classical polynomial: an expression
  /// whose *-homomorphic evaluation equals the polynomial's quantization at
  /// every fiber.  Default: the expression itself (exact for schemes whose
  /// evaluation and ordering rules agree on table outputs).
  virtual Expression canonical_section(const Expression& e) const { return e; }

  virtual bool supports_flow() const { return false; }

  /// Q_k(g composed with the time-t Hamiltonian flow of h): the classical flow
  /// is integrated on the scheme's quadrature grid by a 4th-order method and
  /// the flowed samples are quantized through the scheme's transform.
  virtual Matrix quantize_flowed(std::size_t /*k*/, const Expression& /*g*/,
                                 const Expression& /*h*/, double /*t*/, int /*steps*/) const {
    throw std::logic_error("classical flow unavailable for scheme " + name_);
  }

 protected:
  QuantizationScheme(std::string name, std::shared_ptr<const SampledBaseSpace> base,
                     std::vector<std::string> labels)
      : name_(std::move(name)), base_(std::move(base)), labels_(std::move(labels)) {}

  std::string name_;
  std::shared_ptr<const SampledBaseSpace> base_;
  std::vector<std::string> labels_;
};

namespace detail {
inline complexd term_coefficient(const Term& t, std::size_t k) {
  complexd c = t.coeff;
  if (t.fn) {
    if (k >= t.fn->values.size())
      throw std::out_of_range("coefficient function not sampled at this grid point");
    c *= t.fn->values[k];
  }
  return c;
}
}  // namespace detail

/// Linear quantization map Q_hbar (ordering rule per scheme).
inline Matrix quantize(const QuantizationScheme& s, const Expression& e, std::size_t k,
                       bool* truncated = nullptr) {
  s.require_labels(e);
  const Eigen::Index n = s.fiber_dim(k);
  Matrix acc = Matrix::Zero(n, n);
  if (truncated) *truncated = false;
  for (const auto& t : e.terms()) {
    bool trunc = false;
    acc += detail::term_coefficient(t, k) * s.quantize_word(k, t.word, &trunc);
    if (truncated && trunc) *truncated = true;
  }
  return acc;
}

/// *-homomorphic evaluation of a word: ordered product of generator images.
inline Matrix evaluate_word(const QuantizationScheme& s, const Word& w, std::size_t k) {
  const Eigen::Index n = s.fiber_dim(k);
  Matrix acc = Matrix::Identity(n, n);
  for (const auto& l : w) acc *= s.letter(k, l);
  return acc;
}

/// *-homomorphic evaluation of an expression (the phi_hbar map on sections).
inline Matrix evaluate_expression(const QuantizationScheme& s, const Expression& e,
                                  std::size_t k) {
  s.require_labels(e);
  const Eigen::Index n = s.fiber_dim(k);
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& t : e.terms())
    acc += detail::term_coefficient(t, k) * evaluate_word(s, t.word, k);
  return acc;
}

}  // namespace qbundle
