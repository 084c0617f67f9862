#pragma once

// Formal generator expressions: finite linear combinations of words in
// registered generator labels and their formal adjoints.  A term may carry a
// scalar coefficient function sampled on the scheme's base grid, which is how
// the C0(I)/UCb(I) module action is represented.
//
// Expressions are the intensional representation of sections: the extension
// machinery keeps the SAME expression algebra over an enlarged base and only
// changes what evaluation means at new points.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qbundle {

using complexd = std::complex<double>;

struct Letter {
  std::uint16_t label = 0;
  bool star = false;

  friend bool operator==(const Letter&, const Letter&) = default;
  friend auto operator<=>(const Letter&, const Letter&) = default;
};

using Word = std::vector<Letter>;

/// Scalar coefficient function sampled on the owning scheme's full grid.  A
/// declared limit value (when the function is known to converge at the
/// adjoined point) lets classical symbols be taken of sampled-coefficient
/// sections.
struct GridFunction {
  std::vector<std::complex<double>> values;
  std::optional<std::complex<double>> limit;

  friend bool operator==(const GridFunction&, const GridFunction&) = default;
};

struct Term {
  std::complex<double> coeff{1.0, 0.0};
  std::optional<GridFunction> fn;  // absent = constant coefficient
  Word word;                       // empty word = unit
};

class Expression {
 public:
  Expression() = default;

  static Expression zero() { return Expression(); }

  static Expression unit(std::complex<double> c = 1.0) {
    Expression e;
    e.terms_.push_back(Term{c, std::nullopt, {}});
    return e;
  }

  static Expression label(std::uint16_t idx, bool star = false) {
    Expression e;
    e.terms_.push_back(Term{{1.0, 0.0}, std::nullopt, Word{Letter{idx, star}}});
    return e;
  }

  static Expression word(Word w, std::complex<double> c = 1.0) {
    Expression e;
    e.terms_.push_back(Term{c, std::nullopt, std::move(w)});
    return e;
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int max_degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max<int>(d, static_cast<int>(t.word.size()));
    return d;
  }

  Expression& operator+=(const Expression& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    normalize();
    return *this;
  }

  Expression& operator-=(const Expression& o) { return *this += o * std::complex<double>(-1.0); }

  friend Expression operator+(Expression a, const Expression& b) { return a += b; }
  friend Expression operator-(Expression a, const Expression& b) { return a -= b; }

  friend Expression operator*(Expression a, std::complex<double> c) {
    for (auto& t : a.terms_) t.coeff *= c;
    a.normalize();
    return a;
  }
  friend Expression operator*(std::complex<double> c, Expression a) { return std::move(a) * c; }

  friend Expression operator*(const Expression& a, const Expression& b) {
    Expression out;
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_) {
        Term t;
        t.coeff = ta.coeff * tb.coeff;
        t.word = ta.word;
        t.word.insert(t.word.end(), tb.word.begin(), tb.word.end());
        if (ta.fn && tb.fn) {
          if (ta.fn->values.size() != tb.fn->values.size())
            throw std::invalid_argument("expression product: coefficient grids differ");
          GridFunction f = *ta.fn;
          for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] *= tb.fn->values[i];
          f.limit = (ta.fn->limit && tb.fn->limit)
                        ? std::optional<std::complex<double>>(*ta.fn->limit * *tb.fn->limit)
                        : std::nullopt;
          t.fn = std::move(f);
        } else if (ta.fn) {
          t.fn = ta.fn;
        } else if (tb.fn) {
          t.fn = tb.fn;
        }
        out.terms_.push_back(std::move(t));
      }
    out.normalize();
    return out;
  }

  /// Multiply by a sampled scalar function (module action).
  Expression scaled_by(const GridFunction& f) const {
    Expression out = *this;
    for (auto& t : out.terms_) {
      if (t.fn) {
        if (t.fn->values.size() != f.values.size())
          throw std::invalid_argument("module action: coefficient grids differ");
        for (std::size_t i = 0; i < f.values.size(); ++i) t.fn->values[i] *= f.values[i];
        t.fn->limit = (t.fn->limit && f.limit)
                          ? std::optional<std::complex<double>>(*t.fn->limit * *f.limit)
                          : std::nullopt;
      } else {
        t.fn = f;
      }
    }
    out.normalize();
    return out;
  }

  /// Formal adjoint: conjugate coefficients, reverse words, flip stars.
  Expression star() const {
    Expression out;
    for (const auto& t : terms_) {
      Term s;
      s.coeff = std::conj(t.coeff);
      if (t.fn) {
        GridFunction f = *t.fn;
        for (auto& v : f.values) v = std::conj(v);
        if (f.limit) f.limit = std::conj(*f.limit);
        s.fn = std::move(f);
      }
      s.word.reserve(t.word.size());
      for (auto it = t.word.rbegin(); it != t.word.rend(); ++it)
        s.word.push_back(Letter{it->label, !it->star});
      out.terms_.push_back(std::move(s));
    }
    out.normalize();
    return out;
  }

  /// Canonical form: terms sorted by (word, coefficient function), like terms
  /// merged, exact-zero terms dropped.
  void normalize() {
    std::sort(terms_.begin(), terms_.end(), term_less);
    std::vector<Term> merged;
    for (auto& t : terms_) {
      if (!merged.empty() && same_shape(merged.back(), t)) {
        merged.back().coeff += t.coeff;
      } else {
        merged.push_back(std::move(t));
      }
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Term& t) { return t.coeff == std::complex<double>(0.0); }),
                 merged.end());
    terms_ = std::move(merged);
  }

  friend bool structurally_equal(const Expression& a, const Expression& b) {
    if (a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i) {
      const Term& s = a.terms_[i];
      const Term& t = b.terms_[i];
      if (s.word != t.word || s.coeff != t.coeff || s.fn.has_value() != t.fn.has_value())
        return false;
      if (s.fn && !(*s.fn == *t.fn)) return false;
    }
    return true;
  }

 private:
  static bool term_less(const Term& a, const Term& b) {
    if (a.word != b.word) return a.word < b.word;
    const bool af = a.fn.has_value(), bf = b.fn.has_value();
    if (af != bf) return bf;  // constant-coefficient terms first
    if (af) {
      const auto& x = a.fn->values;
      const auto& y = b.fn->values;
      if (x.size() != y.size()) return x.size() < y.size();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].real() != y[i].real()) return x[i].real() < y[i].real();
        if (x[i].imag() != y[i].imag()) return x[i].imag() < y[i].imag();
      }
      const bool al = a.fn->limit.has_value(), bl = b.fn->limit.has_value();
      if (al != bl) return bl;
      if (al) {
        if (a.fn->limit->real() != b.fn->limit->real())
          return a.fn->limit->real() < b.fn->limit->real();
        if (a.fn->limit->imag() != b.fn->limit->imag())
          return a.fn->limit->imag() < b.fn->limit->imag();
      }
    }
    return false;
  }

  static bool same_shape(const Term& a, const Term& b) {
    if (a.word != b.word || a.fn.has_value() != b.fn.has_value()) return false;
    return !a.fn || *a.fn == *b.fn;
  }

  std::vector<Term> terms_;
};

inline Expression adjoint(const Expression& e) { return e.star(); }

}  // namespace qbundle
