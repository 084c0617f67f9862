#pragma once

// Rational noncommutative torus: N x N fibers with hbar_N = 1/N, generators
// e_(1,0) -> clock U = diag(1, w, ..., w^{N-1}) and e_(0,1) -> cyclic shift V
// (V|k> = |k+1>, so UV = w VU), general Fourier modes by Weyl ordering
//   W(m) = w^{-m1 m2 / 2} U^{m1} V^{m2},
// which satisfies [W(m), W(n)] = 2i sin(pi (m1 n2 - m2 n1)/N) W(m+n) and
// W(m)* = W(-m).  Classical bracket {e_m, e_n} = -2 pi (m1 n2 - m2 n1) e_{m+n};
// symbols are trigonometric polynomials on a uniform torus grid (which is also
// an exact quadrature for band-limited functions).

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "qbundle/expression.hpp"
#include "qbundle/matrix.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

using TorusMode = std::array<int, 2>;

inline int mode_wedge(const TorusMode& m, const TorusMode& n) {
  return m[0] * n[1] - m[1] * n[0];
}

/// Total Fourier mode of a word in the letters u, v and their adjoints.
inline TorusMode word_mode(const Word& w) {
  TorusMode m{0, 0};
  for (const auto& l : w) {
    if (l.label >= 2) throw UnknownLabel("nc torus has labels u, v");
    m[l.label] += l.star ? -1 : 1;
  }
  return m;
}

/// Canonical word for a mode: |m1| copies of u (starred when negative), then
/// |m2| copies of v.
inline Word mode_word(const TorusMode& m) {
  Word w;
  for (int i = 0; i < std::abs(m[0]); ++i) w.push_back(Letter{0, m[0] < 0});
  for (int i = 0; i < std::abs(m[1]); ++i) w.push_back(Letter{1, m[1] < 0});
  return w;
}

class NcTorusScheme : public QuantizationScheme {
 public:
  explicit NcTorusScheme(std::vector<int> sizes)
      : QuantizationScheme("nc_torus", make_base(sizes), {"u", "v"}), sizes_(std::move(sizes)) {
    clocks_.reserve(sizes_.size());
    shifts_.reserve(sizes_.size());
    for (int N : sizes_) {
      Matrix U = Matrix::Zero(N, N), V = Matrix::Zero(N, N);
      for (int k = 0; k < N; ++k) {
        U(k, k) = std::exp(complexd(0.0, 2.0 * std::numbers::pi * k / N));
        V((k + 1) % N, k) = 1.0;
      }
      clocks_.push_back(std::move(U));
      shifts_.push_back(std::move(V));
    }
    const int g = 64;
    grid_theta_.reserve(g * g);
    for (int i = 0; i < g; ++i)
      for (int k = 0; k < g; ++k)
        grid_theta_.push_back({2.0 * std::numbers::pi * i / g, 2.0 * std::numbers::pi * k / g});
  }

  int size_at(std::size_t k) const { return sizes_.at(k); }

  Eigen::Index fiber_dim(std::size_t k) const override { return sizes_.at(k); }

  Matrix letter(std::size_t k, const Letter& l) const override {
    if (l.label >= 2) throw UnknownLabel("nc torus has labels u, v");
    const Matrix& g = l.label == 0 ? clocks_.at(k) : shifts_.at(k);
    return l.star ? Matrix(g.adjoint()) : g;
  }

  /// Weyl-ordered representative W(mode(word)).  Truncated when a mode index
  /// reaches N/2 (quantization is injective only below that cap).
  Matrix quantize_word(std::size_t k, const Word& w, bool* truncated) const override {
    const TorusMode m = word_mode(w);
    const int N = sizes_.at(k);
    if (truncated) *truncated = (2 * std::abs(m[0]) >= N) || (2 * std::abs(m[1]) >= N);
    return weyl(k, m);
  }

  /// W(m) = w^{-m1 m2/2} U^{m1} V^{m2}.
  Matrix weyl(std::size_t k, const TorusMode& m) const {
    std::scoped_lock lock(mutex_);
    auto& cache = weyl_cache_;
    const auto key = std::make_pair(k, m);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const int N = sizes_.at(k);
    const complexd phase =
        std::exp(complexd(0.0, -std::numbers::pi * m[0] * m[1] / static_cast<double>(N)));
    Matrix out = phase * int_power(clocks_.at(k), m[0]) * int_power(shifts_.at(k), m[1]);
    cache.emplace(key, out);
    return out;
  }

  /// The canonical mode section: phi_N(e_m) = W_N(m) exactly.  The Weyl phase
  /// is carried as a sampled coefficient with declared limit 1 (it tends to 1
  /// as N grows), which keeps evaluation *-homomorphic while the section hits
  /// the Weyl representative on the nose.
  Expression mode_section(const TorusMode& m) const {
    Expression e = Expression::word(mode_word(m));
    if (m[0] * m[1] == 0) return e;  // no reordering phase
    GridFunction phase;
    for (int N : sizes_)
      phase.values.push_back(
          std::exp(complexd(0.0, -std::numbers::pi * m[0] * m[1] / static_cast<double>(N))));
    phase.limit = complexd(1.0, 0.0);
    return e.scaled_by(phase);
  }

  /// {e_m, e_n} = -2 pi (m ^ n) e_{m+n}, extended bilinearly (plain classical
  /// polynomial; quantize() sends its words to Weyl representatives).
  Expression classical_bracket(const Expression& a, const Expression& b) const override {
    require_labels(a);
    require_labels(b);
    Expression out;
    for (const auto& ta : a.terms())
      for (const auto& tb : b.terms()) {
        const TorusMode m = word_mode(ta.word), n = word_mode(tb.word);
        const int wedge = mode_wedge(m, n);
        if (wedge == 0) continue;
        Expression piece = Expression::word(mode_word({m[0] + n[0], m[1] + n[1]}),
                                            ta.coeff * tb.coeff *
                                                (-2.0 * std::numbers::pi * wedge));
        if (ta.fn) piece = piece.scaled_by(*ta.fn);
        if (tb.fn) piece = piece.scaled_by(*tb.fn);
        out += piece;
      }
    return out;
  }

  /// Rewrites each term through the canonical mode section, so evaluation
  /// lands on Weyl representatives: phi_N(canonical_section(e)) = Q_N(e).
  Expression canonical_section(const Expression& e) const override {
    require_labels(e);
    Expression out;
    for (const auto& t : e.terms()) {
      Expression piece = mode_section(word_mode(t.word)) * t.coeff;
      if (t.fn) piece = piece.scaled_by(*t.fn);
      out += piece;
    }
    return out;
  }

  std::vector<complexd> symbol(const Expression& e) const override {
    require_labels(e);
    std::vector<complexd> out(grid_theta_.size());
    for (std::size_t i = 0; i < grid_theta_.size(); ++i)
      out[i] = symbol_at(e, grid_theta_[i][0], grid_theta_[i][1]);
    return out;
  }

  static complexd symbol_at(const Expression& e, double t1, double t2,
                            std::size_t fn_index = static_cast<std::size_t>(-1)) {
    complexd acc = 0.0;
    for (const auto& t : e.terms()) {
      complexd c = t.coeff;
      if (t.fn) {
        if (fn_index != static_cast<std::size_t>(-1))
          c *= t.fn->values.at(fn_index);
        else if (t.fn->limit)
          c *= *t.fn->limit;  // classical symbol at the adjoined point
        else
          throw std::invalid_argument(
              "symbol_at: sampled coefficient without a declared limit");
      }
      const TorusMode m = word_mode(t.word);
      acc += c * std::exp(complexd(0.0, m[0] * t1 + m[1] * t2));
    }
    return acc;
  }

  std::vector<Expression> relations() const override {
    std::vector<Expression> rel;
    for (std::uint16_t l = 0; l < 2; ++l) {
      rel.push_back(Expression::label(l) * Expression::label(l, true) - Expression::unit());
      rel.push_back(Expression::label(l, true) * Expression::label(l) - Expression::unit());
    }
    return rel;  // unitarity of the clock and shift
  }

  bool supports_flow() const override { return true; }

  /// Classical flow of a real trigonometric Hamiltonian:
  /// theta1' = -2 pi d(h)/d(theta2), theta2' = +2 pi d(h)/d(theta1).
  Matrix quantize_flowed(std::size_t k, const Expression& g, const Expression& h, double t,
                         int steps) const override {
    require_labels(g);
    require_labels(h);
    std::vector<complexd> samples(grid_theta_.size());
    for (std::size_t i = 0; i < grid_theta_.size(); ++i) {
      std::array<double, 2> th = grid_theta_[i];
      flow_point(h, th, t, steps);
      samples[i] = symbol_at(g, th[0], th[1]);
    }
    return quantize_sampled(k, samples);
  }

  /// Fourier transform of grid samples, quantizing every mode below the cap.
  Matrix quantize_sampled(std::size_t k, const std::vector<complexd>& samples) const {
    if (samples.size() != grid_theta_.size())
      throw std::invalid_argument("quantize_sampled: expects samples on the torus grid");
    const int N = sizes_.at(k);
    const int cap = (N - 1) / 2;
    const Eigen::Index n = fiber_dim(k);
    Matrix acc = Matrix::Zero(n, n);
    const double w = 1.0 / static_cast<double>(grid_theta_.size());
    for (int m1 = -cap; m1 <= cap; ++m1)
      for (int m2 = -cap; m2 <= cap; ++m2) {
        complexd c = 0.0;
        for (std::size_t i = 0; i < grid_theta_.size(); ++i)
          c += w * std::exp(complexd(0.0, -(m1 * grid_theta_[i][0] + m2 * grid_theta_[i][1]))) *
               samples[i];
        acc += c * weyl(k, {m1, m2});
      }
    return acc;
  }

 private:
  static std::shared_ptr<const SampledBaseSpace> make_base(const std::vector<int>& sizes) {
    if (sizes.empty()) throw std::invalid_argument("nc torus needs at least one size");
    std::vector<double> pts;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] < 2) throw std::invalid_argument("torus sizes must be at least 2");
      if (i > 0 && sizes[i] <= sizes[i - 1])
        throw std::invalid_argument("torus sizes must be strictly increasing");
      pts.push_back(1.0 / sizes[i]);
    }
    return std::make_shared<SampledBaseSpace>(std::move(pts));
  }

  static Matrix int_power(const Matrix& g, int p) {
    const Eigen::Index n = g.rows();
    Matrix acc = Matrix::Identity(n, n);
    const Matrix base = p >= 0 ? g : Matrix(g.adjoint());
    for (int i = 0; i < std::abs(p); ++i) acc *= base;
    return acc;
  }

  void flow_point(const Expression& h, std::array<double, 2>& th, double t, int steps) const {
    const double dt = t / steps;
    auto field = [&](const std::array<double, 2>& p) {
      double g1 = 0.0, g2 = 0.0;
      for (const auto& term : h.terms()) {
        if (term.fn)
          throw std::invalid_argument("classical flow needs a constant-coefficient Hamiltonian");
        const TorusMode m = word_mode(term.word);
        const complexd val =
            term.coeff * std::exp(complexd(0.0, m[0] * p[0] + m[1] * p[1])) * complexd(0.0, 1.0);
        g1 += (static_cast<double>(m[0]) * val).real();
        g2 += (static_cast<double>(m[1]) * val).real();
      }
      return std::array<double, 2>{-2.0 * std::numbers::pi * g2, 2.0 * std::numbers::pi * g1};
    };
    for (int s = 0; s < steps; ++s) {
      const auto k1 = field(th);
      std::array<double, 2> p2{th[0] + 0.5 * dt * k1[0], th[1] + 0.5 * dt * k1[1]};
      const auto k2 = field(p2);
      std::array<double, 2> p3{th[0] + 0.5 * dt * k2[0], th[1] + 0.5 * dt * k2[1]};
      const auto k3 = field(p3);
      std::array<double, 2> p4{th[0] + dt * k3[0], th[1] + dt * k3[1]};
      const auto k4 = field(p4);
      th[0] += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      th[1] += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    }
  }

  std::vector<int> sizes_;
  std::vector<Matrix> clocks_, shifts_;
  std::vector<std::array<double, 2>> grid_theta_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, TorusMode>, Matrix> weyl_cache_;
};

}  // namespace qbundle
