#pragma once

// Fuzzy-sphere quantization: spin-j fibers M_{2j+1}, Q(x_a) = S_a/sqrt(j(j+1)),
// hbar_j = 1/sqrt(j(j+1)) (optionally 1/j), monomials quantized by full
// symmetrization, classical bracket {x_a, x_b} = -eps_{abc} x_c, classical
// symbols evaluated on spherical grids.
//
// The harmonic transform (sampled function -> fiber matrix) used by the limit
// dynamics needs the matrix spherical harmonics: the images of the harmonic
// polynomials Y_lm under symmetrized substitution x_a -> S_a/sqrt(j(j+1)).
// The naive lowering ladder from S_+^l is numerically unstable for large j
// (contamination is amplified along the chain), so each off-diagonal band m is
// built from the ad-Casimir sum_a [S_a,[S_a,.]], which restricts to the band
// as a real symmetric tridiagonal operator with simple eigenvalues l(l+1).
// Unit eigenvectors give the harmonics up to scale and sign: the scale is the
// closed-form Hilbert-Schmidt norm of Y_ll (the normalized ad-lowering is
// HS-unitary, making the norm m-independent) and the sign is anchored by one
// ad(S_-) step from the band above, which does not amplify.

#include <algorithm>
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

struct SpinMatrices {
  Matrix s1, s2, s3;
};

/// Standard spin-j matrices in the descending |j,m> basis: [S1,S2] = i S3 and
/// cyclic, S1^2+S2^2+S3^2 = j(j+1) I.
inline SpinMatrices spin_matrices(double j) {
  const int n = static_cast<int>(std::lround(2 * j + 1));
  Matrix s3 = Matrix::Zero(n, n), sp = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) s3(k, k) = j - k;
  for (int k = 1; k < n; ++k) {
    const double m = j - k;
    sp(k - 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  const Matrix sm = sp.adjoint();
  return {(sp + sm) / 2.0, (sp - sm) / complexd(0.0, 2.0), std::move(s3)};
}

// ---------------------------------------------------------------------------
// Spherical grids

struct SphericalQuadrature {
  std::vector<double> x1, x2, x3, weight;  // unit vectors + quadrature weights

  std::size_t size() const { return weight.size(); }
};

namespace detail {

/// Gauss-Legendre nodes and weights on [-1,1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

}  // namespace detail

/// Gauss-Legendre x uniform-azimuth product rule, exact for band-limited
/// integrands up to degree ~ 2 n_theta - 1.
inline SphericalQuadrature make_spherical_quadrature(int n_theta, int n_phi) {
  std::vector<double> ct, w;
  detail::gauss_legendre(n_theta, ct, w);
  SphericalQuadrature q;
  q.x1.reserve(n_theta * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double st = std::sqrt(std::max(0.0, 1.0 - ct[i] * ct[i]));
    for (int k = 0; k < n_phi; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / n_phi;
      q.x1.push_back(st * std::cos(phi));
      q.x2.push_back(st * std::sin(phi));
      q.x3.push_back(ct[i]);
      q.weight.push_back(w[i] * 2.0 * std::numbers::pi / n_phi);
    }
  }
  return q;
}

/// Uniform theta x phi grid including both poles; used for sup norms so that
/// e.g. sup|x3| = 1 is hit exactly.
inline SphericalQuadrature make_sphere_sup_grid(int n_theta, int n_phi) {
  SphericalQuadrature g;
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::numbers::pi * i / (n_theta - 1);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int k = 0; k < n_phi; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / n_phi;
      g.x1.push_back(st * std::cos(phi));
      g.x2.push_back(st * std::sin(phi));
      g.x3.push_back(ct);
      g.weight.push_back(0.0);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Classical spherical harmonics (Condon-Shortley phases)

namespace detail {

inline double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 0; i < m; ++i) {
      pmm *= -fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

}  // namespace detail

/// Y_lm at a unit vector (x1,x2,x3).
inline complexd sphere_harmonic(int l, int m, double x1, double x2, double x3) {
  const int mm = std::abs(m);
  const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) *
                                std::exp(std::lgamma(l - mm + 1.0) - std::lgamma(l + mm + 1.0)));
  const double p = detail::assoc_legendre(l, mm, x3);
  const double rho = std::hypot(x1, x2);
  complexd eimphi(1.0, 0.0);
  if (mm > 0 && rho > 0.0) {
    const complexd u(x1 / rho, x2 / rho);
    eimphi = std::pow(u, mm);
  }
  complexd y = norm * p * eimphi;
  if (m < 0) y = static_cast<double>((mm % 2 == 0) ? 1 : -1) * std::conj(y);
  return y;
}

// ---------------------------------------------------------------------------

enum class SphereParam {
  casimir_sqrt,  // hbar_j = 1/sqrt(j(j+1)); Dirac exact on linear generators
  inverse_j      // hbar_j = 1/j; exercises nonzero linear Dirac residuals
};

class FuzzySphereScheme : public QuantizationScheme {
 public:
  explicit FuzzySphereScheme(std::vector<double> j_values,
                             SphereParam param = SphereParam::casimir_sqrt)
      : QuantizationScheme("fuzzy_sphere", make_base(j_values, param), {"x1", "x2", "x3"}),
        j_values_(std::move(j_values)),
        param_(param) {
    spins_.reserve(j_values_.size());
    letters_.reserve(j_values_.size());
    for (double j : j_values_) {
      spins_.push_back(spin_matrices(j));
      const double scale = 1.0 / std::sqrt(j * (j + 1));
      letters_.push_back({spins_.back().s1 * scale, spins_.back().s2 * scale,
                          spins_.back().s3 * scale});
    }
    sym_cache_.resize(j_values_.size());
    harmonics_.resize(j_values_.size());
    quadrature_ = make_spherical_quadrature(64, 128);
    sup_grid_ = make_sphere_sup_grid(97, 128);
  }

  double spin(std::size_t k) const { return j_values_.at(fiber_of(k)); }
  const SpinMatrices& spin_matrices_at(std::size_t k) const { return spins_[fiber_of(k)]; }
  const SphericalQuadrature& quadrature() const { return quadrature_; }

  Eigen::Index fiber_dim(std::size_t k) const override {
    return static_cast<Eigen::Index>(std::lround(2 * spin(k) + 1));
  }

  Matrix letter(std::size_t k, const Letter& l) const override {
    if (l.label >= 3) throw UnknownLabel("fuzzy sphere has labels x1, x2, x3");
    // generators are self-adjoint, so starred letters have the same image
    return letters_[fiber_of(k)][l.label];
  }

  /// Fully symmetrized product of the letter images.  Order-independent, so
  /// only the multiset of labels matters; computed by the first-letter
  /// recursion sym(M) = (1/|M|) sum_a mult_a S_a sym(M - a).
  Matrix quantize_word(std::size_t k, const Word& w, bool* truncated) const override {
    const std::size_t f = fiber_of(k);
    const double j = j_values_[f];
    if (truncated) *truncated = static_cast<double>(w.size()) > 2.0 * j;
    std::array<int, 3> counts{0, 0, 0};
    for (const auto& l : w) {
      if (l.label >= 3) throw UnknownLabel("fuzzy sphere has labels x1, x2, x3");
      ++counts[l.label];
    }
    const double norm = std::pow(j * (j + 1), 0.5 * static_cast<double>(w.size()));
    return symmetrized(f, counts) / norm;
  }

  /// Leibniz expansion over letters of {x_a, x_b} = -eps_{abc} x_c; output
  /// words are sorted (the classical algebra is commutative).
  Expression classical_bracket(const Expression& a, const Expression& b) const override {
    require_labels(a);
    require_labels(b);
    Expression out;
    for (const auto& ta : a.terms())
      for (const auto& tb : b.terms()) {
        Term base;
        base.coeff = ta.coeff * tb.coeff;
        if (ta.fn && tb.fn) {
          GridFunction fn = *ta.fn;
          for (std::size_t i = 0; i < fn.values.size(); ++i) fn.values[i] *= tb.fn->values[i];
          base.fn = std::move(fn);
        } else if (ta.fn) {
          base.fn = ta.fn;
        } else if (tb.fn) {
          base.fn = tb.fn;
        }
        for (std::size_t i = 0; i < ta.word.size(); ++i)
          for (std::size_t r = 0; r < tb.word.size(); ++r) {
            const int p = ta.word[i].label, q = tb.word[r].label;
            const auto [c, sign] = eps_partner(p, q);
            if (sign == 0) continue;
            Word word;
            word.reserve(ta.word.size() + tb.word.size() - 1);
            for (std::size_t s = 0; s < ta.word.size(); ++s)
              if (s != i) word.push_back(Letter{ta.word[s].label, false});
            for (std::size_t s = 0; s < tb.word.size(); ++s)
              if (s != r) word.push_back(Letter{tb.word[s].label, false});
            word.push_back(Letter{static_cast<std::uint16_t>(c), false});
            std::sort(word.begin(), word.end());
            Expression piece =
                Expression::word(std::move(word), base.coeff * -static_cast<double>(sign));
            if (base.fn) piece = piece.scaled_by(*base.fn);
            out += piece;  // {x_p, x_q} = -eps_{pqc} x_c
          }
      }
    return out;
  }

  std::vector<complexd> symbol(const Expression& e) const override {
    require_labels(e);
    return sample_symbol(e, sup_grid_);
  }

  /// Point evaluation of the classical symbol (generators are the coordinate
  /// functions; stars act trivially since they are real).
  static complexd symbol_at(const Expression& e, double x1, double x2, double x3,
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
      double v = 1.0;
      for (const auto& l : t.word) v *= (l.label == 0 ? x1 : l.label == 1 ? x2 : x3);
      acc += c * v;
    }
    return acc;
  }

  std::vector<Expression> relations() const override {
    Expression r = Expression::unit(-1.0);
    for (std::uint16_t a = 0; a < 3; ++a)
      r += Expression::label(a) * Expression::label(a);
    return {r};  // x1^2 + x2^2 + x3^2 = 1, exact by the Casimir identity
  }

  bool supports_flow() const override { return true; }

  /// Q_k(g o Phi_t^h): RK4 integration of xdot = grad(h) x x on the quadrature
  /// nodes, then the harmonic transform up to l <= min(16, 2j).
  Matrix quantize_flowed(std::size_t k, const Expression& g, const Expression& h, double t,
                         int steps) const override {
    require_labels(g);
    require_labels(h);
    const auto& q = quadrature_;
    std::vector<complexd> samples(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::array<double, 3> x{q.x1[i], q.x2[i], q.x3[i]};
      flow_point(h, x, t, steps);
      samples[i] = symbol_at(g, x[0], x[1], x[2]);
    }
    const int lmax = static_cast<int>(std::min(16.0, 2.0 * spin(k)));
    return quantize_sampled(k, samples, lmax);
  }

  /// Harmonic transform of quadrature samples: sum_lm <Y_lm, f> Yhat_lm.
  Matrix quantize_sampled(std::size_t k, const std::vector<complexd>& samples, int lmax) const {
    if (samples.size() != quadrature_.size())
      throw std::invalid_argument("quantize_sampled: expects samples on the quadrature grid");
    const auto& H = harmonics(k, lmax);
    const Eigen::Index n = fiber_dim(k);
    Matrix acc = Matrix::Zero(n, n);
    const auto& q = quadrature_;
    for (int l = 0; l <= lmax; ++l)
      for (int m = -l; m <= l; ++m) {
        complexd c = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
          c += q.weight[i] * std::conj(sphere_harmonic(l, m, q.x1[i], q.x2[i], q.x3[i])) *
               samples[i];
        acc += c * H.at(l, m);
      }
    return acc;
  }

  struct MatHarmonics {
    int lmax = -1;
    Eigen::Index dim = 0;
    std::vector<Matrix> store;  // index l*(l+1)+m

    const Matrix& at(int l, int m) const { return store.at(l * (l + 1) + m); }
  };

  /// Matrix spherical harmonics for fiber k up to degree lmax (<= 2j).
  const MatHarmonics& harmonics(std::size_t k, int lmax) const {
    const std::size_t f = fiber_of(k);
    std::scoped_lock lock(mutex_);
    auto& slot = harmonics_[f];
    if (!slot || slot->lmax < lmax) slot = build_harmonics(f, lmax);
    return *slot;
  }

 private:
  static std::shared_ptr<const SampledBaseSpace> make_base(const std::vector<double>& js,
                                                           SphereParam param) {
    if (js.empty()) throw std::invalid_argument("fuzzy sphere needs at least one spin value");
    std::vector<double> pts;
    for (std::size_t i = 0; i < js.size(); ++i) {
      const double j = js[i];
      if (!(j >= 0.5) || std::abs(2 * j - std::lround(2 * j)) > 1e-12)
        throw std::invalid_argument("spin values must be half-integers >= 1/2");
      if (i > 0 && !(j > js[i - 1]))
        throw std::invalid_argument("spin values must be strictly increasing");
      pts.push_back(param == SphereParam::casimir_sqrt ? 1.0 / std::sqrt(j * (j + 1)) : 1.0 / j);
    }
    return std::make_shared<SampledBaseSpace>(std::move(pts));
  }

  std::size_t fiber_of(std::size_t k) const {
    if (k >= j_values_.size()) throw std::out_of_range("fiber index out of range");
    return k;
  }

  static std::pair<int, int> eps_partner(int p, int q) {
    if (p == q) return {0, 0};
    const int c = 3 - p - q;
    // eps_{pqc}: +1 for cyclic (0,1,2)
    const int sign = ((q - p + 3) % 3 == 1) ? 1 : -1;
    return {c, sign};
  }

  const Matrix& symmetrized(std::size_t f, const std::array<int, 3>& counts) const {
    std::scoped_lock lock(mutex_);
    return symmetrized_unlocked(f, counts, sym_cache_[f]);
  }

  const Matrix& symmetrized_unlocked(std::size_t f, const std::array<int, 3>& counts,
                                     std::map<std::array<int, 3>, Matrix>& cache) const {
    auto it = cache.find(counts);
    if (it != cache.end()) return it->second;
    const Eigen::Index n = spins_[f].s1.rows();
    Matrix result;
    const int d = counts[0] + counts[1] + counts[2];
    if (d == 0) {
      result = Matrix::Identity(n, n);
    } else {
      result = Matrix::Zero(n, n);
      const Matrix* S[3] = {&spins_[f].s1, &spins_[f].s2, &spins_[f].s3};
      for (int a = 0; a < 3; ++a) {
        if (counts[a] == 0) continue;
        std::array<int, 3> rest = counts;
        --rest[a];
        const Matrix& sub = symmetrized_unlocked(f, rest, cache);
        result += (static_cast<double>(counts[a]) / d) * (*S[a] * sub);
      }
    }
    return cache.emplace(counts, std::move(result)).first->second;
  }

  std::vector<complexd> sample_symbol(const Expression& e, const SphericalQuadrature& grid) const {
    std::vector<complexd> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      out[i] = symbol_at(e, grid.x1[i], grid.x2[i], grid.x3[i]);
    return out;
  }

  void flow_point(const Expression& h, std::array<double, 3>& x, double t, int steps) const {
    const double dt = t / steps;
    auto field = [&](const std::array<double, 3>& p) {
      std::array<double, 3> grad{0.0, 0.0, 0.0};
      for (const auto& term : h.terms()) {
        if (term.fn)
          throw std::invalid_argument("classical flow needs a constant-coefficient Hamiltonian");
        for (std::size_t i = 0; i < term.word.size(); ++i) {
          double prod = 1.0;
          for (std::size_t s = 0; s < term.word.size(); ++s)
            if (s != i)
              prod *= (term.word[s].label == 0 ? p[0] : term.word[s].label == 1 ? p[1] : p[2]);
          grad[term.word[i].label] += term.coeff.real() * prod;
        }
      }
      // xdot = grad(h) x x for the bracket {x_a,x_b} = -eps_{abc} x_c
      return std::array<double, 3>{grad[1] * p[2] - grad[2] * p[1],
                                   grad[2] * p[0] - grad[0] * p[2],
                                   grad[0] * p[1] - grad[1] * p[0]};
    };
    for (int s = 0; s < steps; ++s) {
      const auto k1 = field(x);
      std::array<double, 3> p2, p3, p4;
      for (int a = 0; a < 3; ++a) p2[a] = x[a] + 0.5 * dt * k1[a];
      const auto k2 = field(p2);
      for (int a = 0; a < 3; ++a) p3[a] = x[a] + 0.5 * dt * k2[a];
      const auto k3 = field(p3);
      for (int a = 0; a < 3; ++a) p4[a] = x[a] + dt * k3[a];
      const auto k4 = field(p4);
      for (int a = 0; a < 3; ++a)
        x[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      for (auto& c : x) c /= r;  // the flow is spherical; keep roundoff off the radius
    }
  }

  std::shared_ptr<MatHarmonics> build_harmonics(std::size_t f, int lmax) const {
    const double j = j_values_[f];
    const double jj = j * (j + 1);
    const Eigen::Index n = spins_[f].s1.rows();
    lmax = std::min<int>(lmax, static_cast<int>(n) - 1);
    auto H = std::make_shared<MatHarmonics>();
    H->lmax = lmax;
    H->dim = n;
    H->store.assign(static_cast<std::size_t>((lmax + 1) * (lmax + 1)), Matrix());

    // ladder coefficients s[k] = (S+)[k-1,k]
    std::vector<double> s(n, 0.0);
    for (Eigen::Index k = 1; k < n; ++k) {
      const double m = j - k;
      s[k] = std::sqrt(jj - m * (m + 1));
    }

    auto put = [&](int l, int m, Matrix M) { H->store[l * (l + 1) + m] = std::move(M); };

    // top bands Yhat_ll = c_l S_+^l / jj^{l/2} (log-space products, no cancellation)
    std::vector<std::vector<double>> band(lmax + 1);  // band[l] = entries of Yhat_ll
    std::vector<double> rho(lmax + 1, 0.0);           // HS norm, m-independent
    for (int l = 0; l <= lmax; ++l) {
      const double logc = -l * std::log(2.0) - std::lgamma(l + 1.0) +
                          0.5 * std::lgamma(2.0 * l + 2.0) -
                          0.5 * std::log(4.0 * std::numbers::pi);
      const double sign = (l % 2 == 0) ? 1.0 : -1.0;
      band[l].assign(n - l, 0.0);
      double nrm2 = 0.0;
      for (Eigen::Index a = 0; a + l < n; ++a) {
        double logprod = 0.0;
        for (int i = 1; i <= l; ++i) logprod += std::log(s[a + i]);
        band[l][a] = sign * std::exp(logc + logprod - 0.5 * l * std::log(jj));
        nrm2 += band[l][a] * band[l][a];
      }
      rho[l] = std::sqrt(nrm2);
      Matrix M = Matrix::Zero(n, n);
      for (Eigen::Index a = 0; a + l < n; ++a) M(a, a + l) = band[l][a];
      put(l, l, M);
    }

    // band operators
    auto ad_sp = [&](const std::vector<double>& v, int m) {  // band m -> m+1
      std::vector<double> out(v.size() - 1, 0.0);
      for (std::size_t a = 0; a + 1 < v.size(); ++a)
        out[a] = s[a + 1] * v[a + 1] - v[a] * s[a + m + 1];
      return out;
    };
    auto ad_sm = [&](const std::vector<double>& v, int m) {  // band m -> m-1
      std::vector<double> out(v.size() + 1, 0.0);
      for (std::size_t a = 0; a < out.size(); ++a) {
        const double t1 = (a >= 1 && a - 1 < v.size()) ? s[a] * v[a - 1] : 0.0;
        const double t2 = (a < v.size()) ? v[a] * s[a + m] : 0.0;
        out[a] = t1 - t2;
      }
      return out;
    };

    std::vector<std::vector<std::vector<double>>> fixed(lmax + 1);  // [m][l-m] band vectors
    for (int l = 0; l <= lmax; ++l) {
      fixed[l].resize(1);
      fixed[l][0] = band[l];  // at band m=l the only component is Yhat_ll
    }

    for (int m = lmax - 1; m >= 0; --m) {
      const Eigen::Index dim = n - m;
      // ad-Casimir on band m: C = adS- adS+ + (m + m^2)
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        std::vector<double> e(dim, 0.0);
        e[i] = 1.0;
        std::vector<double> w = (dim > 1) ? ad_sm(ad_sp(e, m), m + 1)
                                          : std::vector<double>(1, 0.0);
        for (Eigen::Index r = 0; r < dim; ++r) C(r, i) = w[r] + (m + m * m) * e[r];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
      std::vector<std::vector<double>> this_band(lmax - m + 1);
      this_band[0] = {};  // placeholder for l = m (filled below)
      for (int l = std::max(m, 1); l <= lmax; ++l) {
        const double target = l * (l + 1.0);
        Eigen::Index best = 0;
        double bd = std::abs(es.eigenvalues()(0) - target);
        for (Eigen::Index i = 1; i < dim; ++i) {
          const double d = std::abs(es.eigenvalues()(i) - target);
          if (d < bd) { bd = d; best = i; }
        }
        if (bd > 1e-6 * std::max(1.0, target))
          throw std::runtime_error("harmonic band eigenvalue mismatch");
        std::vector<double> v(dim);
        for (Eigen::Index r = 0; r < dim; ++r) v[r] = es.eigenvectors()(r, best) * rho[l];
        if (l == m) {
          this_band[0] = v;  // unused; band[l] anchor already stored
          continue;
        }
        // sign anchor: one lowering step from the fixed band above
        const auto& above = (l == m + 1) ? band[l] : fixed[l][l - (m + 1)];
        const auto ref = ad_sm(above, m + 1);
        double dot = 0.0;
        for (Eigen::Index r = 0; r < dim; ++r) dot += ref[r] * v[r];
        if (dot < 0.0)
          for (auto& c : v) c = -c;
        this_band[l - m] = v;
        Matrix M = Matrix::Zero(n, n);
        for (Eigen::Index a = 0; a < dim; ++a) M(a, a + m) = v[a];
        put(l, m, std::move(M));
      }
      for (int l = m; l <= lmax; ++l) {
        if (l == m) continue;
        fixed[l].resize(l - m + 1);
        fixed[l][l - m] = this_band[l - m];
      }
    }
    put(0, 0, Matrix::Identity(n, n) / std::sqrt(4.0 * std::numbers::pi));

    for (int l = 1; l <= lmax; ++l)
      for (int m = 1; m <= l; ++m) {
        const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        put(l, -m, sgn * Matrix(H->at(l, m).adjoint()));
      }
    return H;
  }

  std::vector<double> j_values_;
  SphereParam param_;
  std::vector<SpinMatrices> spins_;
  std::vector<std::array<Matrix, 3>> letters_;
  SphericalQuadrature quadrature_;
  SphericalQuadrature sup_grid_;
  mutable std::mutex mutex_;
  mutable std::vector<std::map<std::array<int, 3>, Matrix>> sym_cache_;
  mutable std::vector<std::shared_ptr<const MatHarmonics>> harmonics_;
};

}  // namespace qbundle
