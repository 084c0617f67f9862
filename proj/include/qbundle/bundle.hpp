#pragma once

// Sections, evaluation maps, and the three UC_b-bundle axioms in their
// desk-scale form; canonical restriction and the vanishing-norm restriction.
//
// A Bundle selects a sub-grid of its scheme's parameter samples and carries
// the generating expressions.  Sections are intensional: an expression plus
// memoized per-fiber evaluations through the scheme.  Evaluation is exactly
// *-homomorphic (ordered products of generator images); the scheme's ordering
// rule only enters the quantization-condition checkers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "qbundle/base_space.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/extrapolation.hpp"
#include "qbundle/matrix.hpp"
#include "qbundle/rng.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

class Section {
 public:
  Section(std::shared_ptr<const QuantizationScheme> scheme,
          std::shared_ptr<const std::vector<std::size_t>> fibers, Expression expr)
      : scheme_(std::move(scheme)),
        fibers_(std::move(fibers)),
        expr_(std::move(expr)),
        cache_(std::make_shared<Cache>()) {
    scheme_->require_labels(expr_);
  }

  const Expression& expr() const { return expr_; }
  const QuantizationScheme& scheme() const { return *scheme_; }
  std::shared_ptr<const QuantizationScheme> scheme_ptr() const { return scheme_; }
  std::shared_ptr<const std::vector<std::size_t>> fibers() const { return fibers_; }

  std::size_t size() const { return fibers_->size(); }
  double hbar(std::size_t i) const { return scheme_->hbar((*fibers_)[i]); }

  /// phi_hbar(a) at grid position i (memoized; deterministic and race-free).
  Matrix evaluate(std::size_t i) const {
    const std::size_t k = fibers_->at(i);
    {
      std::scoped_lock lock(cache_->m);
      auto it = cache_->values.find(k);
      if (it != cache_->values.end()) return it->second;
    }
    Matrix v = evaluate_expression(*scheme_, expr_, k);
    std::scoped_lock lock(cache_->m);
    return cache_->values.emplace(k, std::move(v)).first->second;
  }

  double norm_at(std::size_t i) const {
    const std::size_t k = fibers_->at(i);
    {
      std::scoped_lock lock(cache_->m);
      auto it = cache_->norms.find(k);
      if (it != cache_->norms.end()) return it->second;
    }
    const double n = operator_norm(evaluate(i));
    std::scoped_lock lock(cache_->m);
    return cache_->norms.emplace(k, n).first->second;
  }

  /// sup over sampled hbar of the fiber norms (the section-algebra norm).
  double sup_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s = std::max(s, norm_at(i));
    return s;
  }

  Section with_expression(Expression e) const { return Section(scheme_, fibers_, std::move(e)); }

 private:
  struct Cache {
    std::mutex m;
    std::map<std::size_t, Matrix> values;
    std::map<std::size_t, double> norms;
  };

  std::shared_ptr<const QuantizationScheme> scheme_;
  std::shared_ptr<const std::vector<std::size_t>> fibers_;
  Expression expr_;
  std::shared_ptr<Cache> cache_;
};

/// The sampled norm function N_a: hbar -> ||phi_hbar(a)|| in grid order.
struct NormFunction {
  std::vector<double> hbars;
  std::vector<double> values;
};

inline NormFunction norm_function(const Section& a) {
  NormFunction n;
  n.hbars.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    n.hbars.push_back(a.hbar(i));
    n.values.push_back(a.norm_at(i));
  }
  return n;
}

// ---------------------------------------------------------------------------

struct Bundle {
  std::shared_ptr<const QuantizationScheme> scheme;
  std::shared_ptr<const std::vector<std::size_t>> fibers;  // scheme grid indices
  std::shared_ptr<const SampledBaseSpace> base;            // the sub-grid as a space
  std::vector<Expression> generators;

  std::size_t size() const { return fibers->size(); }
  double hbar(std::size_t i) const { return scheme->hbar((*fibers)[i]); }

  Section section(Expression e) const { return Section(scheme, fibers, std::move(e)); }
};

/// Bundle over the scheme's full grid, generated by the scheme's labels.
inline Bundle full_bundle(std::shared_ptr<const QuantizationScheme> scheme) {
  Bundle b;
  auto idx = std::make_shared<std::vector<std::size_t>>();
  for (std::size_t k = 0; k < scheme->samples(); ++k) idx->push_back(k);
  b.fibers = std::move(idx);
  b.base = scheme->base();
  for (std::uint16_t l = 0; l < scheme->labels().size(); ++l)
    b.generators.push_back(Expression::label(l));
  b.scheme = std::move(scheme);
  return b;
}

inline Bundle sub_bundle(const Bundle& in, std::vector<std::size_t> positions) {
  Bundle b;
  b.scheme = in.scheme;
  auto idx = std::make_shared<std::vector<std::size_t>>();
  std::vector<double> pts;
  for (std::size_t p : positions) {
    idx->push_back(in.fibers->at(p));
    pts.push_back(in.hbar(p));
  }
  b.fibers = std::move(idx);
  b.base = std::make_shared<SampledBaseSpace>(std::move(pts));
  b.generators = in.generators;
  return b;
}

// ---------------------------------------------------------------------------
// Uniform continuity (Def. of a UC_b bundle, condition (iii)) as an empirical
// two-part test: a modulus-of-continuity power fit plus the Cauchy-tail
// criterion.  Calibrated so that sqrt(j/(j+1)) profiles pass and sin(1/hbar)
// profiles fail.

struct UniformContinuityReport {
  bool pass = false;
  bool modulus_ok = false;
  bool cauchy_ok = false;
  double gamma = 0.0;          // fitted modulus exponent: omega(delta) <= C delta^gamma
  double max_modulus = 0.0;    // largest |N(x)-N(y)| within the window
  std::vector<std::pair<double, double>> modulus;  // (delta, omega(delta)) samples
};

inline UniformContinuityReport check_uniform_continuity(const NormFunction& n, double window,
                                                        const TailConfig& cfg = {}) {
  if (n.values.size() < 3)
    throw std::invalid_argument("check_uniform_continuity: needs at least 3 samples");
  UniformContinuityReport r;

  std::vector<std::pair<double, double>> pairs;  // (distance, |dN|)
  for (std::size_t i = 0; i < n.values.size(); ++i)
    for (std::size_t k = i + 1; k < n.values.size(); ++k) {
      const double d = std::abs(n.hbars[i] - n.hbars[k]);
      if (d <= window) pairs.emplace_back(d, std::abs(n.values[i] - n.values[k]));
    }
  std::sort(pairs.begin(), pairs.end());
  double running = 0.0;
  for (const auto& [d, dv] : pairs) {
    running = std::max(running, dv);
    if (!r.modulus.empty() && r.modulus.back().first == d)
      r.modulus.back().second = running;
    else
      r.modulus.emplace_back(d, running);
  }
  r.max_modulus = running;

  double scale = 0.0;
  for (double v : n.values) scale = std::max(scale, std::abs(v));
  const double floor = 1e-12 * std::max(1.0, scale);
  if (r.max_modulus <= floor) {
    r.modulus_ok = true;  // constant norm function
    r.gamma = std::numeric_limits<double>::infinity();
  } else {
    std::vector<double> lx, ly;
    for (const auto& [d, om] : r.modulus)
      if (om > floor) {
        lx.push_back(std::log(d));
        ly.push_back(std::log(om));
      }
    if (lx.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
      }
      const double m = static_cast<double>(lx.size());
      r.gamma = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    r.modulus_ok = r.gamma > 0.05;
  }

  try {
    (void)estimate_limit(n.hbars, n.values, cfg);
    r.cauchy_ok = true;
  } catch (const NonCauchyTail&) {
    r.cauchy_ok = false;
  } catch (const std::invalid_argument&) {
    r.cauchy_ok = n.values.size() >= 3;  // too few samples for the tail window
  }

  r.pass = r.modulus_ok && r.cauchy_ok;
  return r;
}

// ---------------------------------------------------------------------------

/// Module action fa with phi(fa) = f(hbar) phi(a) exactly; f is sampled on the
/// section's grid.  Non-uniformly-continuous coefficient functions are
/// flagged, not rejected.
inline Section module_action(const std::vector<complexd>& f, const Section& a,
                             bool* uniformly_continuous = nullptr) {
  if (f.size() != a.size())
    throw std::invalid_argument("module_action: function sampled on the wrong grid");
  for (const auto& v : f)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("module_action: coefficient function must be bounded");
  GridFunction g;
  g.values.assign(a.scheme().samples(), complexd(0.0, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) g.values[a.fibers()->at(i)] = f[i];
  if (uniformly_continuous) {
    NormFunction n;
    for (std::size_t i = 0; i < a.size(); ++i) {
      n.hbars.push_back(a.hbar(i));
      n.values.push_back(std::abs(f[i]));
    }
    *uniformly_continuous =
        n.values.size() < 3 || check_uniform_continuity(n, 1e9).pass;
  }
  return a.with_expression(a.expr().scaled_by(g));
}

/// Object-level restriction to sections of vanishing norm: multiply by a
/// cutoff that is 1 on the head of the grid and decays along the tail.
inline Section restrict_to_vanishing(const Section& a, const std::vector<double>& cutoff) {
  if (cutoff.size() != a.size())
    throw std::invalid_argument("restrict_to_vanishing: cutoff sampled on the wrong grid");
  for (double c : cutoff)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("restrict_to_vanishing: cutoff out of range [0,1]");
  std::vector<complexd> f(cutoff.begin(), cutoff.end());
  return module_action(f, a);
}

// ---------------------------------------------------------------------------
// Fullness (Def. condition (i)) surrogate.

struct FiberFullness {
  double hbar = 0.0;
  Eigen::Index dim = 0;
  bool rank_checked = false;  // exact word-span rank (small fibers only)
  Eigen::Index span_rank = 0;
  bool irreducible = false;   // commutant test
  bool pass = false;
};

struct FullnessReport {
  bool pass = true;
  bool sup_norm_ok = true;
  std::vector<FiberFullness> fibers;
};

namespace detail {

/// Union-find connectivity of the off-diagonal support of `mats` expressed in
/// the eigenbasis of a simple-spectrum witness.  Trivial commutant (hence the
/// full matrix algebra, by the double-commutant theorem for *-closed families)
/// iff the graph is connected.
inline bool commutant_trivial(const std::vector<Matrix>& gens) {
  if (gens.empty()) return false;
  const Eigen::Index n = gens.front().rows();
  if (n == 1) return true;
  for (const auto& witness : gens) {
    Eigen::ComplexEigenSolver<Matrix> es(witness);
    if (es.info() != Eigen::Success) continue;
    auto ev = es.eigenvalues();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(ev(i)));
    bool simple = true;
    for (Eigen::Index i = 0; i < n && simple; ++i)
      for (Eigen::Index k = i + 1; k < n && simple; ++k)
        if (std::abs(ev(i) - ev(k)) <= 1e-8 * std::max(1.0, scale)) simple = false;
    if (!simple) continue;
    const Matrix P = es.eigenvectors();
    const Matrix Pinv = P.inverse();
    std::vector<Eigen::Index> parent(n);
    for (Eigen::Index i = 0; i < n; ++i) parent[i] = i;
    std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& g : gens) {
      const Matrix gg = Pinv * g * P;
      const double tol = 1e-10 * std::max(1.0, operator_norm(g));
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = i + 1; k < n; ++k)
          if (std::abs(gg(i, k)) > tol || std::abs(gg(k, i)) > tol)
            parent[find(i)] = find(k);
    }
    Eigen::Index roots = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (find(i) == i) ++roots;
    return roots == 1;
  }
  return false;  // no simple-spectrum witness among the generators
}

inline Eigen::Index word_span_rank(const QuantizationScheme& s,
                                   const std::vector<Expression>& gens, std::size_t k,
                                   int max_len) {
  // enumerate evaluated words over the *-closed generator set up to max_len
  std::vector<Matrix> words{Matrix::Identity(s.fiber_dim(k), s.fiber_dim(k))};
  std::vector<Matrix> frontier = words;
  std::vector<Matrix> gmats;
  for (const auto& g : gens) {
    gmats.push_back(evaluate_expression(s, g, k));
    gmats.push_back(gmats.back().adjoint());
  }
  for (int len = 1; len <= max_len; ++len) {
    std::vector<Matrix> next;
    for (const auto& w : frontier)
      for (const auto& g : gmats) next.push_back(w * g);
    words.insert(words.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  const Eigen::Index n = s.fiber_dim(k);
  Matrix stacked(n * n, static_cast<Eigen::Index>(words.size()));
  for (std::size_t c = 0; c < words.size(); ++c)
    stacked.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const Eigen::VectorXcd>(words[c].data(), n * n);
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace detail

struct FullnessConfig {
  int max_word_len = 4;          // exact rank test word cap
  Eigen::Index rank_dim_cap = 12;  // exact rank test only for fibers this small
  int trials = 8;                // random sections for the sup-norm formula
};

/// (a) the sup-norm formula holds for random sections and (b) at each fiber
/// the generator images generate the full matrix algebra: exact word-span
/// rank for small fibers, commutant triviality for every fiber.
inline FullnessReport check_fullness(const Bundle& b, const FullnessConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------

/// Canonical restriction along an injective isometric embedding alpha into
/// this bundle's base: keeps only the fibers over alpha's image, same
/// expressions; evaluating the restricted section equals evaluating the
/// original at alpha(hbar) exactly.
inline Bundle canonical_restriction(const Bundle& b, const BaseMap& alpha) {
  if (alpha.target.get() != b.base.get())
    throw std::invalid_argument("canonical_restriction: alpha must land in the bundle's base");
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (std::size_t k = i + 1; k < alpha.size(); ++k) {
      if (alpha.image_index[i] == alpha.image_index[k])
        throw std::invalid_argument("canonical_restriction: alpha is not injective");
      const double di = alpha.source->distance(i, k);
      const double dj = alpha.target->distance(alpha.image_index[i], alpha.image_index[k]);
      if (std::abs(di - dj) > 1e-12)
        throw std::invalid_argument("canonical_restriction: alpha is not isometric");
    }
  std::vector<std::size_t> positions(alpha.image_index.begin(), alpha.image_index.end());
  return sub_bundle(b, positions);
}

namespace detail {

/// Random polynomial expression in the scheme's generators.
inline Expression random_expression(const QuantizationScheme& s, Rng& rng, int max_degree,
                                    int max_terms, bool allow_star = true) {
  Expression e;
  const int terms = 1 + static_cast<int>(rng.uniform_index(max_terms));
  for (int t = 0; t < terms; ++t) {
    const int deg = static_cast<int>(rng.uniform_index(max_degree + 1));
    Word w;
    for (int d = 0; d < deg; ++d)
      w.push_back(Letter{static_cast<std::uint16_t>(rng.uniform_index(s.labels().size())),
                         allow_star && rng.uniform() < 0.25});
    e += Expression::word(std::move(w), rng.unit_disc());
  }
  return e;
}

}  // namespace detail

inline FullnessReport check_fullness(const Bundle& b, const FullnessConfig& cfg, Rng& rng) {
  FullnessReport r;
  for (int t = 0; t < cfg.trials; ++t) {
    Section a = b.section(detail::random_expression(*b.scheme, rng, 2, 4));
    double sup = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double ni = a.norm_at(i);
      finite = finite && std::isfinite(ni);
      sup = std::max(sup, ni);
    }
    if (!finite || a.sup_norm() != sup) r.sup_norm_ok = false;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    FiberFullness f;
    f.hbar = b.hbar(i);
    f.dim = b.scheme->fiber_dim((*b.fibers)[i]);
    std::vector<Matrix> gens;
    for (const auto& g : b.generators)
      gens.push_back(evaluate_expression(*b.scheme, g, (*b.fibers)[i]));
    std::vector<Matrix> star_closed = gens;
    for (const auto& g : gens) star_closed.push_back(g.adjoint());
    f.irreducible = detail::commutant_trivial(star_closed);
    f.pass = f.irreducible;
    if (f.dim <= cfg.rank_dim_cap) {
      f.rank_checked = true;
      f.span_rank = detail::word_span_rank(*b.scheme, b.generators, (*b.fibers)[i],
                                           cfg.max_word_len);
      f.pass = f.pass && f.span_rank == f.dim * f.dim;
    }
    r.pass = r.pass && f.pass;
    r.fibers.push_back(std::move(f));
  }
  r.pass = r.pass && r.sup_norm_ok;
  return r;
}

}  // namespace qbundle
