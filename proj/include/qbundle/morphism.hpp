#pragma once

// Bundle morphisms (alpha, beta): a metric base map plus a section-algebra map
// generated by label substitution and extended *-homomorphically.  The
// compatibility condition (equal source evaluations imply equal target
// evaluations at alpha(hbar)) is audited by a finite battery built from the
// scheme's exact relation elements.
//
// The extension functor keeps beta and extends alpha by 0_I -> 0_J; the
// restriction functor reads beta off on limit-fiber representatives.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbundle/base_space.hpp"
#include "qbundle/bundle.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/limit.hpp"
#include "qbundle/matrix.hpp"
#include "qbundle/rng.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

struct CompatibilityConfig {
  int battery_pairs = 64;  // expression pairs per sampled hbar
  int degree = 2;
  double tol = 1e-10;
};

struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// beta: label substitution extended linearly and *-homomorphically.
inline Expression substitute_labels(const Expression& e,
                                    const std::vector<Expression>& label_images) {
  Expression out;
  for (const auto& t : e.terms()) {
    Expression piece = Expression::unit(t.coeff);
    if (t.fn) piece = piece.scaled_by(*t.fn);
    for (const auto& l : t.word) {
      if (l.label >= label_images.size())
        throw UnknownLabel("label map does not cover all source labels");
      piece = piece * (l.star ? label_images[l.label].star() : label_images[l.label]);
    }
    out += piece;
  }
  return out;
}

struct BundleMorphism {
  std::shared_ptr<const Bundle> source, target;
  BaseMap alpha;
  std::vector<Expression> label_images;
  double battery_worst = 0.0;  // largest compatibility defect observed

  Expression beta(const Expression& e) const { return substitute_labels(e, label_images); }
};

namespace detail {

/// Largest || phi_{alpha(hbar)}(beta(k) * w) || over kernel elements k built
/// from the scheme relations and random words w.  Zero (within tolerance) is
/// exactly the compatibility condition on the generated pairs.
inline std::pair<double, std::string> compatibility_battery(
    const Bundle& src, const Bundle& tgt, const BaseMap& alpha,
    const std::vector<Expression>& label_images, const CompatibilityConfig& cfg, Rng& rng) {
  const auto relations = src.scheme->relations();
  double worst = 0.0;
  std::string witness;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t tk = (*tgt.fibers)[alpha.image_index[i]];
    for (int p = 0; p < cfg.battery_pairs; ++p) {
      const Expression w = detail::random_expression(*src.scheme, rng, cfg.degree, 2);
      const Expression& rel = relations[rng.uniform_index(relations.size())];
      const Expression kernel = rng.uniform() < 0.5 ? rel * w : w * rel;
      // phi_hbar(kernel) = 0 exactly; compatibility needs the image to vanish too
      const Expression image = substitute_labels(kernel, label_images);
      const double defect = operator_norm(evaluate_expression(*tgt.scheme, image, tk));
      if (defect > worst) {
        worst = defect;
        witness = "kernel element at hbar=" + std::to_string(src.hbar(i));
      }
    }
  }
  return {worst, witness};
}

}  // namespace detail

/// Builds the morphism, audits alpha (metric map) and the compatibility
/// battery; throws with a witness on violation.
inline BundleMorphism make_morphism(std::shared_ptr<const Bundle> source,
                                    std::shared_ptr<const Bundle> target, BaseMap alpha,
                                    std::vector<Expression> label_images,
                                    const CompatibilityConfig& cfg, Rng& rng,
                                    bool require_metric = true) {
  if (alpha.source.get() != source->base.get() || alpha.target.get() != target->base.get())
    throw std::invalid_argument("make_morphism: alpha endpoints do not match the bundles");
  if (label_images.size() != source->scheme->labels().size())
    throw std::invalid_argument("make_morphism: label map must cover every source label");
  if (require_metric) {
    const auto metric = is_metric_map(alpha);
    if (!metric.ok)
      throw std::invalid_argument(
          "make_morphism: alpha is not a metric map (witness pair " +
          std::to_string(metric.witness_i) + "," + std::to_string(metric.witness_k) + ")");
  }
  const auto [worst, witness] =
      detail::compatibility_battery(*source, *target, alpha, label_images, cfg, rng);
  if (worst > cfg.tol)
    throw CompatibilityError("compatibility violated (defect " + std::to_string(worst) + ", " +
                             witness + ")");
  BundleMorphism m;
  m.source = std::move(source);
  m.target = std::move(target);
  m.alpha = std::move(alpha);
  m.label_images = std::move(label_images);
  m.battery_worst = worst;
  return m;
}

/// Structural equality of morphisms (used by the functor-law sweeps).
inline bool morphism_equal(const BundleMorphism& a, const BundleMorphism& b) {
  if (a.source->scheme.get() != b.source->scheme.get() ||
      a.target->scheme.get() != b.target->scheme.get())
    return false;
  if (a.alpha.image_index != b.alpha.image_index ||
      a.alpha.limit_to_limit != b.alpha.limit_to_limit)
    return false;
  if (a.label_images.size() != b.label_images.size()) return false;
  for (std::size_t i = 0; i < a.label_images.size(); ++i)
    if (!structurally_equal(a.label_images[i], b.label_images[i])) return false;
  return true;
}

inline BundleMorphism identity_morphism(std::shared_ptr<const Bundle> b) {
  BundleMorphism m;
  m.alpha = identity_base_map(b->base);
  for (std::uint16_t l = 0; l < b->scheme->labels().size(); ++l)
    m.label_images.push_back(Expression::label(l));
  m.source = b;
  m.target = std::move(b);
  return m;
}

inline BundleMorphism compose(const BundleMorphism& outer, const BundleMorphism& inner) {
  if (inner.target.get() != outer.source.get())
    throw std::invalid_argument("compose: morphisms are not composable");
  BundleMorphism m;
  m.source = inner.source;
  m.target = outer.target;
  m.alpha = compose(outer.alpha, inner.alpha);
  for (const auto& img : inner.label_images)
    m.label_images.push_back(substitute_labels(img, outer.label_images));
  return m;
}

// ---------------------------------------------------------------------------
// Lemma-3 fiber maps

struct FiberMapReport {
  bool well_defined = true;      // kernel battery stays in the kernel
  double hom_defect = 0.0;       // multiplicativity/linearity/star defects
  bool isometry_checked = false;
  double isometry_defect = 0.0;
  bool pass = false;
};

/// sigma_hbar: phi_hbar(a) -> phi_{alpha(hbar)}(beta(a)), audited on a random
/// battery.  Isometry (Lemma 3(iv)) is checked when requested, for bijective
/// label maps.
inline FiberMapReport fiber_map(const BundleMorphism& m, std::size_t i, Rng& rng,
                                bool check_isometry, int battery = 24) {
  FiberMapReport r;
  const auto& src = *m.source;
  const auto& tgt = *m.target;
  const std::size_t sk = (*src.fibers)[i];
  const std::size_t tk = (*tgt.fibers)[m.alpha.image_index[i]];
  auto image = [&](const Expression& e) {
    return evaluate_expression(*tgt.scheme, m.beta(e), tk);
  };
  for (int t = 0; t < battery; ++t) {
    const Expression e1 = detail::random_expression(*src.scheme, rng, 2, 3);
    const Expression e2 = detail::random_expression(*src.scheme, rng, 2, 3);
    const Matrix m1 = image(e1), m2 = image(e2);
    r.hom_defect = std::max(r.hom_defect, operator_norm(Matrix(image(e1 * e2) - m1 * m2)));
    r.hom_defect = std::max(
        r.hom_defect, operator_norm(Matrix(image(e1 + e2) - (m1 + m2))));
    r.hom_defect =
        std::max(r.hom_defect, operator_norm(Matrix(image(e1.star()) - Matrix(m1.adjoint()))));
    if (check_isometry) {
      r.isometry_checked = true;
      const double ns = operator_norm(evaluate_expression(*src.scheme, e1, sk));
      const double nt = operator_norm(m1);
      r.isometry_defect = std::max(r.isometry_defect, std::abs(ns - nt));
    }
  }
  for (const auto& rel : src.scheme->relations()) {
    const double defect = operator_norm(image(rel));
    if (defect > 1e-9) r.well_defined = false;
  }
  r.pass = r.well_defined && r.hom_defect <= 1e-10 &&
           (!r.isometry_checked || r.isometry_defect <= 1e-9);
  return r;
}

// ---------------------------------------------------------------------------
// Functor F: extension of morphisms along the one-point compactification,
// C(alpha): 0_I -> 0_J and alpha elsewhere.

struct ExtendedMorphism {
  std::shared_ptr<const ExtendedBundle> source, target;
  BaseMap c_alpha;  // between the compactified bases
  std::vector<Expression> label_images;

  Expression beta(const Expression& e) const { return substitute_labels(e, label_images); }
};

inline ExtendedMorphism extend_morphism(const BundleMorphism& m,
                                        std::shared_ptr<const ExtendedBundle> src_ext,
                                        std::shared_ptr<const ExtendedBundle> tgt_ext) {
  if (!is_proper(m.alpha))
    throw std::invalid_argument("extend_morphism: alpha is not proper");
  ExtendedMorphism em;
  em.c_alpha = m.alpha;
  em.c_alpha.source = src_ext->embedding().target;
  em.c_alpha.target = tgt_ext->embedding().target;
  em.c_alpha.limit_to_limit = true;
  em.label_images = m.label_images;
  em.source = std::move(src_ext);
  em.target = std::move(tgt_ext);
  return em;
}

inline bool extended_morphism_equal(const ExtendedMorphism& a, const ExtendedMorphism& b) {
  if (a.c_alpha.image_index != b.c_alpha.image_index ||
      a.c_alpha.limit_to_limit != b.c_alpha.limit_to_limit)
    return false;
  if (a.label_images.size() != b.label_images.size()) return false;
  for (std::size_t i = 0; i < a.label_images.size(); ++i)
    if (!structurally_equal(a.label_images[i], b.label_images[i])) return false;
  return true;
}

inline ExtendedMorphism compose(const ExtendedMorphism& outer, const ExtendedMorphism& inner) {
  ExtendedMorphism m;
  m.source = inner.source;
  m.target = outer.target;
  m.c_alpha = compose(outer.c_alpha, inner.c_alpha);
  m.c_alpha.limit_to_limit = inner.c_alpha.limit_to_limit && outer.c_alpha.limit_to_limit;
  for (const auto& img : inner.label_images)
    m.label_images.push_back(substitute_labels(img, outer.label_images));
  return m;
}

// ---------------------------------------------------------------------------
// Functor G: the morphism of limit fibers, sigma_0(phi_0(a)) = phi_0(beta(a)).

struct LimitMorphism {
  std::shared_ptr<const ExtendedBundle> source, target;
  std::vector<Expression> label_images;

  LimitFiberElement apply(const LimitFiberElement& x) const {
    return target->limit_element(substitute_labels(x.expr, label_images));
  }
};

inline LimitMorphism limit_morphism(const ExtendedMorphism& m) {
  LimitMorphism lm;
  lm.source = m.source;
  lm.target = m.target;
  lm.label_images = m.label_images;
  return lm;
}

inline bool limit_morphism_equal(const LimitMorphism& a, const LimitMorphism& b) {
  if (a.label_images.size() != b.label_images.size()) return false;
  for (std::size_t i = 0; i < a.label_images.size(); ++i)
    if (!structurally_equal(a.label_images[i], b.label_images[i])) return false;
  return true;
}

/// Well-definedness of sigma_0 (Eq.-(8) style): expression pairs equal modulo
/// the null ideal map to quotient-equal cosets.
inline bool limit_morphism_well_defined(const LimitMorphism& m, Rng& rng, int battery,
                                        double tol) {
  const auto& src_scheme = *m.source->bundle().scheme;
  for (int t = 0; t < battery; ++t) {
    const Expression a = detail::random_expression(src_scheme, rng, 2, 3);
    // k: a null-ideal element built as an hbar-vanishing module action
    GridFunction van;
    for (std::size_t k = 0; k < src_scheme.samples(); ++k)
      van.values.push_back(src_scheme.hbar(k));
    const Expression k_elem =
        detail::random_expression(src_scheme, rng, 1, 2).scaled_by(van);
    const Expression image_a = substitute_labels(a, m.label_images);
    const Expression image_ak = substitute_labels(a + k_elem, m.label_images);
    if (!m.target->quotient_equal(image_a, image_ak, tol)) return false;
  }
  return true;
}

}  // namespace qbundle
