#pragma once

// Sampled locally compact metric parameter spaces, their one-point
// compactifications, and the map predicates (metric, proper, dense isometric
// embedding) used by bundle morphisms and extensions.
//
// A space is a finite, strictly decreasing list of positive parameter values
// hbar, standing in for (0,1] or {1/N}.  The default metric is |x - y|;
// a custom metric is accepted but audited for symmetry and the triangle
// inequality at construction.  The adjoined limit point 0_I is not a sampled
// point: it is carried as per-point distances d(hbar, 0_I).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbundle {

class SampledBaseSpace {
 public:
  /// Euclidean metric, no limit point.
  explicit SampledBaseSpace(std::vector<double> points) : points_(std::move(points)) {
    validate_points();
  }

  /// Custom metric given as a dense table d(i,k); audited at construction.
  SampledBaseSpace(std::vector<double> points, std::vector<std::vector<double>> metric)
      : points_(std::move(points)), metric_(std::move(metric)) {
    validate_points();
    audit_metric();
  }

  std::size_t size() const { return points_.size(); }
  double point(std::size_t i) const { return points_.at(i); }
  const std::vector<double>& points() const { return points_; }

  double distance(std::size_t i, std::size_t k) const {
    if (metric_) return (*metric_)[i][k];
    return std::abs(points_.at(i) - points_.at(k));
  }

  bool has_limit_point() const { return !limit_dist_.empty(); }

  /// d(hbar_i, 0_I); only defined once a limit point has been adjoined.
  double limit_distance(std::size_t i) const {
    if (!has_limit_point()) throw std::logic_error("base space has no limit point");
    return limit_dist_.at(i);
  }

  /// Largest gap between adjacent samples (informational).
  double resolution() const {
    double r = 0.0;
    for (std::size_t i = 0; i + 1 < points_.size(); ++i)
      r = std::max(r, distance(i, i + 1));
    return r;
  }

  /// Resolution the grid declares for density checks.  Defaults to 0: an
  /// embedding is dense only if its image covers every non-limit sample.
  double declared_resolution() const { return declared_resolution_; }
  void declare_resolution(double r) {
    if (r < 0.0) throw std::invalid_argument("declared resolution must be nonnegative");
    declared_resolution_ = r;
  }

  std::size_t index_of(double hbar, double tol = 1e-12) const {
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (std::abs(points_[i] - hbar) <= tol * std::max(1.0, std::abs(hbar))) return i;
    throw std::invalid_argument("parameter value " + std::to_string(hbar) + " is not sampled");
  }

  std::size_t nearest_index(double value) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d = std::abs(points_[i] - value);
      if (d < bd) { bd = d; best = i; }
    }
    return best;
  }

  friend SampledBaseSpace one_point_compactify(const SampledBaseSpace& in);
  friend SampledBaseSpace one_point_compactify(const SampledBaseSpace& in,
                                               std::vector<double> limit_distances);

 private:
  void validate_points() {
    if (points_.empty()) throw std::invalid_argument("base space needs at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!(points_[i] > 0.0) || !std::isfinite(points_[i]))
        throw std::invalid_argument("parameter values must be positive and finite");
      if (i > 0 && !(points_[i] < points_[i - 1]))
        throw std::invalid_argument("parameter values must be strictly decreasing");
    }
  }

  void audit_metric() {
    const std::size_t n = points_.size();
    if (metric_->size() != n) throw std::invalid_argument("metric table has wrong size");
    for (const auto& row : *metric_)
      if (row.size() != n) throw std::invalid_argument("metric table has wrong size");
    const auto& d = *metric_;
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i][i] != 0.0) throw std::invalid_argument("metric: d(x,x) must be 0");
      for (std::size_t k = 0; k < n; ++k) {
        if (d[i][k] < 0.0 || d[i][k] != d[k][i])
          throw std::invalid_argument("metric: must be symmetric and nonnegative");
        if (i != k && d[i][k] == 0.0)
          throw std::invalid_argument("metric: distinct points at distance 0");
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
          if (d[i][k] > d[i][l] + d[l][k] + 1e-12)
            throw std::invalid_argument("metric: triangle inequality fails on sampled triple");
  }

  std::vector<double> points_;
  std::optional<std::vector<std::vector<double>>> metric_;
  std::vector<double> limit_dist_;  // d(point_i, 0_I); empty = no limit point
  double declared_resolution_ = 0.0;
};

/// {hbar_max * ratio^k : k = 0..count-1} with the Euclidean metric.
inline SampledBaseSpace make_geometric_grid(double hbar_max, double ratio, int count) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("ratio must lie in (0,1)");
  if (count < 3) throw std::invalid_argument("count must be at least 3");
  if (!(hbar_max > 0.0)) throw std::invalid_argument("hbar_max must be positive");
  std::vector<double> pts(static_cast<std::size_t>(count));
  double v = hbar_max;
  for (auto& p : pts) { p = v; v *= ratio; }
  return SampledBaseSpace(std::move(pts));
}

/// Adjoin the limit point 0_I with d(hbar, 0_I) := hbar, so the embedding of
/// the original space is isometric.  Original distances are untouched.
inline SampledBaseSpace one_point_compactify(const SampledBaseSpace& in) {
  if (in.has_limit_point()) throw std::invalid_argument("limit point already present");
  SampledBaseSpace out = in;
  out.limit_dist_ = out.points_;
  return out;
}

/// Variant with caller-chosen limit distances (still audited: positive, and
/// triangle against sampled pairs).
inline SampledBaseSpace one_point_compactify(const SampledBaseSpace& in,
                                             std::vector<double> limit_distances) {
  if (in.has_limit_point()) throw std::invalid_argument("limit point already present");
  if (limit_distances.size() != in.size())
    throw std::invalid_argument("limit distance table has wrong size");
  for (double d : limit_distances)
    if (!(d > 0.0)) throw std::invalid_argument("limit distances must be strictly positive");
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t k = 0; k < in.size(); ++k)
      if (limit_distances[i] > in.distance(i, k) + limit_distances[k] + 1e-12)
        throw std::invalid_argument("limit distances violate the triangle inequality");
  SampledBaseSpace out = in;
  out.limit_dist_ = std::move(limit_distances);
  return out;
}

/// |hbar|_I: distance from the (embedded) point to 0_I.
inline double hbar_distance(const SampledBaseSpace& space, double hbar) {
  return space.limit_distance(space.index_of(hbar));
}

// ---------------------------------------------------------------------------

/// A map between sampled spaces.  Exact image values are kept alongside the
/// nearest-sample assignment; the snapping error feeds downstream estimates,
/// while second-order data (1/|alpha(hbar)|) is read off the exact values.
struct BaseMap {
  std::shared_ptr<const SampledBaseSpace> source;
  std::shared_ptr<const SampledBaseSpace> target;
  std::vector<std::size_t> image_index;  // snapped target sample per source point
  std::vector<double> image_value;       // exact alpha(hbar)
  std::vector<double> snap_error;        // |image_value - target point|
  bool limit_to_limit = false;           // C(alpha): 0_I -> 0_J

  std::size_t size() const { return image_index.size(); }
  double max_snap_error() const {
    double m = 0.0;
    for (double e : snap_error) m = std::max(m, e);
    return m;
  }
};

inline BaseMap make_base_map(std::shared_ptr<const SampledBaseSpace> source,
                             std::shared_ptr<const SampledBaseSpace> target,
                             const std::function<double(double)>& alpha) {
  BaseMap m;
  m.source = std::move(source);
  m.target = std::move(target);
  m.image_index.reserve(m.source->size());
  for (std::size_t i = 0; i < m.source->size(); ++i) {
    const double v = alpha(m.source->point(i));
    const std::size_t k = m.target->nearest_index(v);
    m.image_index.push_back(k);
    m.image_value.push_back(v);
    m.snap_error.push_back(std::abs(v - m.target->point(k)));
  }
  return m;
}

inline BaseMap identity_base_map(std::shared_ptr<const SampledBaseSpace> space) {
  return make_base_map(space, space, [](double x) { return x; });
}

struct MetricMapReport {
  bool ok = true;
  std::size_t witness_i = 0, witness_k = 0;  // violating pair when !ok
  double image_distance = 0.0, source_distance = 0.0;
};

/// d_J(alpha(x), alpha(y)) <= d_I(x, y) + 1e-12 on all sampled pairs
/// (snapped images; limit point included when both ends carry one).
inline MetricMapReport is_metric_map(const BaseMap& m) {
  MetricMapReport r;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = i + 1; k < m.size(); ++k) {
      const double dj = m.target->distance(m.image_index[i], m.image_index[k]);
      const double di = m.source->distance(i, k);
      if (dj > di + 1e-12) {
        r.ok = false;
        r.witness_i = i;
        r.witness_k = k;
        r.image_distance = dj;
        r.source_distance = di;
        return r;
      }
    }
  if (m.limit_to_limit && m.source->has_limit_point() && m.target->has_limit_point()) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double dj = m.target->limit_distance(m.image_index[i]);
      const double di = m.source->limit_distance(i);
      if (dj > di + 1e-12) {
        r.ok = false;
        r.witness_i = i;
        r.witness_k = i;
        r.image_distance = dj;
        r.source_distance = di;
        return r;
      }
    }
  }
  return r;
}

namespace detail {
// Distance to the limit region: the adjoined-point distance when present,
// otherwise the raw parameter value (points are positive reals accumulating
// at 0).
inline double tail_distance(const SampledBaseSpace& s, std::size_t i) {
  return s.has_limit_point() ? s.limit_distance(i) : s.point(i);
}
}  // namespace detail

/// Finite-sample surrogate for properness: the tail of the source (points
/// closest to the limit) must be mapped into the tail of the target, i.e.
/// |alpha(hbar)|_J -> 0 along the sample order.  Preimages of regions bounded
/// away from 0_J then stay bounded away from 0_I, which is the property the
/// extension machinery uses.
inline bool is_proper(const BaseMap& m) {
  const std::size_t n = m.size();
  if (n < 2) return true;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i)
    a[i] = detail::tail_distance(*m.target, m.image_index[i]);
  // source points are stored in decreasing order, so the tail is the suffix
  const std::size_t t = std::max<std::size_t>(2, n / 4);
  double head_max = 0.0, tail_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n - t) head_max = std::max(head_max, a[i]);
    else tail_max = std::max(tail_max, a[i]);
  }
  if (head_max == 0.0) return true;  // everything already at the limit region
  return tail_max <= 0.5 * std::max(head_max, a.front());
}

/// True iff alpha preserves all sampled distances within 1e-12, is injective
/// on samples, and every target point except designated limit points lies
/// within the target's declared resolution of some image point.
inline bool is_dense_isometric_embedding(const BaseMap& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = i + 1; k < m.size(); ++k) {
      if (m.image_index[i] == m.image_index[k]) return false;  // not injective
      const double dj = m.target->distance(m.image_index[i], m.image_index[k]);
      const double di = m.source->distance(i, k);
      if (std::abs(dj - di) > 1e-12) return false;
    }
  const double res = std::max(m.target->declared_resolution(), 1e-12);
  for (std::size_t k = 0; k < m.target->size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.size(); ++i)
      best = std::min(best, m.target->distance(k, m.image_index[i]));
    if (best > res) return false;
  }
  return true;
}

/// Composition with snapping-error accumulation: follows snapped indices and
/// composes exact values through the outer map's exact table.
inline BaseMap compose(const BaseMap& outer, const BaseMap& inner) {
  if (inner.target.get() != outer.source.get())
    throw std::invalid_argument("compose: inner target must be outer source");
  BaseMap m;
  m.source = inner.source;
  m.target = outer.target;
  m.limit_to_limit = inner.limit_to_limit && outer.limit_to_limit;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const std::size_t mid = inner.image_index[i];
    m.image_index.push_back(outer.image_index[mid]);
    m.image_value.push_back(outer.image_value[mid]);
    m.snap_error.push_back(inner.snap_error[i] + outer.snap_error[mid]);
  }
  return m;
}

}  // namespace qbundle
