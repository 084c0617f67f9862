#pragma once

// Limit estimation along the grid tail: Richardson extrapolation with a
// fitted decay order, a Cauchy-tail fallback, and the log-log slope fits used
// by the convergence checkers.
//
// The model is N(hbar) = limit + c * hbar^p with p fitted from the last three
// samples.  A sequence whose successive differences do not settle (the
// topologist's-sine profile) is rejected as non-Cauchy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbundle {

struct NonCauchyTail : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TailConfig {
  std::size_t min_samples = 4;
  std::size_t tail_window = 5;     // samples inspected at the grid tail
  double cauchy_slack = 1.10;      // successive |diff| may grow by at most this factor
  double cauchy_tolerance = 1e-4;  // relative |diff| level declared "already Cauchy"
  double exact_floor = 1e-13;      // relative floor below which values count as exact
  double null_tolerance = 1e-3;    // null-ideal membership threshold
};

struct LimitEstimate {
  double value = 0.0;
  double error_bound = 0.0;
  enum class Method { cauchy_tail, richardson } method = Method::cauchy_tail;
  std::size_t samples_used = 0;

  const char* method_name() const {
    return method == Method::richardson ? "Richardson" : "Cauchy-tail";
  }
};

namespace detail {

/// Solve (ha^p - hb^p)/(hb^p - hc^p) = R for p by bisection; ha > hb > hc > 0.
/// Returns p in [0.05, 8] or a negative value when no bracket exists.
inline double fit_order(double ha, double hb, double hc, double R) {
  auto g = [&](double p) {
    const double num = std::pow(ha, p) - std::pow(hb, p);
    const double den = std::pow(hb, p) - std::pow(hc, p);
    return num / den - R;
  };
  double lo = 0.05, hi = 8.0;
  double glo = g(lo), ghi = g(hi);
  if (!std::isfinite(glo) || !std::isfinite(ghi) || glo * ghi > 0.0) return -1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (!std::isfinite(gm)) return -1.0;
    if (glo * gm <= 0.0) { hi = mid; ghi = gm; }
    else { lo = mid; glo = gm; }
  }
  return 0.5 * (lo + hi);
}

struct PowerFit {
  bool ok = false;
  double limit = 0.0, c = 0.0, p = 0.0;
};

inline PowerFit fit_power_tail(const std::vector<double>& h, const std::vector<double>& y,
                               std::size_t last) {
  PowerFit f;
  if (last < 2) return f;
  const double ha = h[last - 2], hb = h[last - 1], hc = h[last];
  const double ya = y[last - 2], yb = y[last - 1], yc = y[last];
  const double d1 = ya - yb, d2 = yb - yc;
  if (d2 == 0.0 || d1 * d2 <= 0.0) return f;  // not a one-sided power tail
  const double p = fit_order(ha, hb, hc, d1 / d2);
  if (p <= 0.0) return f;
  const double den = std::pow(hb, p) - std::pow(hc, p);
  if (den == 0.0) return f;
  f.c = d2 / den;
  f.limit = yc - f.c * std::pow(hc, p);
  f.p = p;
  f.ok = true;
  return f;
}

}  // namespace detail

/// Estimate lim N(hbar) as hbar -> 0 from samples in decreasing-hbar order.
/// Throws NonCauchyTail when the tail oscillates, std::invalid_argument when
/// there are fewer than cfg.min_samples samples.
inline LimitEstimate estimate_limit(const std::vector<double>& hbars,
                                    const std::vector<double>& values,
                                    const TailConfig& cfg = {}) {
  const std::size_t n = hbars.size();
  if (n != values.size()) throw std::invalid_argument("estimate_limit: size mismatch");
  if (n < cfg.min_samples)
    throw std::invalid_argument("estimate_limit: needs at least " +
                                std::to_string(cfg.min_samples) + " samples");

  const std::size_t w = std::min(cfg.tail_window, n);
  const std::size_t first = n - w;
  double scale = 0.0;
  for (std::size_t k = first; k < n; ++k) scale = std::max(scale, std::abs(values[k]));
  const double floor = cfg.exact_floor * std::max(1.0, scale);

  std::vector<double> diffs;
  for (std::size_t k = first; k + 1 < n; ++k) diffs.push_back(values[k + 1] - values[k]);

  LimitEstimate est;
  est.samples_used = w;

  bool constant_tail = true;
  for (double d : diffs) constant_tail = constant_tail && std::abs(d) <= floor;
  if (constant_tail) {
    est.value = values.back();
    est.error_bound = floor;
    est.method = LimitEstimate::Method::cauchy_tail;
    return est;
  }

  // Cauchy criterion: differences below the declared tolerance are already
  // Cauchy; otherwise local growth is tolerated only when the difference
  // envelope decays across the window (a smooth profile may flip the sign of
  // its derivative once; an oscillation keeps a flat envelope).
  double dmax = 0.0;
  for (double d : diffs) dmax = std::max(dmax, std::abs(d));
  if (dmax > cfg.cauchy_tolerance * std::max(1.0, scale)) {
    bool local_growth = false;
    for (std::size_t k = 0; k + 1 < diffs.size(); ++k)
      if (std::abs(diffs[k + 1]) > cfg.cauchy_slack * std::abs(diffs[k]) + floor)
        local_growth = true;
    if (local_growth && diffs.size() >= 2) {
      const std::size_t half = (diffs.size() + 1) / 2;
      double head = 0.0, tail_env = 0.0;
      for (std::size_t k = 0; k < diffs.size(); ++k)
        (k < half ? head : tail_env) = std::max(k < half ? head : tail_env, std::abs(diffs[k]));
      if (tail_env > 0.6 * head + floor)
        throw NonCauchyTail("tail differences grow: sequence is not Cauchy along the grid");
    }
  }

  const auto fit = detail::fit_power_tail(hbars, values, n - 1);
  if (!fit.ok) {
    est.value = values.back();
    est.error_bound = std::abs(diffs.back()) * cfg.cauchy_slack + floor;
    est.method = LimitEstimate::Method::cauchy_tail;
    return est;
  }

  est.method = LimitEstimate::Method::richardson;
  est.value = fit.limit;
  double err = floor;
  for (std::size_t k = first; k < n; ++k) {
    const double model = fit.limit + fit.c * std::pow(hbars[k], fit.p);
    err = std::max(err, std::abs(values[k] - model));
  }
  if (n >= 4) {
    const auto prev = detail::fit_power_tail(hbars, values, n - 2);
    if (prev.ok) err = std::max(err, std::abs(fit.limit - prev.limit));
  }
  est.error_bound = err;
  return est;
}

// ---------------------------------------------------------------------------

/// Log-log slope fit of a residual sequence against hbar.  A sequence that is
/// machine-zero throughout is classified as exact (its decay order dominates
/// any threshold).
struct SlopeFit {
  bool exact = false;          // all residuals at the machine floor
  bool tail_decreasing = true; // non-increasing (with slack) over the tail
  double slope = 0.0;          // least-squares slope of log r vs log hbar
  std::size_t points_used = 0;

  bool passes(double slope_min) const {
    return exact || (tail_decreasing && slope >= slope_min);
  }
};

inline SlopeFit fit_slope(const std::vector<double>& hbars, const std::vector<double>& residuals,
                          std::size_t tail_window = 4, double floor_scale = 1.0) {
  SlopeFit f;
  const std::size_t n = hbars.size();
  const double floor = 1e-13 * std::max(1.0, floor_scale);

  bool all_zero = true;
  for (double r : residuals) all_zero = all_zero && r <= floor;
  if (all_zero) {
    f.exact = true;
    f.slope = std::numeric_limits<double>::infinity();
    return f;
  }

  const std::size_t w = std::min(std::max<std::size_t>(tail_window, 2), n);
  std::vector<double> lx, ly;
  double prev = -1.0;
  for (std::size_t k = n - w; k < n; ++k) {
    if (residuals[k] <= floor) continue;  // exact points do not join the fit
    if (prev >= 0.0 && residuals[k] > 1.10 * prev) f.tail_decreasing = false;
    prev = residuals[k];
    lx.push_back(std::log(hbars[k]));
    ly.push_back(std::log(residuals[k]));
  }
  f.points_used = lx.size();
  if (lx.size() < 2) {
    // decayed below the floor mid-tail: treat as exact decay
    f.exact = true;
    f.slope = std::numeric_limits<double>::infinity();
    return f;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double m = lx.size();
  f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return f;
}

}  // namespace qbundle
