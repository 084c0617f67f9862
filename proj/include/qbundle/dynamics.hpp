#pragma once

// Dynamical bundles: a self-adjoint Hamiltonian expression generates the
// fiberwise automorphisms tau_{t;hbar} = Ad(exp(i t Q(h)/hbar)); lifting to
// the section algebra holds by construction (sections evolve fiberwise).
// The limit dynamics is compared against the classical Hamiltonian flow via
// the scheme's quadrature transform (an Egorov-style residual).

#include <memory>
#include <string>
#include <vector>

#include "qbundle/bundle.hpp"
#include "qbundle/expression.hpp"
#include "qbundle/extrapolation.hpp"
#include "qbundle/matrix.hpp"
#include "qbundle/rng.hpp"
#include "qbundle/scheme.hpp"

namespace qbundle {

struct DynamicalBundle {
  Bundle bundle;
  Expression hamiltonian;
  std::vector<double> times;
};

inline DynamicalBundle make_dynamical_bundle(Bundle b, Expression hamiltonian,
                                             std::vector<double> times) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Matrix q = quantize(*b.scheme, hamiltonian, (*b.fibers)[i]);
    if (!is_self_adjoint(q, 1e-10))
      throw std::invalid_argument(
          "dynamical bundle: quantized Hamiltonian is not self-adjoint at hbar=" +
          std::to_string(b.hbar(i)));
  }
  return DynamicalBundle{std::move(b), std::move(hamiltonian), std::move(times)};
}

/// tau_{t;hbar} applied to a fiber element.
inline Matrix evolve(const DynamicalBundle& d, std::size_t i, double t, const Matrix& m) {
  const std::size_t k = (*d.bundle.fibers)[i];
  const Matrix u = unitary_flow(quantize(*d.bundle.scheme, d.hamiltonian, k), t,
                                d.bundle.hbar(i));
  return u * m * u.adjoint();
}

struct DynamicsLiftReport {
  double identity_defect = 0.0;   // tau_0 = id
  double group_defect = 0.0;      // tau_{s+t} = tau_s tau_t
  double mult_defect = 0.0;       // tau_t(ab) = tau_t(a) tau_t(b)
  double star_defect = 0.0;       // tau_t(a*) = tau_t(a)*
  bool intertwines = true;        // Eq.-(9) style lift: by construction
  bool pass = false;
};

/// Certifies the automorphism-group laws of the lifted dynamics on a random
/// battery of sections and times.
inline DynamicsLiftReport check_dynamics_lift(const DynamicalBundle& d, Rng& rng,
                                              int battery = 12) {
  DynamicsLiftReport r;
  const auto& s = *d.bundle.scheme;
  for (int trial = 0; trial < battery; ++trial) {
    const std::size_t i = rng.uniform_index(d.bundle.size());
    const std::size_t k = (*d.bundle.fibers)[i];
    const Expression ae = detail::random_expression(s, rng, 2, 3);
    const Expression be = detail::random_expression(s, rng, 2, 3);
    const Matrix a = evaluate_expression(s, ae, k);
    const Matrix b = evaluate_expression(s, be, k);
    const double ts = rng.uniform(-1.0, 1.0), tt = rng.uniform(-1.0, 1.0);

    r.identity_defect = std::max(r.identity_defect, operator_norm(Matrix(evolve(d, i, 0.0, a) - a)));
    r.group_defect = std::max(
        r.group_defect,
        operator_norm(Matrix(evolve(d, i, ts + tt, a) - evolve(d, i, ts, evolve(d, i, tt, a)))));
    r.mult_defect = std::max(
        r.mult_defect,
        operator_norm(Matrix(evolve(d, i, ts, Matrix(a * b)) -
                             evolve(d, i, ts, a) * evolve(d, i, ts, b))));
    r.star_defect = std::max(
        r.star_defect, operator_norm(Matrix(evolve(d, i, ts, Matrix(a.adjoint())) -
                                            Matrix(evolve(d, i, ts, a).adjoint()))));
  }
  r.pass = r.identity_defect <= 1e-10 && r.group_defect <= 1e-8 && r.mult_defect <= 1e-9 &&
           r.star_defect <= 1e-10;
  return r;
}

struct LimitDynamicsRow {
  double time = 0.0;
  std::string generator;
  std::vector<double> hbars;
  std::vector<double> residuals;
  SlopeFit slope;
  bool exact = false;  // residuals at the integrator floor throughout
  bool pass = false;
};

struct LimitDynamicsReport {
  std::vector<LimitDynamicsRow> rows;
  bool pass = true;
};

/// Egorov residual per generator and time: the quantum-evolved generator
/// against the quantization of the classically flowed symbol, with a
/// slope-in-hbar fit.  A residual at the integrator floor counts as exact.
inline LimitDynamicsReport limit_dynamics(const DynamicalBundle& d,
                                          const std::vector<std::pair<std::string, Expression>>&
                                              generators,
                                          double slope_min = 0.9, double exact_tol = 1e-8,
                                          int steps_per_unit_time = 500) {
  if (!d.bundle.scheme->supports_flow())
    throw std::logic_error("classical flow unavailable for scheme " + d.bundle.scheme->name());
  LimitDynamicsReport rep;
  const auto& s = *d.bundle.scheme;
  for (const double t : d.times)
    for (const auto& [label, g] : generators) {
      LimitDynamicsRow row;
      row.time = t;
      row.generator = label;
      const int steps = std::max(16, static_cast<int>(std::ceil(std::abs(t) *
                                                                steps_per_unit_time)));
      for (std::size_t i = 0; i < d.bundle.size(); ++i) {
        const std::size_t k = (*d.bundle.fibers)[i];
        const Matrix quantum = evolve(d, i, t, evaluate_expression(s, g, k));
        const Matrix classical = s.quantize_flowed(k, g, d.hamiltonian, t, steps);
        row.hbars.push_back(d.bundle.hbar(i));
        row.residuals.push_back(operator_norm(Matrix(quantum - classical)));
      }
      double worst = 0.0;
      for (double r : row.residuals) worst = std::max(worst, r);
      row.exact = worst <= exact_tol;
      row.slope = fit_slope(row.hbars, row.residuals);
      row.pass = row.exact || row.slope.passes(slope_min);
      rep.pass = rep.pass && row.pass;
      rep.rows.push_back(std::move(row));
    }
  return rep;
}

}  // namespace qbundle
