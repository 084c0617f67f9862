#pragma once

// Finite-dimensional C*-algebra core: complex square matrices with adjoint,
// spectral norm, commutators and unitary one-parameter groups.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace qbundle {

using complexd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline bool all_finite(const Matrix& a) {
  return a.allFinite();
}

inline void require_square(const Matrix& a, const char* who) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square and non-empty");
}

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

/// Conjugate transpose.
inline Matrix adjoint(const Matrix& a) {
  return a.adjoint();
}

inline double max_entry_norm(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline bool is_self_adjoint(const Matrix& a, double tol = 1e-10) {
  return a.rows() == a.cols() && max_entry_norm(a - a.adjoint()) <= tol;
}

/// Spectral norm (largest singular value), computed as sqrt(lambda_max(A* A)).
/// Relative accuracy of the top singular value is a few ulps times the
/// eigensolver backward error; well below 1e-10 for dim <= 256.
inline double operator_norm(const Matrix& a) {
  require_square(a, "operator_norm");
  if (!all_finite(a)) throw std::invalid_argument("operator_norm: non-finite entries");
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.adjoint() * a, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  return top <= 0.0 ? 0.0 : std::sqrt(top);
}

inline bool is_unitary(const Matrix& u, double tol = 1e-9) {
  if (u.rows() != u.cols()) return false;
  return operator_norm(Matrix(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()))) <= tol;
}

/// AB - BA.
inline Matrix commutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

/// (i/hbar) (AB - BA).  Self-adjointness is preserved when A and B are.
inline Matrix scaled_bracket(const Matrix& a, const Matrix& b, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("scaled_bracket: hbar must be positive");
  return complexd(0.0, 1.0 / hbar) * commutator(a, b);
}

/// U = exp(i t H / hbar) for self-adjoint H, by diagonalization.
inline Matrix unitary_flow(const Matrix& h, double t, double hbar) {
  require_square(h, "unitary_flow");
  if (!(hbar > 0.0)) throw std::invalid_argument("unitary_flow: hbar must be positive");
  if (!is_self_adjoint(h, 1e-10))
    throw std::invalid_argument("unitary_flow: generator is not self-adjoint within 1e-10");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const auto& lam = es.eigenvalues();
  Eigen::VectorXcd phase(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k)
    phase(k) = std::exp(complexd(0.0, t * lam(k) / hbar));
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace qbundle
