#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fusionest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Relative asymmetry ||M - M^T||_inf / max(1, ||M||_inf).
inline double asymmetry(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline double max_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double spectral_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// True iff lambda_max(M) <= -margin. Rejects matrices that are not
/// symmetric within 1e-12 relative asymmetry.
inline bool check_negative_definite(const Matrix& m, double margin) {
  if (m.rows() != m.cols()) throw std::invalid_argument("check_negative_definite: matrix not square");
  if (asymmetry(m) > 1e-12)
    throw std::invalid_argument("check_negative_definite: matrix not symmetric");
  return max_eigenvalue(m) <= -margin;
}

/// Condenses a bordered matrix [[-I, B], [B^T, D]] into D + B^T B.
/// The bordered form is negative definite iff the condensed form is.
inline Matrix schur_expand(const Matrix& bordered, Eigen::Index border_dim) {
  if (bordered.rows() != bordered.cols() || border_dim <= 0 || border_dim >= bordered.rows())
    throw std::invalid_argument("schur_expand: bad shapes");
  const Matrix top_left = bordered.topLeftCorner(border_dim, border_dim);
  if ((top_left + Matrix::Identity(border_dim, border_dim)).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("schur_expand: (1,1) block is not -I");
  const Matrix b = bordered.topRightCorner(border_dim, bordered.cols() - border_dim);
  const Matrix d = bordered.bottomRightCorner(bordered.rows() - border_dim, bordered.cols() - border_dim);
  return d + b.transpose() * b;
}

}  // namespace fusionest
