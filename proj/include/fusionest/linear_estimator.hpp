#pragma once

// Per-step local gain design for the linear time-varying case: the 3x3
// bordered LMI with certificates (P, Theta, vartheta), and the Kalman-like
// measurement update driven by the solved gain.

#include "fusionest/lmi.hpp"
#include "fusionest/models.hpp"
#include "fusionest/sdp_solver.hpp"

namespace fusionest {

struct LocalGainResult {
  SdpSolution::Status status = SdpSolution::Status::NumericalFailure;
  Matrix K;
  Matrix P;
  Matrix Theta;
  double vartheta = 0.0;
  double objective = 0.0;
};

/// min Tr{Theta} over K, P > 0, Theta > 0, 0 < vartheta < 1 subject to
///   [ -I    (I - K C) A    [(I - K C) B, -K Bv] ]
///   [  *        -P                 0            ]  < 0,   P < vartheta I.
inline SdpProblem build_local_gain_problem(const Matrix& A, const Matrix& B, const Matrix& C,
                                           const Matrix& Bv, int* k_id = nullptr, int* p_id = nullptr,
                                           int* theta_id = nullptr, int* vt_id = nullptr) {
  const Eigen::Index n = A.rows();
  const Eigen::Index q = C.rows();
  const Eigen::Index n_w = B.cols();
  const Eigen::Index n_v = Bv.cols();
  const Eigen::Index n_xi = n_w + n_v;

  SdpProblem prob;
  const int k = prob.add_variable(n, q, VarStructure::Rectangular, VarDomain::Free, "K");
  const int p = prob.add_variable(n, n, VarStructure::Symmetric, VarDomain::PositiveDefinite, "P");
  const int th =
      prob.add_variable(n_xi, n_xi, VarStructure::Symmetric, VarDomain::PositiveDefinite, "Theta");
  const int vt = prob.add_variable(1, 1, VarStructure::Scalar, VarDomain::PositiveDefinite, "vartheta");
  if (k_id) *k_id = k;
  if (p_id) *p_id = p;
  if (theta_id) *theta_id = th;
  if (vt_id) *vt_id = vt;

  AffineBlockExpr lmi({n, n, n_xi});
  lmi.set_constant(0, 0, -Matrix::Identity(n, n));
  lmi.set_constant(0, 1, A);
  lmi.add_linear(0, 1, k, -Matrix::Identity(n, n), C * A);
  Matrix bf0 = Matrix::Zero(n, n_xi);
  bf0.leftCols(n_w) = B;
  Matrix bfk(q, n_xi);
  bfk.leftCols(n_w) = C * B;
  bfk.rightCols(n_v) = Bv;
  lmi.set_constant(0, 2, bf0);
  lmi.add_linear(0, 2, k, -Matrix::Identity(n, n), bfk);
  lmi.add_linear(1, 1, p, -Matrix::Identity(n, n), Matrix::Identity(n, n));
  lmi.add_linear(2, 2, th, -Matrix::Identity(n_xi, n_xi), Matrix::Identity(n_xi, n_xi));
  prob.add_constraint(std::move(lmi));

  AffineBlockExpr cap({n});
  cap.add_linear(0, 0, p, Matrix::Identity(n, n), Matrix::Identity(n, n));
  cap.add_scaled(0, 0, vt, -Matrix::Identity(n, n));
  prob.add_constraint(std::move(cap));

  AffineBlockExpr ceiling({1});
  ceiling.add_scaled(0, 0, vt, Matrix::Identity(1, 1));
  ceiling.set_constant(0, 0, Matrix::Constant(1, 1, -(1.0 - 1e-6)));
  prob.add_constraint(std::move(ceiling));

  prob.add_objective_trace(th);
  return prob;
}

inline LocalGainResult solve_local_gain_matrices(const Matrix& A, const Matrix& B, const Matrix& C,
                                                 const Matrix& Bv, const SolveOptions& opts = {}) {
  int k, p, th, vt;
  const SdpProblem prob = build_local_gain_problem(A, B, C, Bv, &k, &p, &th, &vt);
  const SdpSolution sol = solve(prob, opts);
  LocalGainResult res;
  res.status = sol.status;
  if (sol.status == SdpSolution::Status::Optimal) {
    res.K = sol.values[k];
    res.P = sol.values[p];
    res.Theta = sol.values[th];
    res.vartheta = sol.values[vt](0, 0);
    res.objective = sol.objective_value;
  }
  return res;
}

/// Gain design at step t from the model providers (uses A(t-1), B(t-1),
/// C_i(t), B_i(t)); requires t >= 1.
inline LocalGainResult solve_local_gain(const LinearTimeVaryingModel& model, int t, int sensor,
                                        const SolveOptions& opts = {}) {
  if (t < 1) throw std::invalid_argument("solve_local_gain: t must be >= 1");
  return solve_local_gain_matrices(model.A(t - 1), model.B(t - 1), model.C(t, sensor),
                                   model.Bv(t, sensor), opts);
}

inline Matrix closed_loop_map(const Matrix& A, const Matrix& C, const Matrix& K) {
  return (Matrix::Identity(A.rows(), A.rows()) - K * C) * A;
}

/// x_hat(t) = A x_hat(t-1) + K [y - C A x_hat(t-1)]
inline Vector lse_update(const Vector& xhat, const Matrix& A, const Matrix& C, const Matrix& K,
                         const Vector& y) {
  const Vector pred = A * xhat;
  return pred + K * (y - C * pred);
}

/// e(t) = (I - K C) A e(t-1) + [(I - K C) B, -K Bv] col{w, v}
inline Vector error_recursion(const Vector& e_prev, const Matrix& A, const Matrix& B,
                              const Matrix& C, const Matrix& Bv, const Matrix& K, const Vector& w,
                              const Vector& v) {
  const Matrix g = Matrix::Identity(A.rows(), A.rows()) - K * C;
  return g * (A * e_prev + B * w) - K * (Bv * v);
}

struct LinearLocalEstimator {
  int sensor = 0;
  Vector xhat;
  std::vector<Matrix> gains;
  std::vector<double> objectives;
};

}  // namespace fusionest
