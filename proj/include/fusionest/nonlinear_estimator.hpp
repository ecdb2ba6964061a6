#pragma once

// Theorem-2 machinery: Jacobian linearization about the running estimate, the
// 4x4 bordered gain LMI with certificates (Pi, Upsilon, M, Psi, eta), and the
// nonlinear predict/correct update.

#include "fusionest/lmi.hpp"
#include "fusionest/models.hpp"
#include "fusionest/sdp_solver.hpp"

namespace fusionest {

/// A_J at the previous estimate; C_J at the prediction f(x_hat(t-1)). The
/// measurement Jacobian is evaluated at the prediction, not the estimate.
inline std::pair<Matrix, Matrix> linearize(const NonlinearModel& model, const Vector& xhat_prev,
                                           int sensor) {
  Matrix a_j = jacobian_f(model, xhat_prev);
  Matrix c_j = jacobian_g(model, sensor, model.f(xhat_prev));
  if (!a_j.allFinite() || !c_j.allFinite())
    throw std::runtime_error("linearize: non-finite Jacobian");
  return {std::move(a_j), std::move(c_j)};
}

struct NonlinearGainResult {
  SdpSolution::Status status = SdpSolution::Status::NumericalFailure;
  Matrix K;
  Matrix Pi;
  Matrix Upsilon;
  Matrix M;
  Matrix Psi;
  double eta = 0.0;
  double objective = 0.0;
};

/// min Tr{Upsilon + M} over K, Pi > 0, Upsilon > 0, M > 0, eta in (0, 1], Psi
/// free, subject to
///   [ -I   (I - K C_J) A_J   (I - K C_J) B   -K Bv ]
///   [  *        -Pi                0            0  ]
///   [  *         *            -Upsilon        -Psi ]   < 0,   Pi < eta I.
///   [  *         *                *            -M  ]
inline SdpProblem build_nonlinear_gain_problem(const Matrix& A_J, const Matrix& C_J, const Matrix& B,
                                               const Matrix& Bv, int* ids = nullptr) {
  const Eigen::Index n = A_J.rows();
  const Eigen::Index q = C_J.rows();
  const Eigen::Index n_w = B.cols();
  const Eigen::Index n_v = Bv.cols();

  SdpProblem prob;
  const int k = prob.add_variable(n, q, VarStructure::Rectangular, VarDomain::Free, "K");
  const int pi = prob.add_variable(n, n, VarStructure::Symmetric, VarDomain::PositiveDefinite, "Pi");
  const int up =
      prob.add_variable(n_w, n_w, VarStructure::Symmetric, VarDomain::PositiveDefinite, "Upsilon");
  const int mm =
      prob.add_variable(n_v, n_v, VarStructure::Symmetric, VarDomain::PositiveDefinite, "M");
  const int psi = prob.add_variable(n_w, n_v, VarStructure::Rectangular, VarDomain::Free, "Psi");
  const int eta = prob.add_variable(1, 1, VarStructure::Scalar, VarDomain::PositiveDefinite, "eta");
  if (ids) {
    ids[0] = k;
    ids[1] = pi;
    ids[2] = up;
    ids[3] = mm;
    ids[4] = psi;
    ids[5] = eta;
  }

  AffineBlockExpr lmi({n, n, n_w, n_v});
  lmi.set_constant(0, 0, -Matrix::Identity(n, n));
  lmi.set_constant(0, 1, A_J);
  lmi.add_linear(0, 1, k, -Matrix::Identity(n, n), C_J * A_J);
  lmi.set_constant(0, 2, B);
  lmi.add_linear(0, 2, k, -Matrix::Identity(n, n), C_J * B);
  lmi.add_linear(0, 3, k, -Matrix::Identity(n, n), Bv);
  lmi.add_linear(1, 1, pi, -Matrix::Identity(n, n), Matrix::Identity(n, n));
  lmi.add_linear(2, 2, up, -Matrix::Identity(n_w, n_w), Matrix::Identity(n_w, n_w));
  lmi.add_linear(2, 3, psi, -Matrix::Identity(n_w, n_w), Matrix::Identity(n_v, n_v));
  lmi.add_linear(3, 3, mm, -Matrix::Identity(n_v, n_v), Matrix::Identity(n_v, n_v));
  prob.add_constraint(std::move(lmi));

  AffineBlockExpr cap({n});
  cap.add_linear(0, 0, pi, Matrix::Identity(n, n), Matrix::Identity(n, n));
  cap.add_scaled(0, 0, eta, -Matrix::Identity(n, n));
  prob.add_constraint(std::move(cap));

  AffineBlockExpr ceiling({1});
  ceiling.add_scaled(0, 0, eta, Matrix::Identity(1, 1));
  ceiling.set_constant(0, 0, Matrix::Constant(1, 1, -1.0));
  prob.add_constraint(std::move(ceiling));

  prob.add_objective_trace(up);
  prob.add_objective_trace(mm);
  return prob;
}

inline NonlinearGainResult solve_nonlinear_gain(const Matrix& A_J, const Matrix& C_J,
                                                const Matrix& B, const Matrix& Bv,
                                                const SolveOptions& opts = {}) {
  int ids[6];
  const SdpProblem prob = build_nonlinear_gain_problem(A_J, C_J, B, Bv, ids);
  const SdpSolution sol = solve(prob, opts);
  NonlinearGainResult res;
  res.status = sol.status;
  if (sol.status == SdpSolution::Status::Optimal) {
    res.K = sol.values[ids[0]];
    res.Pi = sol.values[ids[1]];
    res.Upsilon = sol.values[ids[2]];
    res.M = sol.values[ids[3]];
    res.Psi = sol.values[ids[4]];
    res.eta = sol.values[ids[5]](0, 0);
    res.objective = sol.objective_value;
  }
  return res;
}

/// x_hat(t) = f(x_hat(t-1)) + K [y - g_i(f(x_hat(t-1)))]
inline Vector nlse_update(const NonlinearModel& model, int sensor, const Vector& xhat_prev,
                          const Matrix& K, const Vector& y) {
  const Vector pred = model.f(xhat_prev);
  const Vector out = pred + K * (y - model.g[sensor](pred));
  if (!out.allFinite()) throw std::runtime_error("nlse_update: non-finite update");
  return out;
}

struct NonlinearLocalEstimator {
  int sensor = 0;
  Vector xhat;
  Vector prediction;
  Matrix A_J;
  Matrix C_J;
  std::vector<double> objectives;
};

}  // namespace fusionest
