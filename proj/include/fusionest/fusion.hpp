#pragma once

// Stacked fusion error system and the fusion-weight optimization: the last
// weight is eliminated (Omega_L = I - sum of the others), so the identity-sum
// constraint holds by construction.

#include "fusionest/lmi.hpp"
#include "fusionest/sdp_solver.hpp"

namespace fusionest {

enum class StackLayout { LinearSharedNoise, NonlinearPerSensorNoise };

struct StackedErrorSystem {
  StackLayout layout = StackLayout::LinearSharedNoise;
  int n = 0;
  int L = 0;
  Matrix A_F;  // (nL) x (nL), block diagonal of closed-loop maps
  Matrix B_F;  // (nL) x n_xi
  Eigen::Index n_xi() const { return B_F.cols(); }
};

/// closed_loop[i] = G_i A (or G_i A_Ji), gw[i] = G_i B, kv[i] = K_i B_i.
/// The linear layout shares one process-noise column block across sensors;
/// the nonlinear layout is block diagonal with one (w, v_i) pair per sensor.
inline StackedErrorSystem build_stacked(const std::vector<Matrix>& closed_loop,
                                        const std::vector<Matrix>& gw,
                                        const std::vector<Matrix>& kv, StackLayout layout) {
  StackedErrorSystem sys;
  sys.layout = layout;
  sys.L = static_cast<int>(closed_loop.size());
  sys.n = static_cast<int>(closed_loop[0].rows());
  const Eigen::Index n = sys.n;
  const Eigen::Index n_w = gw[0].cols();

  sys.A_F = Matrix::Zero(n * sys.L, n * sys.L);
  for (int i = 0; i < sys.L; ++i) sys.A_F.block(i * n, i * n, n, n) = closed_loop[i];

  if (layout == StackLayout::LinearSharedNoise) {
    Eigen::Index n_xi = n_w;
    for (const auto& k : kv) n_xi += k.cols();
    sys.B_F = Matrix::Zero(n * sys.L, n_xi);
    Eigen::Index col = n_w;
    for (int i = 0; i < sys.L; ++i) {
      sys.B_F.block(i * n, 0, n, n_w) = gw[i];
      sys.B_F.block(i * n, col, n, kv[i].cols()) = -kv[i];
      col += kv[i].cols();
    }
  } else {
    Eigen::Index n_xi = 0;
    for (const auto& k : kv) n_xi += n_w + k.cols();
    sys.B_F = Matrix::Zero(n * sys.L, n_xi);
    Eigen::Index col = 0;
    for (int i = 0; i < sys.L; ++i) {
      sys.B_F.block(i * n, col, n, n_w) = gw[i];
      sys.B_F.block(i * n, col + n_w, n, kv[i].cols()) = -kv[i];
      col += n_w + kv[i].cols();
    }
  }
  return sys;
}

struct FusionWeights {
  SdpSolution::Status status = SdpSolution::Status::NumericalFailure;
  bool fallback_equal = false;
  int n = 0;
  int L = 0;
  std::vector<Matrix> omega_head;  // Omega_1 .. Omega_{L-1}
  Matrix P, Theta, Upsilon;        // certificates (named Pi, M, Psi in the nonlinear case)
  double objective = 0.0;

  Matrix omega(int i) const {
    if (i + 1 < L) return omega_head[i];
    Matrix last = Matrix::Identity(n, n);
    for (const auto& o : omega_head) last -= o;
    return last;
  }
  Matrix omega_row() const {  // [Omega_1, ..., Omega_L]
    Matrix row(n, static_cast<Eigen::Index>(n) * L);
    for (int i = 0; i < L; ++i) row.middleCols(static_cast<Eigen::Index>(i) * n, n) = omega(i);
    return row;
  }
};

namespace detail_fusion {

// Fusion LMI with the head weights as variables and the last weight
// eliminated; pass a frozen row to build the selection oracle instead.
inline SdpProblem build_problem(const StackedErrorSystem& sys, const Matrix* frozen_row,
                                std::vector<int>* omega_ids, int* p_id, int* th_id, int* y_id) {
  const Eigen::Index n = sys.n;
  const Eigen::Index nl = sys.A_F.rows();
  const Eigen::Index n_xi = sys.n_xi();

  SdpProblem prob;
  std::vector<int> omegas;
  if (!frozen_row)
    for (int i = 0; i + 1 < sys.L; ++i)
      omegas.push_back(prob.add_variable(n, n, VarStructure::Rectangular, VarDomain::Free,
                                         "Omega" + std::to_string(i + 1)));
  const int p = prob.add_variable(nl, nl, VarStructure::Symmetric, VarDomain::PositiveDefinite, "P");
  const int th =
      prob.add_variable(n_xi, n_xi, VarStructure::Symmetric, VarDomain::PositiveDefinite, "Theta");
  const int y = prob.add_variable(nl, n_xi, VarStructure::Rectangular, VarDomain::Free, "Upsilon");
  if (omega_ids) *omega_ids = omegas;
  if (p_id) *p_id = p;
  if (th_id) *th_id = th;
  if (y_id) *y_id = y;

  AffineBlockExpr lmi({n, nl, n_xi});
  lmi.set_constant(0, 0, -Matrix::Identity(n, n));
  if (frozen_row) {
    lmi.set_constant(0, 1, *frozen_row * sys.A_F);
    lmi.set_constant(0, 2, *frozen_row * sys.B_F);
  } else {
    const Matrix a_last = sys.A_F.middleRows((sys.L - 1) * n, n);
    const Matrix b_last = sys.B_F.middleRows((sys.L - 1) * n, n);
    lmi.set_constant(0, 1, a_last);
    lmi.set_constant(0, 2, b_last);
    for (int i = 0; i + 1 < sys.L; ++i) {
      lmi.add_linear(0, 1, omegas[i], Matrix::Identity(n, n),
                     sys.A_F.middleRows(static_cast<Eigen::Index>(i) * n, n) - a_last);
      lmi.add_linear(0, 2, omegas[i], Matrix::Identity(n, n),
                     sys.B_F.middleRows(static_cast<Eigen::Index>(i) * n, n) - b_last);
    }
  }
  lmi.add_linear(1, 1, p, -Matrix::Identity(nl, nl), Matrix::Identity(nl, nl));
  lmi.add_linear(1, 2, y, -Matrix::Identity(nl, nl), Matrix::Identity(n_xi, n_xi));
  lmi.add_linear(2, 2, th, -Matrix::Identity(n_xi, n_xi), Matrix::Identity(n_xi, n_xi));
  prob.add_constraint(std::move(lmi));

  prob.add_objective_trace(p);
  prob.add_objective_trace(th);
  return prob;
}

// Strictly feasible start: certificates dominated by the Gram matrices of the
// given weight row, with unit slack.
inline std::vector<Matrix> feasible_start(const SdpProblem& prob, const StackedErrorSystem& sys,
                                          const Matrix& row, bool with_omegas) {
  const Matrix oa = row * sys.A_F;
  const Matrix ob = row * sys.B_F;
  std::vector<Matrix> vals;
  if (with_omegas)
    for (int i = 0; i + 1 < sys.L; ++i)
      vals.push_back(row.middleCols(static_cast<Eigen::Index>(i) * sys.n, sys.n));
  vals.push_back(Matrix(oa.transpose() * oa + 1.0 * Matrix::Identity(oa.cols(), oa.cols())));
  vals.push_back(Matrix(ob.transpose() * ob + 1.0 * Matrix::Identity(ob.cols(), ob.cols())));
  vals.push_back(Matrix(oa.transpose() * ob));
  (void)prob;
  return vals;
}

}  // namespace detail_fusion

/// min Tr{P} + Tr{Theta} over the fusion LMI. Solver failure falls back to
/// equal weights with the fallback flag set.
inline FusionWeights solve_fusion_weights(const StackedErrorSystem& sys,
                                          const SolveOptions& base_opts = {}) {
  std::vector<int> omegas;
  int p, th, y;
  const SdpProblem prob = detail_fusion::build_problem(sys, nullptr, &omegas, &p, &th, &y);

  Matrix equal_row(sys.n, static_cast<Eigen::Index>(sys.n) * sys.L);
  for (int i = 0; i < sys.L; ++i)
    equal_row.middleCols(static_cast<Eigen::Index>(i) * sys.n, sys.n) =
        Matrix::Identity(sys.n, sys.n) / sys.L;
  SolveOptions opts = base_opts;
  opts.initial = detail_fusion::feasible_start(prob, sys, equal_row, true);

  const SdpSolution sol = solve(prob, opts);
  FusionWeights w;
  w.n = sys.n;
  w.L = sys.L;
  w.status = sol.status;
  if (sol.status == SdpSolution::Status::Optimal) {
    for (int id : omegas) w.omega_head.push_back(sol.values[id]);
    w.P = sol.values[p];
    w.Theta = sol.values[th];
    w.Upsilon = sol.values[y];
    w.objective = sol.objective_value;
  } else {
    w.fallback_equal = true;
    for (int i = 0; i + 1 < sys.L; ++i)
      w.omega_head.push_back(Matrix::Identity(sys.n, sys.n) / sys.L);
  }
  return w;
}

/// Objective of the same SDP with the weight row frozen to selecting one
/// sensor; used as the dominance oracle.
inline double solve_selection_objective(const StackedErrorSystem& sys, int selected,
                                        const SolveOptions& base_opts = {}) {
  Matrix row = Matrix::Zero(sys.n, static_cast<Eigen::Index>(sys.n) * sys.L);
  row.middleCols(static_cast<Eigen::Index>(selected) * sys.n, sys.n) =
      Matrix::Identity(sys.n, sys.n);
  int p, th, y;
  const SdpProblem prob = detail_fusion::build_problem(sys, &row, nullptr, &p, &th, &y);
  SolveOptions opts = base_opts;
  opts.initial = detail_fusion::feasible_start(prob, sys, row, false);
  const SdpSolution sol = solve(prob, opts);
  if (sol.status != SdpSolution::Status::Optimal)
    throw std::runtime_error("selection oracle solve failed");
  return sol.objective_value;
}

/// Weighted combination with the last weight reconstructed; identical inputs
/// pass through exactly.
inline Vector fuse(const FusionWeights& w, const std::vector<Vector>& xhat) {
  Vector out = xhat[w.L - 1];
  for (int i = 0; i + 1 < w.L; ++i) out += w.omega_head[i] * (xhat[i] - xhat[w.L - 1]);
  return out;
}

/// One step of the stacked error recursion and the fused error it induces.
inline std::pair<Vector, Vector> fusion_error_recursion(const Vector& e_f_prev,
                                                        const StackedErrorSystem& sys,
                                                        const FusionWeights& w, const Vector& xi) {
  Vector e_f = sys.A_F * e_f_prev + sys.B_F * xi;
  std::vector<Vector> segments(sys.L);
  for (int i = 0; i < sys.L; ++i) segments[i] = e_f.segment(static_cast<Eigen::Index>(i) * sys.n, sys.n);
  Vector e0 = fuse(w, segments);
  return {std::move(e_f), std::move(e0)};
}

}  // namespace fusionest
