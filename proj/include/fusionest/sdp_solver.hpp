#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fusionest/lmi.hpp"

namespace fusionest {

struct SolveOptions {
  double gap_tol = 1e-9;   // stop when nu/t <= gap_tol * max(1, |objective|)
  double mu = 30.0;        // barrier parameter multiplier per stage
  int max_newton_total = 6000;
  std::optional<std::vector<Matrix>> initial;  // strictly feasible starting values, if known
};

namespace detail {

struct SparseCoeff {
  int row, col;  // row <= col; value applies to the symmetric pair when row != col
  double val;
};

struct FlatBlock {
  Eigen::Index dim = 0;
  Matrix f0;                                     // constant part, strictness already folded in
  std::vector<int> active;                       // dof indices touching this block
  std::vector<std::vector<SparseCoeff>> coeffs;  // parallel to active
};

struct FlatProblem {
  Eigen::Index m = 0;  // number of scalar dofs
  Vector c;
  std::vector<FlatBlock> blocks;
  std::vector<Eigen::Index> var_offset;
  double nu = 0.0;  // total barrier degree (sum of block dims)
};

struct RawTriplet {
  int dof, row, col;
  double val;
};

inline void scatter_term_derivatives(const MatrixVar& v, Eigen::Index var_offset, const Matrix& left,
                                     const Matrix& right, bool transposed, bool diagonal_block,
                                     Eigen::Index row_off, Eigen::Index col_off,
                                     std::vector<RawTriplet>& out) {
  auto emit = [&](int dof, const Vector& lcol, const Eigen::RowVectorXd& rrow) {
    // contribution lcol * rrow placed at (row_off, col_off)
    for (Eigen::Index i = 0; i < lcol.size(); ++i) {
      if (lcol(i) == 0.0) continue;
      for (Eigen::Index j = 0; j < rrow.size(); ++j) {
        const double val = lcol(i) * rrow(j);
        if (val == 0.0) continue;
        int r = static_cast<int>(row_off + i), c = static_cast<int>(col_off + j);
        if (diagonal_block) {
          // entries of a diagonal block mirror inside the block itself
          if (r == c) {
            out.push_back({dof, r, c, val});
          } else {
            out.push_back({dof, std::min(r, c), std::max(r, c), 0.5 * val});
          }
        } else {
          out.push_back({dof, r, c, val});
        }
      }
    }
  };
  int dof = static_cast<int>(var_offset);
  if (v.structure == VarStructure::Symmetric) {
    for (Eigen::Index a = 0; a < v.rows; ++a)
      for (Eigen::Index b = a; b < v.rows; ++b, ++dof) {
        emit(dof, left.col(a), right.row(b));
        if (a != b) emit(dof, left.col(b), right.row(a));
      }
  } else if (v.structure == VarStructure::Scalar) {
    emit(dof, left.col(0), right.row(0));
  } else {
    for (Eigen::Index a = 0; a < v.rows; ++a)
      for (Eigen::Index b = 0; b < v.cols; ++b, ++dof) {
        if (transposed)
          emit(dof, left.col(b), right.row(a));
        else
          emit(dof, left.col(a), right.row(b));
      }
  }
}

inline FlatBlock finalize_block(Eigen::Index dim, Matrix f0, std::vector<RawTriplet> raw) {
  std::sort(raw.begin(), raw.end(), [](const RawTriplet& a, const RawTriplet& b) {
    if (a.dof != b.dof) return a.dof < b.dof;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  FlatBlock blk;
  blk.dim = dim;
  blk.f0 = std::move(f0);
  size_t i = 0;
  while (i < raw.size()) {
    const int dof = raw[i].dof;
    std::vector<SparseCoeff> cs;
    while (i < raw.size() && raw[i].dof == dof) {
      double val = raw[i].val;
      const int r = raw[i].row, c = raw[i].col;
      ++i;
      while (i < raw.size() && raw[i].dof == dof && raw[i].row == r && raw[i].col == c) {
        val += raw[i].val;
        ++i;
      }
      if (std::abs(val) > 0.0) cs.push_back({r, c, val});
    }
    if (!cs.empty()) {
      blk.active.push_back(dof);
      blk.coeffs.push_back(std::move(cs));
    }
  }
  return blk;
}

inline FlatProblem flatten(const SdpProblem& problem) {
  FlatProblem fp;
  const auto& vars = problem.variables();
  fp.var_offset.resize(vars.size() + 1, 0);
  for (size_t i = 0; i < vars.size(); ++i) fp.var_offset[i + 1] = fp.var_offset[i] + vars[i].dof_count();
  fp.m = fp.var_offset.back();
  fp.c = Vector::Zero(fp.m);
  for (const auto& term : problem.objective()) {
    const MatrixVar& v = vars[term.var];
    if (v.structure == VarStructure::Symmetric) {
      Eigen::Index dof = fp.var_offset[term.var];
      for (Eigen::Index a = 0; a < v.rows; ++a) {
        fp.c(dof) += term.weight;  // dof (a,a) leads each row of the packed triangle
        dof += v.rows - a;
      }
    } else if (v.structure == VarStructure::Scalar) {
      fp.c(fp.var_offset[term.var]) += term.weight;
    } else {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        fp.c(fp.var_offset[term.var] + a * v.cols + a) += term.weight;
    }
  }

  const double eps = problem.strictness_epsilon();
  for (const auto& cons : problem.constraints()) {
    const Eigen::Index dim = cons.total_dim();
    std::vector<Matrix> zeros;
    zeros.reserve(vars.size());
    for (const auto& v : vars) zeros.push_back(Matrix::Zero(v.rows, v.cols));
    Matrix f0 = cons.evaluate(zeros) + eps * Matrix::Identity(dim, dim);
    std::vector<RawTriplet> raw;
    for (Eigen::Index br = 0; br < cons.block_count(); ++br)
      for (Eigen::Index bc = br; bc < cons.block_count(); ++bc) {
        const BlockEntry& e = cons.entry_at(br, bc);
        if (e.empty()) continue;
        const Eigen::Index ro = cons.block_offset(br), co = cons.block_offset(bc);
        const bool diag = (br == bc);
        for (const auto& t : e.linear)
          scatter_term_derivatives(vars[t.var], fp.var_offset[t.var], t.left, t.right, t.transposed,
                                   diag, ro, co, raw);
        for (const auto& t : e.scaled) {
          const int dof = static_cast<int>(fp.var_offset[t.var]);
          for (Eigen::Index i = 0; i < t.coeff.rows(); ++i)
            for (Eigen::Index j = 0; j < t.coeff.cols(); ++j) {
              const double val = t.coeff(i, j);
              if (val == 0.0) continue;
              const int r = static_cast<int>(ro + i), c = static_cast<int>(co + j);
              if (diag) {
                if (r == c)
                  raw.push_back({dof, r, c, val});
                else
                  raw.push_back({dof, std::min(r, c), std::max(r, c), 0.5 * val});
              } else {
                raw.push_back({dof, r, c, val});
              }
            }
        }
      }
    fp.blocks.push_back(finalize_block(dim, std::move(f0), std::move(raw)));
    fp.nu += static_cast<double>(dim);
  }

  // positive-definite domains: eps*I - X <= 0
  for (const auto& v : vars) {
    if (v.domain != VarDomain::PositiveDefinite) continue;
    std::vector<RawTriplet> raw;
    Eigen::Index dof = fp.var_offset[v.id];
    if (v.structure == VarStructure::Symmetric) {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = a; b < v.rows; ++b, ++dof)
          raw.push_back({static_cast<int>(dof), static_cast<int>(a), static_cast<int>(b), -1.0});
    } else if (v.structure == VarStructure::Scalar) {
      raw.push_back({static_cast<int>(dof), 0, 0, -1.0});
    } else {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = 0; b < v.cols; ++b, ++dof)
          if (a == b)
            raw.push_back({static_cast<int>(dof), static_cast<int>(a), static_cast<int>(a), -1.0});
          else if (a < b)
            raw.push_back({static_cast<int>(dof), static_cast<int>(a), static_cast<int>(b), -0.5});
          else
            raw.push_back({static_cast<int>(dof), static_cast<int>(b), static_cast<int>(a), -0.5});
    }
    fp.blocks.push_back(
        finalize_block(v.rows, eps * Matrix::Identity(v.rows, v.rows), std::move(raw)));
    fp.nu += static_cast<double>(v.rows);
  }
  return fp;
}

// S = -(F0 + sum_k x_k F_k); returns false (and leaves S undefined) only on size mismatch
inline void eval_slack(const FlatBlock& blk, const Vector& x, Matrix& s) {
  s = -blk.f0;
  for (size_t k = 0; k < blk.active.size(); ++k) {
    const double xv = x(blk.active[k]);
    if (xv == 0.0) continue;
    for (const auto& cf : blk.coeffs[k]) {
      s(cf.row, cf.col) -= xv * cf.val;
      if (cf.row != cf.col) s(cf.col, cf.row) -= xv * cf.val;
    }
  }
}

inline void eval_direction(const FlatBlock& blk, const Vector& dx, Matrix& d) {
  d.setZero(blk.dim, blk.dim);
  for (size_t k = 0; k < blk.active.size(); ++k) {
    const double dv = dx(blk.active[k]);
    if (dv == 0.0) continue;
    for (const auto& cf : blk.coeffs[k]) {
      d(cf.row, cf.col) += dv * cf.val;
      if (cf.row != cf.col) d(cf.col, cf.row) += dv * cf.val;
    }
  }
}

struct BarrierEval {
  bool feasible = false;
  double logdet = 0.0;
};

inline BarrierEval block_logdet(const Matrix& s) {
  BarrierEval ev;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) return ev;
  double ld = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double d = llt.matrixL()(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return ev;
    ld += std::log(d);
  }
  ev.feasible = true;
  ev.logdet = 2.0 * ld;
  return ev;
}

enum class CenterResult { Centered, Stalled, Failed };

class BarrierSolver {
 public:
  BarrierSolver(const FlatProblem& fp, const SolveOptions& opts) : fp_(fp), opts_(opts) {}

  int newton_used = 0;

  bool strictly_feasible(const Vector& x) const {
    Matrix s;
    for (const auto& blk : fp_.blocks) {
      eval_slack(blk, x, s);
      if (!block_logdet(s).feasible) return false;
    }
    return true;
  }

  double worst_slack_eigenvalue(const Vector& x) const {
    double worst = -std::numeric_limits<double>::infinity();
    Matrix s;
    for (const auto& blk : fp_.blocks) {
      eval_slack(blk, x, s);
      worst = std::max(worst, max_eigenvalue(Matrix(-s)));
    }
    return worst;
  }

  // Centers x for fixed t.
  template <class EarlyStop>
  CenterResult center(double t, Vector& x, const EarlyStop& early_stop, bool& stop_requested) {
    const Eigen::Index m = fp_.m;
    Vector grad(m);
    Matrix hess(m, m);
    Eigen::LLT<Matrix> llt;
    Matrix u;
    std::vector<Matrix> slacks(fp_.blocks.size());
    std::vector<Matrix> dirs(fp_.blocks.size());

    for (int it = 0; it < 80; ++it) {
      if (newton_used >= opts_.max_newton_total) return CenterResult::Failed;
      ++newton_used;

      grad = t * fp_.c;
      hess.setZero();
      double psi = t * fp_.c.dot(x);
      for (size_t b = 0; b < fp_.blocks.size(); ++b) {
        const FlatBlock& blk = fp_.blocks[b];
        eval_slack(blk, x, slacks[b]);
        llt.compute(slacks[b]);
        if (llt.info() != Eigen::Success) return CenterResult::Failed;
        double ld = 0.0;
        for (Eigen::Index i = 0; i < blk.dim; ++i) {
          const double d = llt.matrixL()(i, i);
          if (!(d > 0.0) || !std::isfinite(d)) return CenterResult::Failed;
          ld += std::log(d);
        }
        psi -= 2.0 * ld;
        u = llt.solve(Matrix::Identity(blk.dim, blk.dim));
        accumulate_block(blk, u, grad, hess);
      }

      Vector step = solve_newton(hess, grad);
      if (!step.allFinite()) return CenterResult::Failed;
      const double decrement = -grad.dot(step);
      if (decrement <= 2e-11) return CenterResult::Centered;

      // backtracking line search on psi
      double alpha = 1.0;
      bool accepted = false;
      for (size_t b = 0; b < fp_.blocks.size(); ++b) eval_direction(fp_.blocks[b], step, dirs[b]);
      for (int ls = 0; ls < 60; ++ls) {
        double psi_trial = t * fp_.c.dot(x + alpha * step);
        bool ok = true;
        for (size_t b = 0; b < fp_.blocks.size(); ++b) {
          const BarrierEval ev = block_logdet(Matrix(slacks[b] - alpha * dirs[b]));
          if (!ev.feasible) {
            ok = false;
            break;
          }
          psi_trial -= ev.logdet;
        }
        if (ok && psi_trial <= psi - 0.01 * alpha * decrement) {
          x += alpha * step;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return CenterResult::Stalled;  // cannot improve in double precision
      if (x.cwiseAbs().maxCoeff() > 1e12) return CenterResult::Failed;
      if (early_stop(x)) {
        stop_requested = true;
        return CenterResult::Centered;
      }
    }
    return CenterResult::Centered;
  }

 private:
  static void accumulate_block(const FlatBlock& blk, const Matrix& u, Vector& grad, Matrix& hess) {
    const size_t na = blk.active.size();
    const double* up = u.data();
    const Eigen::Index dim = u.rows();
    auto U = [&](int r, int c) { return up[c * dim + r]; };
    for (size_t i = 0; i < na; ++i) {
      const auto& ci = blk.coeffs[i];
      double g = 0.0;
      for (const auto& cf : ci) g += cf.val * (cf.row == cf.col ? U(cf.row, cf.col) : 2.0 * U(cf.row, cf.col));
      grad(blk.active[i]) += g;
      for (size_t j = i; j < na; ++j) {
        const auto& cj = blk.coeffs[j];
        double h = 0.0;
        for (const auto& a : ci) {
          // symmetric extension of (a.row, a.col)
          const int ar[2] = {a.row, a.col};
          const int ac[2] = {a.col, a.row};
          const int an = (a.row == a.col) ? 1 : 2;
          for (const auto& b : cj) {
            const int br[2] = {b.row, b.col};
            const int bc[2] = {b.col, b.row};
            const int bn = (b.row == b.col) ? 1 : 2;
            double acc = 0.0;
            for (int p = 0; p < an; ++p)
              for (int q = 0; q < bn; ++q) acc += U(ac[p], br[q]) * U(bc[q], ar[p]);
            h += a.val * b.val * acc;
          }
        }
        hess(blk.active[i], blk.active[j]) += h;
        if (i != j) hess(blk.active[j], blk.active[i]) += h;
      }
    }
  }

  static Vector solve_newton(Matrix& hess, const Vector& grad) {
    double reg = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      if (reg > 0.0) hess.diagonal().array() += reg;
      Eigen::LDLT<Matrix> ldlt(hess);
      if (ldlt.info() == Eigen::Success) {
        Vector step = ldlt.solve(-grad);
        if (step.allFinite() && -grad.dot(step) >= 0.0) return step;
      }
      reg = (reg == 0.0) ? 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff()) : reg * 1e3;
    }
    return Vector::Constant(grad.size(), std::numeric_limits<double>::quiet_NaN());
  }

  const FlatProblem& fp_;
  const SolveOptions& opts_;
};

inline std::vector<Matrix> unpack_values(const SdpProblem& problem, const FlatProblem& fp,
                                         const Vector& x) {
  std::vector<Matrix> values;
  const auto& vars = problem.variables();
  values.reserve(vars.size());
  for (const auto& v : vars) {
    Matrix val(v.rows, v.cols);
    Eigen::Index dof = fp.var_offset[v.id];
    if (v.structure == VarStructure::Symmetric) {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = a; b < v.rows; ++b, ++dof) {
          val(a, b) = x(dof);
          val(b, a) = x(dof);
        }
    } else if (v.structure == VarStructure::Scalar) {
      val(0, 0) = x(dof);
    } else {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = 0; b < v.cols; ++b, ++dof) val(a, b) = x(dof);
    }
    values.push_back(std::move(val));
  }
  return values;
}

inline Vector pack_values(const SdpProblem& problem, const FlatProblem& fp,
                          const std::vector<Matrix>& values) {
  Vector x = Vector::Zero(fp.m);
  const auto& vars = problem.variables();
  for (const auto& v : vars) {
    const Matrix& val = values[v.id];
    Eigen::Index dof = fp.var_offset[v.id];
    if (v.structure == VarStructure::Symmetric) {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = a; b < v.rows; ++b, ++dof) x(dof) = 0.5 * (val(a, b) + val(b, a));
    } else if (v.structure == VarStructure::Scalar) {
      x(dof) = val(0, 0);
    } else {
      for (Eigen::Index a = 0; a < v.rows; ++a)
        for (Eigen::Index b = 0; b < v.cols; ++b, ++dof) x(dof) = val(a, b);
    }
  }
  return x;
}

}  // namespace detail

/// Interior-point solve of the problem: linear trace objective over the
/// intersection of the "< 0" LMI cones and positive-definite domains.
inline SdpSolution solve(const SdpProblem& problem, const SolveOptions& opts = {}) {
  problem.validate();
  SdpSolution sol;
  const detail::FlatProblem fp = detail::flatten(problem);

  if (fp.m == 0) {
    std::vector<Matrix> empty_vals;
    for (const auto& v : problem.variables()) empty_vals.push_back(Matrix::Zero(v.rows, v.cols));
    bool feas = true;
    for (const auto& blk : fp.blocks) feas = feas && (max_eigenvalue(blk.f0) < 0.0);
    sol.status = feas ? SdpSolution::Status::Optimal : SdpSolution::Status::Infeasible;
    sol.values = std::move(empty_vals);
    return sol;
  }

  detail::BarrierSolver solver(fp, opts);

  // starting point
  Vector x = Vector::Zero(fp.m);
  if (opts.initial) {
    x = detail::pack_values(problem, fp, *opts.initial);
  } else {
    for (const auto& v : problem.variables())
      if (v.domain == VarDomain::PositiveDefinite) {
        Eigen::Index dof = fp.var_offset[v.id];
        if (v.structure == VarStructure::Scalar) {
          x(dof) = 0.5;
        } else if (v.structure == VarStructure::Symmetric) {
          for (Eigen::Index a = 0; a < v.rows; ++a) {
            x(dof) = 0.5;
            dof += v.rows - a;
          }
        }
      }
  }

  if (!solver.strictly_feasible(x)) {
    // phase I: minimize s subject to G_j(x) - s I <= 0, inside a large box
    // |x_k| <= R that keeps the analytic centers well defined (certificate
    // variables are otherwise free to grow without bound)
    detail::FlatProblem aux = fp;
    aux.m = fp.m + 1;
    aux.c = Vector::Zero(aux.m);
    aux.c(fp.m) = 1.0;
    for (auto& blk : aux.blocks) {
      std::vector<detail::SparseCoeff> cs;
      for (Eigen::Index i = 0; i < blk.dim; ++i) cs.push_back({static_cast<int>(i), static_cast<int>(i), -1.0});
      blk.active.push_back(static_cast<int>(fp.m));
      blk.coeffs.push_back(std::move(cs));
    }
    const double box = 1e7;
    for (Eigen::Index k = 0; k < fp.m; ++k) {
      for (double sign : {1.0, -1.0}) {
        detail::FlatBlock bb;
        bb.dim = 1;
        bb.f0 = Matrix::Constant(1, 1, -box);
        bb.active.push_back(static_cast<int>(k));
        bb.coeffs.push_back({{0, 0, sign}});
        aux.blocks.push_back(std::move(bb));
        aux.nu += 1.0;
      }
    }
    detail::BarrierSolver aux_solver(aux, opts);
    Vector xa(aux.m);
    xa.head(fp.m) = x;
    xa(fp.m) = solver.worst_slack_eigenvalue(x) + 1.0;

    double t = 1.0;
    bool stop = false;
    auto deep_enough = [&](const Vector& xx) { return xx(fp.m) <= -1e-6; };
    while (true) {
      const detail::CenterResult cr = aux_solver.center(t, xa, deep_enough, stop);
      if (cr == detail::CenterResult::Failed) {
        sol.status = SdpSolution::Status::NumericalFailure;
        return sol;
      }
      if (stop || cr == detail::CenterResult::Stalled) break;
      if (aux.nu / t <= 1e-10 * std::max(1.0, std::abs(xa(fp.m)))) break;
      t *= opts.mu;
      if (t > 1e16) break;
    }
    if (xa(fp.m) >= -1e-12) {
      sol.status = SdpSolution::Status::Infeasible;
      sol.newton_iterations = aux_solver.newton_used;
      return sol;
    }
    x = xa.head(fp.m);
    sol.newton_iterations += aux_solver.newton_used;
    if (!solver.strictly_feasible(x)) {
      sol.status = SdpSolution::Status::NumericalFailure;
      return sol;
    }
  }

  // phase II
  const bool pure_feasibility = (fp.c.cwiseAbs().maxCoeff() == 0.0);
  double t = 1.0;
  bool stop = false;
  auto never = [](const Vector&) { return false; };
  const double start_obj = std::abs(fp.c.dot(x));
  while (true) {
    const detail::CenterResult cr = solver.center(t, x, never, stop);
    if (cr == detail::CenterResult::Failed) {
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.newton_iterations += solver.newton_used;
      return sol;
    }
    const double obj = fp.c.dot(x);
    if (obj < -1e9 * std::max(1.0, start_obj)) {
      sol.status = SdpSolution::Status::NumericalFailure;  // objective diverging (unbounded below)
      sol.newton_iterations += solver.newton_used;
      return sol;
    }
    if (pure_feasibility || fp.nu / t <= opts.gap_tol * std::max(1.0, std::abs(obj))) break;
    if (cr == detail::CenterResult::Stalled) {
      // double precision exhausted; accept if at least modest accuracy was reached
      if (fp.nu / t <= 1e-6 * std::max(1.0, std::abs(obj))) break;
      sol.status = SdpSolution::Status::NumericalFailure;
      sol.newton_iterations += solver.newton_used;
      return sol;
    }
    t *= opts.mu;
  }

  sol.newton_iterations += solver.newton_used;
  sol.values = detail::unpack_values(problem, fp, x);
  sol.objective_value = problem.objective_value(sol.values);
  sol.status = SdpSolution::Status::Optimal;
  return sol;
}

}  // namespace fusionest
