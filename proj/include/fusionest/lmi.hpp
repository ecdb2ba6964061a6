#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fusionest/linalg.hpp"

namespace fusionest {

enum class VarStructure { Symmetric, Rectangular, Scalar };
enum class VarDomain { Free, PositiveDefinite };

/// Handle-style description of one matrix decision variable.
struct MatrixVar {
  int id = -1;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  VarStructure structure = VarStructure::Rectangular;
  VarDomain domain = VarDomain::Free;
  std::string name;

  Eigen::Index dof_count() const {
    switch (structure) {
      case VarStructure::Symmetric: return rows * (rows + 1) / 2;
      case VarStructure::Scalar: return 1;
      default: return rows * cols;
    }
  }
};

/// One affine term inside a block entry: left * X * right, optionally with
/// X transposed. For scalar variables use ScaledTerm instead.
struct LinearTerm {
  int var = -1;
  bool transposed = false;
  Matrix left;
  Matrix right;
};

/// x * coeff for a 1x1 variable x.
struct ScaledTerm {
  int var = -1;
  Matrix coeff;
};

struct BlockEntry {
  std::optional<Matrix> constant;
  std::vector<LinearTerm> linear;
  std::vector<ScaledTerm> scaled;
  bool empty() const { return !constant && linear.empty() && scaled.empty(); }
};

/// A symmetric block matrix whose upper-triangle entries are affine in the
/// declared variables; lower blocks mirror the upper ones.
class AffineBlockExpr {
 public:
  AffineBlockExpr() = default;
  explicit AffineBlockExpr(std::vector<Eigen::Index> block_dims)
      : dims_(std::move(block_dims)), entries_(dims_.size() * dims_.size()) {}

  Eigen::Index block_count() const { return static_cast<Eigen::Index>(dims_.size()); }
  Eigen::Index block_dim(Eigen::Index b) const { return dims_[b]; }
  Eigen::Index total_dim() const {
    Eigen::Index s = 0;
    for (auto d : dims_) s += d;
    return s;
  }
  Eigen::Index block_offset(Eigen::Index b) const {
    Eigen::Index s = 0;
    for (Eigen::Index k = 0; k < b; ++k) s += dims_[k];
    return s;
  }

  void set_constant(Eigen::Index r, Eigen::Index c, Matrix value) {
    entry(r, c).constant = std::move(value);
  }
  void add_linear(Eigen::Index r, Eigen::Index c, int var, Matrix left, Matrix right,
                  bool transposed = false) {
    entry(r, c).linear.push_back({var, transposed, std::move(left), std::move(right)});
  }
  void add_scaled(Eigen::Index r, Eigen::Index c, int var, Matrix coeff) {
    entry(r, c).scaled.push_back({var, std::move(coeff)});
  }

  const BlockEntry& entry_at(Eigen::Index r, Eigen::Index c) const {
    return entries_[static_cast<size_t>(r) * dims_.size() + c];
  }

  /// Assembles the numeric matrix for the given variable values.
  Matrix evaluate(const std::vector<Matrix>& values) const {
    const Eigen::Index n = total_dim();
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index r = 0; r < block_count(); ++r) {
      for (Eigen::Index c = r; c < block_count(); ++c) {
        const BlockEntry& e = entry_at(r, c);
        if (e.empty()) continue;
        Matrix blk = Matrix::Zero(dims_[r], dims_[c]);
        if (e.constant) blk += *e.constant;
        for (const auto& t : e.linear) {
          const Matrix& x = values[t.var];
          blk += t.transposed ? Matrix(t.left * x.transpose() * t.right)
                              : Matrix(t.left * x * t.right);
        }
        for (const auto& t : e.scaled) blk += values[t.var](0, 0) * t.coeff;
        out.block(block_offset(r), block_offset(c), dims_[r], dims_[c]) = blk;
        if (r != c)
          out.block(block_offset(c), block_offset(r), dims_[c], dims_[r]) = blk.transpose();
      }
    }
    return out;
  }

 private:
  BlockEntry& entry(Eigen::Index r, Eigen::Index c) {
    if (r > c) throw std::invalid_argument("AffineBlockExpr: write to lower-triangle entry");
    return entries_[static_cast<size_t>(r) * dims_.size() + c];
  }

  std::vector<Eigen::Index> dims_;
  std::vector<BlockEntry> entries_;
};

struct TraceObjectiveTerm {
  int var = -1;
  double weight = 1.0;
};

/// Linear trace objective over matrix variables subject to a list of
/// "affine symmetric block matrix < 0" constraints plus per-variable
/// positive-definite domains. Strict inequalities are realized as
/// "<= -eps_lmi * I" with eps_lmi = 1e-8 * (1 + max constant-block norm)
/// unless overridden.
class SdpProblem {
 public:
  int add_variable(Eigen::Index rows, Eigen::Index cols, VarStructure structure,
                   VarDomain domain = VarDomain::Free, std::string name = {}) {
    if (structure == VarStructure::Symmetric && rows != cols)
      throw std::invalid_argument("SdpProblem: symmetric variable must be square");
    if (structure == VarStructure::Scalar && (rows != 1 || cols != 1))
      throw std::invalid_argument("SdpProblem: scalar variable must be 1x1");
    if (domain == VarDomain::PositiveDefinite && rows != cols)
      throw std::invalid_argument("SdpProblem: positive-definite variable must be square");
    MatrixVar v{static_cast<int>(vars_.size()), rows, cols, structure, domain, std::move(name)};
    vars_.push_back(v);
    return v.id;
  }

  void add_constraint(AffineBlockExpr expr) { constraints_.push_back(std::move(expr)); }

  void add_objective_trace(int var, double weight = 1.0) {
    const MatrixVar& v = vars_.at(var);
    if (v.rows != v.cols)
      throw std::invalid_argument("SdpProblem: trace objective needs a square variable");
    objective_.push_back({var, weight});
  }

  void set_strictness_epsilon(double eps) { eps_override_ = eps; }

  const std::vector<MatrixVar>& variables() const { return vars_; }
  const std::vector<AffineBlockExpr>& constraints() const { return constraints_; }
  const std::vector<TraceObjectiveTerm>& objective() const { return objective_; }

  double strictness_epsilon() const {
    if (eps_override_ > 0) return eps_override_;
    double max_norm = 0.0;
    for (const auto& cons : constraints_)
      for (Eigen::Index r = 0; r < cons.block_count(); ++r)
        for (Eigen::Index c = r; c < cons.block_count(); ++c) {
          const BlockEntry& e = cons.entry_at(r, c);
          if (e.constant) max_norm = std::max(max_norm, e.constant->cwiseAbs().maxCoeff());
        }
    return 1e-8 * (1.0 + max_norm);
  }

  Eigen::Index total_dofs() const {
    Eigen::Index n = 0;
    for (const auto& v : vars_) n += v.dof_count();
    return n;
  }

  Matrix evaluate_constraint(size_t j, const std::vector<Matrix>& values) const {
    return constraints_.at(j).evaluate(values);
  }

  double objective_value(const std::vector<Matrix>& values) const {
    double s = 0.0;
    for (const auto& term : objective_) s += term.weight * values[term.var].trace();
    return s;
  }

  /// Shape and reference checks; throws std::invalid_argument on violation.
  void validate() const {
    const int nv = static_cast<int>(vars_.size());
    for (const auto& term : objective_)
      if (term.var < 0 || term.var >= nv)
        throw std::invalid_argument("SdpProblem: objective references unknown variable");
    for (const auto& cons : constraints_) {
      for (Eigen::Index r = 0; r < cons.block_count(); ++r)
        for (Eigen::Index c = r; c < cons.block_count(); ++c) {
          const BlockEntry& e = cons.entry_at(r, c);
          const Eigen::Index er = cons.block_dim(r), ec = cons.block_dim(c);
          if (e.constant && (e.constant->rows() != er || e.constant->cols() != ec))
            throw std::invalid_argument("SdpProblem: constant block shape mismatch");
          for (const auto& t : e.linear) {
            if (t.var < 0 || t.var >= nv)
              throw std::invalid_argument("SdpProblem: term references unknown variable");
            const MatrixVar& v = vars_[t.var];
            const Eigen::Index xr = t.transposed ? v.cols : v.rows;
            const Eigen::Index xc = t.transposed ? v.rows : v.cols;
            if (t.left.rows() != er || t.left.cols() != xr || t.right.rows() != xc ||
                t.right.cols() != ec)
              throw std::invalid_argument("SdpProblem: linear term shape mismatch");
          }
          for (const auto& t : e.scaled) {
            if (t.var < 0 || t.var >= nv || vars_[t.var].structure != VarStructure::Scalar)
              throw std::invalid_argument("SdpProblem: scaled term needs a scalar variable");
            if (t.coeff.rows() != er || t.coeff.cols() != ec)
              throw std::invalid_argument("SdpProblem: scaled term shape mismatch");
          }
        }
    }
  }

 private:
  std::vector<MatrixVar> vars_;
  std::vector<AffineBlockExpr> constraints_;
  std::vector<TraceObjectiveTerm> objective_;
  double eps_override_ = -1.0;
};

struct SdpSolution {
  enum class Status { Optimal, Infeasible, NumericalFailure };
  Status status = Status::NumericalFailure;
  std::vector<Matrix> values;
  double objective_value = 0.0;
  int newton_iterations = 0;
};

inline const char* to_string(SdpSolution::Status s) {
  switch (s) {
    case SdpSolution::Status::Optimal: return "optimal";
    case SdpSolution::Status::Infeasible: return "infeasible";
    default: return "numerical-failure";
  }
}

struct VerifyReport {
  double worst_constraint_eig = 0.0;  // max over constraints of lambda_max(F_j(x))
  double worst_domain_eig = 0.0;      // min over PD variables of lambda_min(X)
  bool ok = false;
};

/// Re-checks a solution against the problem: every constraint must satisfy
/// lambda_max <= -eps + tol_feas and every PD variable lambda_min >= eps - tol_feas.
inline VerifyReport verify_solution(const SdpProblem& problem, const std::vector<Matrix>& values,
                                    double tol_feas = 1e-6) {
  VerifyReport rep;
  const double eps = problem.strictness_epsilon();
  rep.worst_constraint_eig = -std::numeric_limits<double>::infinity();
  rep.worst_domain_eig = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < problem.constraints().size(); ++j)
    rep.worst_constraint_eig =
        std::max(rep.worst_constraint_eig, max_eigenvalue(problem.evaluate_constraint(j, values)));
  bool has_domain = false;
  for (const auto& v : problem.variables())
    if (v.domain == VarDomain::PositiveDefinite) {
      has_domain = true;
      rep.worst_domain_eig = std::min(rep.worst_domain_eig, min_eigenvalue(values[v.id]));
    }
  rep.ok = rep.worst_constraint_eig <= -eps + tol_feas &&
           (!has_domain || rep.worst_domain_eig >= eps - tol_feas);
  return rep;
}

}  // namespace fusionest
