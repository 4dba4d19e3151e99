#pragma once

// Linear programs: min c'x + offset  s.t.  A x (<=, >=, =) b,  lower <= x <= upper.

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "crm/solver_types.hpp"

namespace crm {

enum class Sense { LessEqual, GreaterEqual, Equal };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearProgram {
  Eigen::VectorXd objective;
  double objective_offset = 0.0;
  Eigen::SparseMatrix<double> constraints;  // rows x cols, column major
  std::vector<Sense> senses;
  Eigen::VectorXd rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index rows() const { return constraints.rows(); }
  Eigen::Index cols() const { return constraints.cols(); }
  /// Throws InputError on inconsistent sizes or inverted bounds.
  void validate() const;
};

/// Incremental row/column assembly.
class LpBuilder {
 public:
  Eigen::Index add_column(double cost, double lower = 0.0, double upper = kInf);
  void add_row(const std::vector<std::pair<Eigen::Index, double>>& terms, Sense sense, double rhs);
  /// Adds coef to the objective coefficient of an existing column.
  void add_cost(Eigen::Index col, double coef) { cost_.at(static_cast<std::size_t>(col)) += coef; }
  Eigen::Index columns() const { return static_cast<Eigen::Index>(cost_.size()); }
  Eigen::Index rows() const { return static_cast<Eigen::Index>(senses_.size()); }
  LinearProgram build() const;

 private:
  std::vector<double> cost_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<Sense> senses_;
  std::vector<double> rhs_;
};

struct LpResult {
  SolveStatus status = SolveStatus::IterLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Row multipliers y with reduced costs c - A'y (<= rows: y <= 0, >= rows: y >= 0).
  Eigen::VectorXd duals;
  /// b'y plus the bound terms of the reduced costs.
  double dual_objective = 0.0;
  long iterations = 0;
};

/// Two-phase revised simplex. Dantzig pricing, switching to Bland's rule
/// after a run of degenerate pivots. The basis is refactored every pivot:
/// column and row singletons are peeled off and only the remaining bump is
/// LU-factored (densely when small, sparse otherwise).
LpResult solve_linear_program(const LinearProgram& lp, const SolverConfig& cfg);

}  // namespace crm
