#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace crm {

enum class SolveStatus { Optimal, ToleranceReached, Infeasible, Unbounded, IterLimit };

std::string_view to_string(SolveStatus status);

struct SolverConfig {
  double feas_tol = 1e-9;
  /// Absolute gap target, scaled by max(1, |objective|).
  double opt_tol = 1e-7;
  long max_iters = 200000;
  long bnb_node_limit = 200000;
  /// Largest scenario count solve() sends to exact branch-and-bound.
  std::size_t exact_limit = 200;
  bool prefer_heuristic = false;
  /// Polyhedral subproblems with more rows than this go to the minimax engine.
  std::size_t lp_row_limit = 20000;
  /// Same cut for rows generated by inner Monte Carlo samples.
  std::size_t lp_sample_row_limit = 1000;

  // Projected-subgradient warm phase of the minimax engine.
  long subgradient_iters = 300;
  double subgradient_step = 1.0;
  /// Cutting-plane iterations after the warm phase.
  long cutting_plane_iters = 2000;

  /// When nonempty, per-iteration / per-node CSV rows are appended here.
  std::string trace_path;

  /// Throws InputError unless every tolerance is positive.
  void validate() const;
};

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::IterLimit;
  /// Incumbent minus best bound; NaN when no bound is available (heuristic).
  double gap = 0.0;
  long iterations = 0;
  double wall_time = 0.0;
  /// Branch-and-bound nodes (0 for continuous solves).
  long nodes = 0;
  /// Scenarios excluded by the cardinality constraint (z_i = 1).
  std::vector<std::size_t> dropped;
  /// Dual objective for LP solves.
  double dual_objective = 0.0;
  std::vector<std::string> warnings;
};

}  // namespace crm
