#pragma once

// Solvers for compiled problems. Objectives are in loss convention, so every
// solver minimizes.

#include <vector>

#include "crm/saamodel.hpp"
#include "crm/solver_types.hpp"

namespace crm {

/// Requires p.form to hold an LpProblem. Infeasible and Unbounded are reported
/// through the status; x is empty for both.
Solution solve_lp(const SaaProblem& p, const SolverConfig& cfg);

/// Minimizes model.value over model.feasible. A projected-subgradient warm
/// phase (diminishing steps) collects linearizations, then a cutting-plane
/// phase refines x against the LP lower bound until the gap is within opt_tol.
/// Returns the best iterate; IterLimit never discards it.
Solution solve_minimax(const ScenarioModel& model, const SolverConfig& cfg);
Solution solve_minimax(const SaaProblem& p, const SolverConfig& cfg);

/// min_x max_{i in keep} g_i(x): LP epigraph when polyhedral, otherwise minimax.
Solution solve_max_over(const ScenarioModel& model, const std::vector<std::size_t>& keep,
                        const SolverConfig& cfg);

/// Exact best-first branch-and-bound over which K scenarios to drop.
/// A node fixes some scenarios as kept and some as dropped; its bound is the
/// min-max over the kept ones, which every completion must still cover.
/// Branches on the unfixed scenario with the largest g_i at the node's point.
/// Node limit gives ToleranceReached with the remaining gap.
Solution solve_bnb(const SaaProblem& p, const SolverConfig& cfg);

/// Greedy upper bound: repeatedly solve the min-max over kept scenarios and
/// drop the one with the largest g_i(x*). Status ToleranceReached.
Solution solve_heuristic_drop(const SaaProblem& p, const SolverConfig& cfg);

/// LP, minimax, or (exact or heuristic by cfg.exact_limit / prefer_heuristic)
/// scenario selection, by problem form.
Solution solve(const SaaProblem& p, const SolverConfig& cfg);

}  // namespace crm
