#include "crm/solver_types.hpp"

#include "crm/errors.hpp"

namespace crm {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::ToleranceReached: return "ToleranceReached";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

void SolverConfig::validate() const {
  if (!(feas_tol > 0.0) || !(opt_tol > 0.0)) throw InputError("solver tolerances must be positive");
  if (max_iters <= 0 || bnb_node_limit <= 0) throw InputError("solver iteration limits must be positive");
  if (subgradient_iters < 0 || cutting_plane_iters < 0) throw InputError("iteration counts must be nonnegative");
  if (!(subgradient_step > 0.0)) throw InputError("subgradient step must be positive");
}

}  // namespace crm
