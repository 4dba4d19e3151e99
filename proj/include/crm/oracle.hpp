#pragma once

// Brute-force reference computations for tests. Slow by design and written
// without the production model builders or solvers.

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "crm/bayes.hpp"
#include "crm/riskcore.hpp"
#include "crm/scenario.hpp"

namespace crm::oracle {

struct GridResult {
  double value = 0.0;
  Eigen::VectorXd x;
};

/// Exhaustive search over the simplex grid {x : x_j = k_j / m, sum k_j = m},
/// m = round(1 / grid_step), respecting the caps of `feasible`, then a pattern
/// search along e_i - e_j that only accepts strict improvements. The grid is
/// visited from e_1 onward, so ties keep the earliest point. Requires n <= 4.
GridResult grid_search_simplex(const std::function<double(const Eigen::VectorXd&)>& objective,
                               const FeasibleSet& feasible, double grid_step, bool polish = true);

/// min_x of the (K+1)-th largest per-draw expected loss, K = floor((1-delta) N),
/// by enumerating every set of K dropped draws and minimizing the max over
/// the rest. Linear losses are finished exactly by enumerating the basic
/// points of the epigraph LP; general losses by the grid polish. Requires
/// n <= 4 and N <= 16. General losses need discrete draws.
GridResult brute_force_var_expectation(const DrawSet& draws, const LossSpec& loss,
                                       const FeasibleSet& feasible, double delta,
                                       double grid_step, unsigned workers = 1);

struct McRisk {
  double var = 0.0;
  double cvar = 0.0;
};

/// Empirical VaR and CVaR of xi' x over n_mc draws xi ~ N(mean, covariance).
/// Same conventions as the riskcore measures: VaR is the ceil((1-delta) n)-th
/// largest loss and CVaR averages the worst (1-delta) n, splitting the boundary.
McRisk mc_risk_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta,
                      std::size_t n_mc, std::uint64_t seed);

}  // namespace crm::oracle
