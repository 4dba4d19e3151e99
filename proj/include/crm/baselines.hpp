#pragma once

// Comparison portfolios: moment-based distributionally robust, worst-case VaR
// and single stock. Solutions report objectives in loss convention (negated
// return), like every other solver here.

#include <Eigen/Dense>

#include "crm/bayes.hpp"
#include "crm/scenario.hpp"
#include "crm/solver_types.hpp"

namespace crm {

struct DroConfig {
  /// Radius of the mean ellipsoid (mu - mu0)' sigma0^{-1} (mu - mu0) <= gamma1.
  double gamma1 = 0.0;
  /// Second-moment radius; kept for completeness, unused by the mean-only inner problem.
  double gamma2 = 1.0;
  double delta = 0.95;

  void validate() const;
};

/// max_x min_{mu in ellipsoid} mu' x = max_x mu0' x - sqrt(gamma1) ||sigma0^{1/2} x||.
/// The returned objective is the negated optimal return. A singular sigma0 is
/// read through its pseudo-inverse (the ellipsoid lies in its range) and noted
/// in the warnings.
Solution solve_dro_mean_ellipsoid(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0,
                                  const DroConfig& cfg, const FeasibleSet& feasible,
                                  const SolverConfig& solver = {});

/// delta-quantile (upper, as riskcore var) of (mu_i - mu0)' sigma0^+ (mu_i - mu0)
/// over the draw means.
double calibrate_gamma1(const DrawSet& draws, const Eigen::VectorXd& mu0,
                        const Eigen::MatrixXd& sigma0, double delta);

/// sqrt(delta / (1 - delta)), the one-sided Chebyshev loading.
double worst_case_var_kappa(double delta);

/// min_x kappa(delta) sqrt(x' sigma0 x) - mu0' x, the worst-case VaR of the loss
/// -xi'x over distributions with mean mu0 and covariance sigma0.
Solution solve_worst_case_var(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0, double delta,
                              const FeasibleSet& feasible, const SolverConfig& solver = {});

/// All weight on the asset with the highest mean return over the window
/// (rows are days); ties go to the lowest index. Objective is minus that mean.
Solution single_stock(const Eigen::MatrixXd& window);

}  // namespace crm
