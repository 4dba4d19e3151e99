#include "crm/baselines.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "crm/errors.hpp"
#include "crm/riskcore.hpp"
#include "crm/solver.hpp"

namespace crm {

namespace {

// Checks mu0/sigma0 and reports whether sigma0 is numerically singular.
bool check_moments(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0) {
  GaussianParams{mu0, sigma0}.validate();
  if (mu0.size() == 0) throw InputError("moments need at least one asset");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma0, Eigen::EigenvaluesOnly);
  const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  return eig.eigenvalues().minCoeff() <= 1e-12 * top;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& s) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

// min_x coef * sqrt(x' S x) - mu0' x over the feasible set.
Solution solve_mean_spread(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0, double coef,
                           const FeasibleSet& feasible, const SolverConfig& solver) {
  feasible.validate();
  if (feasible.dimension != mu0.size()) throw InputError("feasible set does not match the number of assets");
  ScenarioModel model;
  model.feasible = feasible;
  model.aggregation = Aggregation::Max;
  model.scenarios.emplace_back(MeanSpreadTerm{-mu0, sigma0, coef});
  return solve_minimax(model, solver);
}

}  // namespace

void DroConfig::validate() const {
  if (!(gamma1 >= 0.0) || !std::isfinite(gamma1)) throw InputError("gamma1 must be finite and nonnegative");
  if (!(gamma2 >= 1.0)) throw InputError("gamma2 must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
}

Solution solve_dro_mean_ellipsoid(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0,
                                  const DroConfig& cfg, const FeasibleSet& feasible,
                                  const SolverConfig& solver) {
  cfg.validate();
  const bool singular = check_moments(mu0, sigma0);
  Solution s = solve_mean_spread(mu0, sigma0, std::sqrt(cfg.gamma1), feasible, solver);
  if (singular) s.warnings.push_back("sigma0 is singular; the mean ellipsoid uses its pseudo-inverse");
  return s;
}

double calibrate_gamma1(const DrawSet& draws, const Eigen::VectorXd& mu0,
                        const Eigen::MatrixXd& sigma0, double delta) {
  check_moments(mu0, sigma0);
  if (draws.size() == 0) throw InputError("calibration needs at least one draw");
  const Eigen::MatrixXd inv = pseudo_inverse(sigma0);
  std::vector<double> d;
  d.reserve(draws.size());
  for (const auto& draw : draws.draws) {
    const Eigen::VectorXd diff = draw_mean(draw) - mu0;
    if (diff.size() != mu0.size()) throw InputError("draw dimension does not match mu0");
    d.push_back(std::max(0.0, diff.dot(inv * diff)));
  }
  return var(SampleVector(std::move(d)), delta);
}

double worst_case_var_kappa(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  return std::sqrt(delta / (1.0 - delta));
}

Solution solve_worst_case_var(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& sigma0, double delta,
                              const FeasibleSet& feasible, const SolverConfig& solver) {
  const double kappa = worst_case_var_kappa(delta);
  const bool singular = check_moments(mu0, sigma0);
  Solution s = solve_mean_spread(mu0, sigma0, kappa, feasible, solver);
  if (singular) s.warnings.push_back("sigma0 is singular");
  return s;
}

Solution single_stock(const Eigen::MatrixXd& window) {
  if (window.rows() < 1 || window.cols() < 1) throw InputError("window must have at least one day and one asset");
  const Eigen::VectorXd means = window.colwise().mean().transpose();
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < means.size(); ++j) {
    if (means(j) > means(best)) best = j;
  }
  Solution s;
  s.x = Eigen::VectorXd::Zero(means.size());
  s.x(best) = 1.0;
  s.objective = -means(best);
  s.status = SolveStatus::Optimal;
  s.gap = 0.0;
  return s;
}

}  // namespace crm
