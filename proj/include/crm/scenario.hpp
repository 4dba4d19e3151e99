#pragma once

// Per-draw scenario objectives g_i(x) and their outer aggregation. These are
// the continuous objective pieces every compiled problem is built from.

#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "crm/riskcore.hpp"

namespace crm {

/// Random loss H(x, xi) supplied by the caller.
struct GeneralLoss {
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& xi)> evaluate;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& xi)> subgradient_x;
  bool convex_in_x = false;
};

/// H(x, xi) = xi' x.
struct LinearLoss {};

using LossSpec = std::variant<LinearLoss, GeneralLoss>;

/// Long-only budget set {x >= 0, sum x = 1, x <= upper}.
struct FeasibleSet {
  Eigen::Index dimension = 0;
  /// Per-asset caps; empty means uncapped.
  Eigen::VectorXd upper;

  static FeasibleSet simplex(Eigen::Index n) { return FeasibleSet{n, {}}; }
  bool has_upper() const { return upper.size() > 0; }
  double cap(Eigen::Index j) const;
  /// Throws InputError when empty (caps summing below 1) or malformed.
  void validate() const;
  bool contains(const Eigen::VectorXd& x, double tol) const;
  /// Euclidean projection onto the set (bisection on the multiplier).
  Eigen::VectorXd project(const Eigen::VectorXd& y) const;
  /// A feasible starting point spreading weight evenly under the caps.
  Eigen::VectorXd center() const;
};

/// c * sqrt(x' G x) + mu' x: closed-form VaR/CVaR (or expectation, c = 0)
/// of a Gaussian linear loss.
struct MeanSpreadTerm {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double coef = 0.0;
};

struct AffineTerm {
  Eigen::VectorXd mean;
};

/// Risk of the loss over a fixed finite sample (or discrete support) of xi.
struct EmpiricalTerm {
  std::shared_ptr<const Eigen::MatrixXd> samples;  // M x dim
  Eigen::VectorXd weights;                         // empty means uniform
  RiskSpec inner;                                  // Expectation, CVaR or WorstCase
  std::shared_ptr<const GeneralLoss> loss;         // null means linear
};

class ScenarioFunction {
 public:
  using Term = std::variant<AffineTerm, MeanSpreadTerm, EmpiricalTerm>;

  explicit ScenarioFunction(Term term) : term_(std::move(term)) {}

  const Term& term() const { return term_; }
  /// True for AffineTerm.
  bool affine() const { return std::holds_alternative<AffineTerm>(term_); }
  /// True when an LP epigraph exists (affine, or empirical with a linear loss).
  bool polyhedral() const;

  double value(const Eigen::VectorXd& x) const;
  /// Value, and a subgradient written into `grad`.
  double value(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

 private:
  Term term_;
};

enum class Aggregation { Mean, Max, Cvar };

/// phi(x) = aggregate_i g_i(x) over uniformly weighted draws.
struct ScenarioModel {
  std::vector<ScenarioFunction> scenarios;
  Aggregation aggregation = Aggregation::Max;
  double level = 0.95;  // outer CVaR level
  FeasibleSet feasible;

  double value(const Eigen::VectorXd& x) const;
  double value(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  /// Restriction to a subset of scenarios, same aggregation.
  ScenarioModel subset(const std::vector<std::size_t>& keep) const;
  bool all_affine() const;
  bool all_polyhedral() const;
};

/// Tail weights realizing the CVaR of `values` (descending-sorted mass split),
/// sized like values; sum to 1. Uniform base weights when `weights` is empty.
Eigen::VectorXd cvar_tail_weights(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                                  double level);

}  // namespace crm
