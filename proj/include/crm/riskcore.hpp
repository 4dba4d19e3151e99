#pragma once

// Risk measures on losses: empirical versions over sample vectors and closed
// forms for Gaussian linear losses. Every measure here treats larger values
// as worse.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace crm {

enum class RiskKind { Expectation, VaR, CVaR, WorstCase };

std::string_view to_string(RiskKind kind);
/// Parses "exp"/"expectation", "var", "cvar", "wc"/"worst-case". Throws InputError.
RiskKind parse_risk_kind(std::string_view name);

struct RiskSpec {
  RiskKind kind = RiskKind::Expectation;
  double level = 0.95;  // ignored for Expectation and WorstCase

  /// Throws InputError when a VaR/CVaR level is outside (0, 1).
  void validate() const;
};

/// Loss realizations with optional probability weights.
class SampleVector {
 public:
  explicit SampleVector(std::vector<double> values);
  SampleVector(std::vector<double> values, std::vector<double> weights);

  std::span<const double> values() const { return values_; }
  /// Empty when the sample is uniformly weighted.
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return values_.size(); }
  bool uniform() const { return weights_.empty(); }
  double weight(std::size_t i) const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

/// Size of the upper tail, (1 - delta) * n, snapped to the nearest integer
/// when within rounding noise of it (so (1 - 0.8) * 10 counts as 2, not 1.999...).
double tail_mass(double delta, std::size_t n);
/// floor((1 - delta) * n) with the same snapping.
std::size_t tail_count(double delta, std::size_t n);

double expectation(const SampleVector& s);

/// Empirical VaR, the upper delta-quantile inf{t : P(loss > t) < 1 - delta}:
/// the ceil((1-delta) N)-th largest value. When (1-delta) N is an integer K this
/// is the smallest sample value t with #{values >= t} <= K; otherwise it is the
/// order statistic N - floor((1-delta) N), which keeps CVaR >= VaR.
/// Throws UnsupportedError for non-uniform weights.
double var(const SampleVector& s, double delta);

struct CvarResult {
  double value = 0.0;
  double alpha_star = 0.0;  // a minimizer of the Rockafellar-Uryasev objective
};

/// Empirical CVaR from sorted partial sums: the average of the worst
/// (1 - delta) mass, splitting the boundary atom. For uniform weights
/// alpha_star equals var(s, delta), a minimizer of the Rockafellar objective.
CvarResult cvar(const SampleVector& s, double delta);

/// alpha + (1/(1-delta)) * sum_i w_i (h_i - alpha)^+, the function whose minimum
/// over alpha is cvar(s, delta).value.
double rockafellar_objective(const SampleVector& s, double delta, double alpha);

double worst_case(const SampleVector& s);

/// Dispatches on spec.kind.
double evaluate(const RiskSpec& spec, const SampleVector& s);

struct GaussianParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  /// Throws InputError unless covariance is square, matches mean, symmetric
  /// within 1e-10 and has no eigenvalue below -1e-10.
  void validate() const;
};

/// Phi^{-1}(delta): the VaR loading on sqrt(x' G x).
double var_normal_coefficient(double delta);
/// phi(Phi^{-1}(delta)) / (1 - delta): the CVaR loading on sqrt(x' G x).
double cvar_normal_coefficient(double delta);

double var_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta);
double cvar_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta);

}  // namespace crm
