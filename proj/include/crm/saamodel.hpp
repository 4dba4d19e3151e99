#pragma once

// Compiles a composite risk description over sampled distributions into a
// concrete optimization problem: an LP, a convex minimax problem, or a
// cardinality-constrained scenario selection problem.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "crm/bayes.hpp"
#include "crm/lp.hpp"
#include "crm/riskcore.hpp"
#include "crm/scenario.hpp"

namespace crm {

struct CompositeSpec {
  RiskSpec outer;  // level delta
  RiskSpec inner;  // level epsilon
  /// Samples per draw when the inner measure has to be estimated by Monte Carlo.
  std::size_t inner_sample_count = 1000;
  /// Use the Gaussian closed forms for inner VaR/CVaR (linear loss, Gaussian draws).
  bool closed_form_inner = false;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Polyhedral models with more LP rows than this are emitted as minimax problems.
  std::size_t lp_row_limit = 20000;
  /// Same cut for rows generated by inner Monte Carlo samples.
  std::size_t lp_sample_row_limit = 1000;
  /// Required for general losses under an outer VaR.
  std::optional<double> big_m;
};

/// An LP whose columns x_begin .. x_begin + n - 1 are the portfolio weights.
struct LpProblem {
  LinearProgram lp;
  Eigen::Index x_begin = 0;
};

/// min_x phi(x) for the problem's ScenarioModel.
struct MinimaxProblem {};

/// min t  s.t.  g_i(x) - M z_i <= t,  sum z_i = K,  z binary.
struct MixedBinaryProblem {
  double big_m = 0.0;
  std::size_t cardinality = 0;
};

struct SaaProblem {
  std::variant<LpProblem, MinimaxProblem, MixedBinaryProblem> form;
  /// Continuous objective. For MixedBinaryProblem this is the K = 0 relaxation
  /// (max over all scenarios).
  ScenarioModel model;
  std::string label;
  std::uint64_t seed = 0;
  std::size_t inner_sample_count = 0;
  std::vector<std::string> warnings;

  bool is_lp() const { return std::holds_alternative<LpProblem>(form); }
  bool is_minimax() const { return std::holds_alternative<MinimaxProblem>(form); }
  bool is_mixed_binary() const { return std::holds_alternative<MixedBinaryProblem>(form); }
  /// The SAA objective at x: model.value(x), or for MixedBinaryProblem the
  /// (K+1)-th largest g_i(x).
  double objective_at(const Eigen::VectorXd& x) const;
};

/// Dispatches every supported (outer, inner) pair. Throws UnsupportedError for
/// outer Expectation with a non-Expectation inner, for VaR inner measures off
/// the Gaussian closed form, for inner WorstCase on Gaussian draws, and for inner
/// levels that make the closed form nonconvex (VaR with epsilon < 0.5).
/// Throws InputError for non-convex losses or inconsistent dimensions.
SaaProblem build_composite(const CompositeSpec& spec, const DrawSet& draws, const LossSpec& loss,
                           const FeasibleSet& feasible, const BuildOptions& options = {});

SaaProblem build_var_expectation(const DrawSet& draws, const LossSpec& loss,
                                 const FeasibleSet& feasible, double delta,
                                 const BuildOptions& options = {});
SaaProblem build_cvar_expectation(const DrawSet& draws, const LossSpec& loss,
                                  const FeasibleSet& feasible, double delta,
                                  const BuildOptions& options = {});
SaaProblem build_cvar_cvar(const DrawSet& draws, const LossSpec& loss, const FeasibleSet& feasible,
                           double delta, double epsilon, std::size_t m_inner, std::uint64_t seed,
                           const BuildOptions& options = {});
SaaProblem build_worstcase_expectation(const DrawSet& draws, const LossSpec& loss,
                                       const FeasibleSet& feasible,
                                       const BuildOptions& options = {});
SaaProblem build_worstcase_cvar(const DrawSet& draws, const LossSpec& loss,
                                const FeasibleSet& feasible, double epsilon, std::size_t m_inner,
                                std::uint64_t seed, const BuildOptions& options = {});
/// Gaussian draws, linear loss, inner measure in closed form.
SaaProblem build_normal_composite(const DrawSet& draws, const FeasibleSet& feasible,
                                  const RiskSpec& outer, const RiskSpec& inner,
                                  const BuildOptions& options = {});
/// Outer Expectation over inner Expectation.
SaaProblem build_expectation_expectation(const DrawSet& draws, const LossSpec& loss,
                                         const FeasibleSet& feasible,
                                         const BuildOptions& options = {});

/// Bound on the spread of per-draw expected linear losses over the feasible set,
/// with 10% slack: 1.1 * (max_ij mu_i[j] - min_ij mu_i[j]). With zero spread
/// only the slack floor 0.1 * max(1, max |mu_i[j]|) is returned. Throws
/// InputError for general losses, which need a user-supplied M.
double big_m(const DrawSet& draws, const LossSpec& loss, const FeasibleSet& feasible);

/// Epigraph LP of a polyhedral model, or nullopt when some scenario is not
/// polyhedral, the LP would exceed row_limit rows, or more than
/// sample_row_limit of them come from inner samples.
std::optional<LpProblem> epigraph_lp(const ScenarioModel& model, std::size_t row_limit,
                                     std::size_t sample_row_limit = std::numeric_limits<std::size_t>::max());

struct SampleSizeRequest {
  double tau = 0.05;
  double epsilon = 0.01;
  double gamma = 0.1;
  int n = 1;
  double lipschitz = 1.0;
  double diameter = 1.0;
  /// Outer level; tau must not exceed 1 - delta.
  double delta = 0.0;
  double c1 = 1.0, c2 = 1.0, c3 = 1.0;
  double d1 = 1.0, d2 = 1.0, d3 = 1.0;

  void validate() const;
};

/// ceil((2/tau^2)(ln(1/eps) + n ln ceil(2LD/gamma) + ln ceil(2/tau))), natural logs.
long sample_size_n0(const SampleSizeRequest& r);

struct SampleBounds {
  long m_bound = 0;
  long n_bound = 0;
};

/// Order-of-magnitude guidance only; the constants have no validated values.
/// m = ceil((C1/gamma^2)(C2 n + C3 ln(1/eps))),
/// n = ceil((D1/gamma^2)(n ln(D2/gamma) + ln(D3/eps))), both clamped at 0.
SampleBounds sample_bounds(const SampleSizeRequest& r);

/// Solver-independent JSON dump of the compiled problem.
std::string problem_to_json(const SaaProblem& p, int indent = 2);

}  // namespace crm
