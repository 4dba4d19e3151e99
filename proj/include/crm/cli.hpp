#pragma once

// Command-line frontend: return data ingestion, single solves, rolling
// backtests and the DRO comparison experiment. Everything here speaks in
// returns; losses only appear inside the models.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crm/solver_types.hpp"

namespace crm {

struct ReturnMatrix {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  /// T x n daily simple returns.
  Eigen::MatrixXd returns;

  Eigen::Index days() const { return returns.rows(); }
  Eigen::Index assets() const { return returns.cols(); }
  /// Row of `date`; throws InputError when absent.
  Eigen::Index row_of(const std::string& date) const;
  void validate() const;
};

/// Header `date,TICK1,...`, ISO dates strictly increasing, decimal returns.
/// Errors name the offending row (1-based, header excluded) and column.
ReturnMatrix parse_returns_csv(std::istream& in);
ReturnMatrix load_returns_csv(const std::string& path);
void write_returns_csv(const ReturnMatrix& m, std::ostream& out);

struct SynthOptions {
  int assets = 4;
  int days = 300;
  std::uint64_t seed = 7;
  std::string start = "2010-03-04";
  /// Daily drift and volatility ranges across assets.
  double drift_lo = -0.0005, drift_hi = 0.0015;
  double vol_lo = 0.008, vol_hi = 0.025;
  /// Loading on the common factor.
  double market_weight = 0.5;
};

/// Seeded geometric-Brownian returns with a one-factor correlation, on weekdays.
ReturnMatrix synthetic_returns(const SynthOptions& opt);

enum class SolveMode { Auto, Exact, Heuristic };

struct RunOptions {
  /// var-exp, cvar-exp, cvar-cvar, wc-exp, wc-cvar, dro, wcvar, ss,
  /// or normal:<outer>-<inner> with outer/inner in exp, var, cvar, wc.
  std::string model = "var-exp";
  double delta = 0.95;
  double epsilon = 0.95;
  std::size_t samples = 2000;
  std::size_t inner_samples = 1000;
  int window = 30;
  std::uint64_t seed = 0;
  std::string asof;
  SolveMode mode = SolveMode::Auto;
  std::optional<double> gamma1;
  unsigned workers = 1;
  SolverConfig solver;
};

/// Throws InputError for unknown names or levels outside (0, 1).
void validate_model_name(const std::string& model);

struct SolveReport {
  std::string model;
  std::string asof;
  std::vector<std::string> tickers;
  Solution solution;
  /// Optimal value in return convention (minus the loss objective).
  double objective_return = 0.0;
  std::optional<double> gamma1;
  std::size_t draws = 0;
  double build_time = 0.0;
  double solve_time = 0.0;
};

/// Posterior fit, sampling, build and solve on one trailing window (rows are days).
SolveReport solve_window(const Eigen::MatrixXd& window, const RunOptions& opt, std::uint64_t seed);

/// Uses the `window` rows ending at `asof` (default: the last date).
SolveReport run_solve(const ReturnMatrix& data, const RunOptions& opt);

/// Only the "timings" object varies between identical runs.
std::string solve_report_json(const SolveReport& r, const RunOptions& opt, int indent = 2);

struct ModelSeries {
  std::string model;
  std::vector<Eigen::VectorXd> weights;
  std::vector<double> returns;
  std::vector<double> wealth;
  double mean = 0.0;
  /// Sample standard deviation (denominator T - 1; 0 for a single day).
  double stdev = 0.0;
};

struct BacktestReport {
  std::vector<std::string> dates;
  std::vector<ModelSeries> models;
  std::uint64_t seed = 0;
  int window = 0;
  std::size_t samples = 0;
  std::size_t inner_samples = 0;
  double delta = 0.0;
  double epsilon = 0.0;
};

/// The default roster: var-exp, cvar-exp, normal:cvar-cvar, dro, wcvar, ss.
std::vector<std::string> default_roster();

/// For every day d with at least `window` earlier days, decides on rows
/// [d - window, d) with seed mix_seed(seed, d) and earns row d.
BacktestReport run_backtest(const ReturnMatrix& data, const RunOptions& opt,
                            const std::vector<std::string>& models);

/// One row per day: date, then <model>_return and <model>_wealth per model.
void write_backtest_csv(const BacktestReport& r, std::ostream& out);
std::string backtest_summary_json(const BacktestReport& r, int indent = 2);

struct CompareOptions {
  int repetitions = 100;
  /// Size of each synthetic data set drawn from the fitted normal.
  std::size_t bootstrap = 1000000;
};

struct CompareRow {
  int rep = 0;
  std::uint64_t seed = 0;
  double gamma1 = 0.0;
  double var_exp_return = 0.0;
  double dro_return = 0.0;
  double gap = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  double mean_gap = 0.0;
  double min_gap = 0.0;
  double max_gap = 0.0;
  int nonnegative = 0;
};

/// Per repetition: fit a normal on the trailing window, draw a synthetic data
/// set from it, fit the posterior on that set, then solve VaR-Expectation and
/// the DRO model (gamma1 calibrated at delta on the same posterior draws).
CompareReport run_compare(const ReturnMatrix& data, const RunOptions& opt, const CompareOptions& copt);
void write_compare_csv(const CompareReport& r, std::ostream& out);
std::string compare_summary_json(const CompareReport& r, int indent = 2);

/// Exit codes: 0 success, 2 input error, 3 solver failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crm
