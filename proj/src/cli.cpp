#include "crm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>
#include <json.hpp>

#include "crm/baselines.hpp"
#include "crm/bayes.hpp"
#include "crm/errors.hpp"
#include "crm/parallel.hpp"
#include "crm/rng.hpp"
#include "crm/saamodel.hpp"
#include "crm/solver.hpp"

namespace crm {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::chrono::sys_days> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& value) {
    const auto r = std::from_chars(s.data() + pos, s.data() + pos + len, value);
    return r.ec == std::errc() && r.ptr == s.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string cell_error(std::size_t row, std::string_view column, std::string_view what) {
  std::ostringstream msg;
  msg << "row " << row << ", column " << column << ": " << what;
  return msg.str();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// Loss draws are the negated return draws; covariances are unchanged.
DrawSet to_loss_draws(DrawSet d) {
  for (auto& draw : d.draws) {
    if (auto* g = std::get_if<GaussianDraw>(&draw)) g->mean = -g->mean;
  }
  return d;
}

RiskKind parse_kind_token(const std::string& token, const std::string& model) {
  try {
    return parse_risk_kind(token);
  } catch (const InputError&) {
    throw InputError("unknown risk measure '" + token + "' in model '" + model + "'");
  }
}

struct ModelKind {
  enum Family { VarExp, CvarExp, CvarCvar, WcExp, WcCvar, Normal, Dro, Wcvar, SingleStock } family = VarExp;
  RiskKind outer = RiskKind::Expectation;
  RiskKind inner = RiskKind::Expectation;
};

ModelKind parse_model(const std::string& model) {
  ModelKind k;
  if (model == "var-exp") k.family = ModelKind::VarExp;
  else if (model == "cvar-exp") k.family = ModelKind::CvarExp;
  else if (model == "cvar-cvar") k.family = ModelKind::CvarCvar;
  else if (model == "wc-exp") k.family = ModelKind::WcExp;
  else if (model == "wc-cvar") k.family = ModelKind::WcCvar;
  else if (model == "dro") k.family = ModelKind::Dro;
  else if (model == "wcvar") k.family = ModelKind::Wcvar;
  else if (model == "ss") k.family = ModelKind::SingleStock;
  else if (model.rfind("normal:", 0) == 0) {
    const std::string cell = model.substr(7);
    const std::size_t dash = cell.find('-');
    if (dash == std::string::npos) throw InputError("model '" + model + "' must look like normal:<outer>-<inner>");
    k.family = ModelKind::Normal;
    k.outer = parse_kind_token(cell.substr(0, dash), model);
    k.inner = parse_kind_token(cell.substr(dash + 1), model);
  } else {
    throw InputError("unknown model '" + model + "'");
  }
  return k;
}

SolverConfig solver_for(const RunOptions& opt) {
  SolverConfig cfg = opt.solver;
  if (opt.mode == SolveMode::Exact) {
    cfg.exact_limit = std::numeric_limits<std::size_t>::max();
    cfg.prefer_heuristic = false;
  } else if (opt.mode == SolveMode::Heuristic) {
    cfg.prefer_heuristic = true;
  }
  return cfg;
}

void check_levels(const RunOptions& opt) {
  if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw InputError("--delta must lie in (0, 1)");
  if (!(opt.epsilon > 0.0 && opt.epsilon < 1.0)) throw InputError("--epsilon must lie in (0, 1)");
  if (opt.samples < 1) throw InputError("--samples must be at least 1");
  if (opt.window < 1) throw InputError("--window must be at least 1");
}

void check_usable(const Solution& s, const std::string& model) {
  if (s.status == SolveStatus::Infeasible || s.status == SolveStatus::Unbounded) {
    throw SolverError("model " + model + " returned status " + std::string(to_string(s.status)));
  }
}

SaaProblem build_crm(const ModelKind& k, const DrawSet& draws, const FeasibleSet& fs, const RunOptions& opt,
                     std::uint64_t seed, const std::string& model) {
  BuildOptions bo;
  bo.seed = mix_seed(seed, 1);
  bo.workers = opt.workers;
  const LossSpec loss = LinearLoss{};
  try {
    switch (k.family) {
      case ModelKind::VarExp: return build_var_expectation(draws, loss, fs, opt.delta, bo);
      case ModelKind::CvarExp: return build_cvar_expectation(draws, loss, fs, opt.delta, bo);
      case ModelKind::CvarCvar:
        return build_cvar_cvar(draws, loss, fs, opt.delta, opt.epsilon, opt.inner_samples, bo.seed, bo);
      case ModelKind::WcExp: return build_worstcase_expectation(draws, loss, fs, bo);
      case ModelKind::WcCvar: return build_worstcase_cvar(draws, loss, fs, opt.epsilon, opt.inner_samples, bo.seed, bo);
      case ModelKind::Normal:
        return build_normal_composite(draws, fs, RiskSpec{k.outer, opt.delta}, RiskSpec{k.inner, opt.epsilon}, bo);
      default: break;
    }
  } catch (const UnsupportedError& e) {
    throw UnsupportedError("model " + model + " is an unsupported composite cell: " + e.what());
  }
  throw InputError("model " + model + " is not a composite risk model");
}

// MxN matrix of N(mean, cov) rows.
Eigen::MatrixXd gaussian_rows(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t rows,
                              std::uint64_t seed) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::Index n = mean.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), n);
  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
    out.row(static_cast<Eigen::Index>(i)) = (mean + root * z).transpose();
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string_view mode_name(SolveMode m) {
  switch (m) {
    case SolveMode::Exact: return "exact";
    case SolveMode::Heuristic: return "heuristic";
    default: return "auto";
  }
}

}  // namespace

Eigen::Index ReturnMatrix::row_of(const std::string& date) const {
  const auto it = std::lower_bound(dates.begin(), dates.end(), date);
  if (it == dates.end() || *it != date) throw InputError("date " + date + " is not in the data");
  return static_cast<Eigen::Index>(it - dates.begin());
}

void ReturnMatrix::validate() const {
  if (tickers.empty()) throw InputError("return data needs at least one asset");
  if (dates.size() < 2) throw InputError("return data needs at least two dates");
  if (returns.rows() != static_cast<Eigen::Index>(dates.size()) ||
      returns.cols() != static_cast<Eigen::Index>(tickers.size())) {
    throw InputError("return matrix shape does not match dates and tickers");
  }
  if (!returns.allFinite()) throw InputError("return data contains non-finite values");
  for (std::size_t i = 0; i < dates.size(); ++i) {
    if (!parse_iso_date(dates[i])) throw InputError(cell_error(i + 1, "date", "not an ISO date"));
    if (i > 0 && !(dates[i - 1] < dates[i])) throw InputError(cell_error(i + 1, "date", "dates must increase"));
  }
}

ReturnMatrix parse_returns_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV: expected a header date,TICK1,...");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "date") throw InputError("header must be date,TICK1,...");
  ReturnMatrix m;
  std::set<std::string> seen;
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j].empty()) throw InputError("header column " + std::to_string(j + 1) + " has no ticker");
    if (!seen.insert(std::string(header[j])).second) {
      throw InputError("duplicate ticker " + std::string(header[j]) + " in header");
    }
    m.tickers.emplace_back(header[j]);
  }
  const std::size_t n = m.tickers.size();
  std::vector<double> values;
  std::optional<std::chrono::sys_days> prev;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_commas(line);
    if (cells.size() > n + 1) throw InputError(cell_error(row, "date", "more cells than header columns"));
    const auto day = parse_iso_date(cells[0]);
    if (!day) throw InputError(cell_error(row, "date", "unparsable date '" + std::string(cells[0]) + "'"));
    if (prev && *day == *prev) throw InputError(cell_error(row, "date", "duplicate date " + std::string(cells[0])));
    if (prev && *day < *prev) throw InputError(cell_error(row, "date", "dates must be strictly increasing"));
    prev = day;
    m.dates.emplace_back(cells[0]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j + 1 >= cells.size() || cells[j + 1].empty()) {
        throw InputError(cell_error(row, m.tickers[j], "missing value"));
      }
      const std::string_view cell = cells[j + 1];
      const char* first = cell.data();
      if (*first == '+') ++first;
      double v = 0.0;
      const auto r = std::from_chars(first, cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw InputError(cell_error(row, m.tickers[j], "unparsable number '" + std::string(cell) + "'"));
      }
      values.push_back(v);
    }
  }
  m.returns.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < row; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m.returns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * n + j];
    }
  }
  m.validate();
  return m;
}

ReturnMatrix load_returns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return parse_returns_csv(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_returns_csv(const ReturnMatrix& m, std::ostream& out) {
  out << "date";
  for (const auto& t : m.tickers) out << ',' << t;
  out << '\n';
  for (Eigen::Index i = 0; i < m.days(); ++i) {
    out << m.dates[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.assets(); ++j) out << ',' << format_number(m.returns(i, j));
    out << '\n';
  }
}

ReturnMatrix synthetic_returns(const SynthOptions& opt) {
  if (opt.assets < 1) throw InputError("synthetic data needs at least one asset");
  if (opt.days < 2) throw InputError("synthetic data needs at least two days");
  if (!(opt.market_weight >= 0.0 && opt.market_weight <= 1.0)) throw InputError("market weight must lie in [0, 1]");
  const auto start = parse_iso_date(opt.start);
  if (!start) throw InputError("start date '" + opt.start + "' is not an ISO date");
  Rng params(mix_seed(opt.seed, 0));
  Eigen::VectorXd drift(opt.assets), vol(opt.assets);
  for (int j = 0; j < opt.assets; ++j) {
    drift(j) = opt.drift_lo + (opt.drift_hi - opt.drift_lo) * params.uniform();
    vol(j) = opt.vol_lo + (opt.vol_hi - opt.vol_lo) * params.uniform();
  }
  ReturnMatrix m;
  for (int j = 0; j < opt.assets; ++j) m.tickers.push_back("S" + std::to_string(j + 1));
  m.returns.resize(opt.days, opt.assets);
  Rng rng(mix_seed(opt.seed, 1));
  const double a = std::sqrt(opt.market_weight), b = std::sqrt(1.0 - opt.market_weight);
  std::chrono::sys_days day = *start;
  for (int i = 0; i < opt.days; ++i) {
    while (std::chrono::weekday{day} == std::chrono::Saturday || std::chrono::weekday{day} == std::chrono::Sunday) {
      day += std::chrono::days{1};
    }
    m.dates.push_back(format_date(day));
    day += std::chrono::days{1};
    const double market = rng.normal();
    for (int j = 0; j < opt.assets; ++j) {
      const double z = a * market + b * rng.normal();
      const double r = std::expm1(drift(j) - 0.5 * vol(j) * vol(j) + vol(j) * z);
      m.returns(i, j) = std::round(r * 1e10) / 1e10;
    }
  }
  return m;
}

void validate_model_name(const std::string& model) { parse_model(model); }

SolveReport solve_window(const Eigen::MatrixXd& window, const RunOptions& opt, std::uint64_t seed) {
  check_levels(opt);
  const ModelKind k = parse_model(opt.model);
  if (window.rows() < 1 || window.cols() < 1) throw InputError("window is empty");
  const FeasibleSet fs = FeasibleSet::simplex(window.cols());
  const SolverConfig cfg = solver_for(opt);
  SolveReport rep;
  rep.model = opt.model;
  const auto t0 = Clock::now();

  if (k.family == ModelKind::SingleStock) {
    rep.solution = single_stock(window);
    rep.build_time = 0.0;
    rep.solve_time = seconds_since(t0);
    rep.solution.wall_time = rep.solve_time;
    rep.objective_return = -rep.solution.objective;
    return rep;
  }

  const NiwPosterior post = niw_posterior(window);
  std::vector<std::string> warnings;
  if (k.family == ModelKind::Dro || k.family == ModelKind::Wcvar) {
    double gamma1 = 0.0;
    if (k.family == ModelKind::Dro) {
      if (opt.gamma1) {
        gamma1 = *opt.gamma1;
      } else {
        const DrawSet draws = sample_niw(post, opt.samples, seed, opt.workers);
        warnings = draws.warnings;
        gamma1 = calibrate_gamma1(draws, post.mu0, post.sigma0, opt.delta);
        rep.draws = draws.size();
      }
      rep.gamma1 = gamma1;
    }
    rep.build_time = seconds_since(t0);
    const auto t1 = Clock::now();
    if (k.family == ModelKind::Dro) {
      DroConfig dc;
      dc.gamma1 = gamma1;
      dc.delta = opt.delta;
      rep.solution = solve_dro_mean_ellipsoid(post.mu0, post.sigma0, dc, fs, cfg);
    } else {
      rep.solution = solve_worst_case_var(post.mu0, post.sigma0, opt.delta, fs, cfg);
    }
    rep.solve_time = seconds_since(t1);
  } else {
    const DrawSet draws = to_loss_draws(sample_niw(post, opt.samples, seed, opt.workers));
    rep.draws = draws.size();
    warnings = draws.warnings;
    const SaaProblem p = build_crm(k, draws, fs, opt, seed, opt.model);
    warnings.insert(warnings.end(), p.warnings.begin(), p.warnings.end());
    rep.build_time = seconds_since(t0);
    const auto t1 = Clock::now();
    rep.solution = solve(p, cfg);
    rep.solve_time = seconds_since(t1);
  }
  check_usable(rep.solution, opt.model);
  warnings.insert(warnings.end(), rep.solution.warnings.begin(), rep.solution.warnings.end());
  rep.solution.warnings = std::move(warnings);
  rep.objective_return = -rep.solution.objective;
  return rep;
}

SolveReport run_solve(const ReturnMatrix& data, const RunOptions& opt) {
  data.validate();
  check_levels(opt);
  const Eigen::Index end = opt.asof.empty() ? data.days() - 1 : data.row_of(opt.asof);
  if (end + 1 < opt.window) {
    throw InputError("insufficient history: " + std::to_string(end + 1) + " days up to the as-of date, window needs " +
                     std::to_string(opt.window));
  }
  const Eigen::MatrixXd window = data.returns.middleRows(end + 1 - opt.window, opt.window);
  SolveReport rep = solve_window(window, opt, opt.seed);
  rep.asof = data.dates[static_cast<std::size_t>(end)];
  rep.tickers = data.tickers;
  return rep;
}

std::string solve_report_json(const SolveReport& r, const RunOptions& opt, int indent) {
  Json j;
  j["model"] = r.model;
  j["asof"] = r.asof;
  j["window"] = opt.window;
  j["seed"] = opt.seed;
  j["delta"] = opt.delta;
  j["epsilon"] = opt.epsilon;
  j["samples"] = opt.samples;
  j["inner_samples"] = opt.inner_samples;
  j["mode"] = mode_name(opt.mode);
  j["tickers"] = r.tickers;
  j["weights"] = std::vector<double>(r.solution.x.data(), r.solution.x.data() + r.solution.x.size());
  j["objective"] = r.objective_return;
  j["loss_objective"] = r.solution.objective;
  j["status"] = to_string(r.solution.status);
  j["gap"] = number_or_null(r.solution.gap);
  j["iterations"] = r.solution.iterations;
  j["nodes"] = r.solution.nodes;
  j["dropped"] = r.solution.dropped.size();
  j["draws"] = r.draws;
  j["gamma1"] = r.gamma1 ? Json(*r.gamma1) : Json(nullptr);
  j["warnings"] = r.solution.warnings;
  j["timings"] = {{"build", r.build_time}, {"solve", r.solve_time}, {"wall_time", r.solution.wall_time}};
  return j.dump(indent);
}

std::vector<std::string> default_roster() { return {"var-exp", "cvar-exp", "normal:cvar-cvar", "dro", "wcvar", "ss"}; }

BacktestReport run_backtest(const ReturnMatrix& data, const RunOptions& opt, const std::vector<std::string>& models) {
  data.validate();
  check_levels(opt);
  if (models.empty()) throw InputError("backtest needs at least one model");
  for (const auto& m : models) validate_model_name(m);
  if (data.days() <= opt.window) {
    throw InputError("insufficient history: " + std::to_string(data.days()) + " days, window " +
                     std::to_string(opt.window) + " leaves no trading day");
  }
  BacktestReport rep;
  rep.seed = opt.seed;
  rep.window = opt.window;
  rep.samples = opt.samples;
  rep.inner_samples = opt.inner_samples;
  rep.delta = opt.delta;
  rep.epsilon = opt.epsilon;
  const Eigen::Index first = opt.window;
  const std::size_t days = static_cast<std::size_t>(data.days() - first);
  for (Eigen::Index d = first; d < data.days(); ++d) rep.dates.push_back(data.dates[static_cast<std::size_t>(d)]);

  RunOptions inner = opt;
  inner.workers = 1;
  for (const auto& model : models) {
    ModelSeries s;
    s.model = model;
    s.weights.resize(days);
    s.returns.resize(days);
    inner.model = model;
    parallel_for(days, opt.workers, [&](std::size_t k) {
      const Eigen::Index d = first + static_cast<Eigen::Index>(k);
      const Eigen::MatrixXd window = data.returns.middleRows(d - opt.window, opt.window);
      const SolveReport r = solve_window(window, inner, mix_seed(opt.seed, static_cast<std::uint64_t>(d)));
      s.weights[k] = r.solution.x;
      s.returns[k] = data.returns.row(d).dot(r.solution.x);
    });
    double w = 1.0;
    for (double r : s.returns) {
      w *= 1.0 + r;
      s.wealth.push_back(w);
    }
    s.mean = mean_of(s.returns);
    s.stdev = stdev_of(s.returns);
    rep.models.push_back(std::move(s));
  }
  return rep;
}

void write_backtest_csv(const BacktestReport& r, std::ostream& out) {
  out << "date";
  for (const auto& m : r.models) out << ',' << m.model << "_return," << m.model << "_wealth";
  out << '\n';
  for (std::size_t k = 0; k < r.dates.size(); ++k) {
    out << r.dates[k];
    for (const auto& m : r.models) out << ',' << format_number(m.returns[k]) << ',' << format_number(m.wealth[k]);
    out << '\n';
  }
}

std::string backtest_summary_json(const BacktestReport& r, int indent) {
  Json j;
  j["seed"] = r.seed;
  j["window"] = r.window;
  j["samples"] = r.samples;
  j["inner_samples"] = r.inner_samples;
  j["delta"] = r.delta;
  j["epsilon"] = r.epsilon;
  j["first_date"] = r.dates.empty() ? "" : r.dates.front();
  j["last_date"] = r.dates.empty() ? "" : r.dates.back();
  j["days"] = r.dates.size();
  Json models = Json::array();
  for (const auto& m : r.models) {
    models.push_back({{"model", m.model},
                      {"mean_return", m.mean},
                      {"std_return", m.stdev},
                      {"final_wealth", m.wealth.empty() ? 1.0 : m.wealth.back()}});
  }
  j["models"] = std::move(models);
  return j.dump(indent);
}

CompareReport run_compare(const ReturnMatrix& data, const RunOptions& opt, const CompareOptions& copt) {
  data.validate();
  check_levels(opt);
  if (copt.repetitions < 1) throw InputError("--reps must be at least 1");
  const Eigen::Index n = data.assets();
  if (copt.bootstrap < static_cast<std::size_t>(n + 2)) throw InputError("--bootstrap is too small for the posterior");
  const Eigen::Index end = opt.asof.empty() ? data.days() - 1 : data.row_of(opt.asof);
  if (end + 1 < opt.window) throw InputError("insufficient history for the fitting window");
  const NiwPosterior fit = niw_posterior(data.returns.middleRows(end + 1 - opt.window, opt.window));
  const FeasibleSet fs = FeasibleSet::simplex(n);
  const SolverConfig cfg = solver_for(opt);

  CompareReport rep;
  rep.rows.resize(static_cast<std::size_t>(copt.repetitions));
  RunOptions inner = opt;
  inner.workers = 1;
  parallel_for(rep.rows.size(), opt.workers, [&](std::size_t r) {
    CompareRow& row = rep.rows[r];
    row.rep = static_cast<int>(r);
    row.seed = mix_seed(opt.seed, r);
    const Eigen::MatrixXd boot = gaussian_rows(fit.mu0, fit.sigma0, copt.bootstrap, mix_seed(row.seed, 0));
    const NiwPosterior post = niw_posterior(boot);
    const DrawSet draws = sample_niw(post, opt.samples, mix_seed(row.seed, 1));
    row.gamma1 = opt.gamma1 ? *opt.gamma1 : calibrate_gamma1(draws, post.mu0, post.sigma0, opt.delta);

    const SaaProblem p = build_var_expectation(to_loss_draws(draws), LinearLoss{}, fs, opt.delta);
    const Solution v = solve(p, cfg);
    check_usable(v, "var-exp");
    DroConfig dc;
    dc.gamma1 = row.gamma1;
    dc.delta = opt.delta;
    const Solution d = solve_dro_mean_ellipsoid(post.mu0, post.sigma0, dc, fs, cfg);
    check_usable(d, "dro");
    row.var_exp_return = -v.objective;
    row.dro_return = -d.objective;
    row.gap = row.var_exp_return - row.dro_return;
  });
  std::vector<double> gaps;
  for (const auto& row : rep.rows) {
    gaps.push_back(row.gap);
    if (row.gap >= 0.0) ++rep.nonnegative;
  }
  rep.mean_gap = mean_of(gaps);
  rep.min_gap = *std::min_element(gaps.begin(), gaps.end());
  rep.max_gap = *std::max_element(gaps.begin(), gaps.end());
  return rep;
}

void write_compare_csv(const CompareReport& r, std::ostream& out) {
  out << "rep,seed,gamma1,var_exp_return,dro_return,gap\n";
  for (const auto& row : r.rows) {
    out << row.rep << ',' << row.seed << ',' << format_number(row.gamma1) << ',' << format_number(row.var_exp_return)
        << ',' << format_number(row.dro_return) << ',' << format_number(row.gap) << '\n';
  }
}

std::string compare_summary_json(const CompareReport& r, int indent) {
  Json j;
  j["repetitions"] = r.rows.size();
  j["mean_gap"] = r.mean_gap;
  j["min_gap"] = r.min_gap;
  j["max_gap"] = r.max_gap;
  j["nonnegative"] = r.nonnegative;
  return j.dump(indent);
}

namespace {

// Writes to `path`, or to `fallback` when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  fn(f);
  if (!f) throw InputError("failed writing " + path);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : split_commas(s)) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Composite risk portfolio models"};
  app.require_subcommand(1);

  RunOptions opt;
  std::string input, output, summary, models_arg;
  bool exact = false, heuristic = false;
  double gamma1 = 0.0;
  CompareOptions copt;
  SynthOptions synth;
  std::vector<CLI::Option*> gamma1_flags;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--input", input, "CSV file: date,TICK1,...")->required();
    sub->add_option("--delta", opt.delta, "outer risk level")->capture_default_str();
    sub->add_option("--epsilon", opt.epsilon, "inner risk level")->capture_default_str();
    sub->add_option("--samples", opt.samples, "posterior draws N")->capture_default_str();
    sub->add_option("--inner-samples", opt.inner_samples, "Monte Carlo samples per draw for inner measures")
        ->capture_default_str();
    sub->add_option("--window", opt.window, "trailing days used for the posterior")->capture_default_str();
    sub->add_option("--seed", opt.seed, "random seed")->envname("CRM_SEED")->capture_default_str();
    gamma1_flags.push_back(
        sub->add_option("--gamma1", gamma1, "DRO mean-ellipsoid radius (default: posterior calibration)"));
    sub->add_option("--workers", opt.workers, "worker threads")->capture_default_str();
    sub->add_option("--output", output, "output file (default stdout)");
    auto* ex = sub->add_flag("--exact", exact, "branch-and-bound for VaR outer measures");
    auto* he = sub->add_flag("--heuristic", heuristic, "scenario-drop heuristic for VaR outer measures");
    ex->excludes(he);
  };

  auto* solve_cmd = app.add_subcommand("solve", "solve one model on the trailing window");
  add_run_flags(solve_cmd);
  solve_cmd->add_option("--model", opt.model, "model name")->capture_default_str();
  solve_cmd->add_option("--asof", opt.asof, "last date of the window (default: last date)");

  auto* bt_cmd = app.add_subcommand("backtest", "rolling one-day-ahead backtest");
  add_run_flags(bt_cmd);
  bt_cmd->add_option("--models", models_arg, "comma-separated models (default: the six-model roster)");
  bt_cmd->add_option("--summary", summary, "summary JSON file");

  auto* cmp_cmd = app.add_subcommand("compare", "VaR-Expectation against DRO on bootstrapped normals");
  add_run_flags(cmp_cmd);
  cmp_cmd->add_option("--asof", opt.asof, "last date of the fitting window (default: last date)");
  cmp_cmd->add_option("--reps", copt.repetitions, "repetitions")->capture_default_str();
  cmp_cmd->add_option("--bootstrap", copt.bootstrap, "synthetic data set size")->capture_default_str();
  cmp_cmd->add_option("--summary", summary, "summary JSON file");

  auto* synth_cmd = app.add_subcommand("synth", "write seeded synthetic returns");
  synth_cmd->add_option("--assets", synth.assets)->capture_default_str();
  synth_cmd->add_option("--days", synth.days)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->envname("CRM_SEED")->capture_default_str();
  synth_cmd->add_option("--start", synth.start)->capture_default_str();
  synth_cmd->add_option("--output", output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (exact) opt.mode = SolveMode::Exact;
    if (heuristic) opt.mode = SolveMode::Heuristic;
    if (std::any_of(gamma1_flags.begin(), gamma1_flags.end(), [](CLI::Option* o) { return o->count() > 0; })) {
      opt.gamma1 = gamma1;
    }

    if (*synth_cmd) {
      const ReturnMatrix m = synthetic_returns(synth);
      emit(output, out, [&](std::ostream& o) { write_returns_csv(m, o); });
      return 0;
    }
    const ReturnMatrix data = load_returns_csv(input);
    if (*solve_cmd) {
      const SolveReport r = run_solve(data, opt);
      emit(output, out, [&](std::ostream& o) { o << solve_report_json(r, opt) << '\n'; });
    } else if (*bt_cmd) {
      const auto models = models_arg.empty() ? default_roster() : split_list(models_arg);
      const BacktestReport r = run_backtest(data, opt, models);
      emit(output, out, [&](std::ostream& o) { write_backtest_csv(r, o); });
      if (!summary.empty()) emit(summary, out, [&](std::ostream& o) { o << backtest_summary_json(r) << '\n'; });
    } else if (*cmp_cmd) {
      const CompareReport r = run_compare(data, opt, copt);
      emit(output, out, [&](std::ostream& o) { write_compare_csv(r, o); });
      if (!summary.empty()) emit(summary, out, [&](std::ostream& o) { o << compare_summary_json(r) << '\n'; });
    }
    return 0;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << '\n';
    return 2;
  } catch (const DegeneratePosteriorError& e) {
    err << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace crm
