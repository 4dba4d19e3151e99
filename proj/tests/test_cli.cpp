#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "crm/cli.hpp"
#include "crm/errors.hpp"

namespace crm {
namespace {

using Json = nlohmann::json;

ReturnMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return parse_returns_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

ReturnMatrix make_matrix(const Eigen::MatrixXd& r) {
  ReturnMatrix m;
  SynthOptions so;
  so.days = static_cast<int>(r.rows());
  so.assets = static_cast<int>(r.cols());
  const ReturnMatrix dates = synthetic_returns(so);
  m.dates = dates.dates;
  m.tickers = dates.tickers;
  m.returns = r;
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("crm_test_" + name);
}

int run(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "crm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

RunOptions quick(const std::string& model) {
  RunOptions opt;
  opt.model = model;
  opt.samples = 100;
  opt.inner_samples = 50;
  opt.seed = 9;
  return opt;
}

const std::string kBundled = std::string(CRM_SOURCE_DIR) + "/data/synthetic.csv";

TEST(LoadReturnsCsv, ParsesHandFile) {
  const ReturnMatrix m = parse("date,AAA,BBB\n2020-01-02,0.01,-0.02\n2020-01-03,0.5,1e-3\n2020-01-06,-0.25,0\n");
  ASSERT_EQ(m.days(), 3);
  ASSERT_EQ(m.assets(), 2);
  EXPECT_EQ(m.tickers, (std::vector<std::string>{"AAA", "BBB"}));
  EXPECT_EQ(m.dates, (std::vector<std::string>{"2020-01-02", "2020-01-03", "2020-01-06"}));
  Eigen::MatrixXd expected(3, 2);
  expected << 0.01, -0.02, 0.5, 1e-3, -0.25, 0.0;
  EXPECT_EQ(m.returns, expected);
}

TEST(LoadReturnsCsv, HoleNamesRowAndTicker) {
  const std::string e = error_of("date,TICK1,TICK2\n2020-01-02,0.01,0.02\n2020-01-03,,0.01\n");
  EXPECT_NE(e.find("row 2, column TICK1"), std::string::npos) << e;
  EXPECT_NE(e.find("missing"), std::string::npos) << e;
  const std::string short_row = error_of("date,TICK1,TICK2\n2020-01-02,0.01,0.02\n2020-01-03,0.01\n");
  EXPECT_NE(short_row.find("row 2, column TICK2"), std::string::npos) << short_row;
}

TEST(LoadReturnsCsv, SingleAsset) {
  const ReturnMatrix m = parse("date,ONLY\n2021-05-03,0.001\n2021-05-04,-0.002\n");
  EXPECT_EQ(m.assets(), 1);
  EXPECT_EQ(m.returns(1, 0), -0.002);
}

TEST(LoadReturnsCsv, ToleratesCrlfAndBlankLines) {
  const ReturnMatrix m = parse("date,A\r\n2021-05-03,0.001\r\n\r\n2021-05-04,0.002\r\n");
  EXPECT_EQ(m.days(), 2);
}

TEST(LoadReturnsCsv, RejectsBadCells) {
  EXPECT_NE(error_of("date,A,B\n2020-01-02,0.01,x\n2020-01-03,0,0\n").find("row 1, column B: unparsable"),
            std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-01-02,0.01\n2020-01-02,0.02\n").find("row 2, column date: duplicate"),
            std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-01-03,0.01\n2020-01-02,0.02\n").find("row 2, column date"), std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-02-30,0.01\n2020-03-01,0.02\n").find("row 1, column date"), std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-01-02,0.01,5\n2020-01-03,0\n").find("row 1"), std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-01-02,nan\n2020-01-03,0\n").find("row 1, column A"), std::string::npos);
  EXPECT_NE(error_of("day,A\n2020-01-02,0.01\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("date,A,A\n2020-01-02,0.01,0\n").find("duplicate ticker"), std::string::npos);
  EXPECT_NE(error_of("date,A\n2020-01-02,0.01\n").find("two dates"), std::string::npos);
  EXPECT_NE(error_of("").find("empty"), std::string::npos);
}

TEST(LoadReturnsCsv, FileErrorsCarryThePath) {
  const auto path = temp_file("hole.csv");
  std::ofstream(path) << "date,TICK1\n2020-01-02,0.01\n2020-01-03,\n";
  try {
    load_returns_csv(path.string());
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("row 2, column TICK1"), std::string::npos);
  }
  EXPECT_THROW(load_returns_csv("/nonexistent/returns.csv"), InputError);
}

TEST(Synthetic, DeterministicWeekdaysAndRoundTrip) {
  SynthOptions so;
  so.assets = 3;
  so.days = 40;
  const ReturnMatrix a = synthetic_returns(so);
  const ReturnMatrix b = synthetic_returns(so);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_EQ(a.dates.front(), "2010-03-04");
  // 2010-03-04 is a Thursday; the third trading day skips the weekend.
  EXPECT_EQ(a.dates[2], "2010-03-08");
  std::ostringstream out;
  write_returns_csv(a, out);
  const ReturnMatrix c = parse(out.str());
  EXPECT_EQ(c.returns, a.returns);
  EXPECT_EQ(c.dates, a.dates);
  so.seed = 8;
  EXPECT_NE(synthetic_returns(so).returns, a.returns);
  EXPECT_EQ((a.returns.array() > -1.0).count(), a.returns.size());
}

TEST(Synthetic, BundledFileLoads) {
  const ReturnMatrix m = load_returns_csv(kBundled);
  EXPECT_EQ(m.assets(), 4);
  EXPECT_GT(m.days(), 30);
}

TEST(RunSolve, DeterministicAndFeasible) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  for (const std::string model : {"var-exp", "cvar-exp", "cvar-cvar", "wc-exp", "wc-cvar", "dro", "wcvar", "ss",
                                  "normal:var-exp", "normal:cvar-cvar", "normal:wc-var"}) {
    const SolveReport a = run_solve(data, quick(model));
    const SolveReport b = run_solve(data, quick(model));
    EXPECT_EQ(a.solution.x, b.solution.x) << model;
    EXPECT_EQ(a.objective_return, b.objective_return) << model;
    EXPECT_NEAR(a.solution.x.sum(), 1.0, 1e-9) << model;
    EXPECT_GE(a.solution.x.minCoeff(), -1e-12) << model;
    EXPECT_EQ(a.objective_return, -a.solution.objective) << model;
  }
}

TEST(RunSolve, SingleSampleTakesTheNoDropPath) {
  RunOptions opt = quick("var-exp");
  opt.samples = 1;
  const SolveReport r = run_solve(load_returns_csv(kBundled), opt);
  EXPECT_TRUE(r.solution.dropped.empty());
  EXPECT_EQ(r.solution.status, SolveStatus::Optimal);
}

TEST(RunSolve, DroWithZeroRadiusIsNominal) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  RunOptions opt = quick("dro");
  opt.gamma1 = 0.0;
  const SolveReport r = run_solve(data, opt);
  const Eigen::VectorXd means = data.returns.bottomRows(opt.window).colwise().mean().transpose();
  Eigen::Index best = 0;
  means.maxCoeff(&best);
  EXPECT_NEAR(r.solution.x(best), 1.0, 1e-6);
  EXPECT_NEAR(r.objective_return, means(best), 1e-9);
}

TEST(RunSolve, AsofSelectsTheTrailingWindow) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  RunOptions opt = quick("cvar-exp");
  opt.asof = data.dates[40];
  const SolveReport r = run_solve(data, opt);
  const SolveReport direct = solve_window(data.returns.middleRows(41 - opt.window, opt.window), opt, opt.seed);
  EXPECT_EQ(r.asof, data.dates[40]);
  EXPECT_EQ(r.solution.x, direct.solution.x);
  opt.asof = data.dates[10];
  EXPECT_THROW(run_solve(data, opt), InputError);
  opt.asof = "1999-01-01";
  EXPECT_THROW(run_solve(data, opt), InputError);
}

TEST(RunSolve, RejectsUnsupportedCellsByName) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  for (const std::string model : {"normal:exp-cvar", "normal:cvar-wc"}) {
    try {
      run_solve(data, quick(model));
      FAIL() << model;
    } catch (const UnsupportedError& e) {
      EXPECT_NE(std::string(e.what()).find(model), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(run_solve(data, quick("normal:cvar")), InputError);
  EXPECT_THROW(run_solve(data, quick("normal:foo-exp")), InputError);
  EXPECT_THROW(run_solve(data, quick("mean-variance")), InputError);
  RunOptions bad = quick("var-exp");
  bad.delta = 1.0;
  EXPECT_THROW(run_solve(data, bad), InputError);
}

TEST(RunSolve, JsonMatchesTheDocumentedSchema) {
  RunOptions opt = quick("var-exp");
  opt.mode = SolveMode::Heuristic;
  const SolveReport r = run_solve(load_returns_csv(kBundled), opt);
  const Json j = Json::parse(solve_report_json(r, opt));
  std::ifstream schema_file(std::string(CRM_SOURCE_DIR) + "/docs/solve_report.schema.json");
  const Json schema = Json::parse(schema_file);
  for (const auto& key : schema["required"]) EXPECT_TRUE(j.contains(key.get<std::string>())) << key;
  for (const auto& [key, _] : j.items()) EXPECT_TRUE(schema["properties"].contains(key)) << key;
  EXPECT_EQ(j["weights"].size(), 4u);
  EXPECT_EQ(j["status"], "ToleranceReached");
  EXPECT_TRUE(j["gap"].is_null());
}

TEST(Backtest, SingleStockMatchesHandSeries) {
  Eigen::MatrixXd r(8, 2);
  r << 0.01, 0.02, 0.03, 0.00, 0.02, 0.01, -0.01, 0.04, 0.00, 0.02, 0.05, -0.01, 0.01, 0.03, 0.02, 0.00;
  RunOptions opt;
  opt.window = 3;
  const BacktestReport rep = run_backtest(make_matrix(r), opt, {"ss"});
  // Trailing 3-day means pick A, B, B, B, A on days 4..8.
  const std::vector<double> expected = {-0.01, 0.02, -0.01, 0.03, 0.02};
  ASSERT_EQ(rep.models.size(), 1u);
  EXPECT_EQ(rep.models[0].returns, expected);
  const std::vector<double> wealth = {0.99, 1.0098, 0.999702, 1.02969306, 1.0502869212};
  for (std::size_t k = 0; k < wealth.size(); ++k) EXPECT_NEAR(rep.models[0].wealth[k], wealth[k], 1e-15);
  EXPECT_NEAR(rep.models[0].mean, 0.01, 1e-15);
}

TEST(Backtest, ConstantReturnsGiveTheConstant) {
  const ReturnMatrix data = make_matrix(Eigen::MatrixXd::Constant(35, 2, 0.001));
  RunOptions opt = quick("var-exp");
  const BacktestReport rep = run_backtest(data, opt, default_roster());
  ASSERT_EQ(rep.models.size(), 6u);
  for (const auto& m : rep.models) {
    ASSERT_EQ(m.returns.size(), 5u);
    for (double v : m.returns) EXPECT_NEAR(v, 0.001, 1e-12) << m.model;
  }
}

TEST(Backtest, WealthCompoundsAndLengthsAgree) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  ReturnMatrix head = data;
  head.dates.resize(40);
  head.returns = data.returns.topRows(40);
  const BacktestReport rep = run_backtest(head, quick("var-exp"), {"var-exp", "dro", "ss"});
  for (const auto& m : rep.models) {
    ASSERT_EQ(m.returns.size(), rep.dates.size());
    double w = 1.0;
    for (std::size_t k = 0; k < m.returns.size(); ++k) {
      w *= 1.0 + m.returns[k];
      EXPECT_NEAR(m.wealth[k], w, 1e-12);
    }
  }
  std::ostringstream a, b;
  write_backtest_csv(rep, a);
  write_backtest_csv(run_backtest(head, quick("var-exp"), {"var-exp", "dro", "ss"}), b);
  EXPECT_EQ(a.str(), b.str());
  const Json summary = Json::parse(backtest_summary_json(rep));
  EXPECT_EQ(summary["days"], 10);
  EXPECT_EQ(summary["models"].size(), 3u);
}

TEST(Backtest, NoLookAhead) {
  const ReturnMatrix data = load_returns_csv(kBundled);
  ReturnMatrix head = data;
  head.dates.resize(45);
  head.returns = data.returns.topRows(45);
  ReturnMatrix shuffled = head;
  // Reverse the rows after day 38; decisions up to day 38 must not move.
  for (Eigen::Index i = 39, j = 44; i < j; ++i, --j) {
    const Eigen::RowVectorXd tmp = shuffled.returns.row(i);
    shuffled.returns.row(i) = shuffled.returns.row(j);
    shuffled.returns.row(j) = tmp;
  }
  const std::vector<std::string> models = {"var-exp", "cvar-exp", "normal:cvar-cvar", "dro", "wcvar", "ss"};
  const BacktestReport a = run_backtest(head, quick("var-exp"), models);
  const BacktestReport b = run_backtest(shuffled, quick("var-exp"), models);
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t k = 0; k + 30 <= 38; ++k) {
      EXPECT_EQ(a.models[m].weights[k], b.models[m].weights[k]) << models[m] << " day " << k;
    }
    EXPECT_NE(a.models[m].returns.back(), b.models[m].returns.back());
  }
}

TEST(Backtest, InsufficientHistory) {
  const ReturnMatrix data = make_matrix(Eigen::MatrixXd::Constant(30, 2, 0.001));
  EXPECT_THROW(run_backtest(data, quick("ss"), {"ss"}), InputError);
  EXPECT_THROW(run_backtest(load_returns_csv(kBundled), quick("ss"), {"ss", "nope"}), InputError);
  EXPECT_THROW(run_backtest(load_returns_csv(kBundled), quick("ss"), {}), InputError);
}

TEST(Compare, SmokeAndReproducible) {
  const ReturnMatrix data = load_returns_csv(std::string(CRM_SOURCE_DIR) + "/data/synthetic_2asset.csv");
  RunOptions opt = quick("var-exp");
  CompareOptions copt;
  copt.repetitions = 2;
  copt.bootstrap = 5000;
  const CompareReport a = run_compare(data, opt, copt);
  const CompareReport b = run_compare(data, opt, copt);
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_NE(a.rows[0].seed, a.rows[1].seed);
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    EXPECT_TRUE(std::isfinite(a.rows[r].gap));
    EXPECT_EQ(a.rows[r].gap, b.rows[r].gap);
    EXPECT_EQ(a.rows[r].gap, a.rows[r].var_exp_return - a.rows[r].dro_return);
    EXPECT_GT(a.rows[r].gamma1, 0.0);
  }
  copt.repetitions = 0;
  EXPECT_THROW(run_compare(data, opt, copt), InputError);
}

TEST(CliMain, SolveWritesJsonAndHonorsTheSeedVariable) {
  std::string out, err;
  ASSERT_EQ(::setenv("CRM_SEED", "42", 1), 0);
  ASSERT_EQ(run({"solve", "--input", kBundled, "--model", "cvar-exp", "--samples", "50"}, &out, &err), 0) << err;
  EXPECT_EQ(Json::parse(out)["seed"], 42);
  ASSERT_EQ(run({"solve", "--input", kBundled, "--model", "cvar-exp", "--samples", "50", "--seed", "7"}, &out), 0);
  EXPECT_EQ(Json::parse(out)["seed"], 7);
  ::unsetenv("CRM_SEED");
  ASSERT_EQ(run({"solve", "--input", kBundled, "--model", "dro", "--gamma1", "0", "--samples", "50"}, &out), 0);
  EXPECT_EQ(Json::parse(out)["gamma1"], 0.0);
}

TEST(CliMain, ExitCodes) {
  std::string out, err;
  EXPECT_EQ(run({"solve", "--input", "/nonexistent.csv"}, &out, &err), 2);
  EXPECT_NE(err.find("input error"), std::string::npos);
  EXPECT_EQ(run({"solve", "--input", kBundled, "--model", "normal:exp-var"}, &out, &err), 2);
  EXPECT_NE(err.find("normal:exp-var"), std::string::npos);
  EXPECT_EQ(run({"solve", "--input", kBundled, "--exact", "--heuristic"}, &out, &err), 2);
  EXPECT_EQ(run({"solve", "--input", kBundled, "--window", "500"}, &out, &err), 2);
  EXPECT_NE(err.find("insufficient history"), std::string::npos);
  EXPECT_EQ(run({"solve", "--input", kBundled, "--window", "4"}, &out, &err), 2);
  EXPECT_EQ(run({"frobnicate"}, &out, &err), 2);
  EXPECT_EQ(run({"--help"}, &out, &err), 0);
}

TEST(CliMain, SynthAndBacktestFiles) {
  const auto csv = temp_file("synth.csv");
  const auto bt = temp_file("bt.csv");
  const auto summary = temp_file("bt.json");
  ASSERT_EQ(run({"synth", "--assets", "2", "--days", "34", "--seed", "3", "--output", csv.string()}), 0);
  EXPECT_EQ(load_returns_csv(csv.string()).days(), 34);
  ASSERT_EQ(run({"backtest", "--input", csv.string(), "--models", "ss,wcvar", "--samples", "20", "--output",
                 bt.string(), "--summary", summary.string()}),
            0);
  std::ifstream in(bt);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "date,ss_return,ss_wealth,wcvar_return,wcvar_wealth");
  std::ifstream js(summary);
  EXPECT_EQ(Json::parse(js)["days"], 4);
}

#ifdef CRM_CLI_BINARY
TEST(CliBinary, ReportsInputErrorsWithExitCodeTwo) {
  const std::string cmd = std::string(CRM_CLI_BINARY) + " solve --input /nonexistent.csv 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
#endif

}  // namespace
}  // namespace crm
