#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "crm/errors.hpp"
#include "crm/oracle.hpp"
#include "crm/riskcore.hpp"
#include "crm/rng.hpp"

namespace crm {
namespace {

DrawSet point_draws(const std::vector<Eigen::VectorXd>& means) {
  DrawSet d;
  for (const auto& m : means) d.draws.push_back(GaussianDraw{m, Eigen::MatrixXd::Zero(m.size(), m.size())});
  return d;
}

// (k+1)-th largest of a'x over the draws.
double kth_worst(const std::vector<Eigen::VectorXd>& means, const Eigen::VectorXd& x, std::size_t k) {
  std::vector<double> g;
  for (const auto& m : means) g.push_back(m.dot(x));
  std::sort(g.begin(), g.end(), std::greater<>());
  return g[k];
}

Eigen::VectorXd random_simplex_point(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd x(n);
  for (Eigen::Index j = 0; j < n; ++j) x(j) = -std::log(rng.uniform_open());
  return x / x.sum();
}

TEST(GridSearch, LinearObjectiveLandsOnVertex) {
  const Eigen::Vector3d c(0.4, -0.7, 0.1);
  const auto r = oracle::grid_search_simplex([&](const Eigen::VectorXd& x) { return c.dot(x); },
                                             FeasibleSet::simplex(3), 0.1);
  EXPECT_DOUBLE_EQ(r.value, -0.7);
  EXPECT_TRUE(r.x.isApprox(Eigen::Vector3d(0, 1, 0)));
}

TEST(GridSearch, QuadraticInteriorMinimum) {
  // (x - p)'(x - p) with p inside the simplex has argmin p.
  const Eigen::Vector3d p(0.237, 0.401, 0.362);
  auto f = [&](const Eigen::VectorXd& x) { return (x - p).squaredNorm(); };
  const auto coarse = oracle::grid_search_simplex(f, FeasibleSet::simplex(3), 0.05, false);
  EXPECT_LE((coarse.x - p).cwiseAbs().maxCoeff(), 0.05);
  const auto polished = oracle::grid_search_simplex(f, FeasibleSet::simplex(3), 0.05);
  EXPECT_LE((polished.x - p).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(polished.value, coarse.value);
}

TEST(GridSearch, ConstantReportsFirstGridPoint) {
  const auto r = oracle::grid_search_simplex([](const Eigen::VectorXd&) { return 2.5; },
                                             FeasibleSet::simplex(4), 0.25);
  EXPECT_EQ(r.value, 2.5);
  EXPECT_TRUE(r.x.isApprox(Eigen::Vector4d(1, 0, 0, 0)));
}

TEST(GridSearch, NestedGridsImproveMonotonically) {
  const Eigen::Vector3d p(0.13, 0.58, 0.29);
  auto f = [&](const Eigen::VectorXd& x) { return std::abs(x(0) - p(0)) + (x - p).squaredNorm(); };
  double previous = oracle::grid_search_simplex(f, FeasibleSet::simplex(3), 0.5, false).value;
  for (double step : {0.25, 0.125, 0.0625, 0.03125}) {
    const double v = oracle::grid_search_simplex(f, FeasibleSet::simplex(3), step, false).value;
    EXPECT_LE(v, previous);
    previous = v;
  }
}

TEST(GridSearch, RespectsCaps) {
  FeasibleSet fs{3, Eigen::Vector3d(0.5, 0.5, 1.0)};
  const auto r = oracle::grid_search_simplex([](const Eigen::VectorXd& x) { return -x(0) - x(1); }, fs, 0.1);
  EXPECT_TRUE(fs.contains(r.x, 1e-12));
  EXPECT_NEAR(r.value, -1.0, 1e-12);
}

TEST(GridSearch, RejectsBadArguments) {
  auto f = [](const Eigen::VectorXd&) { return 0.0; };
  EXPECT_THROW(oracle::grid_search_simplex(f, FeasibleSet::simplex(5), 0.1), InputError);
  EXPECT_THROW(oracle::grid_search_simplex(f, FeasibleSet::simplex(2), 0.0), InputError);
  EXPECT_THROW(oracle::grid_search_simplex(f, FeasibleSet::simplex(2), 1.5), InputError);
}

TEST(BruteForce, HandExampleWithOneDrop) {
  // Losses s, 1 - s and 2 at x = (s, 1 - s); dropping the constant leaves
  // max(s, 1 - s), minimized at s = 1/2.
  const std::vector<Eigen::VectorXd> means = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(2, 2)};
  const auto r = oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(2),
                                                     0.6, 0.1);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
  EXPECT_NEAR(r.x(0), 0.5, 1e-12);
}

TEST(BruteForce, NoDropEqualsGridMinMax) {
  Rng rng(8);
  std::vector<Eigen::VectorXd> means;
  for (int i = 0; i < 5; ++i) means.push_back(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  const auto r = oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(3),
                                                     0.9, 0.01);
  auto max_all = [&](const Eigen::VectorXd& x) { return kth_worst(means, x, 0); };
  const auto grid = oracle::grid_search_simplex(max_all, FeasibleSet::simplex(3), 0.01, false);
  EXPECT_LE(r.value, grid.value + 1e-12);
  EXPECT_NEAR(r.value, grid.value, 0.05);
}

TEST(BruteForce, IsAGlobalMinimumOfTheOrderStatistic) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 3;
    const std::size_t count = 4 + static_cast<std::size_t>(trial % 6);
    std::vector<Eigen::VectorXd> means;
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd m(n);
      for (Eigen::Index j = 0; j < n; ++j) m(j) = rng.normal();
      means.push_back(m);
    }
    const double delta = trial % 2 == 0 ? 0.6 : 0.8;
    const auto k = static_cast<std::size_t>(std::floor((1.0 - delta) * static_cast<double>(count) + 1e-9));
    const auto r = oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(n),
                                                       delta, 0.1);
    ASSERT_TRUE(FeasibleSet::simplex(n).contains(r.x, 1e-12));
    EXPECT_NEAR(kth_worst(means, r.x, k), r.value, 1e-10);
    for (int probe = 0; probe < 500; ++probe) {
      EXPECT_GE(kth_worst(means, random_simplex_point(rng, n), k), r.value - 1e-12);
    }
  }
}

TEST(BruteForce, GeneralLossOnDiscreteDraws) {
  auto support = std::make_shared<const Eigen::MatrixXd>(Eigen::MatrixXd{{1.0, 0.0}, {0.0, 1.0}});
  DrawSet d;
  d.draws.push_back(DiscreteDraw{support, Eigen::Vector2d(0.5, 0.5)});
  d.draws.push_back(DiscreteDraw{support, Eigen::Vector2d(0.9, 0.1)});
  GeneralLoss loss;
  loss.evaluate = [](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) { return std::pow(xi.dot(x) - 0.3, 2); };
  loss.convex_in_x = true;
  // g2 - g1 = 0.16 (2s - 1): draw 1 dominates below s = 1/2, where it is
  // minimized at 0.04, and draw 2 is larger and increasing above it.
  const auto r = oracle::brute_force_var_expectation(d, loss, FeasibleSet::simplex(2), 0.9, 0.1);
  EXPECT_NEAR(r.value, 0.04, 1e-9);
  EXPECT_NEAR(r.x(0), 0.5, 1e-6);
}

TEST(BruteForce, WorkersDoNotChangeTheAnswer) {
  Rng rng(4);
  std::vector<Eigen::VectorXd> means;
  for (int i = 0; i < 10; ++i) means.push_back(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  const auto a = oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(3), 0.7, 0.1, 1);
  const auto b = oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(3), 0.7, 0.1, 3);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.x, b.x);
}

TEST(BruteForce, RejectsBadArguments) {
  std::vector<Eigen::VectorXd> means(17, Eigen::Vector2d(0, 0));
  EXPECT_THROW(oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(2), 0.9, 0.1),
               InputError);
  means.resize(3);
  EXPECT_THROW(oracle::brute_force_var_expectation(point_draws(means), LinearLoss{}, FeasibleSet::simplex(2), 1.0, 0.1),
               InputError);
  GeneralLoss loss;
  loss.evaluate = [](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) { return xi.dot(x); };
  EXPECT_THROW(oracle::brute_force_var_expectation(point_draws(means), loss, FeasibleSet::simplex(2), 0.9, 0.1),
               UnsupportedError);
}

TEST(McRiskNormal, ZeroPortfolioHasZeroRisk) {
  const GaussianParams g{Eigen::Vector2d(0.3, -0.1), Eigen::Matrix2d{{1.0, 0.2}, {0.2, 2.0}}};
  const auto r = oracle::mc_risk_normal(g, Eigen::Vector2d::Zero(), 0.95, 1000, 1);
  EXPECT_EQ(r.var, 0.0);
  EXPECT_EQ(r.cvar, 0.0);
}

TEST(McRiskNormal, MatchesEmpiricalMeasuresOnTheSameSample) {
  // Standard normal with x = 1: the losses are the generator's normals.
  const GaussianParams g{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  const std::size_t n = 5000;
  Rng rng(77);
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  const SampleVector s(z);
  for (double delta : {0.5, 0.9, 0.95, 0.999}) {
    const auto r = oracle::mc_risk_normal(g, Eigen::VectorXd::Ones(1), delta, n, 77);
    EXPECT_NEAR(r.var, var(s, delta), 1e-12) << delta;
    EXPECT_NEAR(r.cvar, cvar(s, delta).value, 1e-12) << delta;
  }
}

TEST(McRiskNormal, ConvergesAtRootNRate) {
  const GaussianParams g{Eigen::Vector2d(0.01, -0.02), Eigen::Matrix2d{{0.04, 0.01}, {0.01, 0.09}}};
  const Eigen::Vector2d x(0.6, 0.4);
  const double delta = 0.95;
  const double sd = std::sqrt(x.dot(g.covariance * x));
  // Loose asymptotic standard errors of the empirical quantile and tail mean
  // at delta = 0.95, in units of sd: about 2.1 and 2.6 over sqrt(n).
  for (std::size_t n : {std::size_t{10000}, std::size_t{1000000}}) {
    const auto r = oracle::mc_risk_normal(g, x, delta, n, 5);
    const double se = sd / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(r.var, var_normal(g, x, delta), 5.0 * 2.1 * se) << n;
    EXPECT_NEAR(r.cvar, cvar_normal(g, x, delta), 5.0 * 2.6 * se) << n;
  }
}

TEST(McRiskNormal, RejectsBadArguments) {
  const GaussianParams g{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  EXPECT_THROW(oracle::mc_risk_normal(g, Eigen::Vector2d(1, 0), 0.9, 0, 1), InputError);
  EXPECT_THROW(oracle::mc_risk_normal(g, Eigen::Vector2d(1, 0), 1.0, 10, 1), InputError);
  EXPECT_THROW(oracle::mc_risk_normal(g, Eigen::Vector3d(1, 0, 0), 0.9, 10, 1), InputError);
}

}  // namespace
}  // namespace crm
