#include "crm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crm/errors.hpp"
#include "crm/parallel.hpp"
#include "crm/rng.hpp"

namespace crm::oracle {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

double cap_of(const FeasibleSet& fs, Eigen::Index j) {
  return fs.upper.size() > 0 ? fs.upper(j) : kInfinity;
}

bool feasible_point(const FeasibleSet& fs, const Eigen::VectorXd& x, double tol) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) < -tol || x(j) > cap_of(fs, j) + tol) return false;
    sum += x(j);
  }
  return std::abs(sum - 1.0) <= tol;
}

// Compositions of m into n parts, first coordinate descending.
void for_each_grid_point(Eigen::Index n, long m, const std::function<void(const std::vector<long>&)>& fn) {
  std::vector<long> k(static_cast<std::size_t>(n), 0);
  std::function<void(Eigen::Index, long)> rec = [&](Eigen::Index j, long left) {
    if (j == n - 1) {
      k[static_cast<std::size_t>(j)] = left;
      fn(k);
      return;
    }
    for (long v = left; v >= 0; --v) {
      k[static_cast<std::size_t>(j)] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, m);
}

void pattern_search(const std::function<double(const Eigen::VectorXd&)>& f, const FeasibleSet& fs,
                    double step, GridResult& best) {
  const Eigen::Index n = best.x.size();
  double s = step;
  long evaluations = 0;
  while (s > 1e-13 && evaluations < 400000) {
    bool improved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double t = std::min({s, best.x(j), cap_of(fs, i) - best.x(i)});
        if (!(t > 0.0)) continue;
        Eigen::VectorXd y = best.x;
        y(i) += t;
        y(j) -= t;
        const double v = f(y);
        ++evaluations;
        if (v < best.value) {
          best.value = v;
          best.x = y;
          improved = true;
        }
      }
    }
    if (!improved) s *= 0.5;
  }
}

// K-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = i;
  for (;;) {
    out.push_back(c);
    std::size_t i = k;
    while (i > 0 && c[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++c[i - 1];
    for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

// min_x max_k a_k' x over the feasible set, by trying every basic point of
// min t s.t. a_k' x <= t, 0 <= x <= cap, sum x = 1.
GridResult exact_minmax_affine(const std::vector<Eigen::VectorXd>& a, const FeasibleSet& fs) {
  const Eigen::Index n = fs.dimension;
  struct Face {
    int kind;  // 0: a_k' x = t, 1: x_j = 0, 2: x_j = cap_j
    Eigen::Index index;
  };
  std::vector<Face> faces;
  for (std::size_t k = 0; k < a.size(); ++k) faces.push_back({0, static_cast<Eigen::Index>(k)});
  for (Eigen::Index j = 0; j < n; ++j) {
    faces.push_back({1, j});
    if (std::isfinite(cap_of(fs, j))) faces.push_back({2, j});
  }
  GridResult best{kInfinity, Eigen::VectorXd()};
  if (faces.size() < static_cast<std::size_t>(n)) return best;
  const auto picks = combinations(faces.size(), static_cast<std::size_t>(n));
  Eigen::MatrixXd system(n + 1, n + 1);
  Eigen::VectorXd rhs(n + 1);
  for (const auto& pick : picks) {
    bool has_t = false;
    system.setZero();
    rhs.setZero();
    system.row(0).head(n).setOnes();
    rhs(0) = 1.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const Face& face = faces[pick[static_cast<std::size_t>(r)]];
      if (face.kind == 0) {
        system.row(r + 1).head(n) = a[static_cast<std::size_t>(face.index)].transpose();
        system(r + 1, n) = -1.0;
        has_t = true;
      } else {
        system(r + 1, face.index) = 1.0;
        rhs(r + 1) = face.kind == 1 ? 0.0 : cap_of(fs, face.index);
      }
    }
    if (!has_t) continue;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (lu.rank() < n + 1) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    if (!feasible_point(fs, x, 1e-12)) continue;
    double value = -kInfinity;
    for (const auto& ak : a) value = std::max(value, ak.dot(x));
    if (value < best.value) {
      best.value = value;
      best.x = x;
    }
  }
  return best;
}

}  // namespace

GridResult grid_search_simplex(const std::function<double(const Eigen::VectorXd&)>& objective,
                               const FeasibleSet& feasible, double grid_step, bool polish) {
  const Eigen::Index n = feasible.dimension;
  if (n < 1 || n > 4) throw InputError("grid search supports 1 to 4 assets");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw InputError("grid step must lie in (0, 1]");
  const long m = std::max(1L, std::lround(1.0 / grid_step));
  GridResult best{kInfinity, Eigen::VectorXd()};
  Eigen::VectorXd x(n);
  for_each_grid_point(n, m, [&](const std::vector<long>& k) {
    for (Eigen::Index j = 0; j < n; ++j) x(j) = static_cast<double>(k[static_cast<std::size_t>(j)]) / static_cast<double>(m);
    if (!feasible_point(feasible, x, 1e-12)) return;
    const double v = objective(x);
    if (v < best.value) {
      best.value = v;
      best.x = x;
    }
  });
  if (best.x.size() == 0) throw InputError("no grid point satisfies the caps; use a finer grid");
  if (polish) pattern_search(objective, feasible, 1.0 / static_cast<double>(m), best);
  return best;
}

GridResult brute_force_var_expectation(const DrawSet& draws, const LossSpec& loss,
                                       const FeasibleSet& feasible, double delta,
                                       double grid_step, unsigned workers) {
  const std::size_t count = draws.size();
  if (count == 0 || count > 16) throw InputError("brute force supports 1 to 16 draws");
  if (feasible.dimension < 1 || feasible.dimension > 4) throw InputError("brute force supports 1 to 4 assets");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  const auto dropped = static_cast<std::size_t>(std::floor((1.0 - delta) * static_cast<double>(count) + 1e-9));

  const bool linear = std::holds_alternative<LinearLoss>(loss);
  std::vector<Eigen::VectorXd> means(count);
  std::vector<std::function<double(const Eigen::VectorXd&)>> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& d = draws.draws[i];
    if (linear) {
      if (const auto* gd = std::get_if<GaussianDraw>(&d)) {
        means[i] = gd->mean;
      } else {
        const auto& dd = std::get<DiscreteDraw>(d);
        means[i] = dd.support->transpose() * dd.probs;
      }
      if (means[i].size() != feasible.dimension) throw InputError("draw dimension does not match assets");
      const Eigen::VectorXd mu = means[i];
      g[i] = [mu](const Eigen::VectorXd& x) { return mu.dot(x); };
    } else {
      const auto* dd = std::get_if<DiscreteDraw>(&d);
      if (dd == nullptr) throw UnsupportedError("brute force with a general loss needs discrete draws");
      const auto& h = std::get<GeneralLoss>(loss).evaluate;
      const auto support = dd->support;
      const Eigen::VectorXd p = dd->probs;
      g[i] = [h, support, p](const Eigen::VectorXd& x) {
        double v = 0.0;
        for (Eigen::Index s = 0; s < support->rows(); ++s) v += p(s) * h(x, support->row(s).transpose());
        return v;
      };
    }
  }

  const auto drops = combinations(count, dropped);
  std::vector<GridResult> results(drops.size());
  parallel_for(drops.size(), workers, [&](std::size_t c) {
    std::vector<char> is_dropped(count, 0);
    for (std::size_t i : drops[c]) is_dropped[i] = 1;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < count; ++i) {
      if (!is_dropped[i]) kept.push_back(i);
    }
    auto max_kept = [&](const Eigen::VectorXd& x) {
      double v = -kInfinity;
      for (std::size_t i : kept) v = std::max(v, g[i](x));
      return v;
    };
    GridResult r = grid_search_simplex(max_kept, feasible, grid_step, !linear);
    if (linear) {
      std::vector<Eigen::VectorXd> a;
      for (std::size_t i : kept) a.push_back(means[i]);
      const GridResult exact = exact_minmax_affine(a, feasible);
      if (exact.value < r.value) r = exact;
    }
    results[c] = r;
  });
  GridResult best = results.front();
  for (const auto& r : results) {
    if (r.value < best.value) best = r;
  }
  return best;
}

McRisk mc_risk_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta,
                      std::size_t n_mc, std::uint64_t seed) {
  if (n_mc == 0) throw InputError("n_mc must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  const Eigen::Index n = g.mean.size();
  if (g.covariance.rows() != n || g.covariance.cols() != n || x.size() != n) {
    throw InputError("mean, covariance and x sizes differ");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.covariance);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::VectorXd loading = root.transpose() * x;
  const double center = g.mean.dot(x);

  Rng rng(seed);
  std::vector<double> losses(n_mc);
  Eigen::VectorXd z(n);
  for (auto& v : losses) {
    for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
    v = center + loading.dot(z);
  }
  std::sort(losses.begin(), losses.end(), std::greater<>());

  double tail = (1.0 - delta) * static_cast<double>(n_mc);
  if (std::abs(tail - std::round(tail)) <= 1e-9 * std::max(1.0, tail)) tail = std::round(tail);
  const auto whole = static_cast<std::size_t>(std::floor(tail));
  const auto rank = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(tail)), 1, n_mc);
  double sum = 0.0;
  for (std::size_t i = 0; i < whole; ++i) sum += losses[i];
  if (whole < n_mc) sum += (tail - static_cast<double>(whole)) * losses[whole];
  return McRisk{losses[rank - 1], sum / tail};
}

}  // namespace crm::oracle
