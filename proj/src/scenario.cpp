#include "crm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crm/errors.hpp"

namespace crm {

double FeasibleSet::cap(Eigen::Index j) const {
  return has_upper() ? upper(j) : std::numeric_limits<double>::infinity();
}

void FeasibleSet::validate() const {
  if (dimension < 1) throw InputError("feasible set must have at least one asset");
  if (has_upper()) {
    if (upper.size() != dimension) throw InputError("upper bounds do not match dimension");
    if ((upper.array() < 0.0).any()) throw InputError("upper bounds must be nonnegative");
    if (upper.sum() < 1.0 - 1e-12) throw InputError("feasible set is empty: upper bounds sum below 1");
  }
}

bool FeasibleSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dimension) return false;
  for (Eigen::Index j = 0; j < dimension; ++j) {
    if (x(j) < -tol || x(j) > cap(j) + tol) return false;
  }
  return std::abs(x.sum() - 1.0) <= tol;
}

Eigen::VectorXd FeasibleSet::project(const Eigen::VectorXd& y) const {
  const Eigen::Index n = dimension;
  if (!has_upper()) {
    std::vector<double> sorted(y.data(), y.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      cumulative += sorted[k];
      const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
      if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    return (y.array() - theta).max(0.0).matrix();
  }
  auto clip = [&](double shift) {
    Eigen::VectorXd x(n);
    for (Eigen::Index j = 0; j < n; ++j) x(j) = std::clamp(y(j) - shift, 0.0, upper(j));
    return x;
  };
  double lo = y.minCoeff() - upper.maxCoeff() - 1.0;
  double hi = y.maxCoeff();
  for (int iter = 0; iter < 200 && hi - lo > 1e-17 * (1.0 + std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (clip(mid).sum() > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Eigen::VectorXd x = clip(0.5 * (lo + hi));
  // Push the rounding residual onto a coordinate strictly inside its bounds.
  const double residual = 1.0 - x.sum();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double moved = std::clamp(x(j) + residual, 0.0, upper(j));
    if (moved == x(j) + residual) {
      x(j) = moved;
      break;
    }
  }
  return x;
}

Eigen::VectorXd FeasibleSet::center() const {
  if (!has_upper()) return Eigen::VectorXd::Constant(dimension, 1.0 / static_cast<double>(dimension));
  return project(Eigen::VectorXd::Zero(dimension));
}

Eigen::VectorXd cvar_tail_weights(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                                  double level) {
  const Eigen::Index n = values.size();
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto worse = [&](Eigen::Index a, Eigen::Index b) {
    return values(a) > values(b) || (values(a) == values(b) && a < b);
  };
  if (weights.size() == 0) {
    const double m = tail_mass(level, static_cast<std::size_t>(n));
    const auto full = static_cast<Eigen::Index>(std::floor(m));
    const auto boundary = std::max<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(m)), 1);
    std::nth_element(order.begin(), order.begin() + (boundary - 1), order.end(), worse);
    for (Eigen::Index k = 0; k < std::min(full, n); ++k) tail(order[k]) = 1.0 / m;
    if (full < boundary) tail(order[boundary - 1]) = (m - static_cast<double>(full)) / m;
    return tail;
  }
  std::sort(order.begin(), order.end(), worse);
  const double q = 1.0 - level;
  double remaining = q;
  for (Eigen::Index idx : order) {
    const double w = weights(idx);
    if (w <= 0.0) continue;
    const double take = std::min(w, remaining);
    tail(idx) = take / q;
    remaining -= take;
    if (remaining <= 1e-14) break;
  }
  return tail;
}

bool ScenarioFunction::polyhedral() const {
  if (affine()) return true;
  if (const auto* e = std::get_if<EmpiricalTerm>(&term_)) return e->loss == nullptr;
  return false;
}

double ScenarioFunction::value(const Eigen::VectorXd& x) const {
  Eigen::VectorXd unused;
  if (const auto* a = std::get_if<AffineTerm>(&term_)) return a->mean.dot(x);
  if (const auto* g = std::get_if<MeanSpreadTerm>(&term_)) {
    return g->coef * std::sqrt(std::max(0.0, x.dot(g->covariance * x))) + g->mean.dot(x);
  }
  return value(x, unused);
}

double ScenarioFunction::value(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  if (const auto* a = std::get_if<AffineTerm>(&term_)) {
    grad = a->mean;
    return a->mean.dot(x);
  }
  if (const auto* g = std::get_if<MeanSpreadTerm>(&term_)) {
    const Eigen::VectorXd gx = g->covariance * x;
    const double spread = std::sqrt(std::max(0.0, x.dot(gx)));
    grad = g->mean;
    if (spread > 1e-300) grad += (g->coef / spread) * gx;
    return g->coef * spread + g->mean.dot(x);
  }
  const auto& e = std::get<EmpiricalTerm>(term_);
  const Eigen::MatrixXd& xi = *e.samples;
  const Eigen::Index m = xi.rows();
  Eigen::VectorXd losses(m);
  if (e.loss) {
    for (Eigen::Index j = 0; j < m; ++j) losses(j) = e.loss->evaluate(x, xi.row(j).transpose());
  } else {
    losses.noalias() = xi * x;
  }

  Eigen::VectorXd mix;
  switch (e.inner.kind) {
    case RiskKind::Expectation:
      mix = e.weights.size() ? e.weights : Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
      break;
    case RiskKind::CVaR:
      mix = cvar_tail_weights(losses, e.weights, e.inner.level);
      break;
    case RiskKind::WorstCase: {
      Eigen::Index worst = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < m; ++j) {
        if (e.weights.size() && e.weights(j) <= 0.0) continue;
        if (losses(j) > best) {
          best = losses(j);
          worst = j;
        }
      }
      mix = Eigen::VectorXd::Zero(m);
      mix(worst) = 1.0;
      break;
    }
    case RiskKind::VaR:
      throw UnsupportedError("empirical VaR is not a convex scenario objective");
  }

  if (e.loss) {
    grad = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mix(j) != 0.0) grad += mix(j) * e.loss->subgradient_x(x, xi.row(j).transpose());
    }
  } else {
    grad.noalias() = xi.transpose() * mix;
  }
  return mix.dot(losses);
}

double ScenarioModel::value(const Eigen::VectorXd& x) const {
  const auto n = scenarios.size();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = scenarios[i].value(x);
  switch (aggregation) {
    case Aggregation::Mean: return v.mean();
    case Aggregation::Max: return v.maxCoeff();
    case Aggregation::Cvar: return cvar_tail_weights(v, {}, level).dot(v);
  }
  return 0.0;
}

double ScenarioModel::value(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  const auto n = static_cast<Eigen::Index>(scenarios.size());
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scenarios[static_cast<std::size_t>(i)].value(x);
  Eigen::VectorXd mix;
  switch (aggregation) {
    case Aggregation::Mean: mix = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)); break;
    case Aggregation::Max: {
      Eigen::Index worst = 0;
      v.maxCoeff(&worst);
      mix = Eigen::VectorXd::Zero(n);
      mix(worst) = 1.0;
      break;
    }
    case Aggregation::Cvar: mix = cvar_tail_weights(v, {}, level); break;
  }
  grad = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd g;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mix(i) == 0.0) continue;
    scenarios[static_cast<std::size_t>(i)].value(x, g);
    grad += mix(i) * g;
  }
  return mix.dot(v);
}

ScenarioModel ScenarioModel::subset(const std::vector<std::size_t>& keep) const {
  ScenarioModel out;
  out.aggregation = aggregation;
  out.level = level;
  out.feasible = feasible;
  out.scenarios.reserve(keep.size());
  for (std::size_t i : keep) out.scenarios.push_back(scenarios.at(i));
  return out;
}

bool ScenarioModel::all_affine() const {
  return std::all_of(scenarios.begin(), scenarios.end(), [](const auto& s) { return s.affine(); });
}

bool ScenarioModel::all_polyhedral() const {
  return std::all_of(scenarios.begin(), scenarios.end(),
                     [](const auto& s) { return s.polyhedral(); });
}

}  // namespace crm
