#include "crm/riskcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "crm/errors.hpp"
#include "crm/normal.hpp"

namespace crm {

std::string_view to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::Expectation: return "expectation";
    case RiskKind::VaR: return "var";
    case RiskKind::CVaR: return "cvar";
    case RiskKind::WorstCase: return "worst-case";
  }
  return "unknown";
}

RiskKind parse_risk_kind(std::string_view name) {
  if (name == "exp" || name == "expectation") return RiskKind::Expectation;
  if (name == "var") return RiskKind::VaR;
  if (name == "cvar") return RiskKind::CVaR;
  if (name == "wc" || name == "worst-case" || name == "worstcase") return RiskKind::WorstCase;
  throw InputError("unknown risk measure '" + std::string(name) + "'");
}

void RiskSpec::validate() const {
  if ((kind == RiskKind::VaR || kind == RiskKind::CVaR) && !(level > 0.0 && level < 1.0)) {
    throw InputError("risk level must lie in (0, 1), got " + std::to_string(level));
  }
}

SampleVector::SampleVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InputError("sample vector is empty");
}

SampleVector::SampleVector(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (values_.empty()) throw InputError("sample vector is empty");
  if (weights_.size() != values_.size()) {
    throw InputError("sample weights and values differ in length");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw InputError("sample weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("sample weights must sum to 1");
  const bool all_equal = std::all_of(weights_.begin(), weights_.end(),
                                     [&](double w) { return w == weights_.front(); });
  if (all_equal) weights_.clear();
}

double SampleVector::weight(std::size_t i) const {
  return weights_.empty() ? 1.0 / static_cast<double>(values_.size()) : weights_[i];
}

double tail_mass(double delta, std::size_t n) {
  const double m = (1.0 - delta) * static_cast<double>(n);
  const double r = std::round(m);
  if (std::abs(m - r) <= 1e-9 * std::max(1.0, m)) return r;
  return m;
}

std::size_t tail_count(double delta, std::size_t n) {
  return static_cast<std::size_t>(std::floor(tail_mass(delta, n)));
}

namespace {

void check_level(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InputError("confidence level must lie in (0, 1), got " + std::to_string(delta));
  }
}

}  // namespace

double expectation(const SampleVector& s) {
  const auto v = s.values();
  if (s.uniform()) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  const auto w = s.weights();
  return std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
}

double var(const SampleVector& s, double delta) {
  check_level(delta);
  if (!s.uniform()) throw UnsupportedError("weighted empirical VaR is not supported");
  const std::size_t n = s.size();
  // The ceil(m)-th largest value, m = (1 - delta) n; m > 0 since delta < 1.
  const auto from_top = static_cast<std::size_t>(std::ceil(tail_mass(delta, n)));
  const std::size_t rank = n - std::min(n, std::max<std::size_t>(from_top, 1)) + 1;
  std::vector<double> v(s.values().begin(), s.values().end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

CvarResult cvar(const SampleVector& s, double delta) {
  check_level(delta);
  const std::size_t n = s.size();
  if (s.uniform()) {
    const double m = tail_mass(delta, n);
    const auto full = static_cast<std::size_t>(std::floor(m));
    const auto boundary = static_cast<std::size_t>(std::ceil(m));  // >= 1, <= n
    std::vector<double> v(s.values().begin(), s.values().end());
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, full + 1)),
                      v.end(), std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i < full; ++i) sum += v[i];
    if (full < n) sum += (m - static_cast<double>(full)) * v[full];
    return {sum / m, v[std::max<std::size_t>(boundary, 1) - 1]};
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto values = s.values();
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  const double q = 1.0 - delta;
  double remaining = q;
  double sum = 0.0;
  double alpha = values[order.back()];
  for (std::size_t idx : order) {
    const double w = s.weight(idx);
    if (w <= 0.0) continue;
    const double take = std::min(w, remaining);
    sum += take * values[idx];
    remaining -= take;
    if (remaining <= 1e-14) {
      alpha = values[idx];
      break;
    }
  }
  return {sum / q, alpha};
}

double rockafellar_objective(const SampleVector& s, double delta, double alpha) {
  check_level(delta);
  double excess = 0.0;
  const auto v = s.values();
  for (std::size_t i = 0; i < v.size(); ++i) excess += s.weight(i) * std::max(0.0, v[i] - alpha);
  return alpha + excess / (1.0 - delta);
}

double worst_case(const SampleVector& s) {
  const auto v = s.values();
  return *std::max_element(v.begin(), v.end());
}

double evaluate(const RiskSpec& spec, const SampleVector& s) {
  switch (spec.kind) {
    case RiskKind::Expectation: return expectation(s);
    case RiskKind::VaR: return var(s, spec.level);
    case RiskKind::CVaR: return cvar(s, spec.level).value;
    case RiskKind::WorstCase: return worst_case(s);
  }
  return 0.0;
}

void GaussianParams::validate() const {
  const auto n = mean.size();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw InputError("covariance dimension does not match mean");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw InputError("covariance is not symmetric");
  }
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
      throw InputError("covariance is not positive semidefinite");
    }
  }
}

double var_normal_coefficient(double delta) {
  check_level(delta);
  return normal_quantile(delta);
}

double cvar_normal_coefficient(double delta) {
  check_level(delta);
  const double z = normal_quantile(delta);
  return normal_pdf(z) / (1.0 - delta);
}

namespace {

double gaussian_spread(const GaussianParams& g, const Eigen::VectorXd& x) {
  g.validate();
  if (x.size() != g.mean.size()) throw InputError("position and mean differ in dimension");
  const double q = x.dot(g.covariance * x);
  return std::sqrt(std::max(0.0, q));
}

}  // namespace

double var_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta) {
  const double spread = gaussian_spread(g, x);
  return var_normal_coefficient(delta) * spread + g.mean.dot(x);
}

double cvar_normal(const GaussianParams& g, const Eigen::VectorXd& x, double delta) {
  const double spread = gaussian_spread(g, x);
  return cvar_normal_coefficient(delta) * spread + g.mean.dot(x);
}

}  // namespace crm
