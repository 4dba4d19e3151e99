#include "crm/saamodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <json.hpp>

#include "crm/errors.hpp"
#include "crm/parallel.hpp"
#include "crm/rng.hpp"

namespace crm {

namespace {

using Terms = std::vector<std::pair<Eigen::Index, double>>;

std::string cell_name(const CompositeSpec& spec) {
  return std::string(to_string(spec.outer.kind)) + "-" + std::string(to_string(spec.inner.kind));
}

// Square root factor of a PSD matrix that tolerates singular input.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

std::shared_ptr<const Eigen::MatrixXd> gaussian_samples(const GaussianDraw& g, std::size_t m,
                                                        std::uint64_t seed, std::size_t draw_index) {
  const Eigen::Index n = g.mean.size();
  const Eigen::MatrixXd factor = psd_factor(g.covariance);
  Rng rng = Rng::substream(seed, draw_index);
  auto out = std::make_shared<Eigen::MatrixXd>(static_cast<Eigen::Index>(m), n);
  Eigen::VectorXd z(n);
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j) {
    for (Eigen::Index k = 0; k < n; ++k) z(k) = rng.normal();
    out->row(j) = (g.mean + factor * z).transpose();
  }
  return out;
}

struct Context {
  const CompositeSpec& spec;
  std::shared_ptr<const GeneralLoss> loss;  // null for linear
  std::uint64_t seed;
};

ScenarioFunction make_scenario(const DistributionDraw& draw, std::size_t index, const Context& ctx) {
  const RiskSpec& inner = ctx.spec.inner;
  const bool linear = ctx.loss == nullptr;
  if (const auto* g = std::get_if<GaussianDraw>(&draw)) {
    if (ctx.spec.closed_form_inner) {
      switch (inner.kind) {
        case RiskKind::Expectation: return ScenarioFunction(AffineTerm{g->mean});
        case RiskKind::VaR:
          return ScenarioFunction(MeanSpreadTerm{g->mean, g->covariance, var_normal_coefficient(inner.level)});
        case RiskKind::CVaR:
          return ScenarioFunction(MeanSpreadTerm{g->mean, g->covariance, cvar_normal_coefficient(inner.level)});
        case RiskKind::WorstCase: break;
      }
      throw UnsupportedError("inner worst case of a Gaussian draw is unbounded");
    }
    if (inner.kind == RiskKind::WorstCase) throw UnsupportedError("inner worst case of a Gaussian draw is unbounded");
    if (inner.kind == RiskKind::VaR) {
      throw UnsupportedError("inner VaR is only supported through the Gaussian closed form");
    }
    if (linear && inner.kind == RiskKind::Expectation) return ScenarioFunction(AffineTerm{g->mean});
    return ScenarioFunction(EmpiricalTerm{gaussian_samples(*g, ctx.spec.inner_sample_count, ctx.seed, index),
                                          {}, inner, ctx.loss});
  }
  const auto& d = std::get<DiscreteDraw>(draw);
  if (inner.kind == RiskKind::VaR) throw UnsupportedError("inner VaR is only supported through the Gaussian closed form");
  if (linear && inner.kind == RiskKind::Expectation) {
    return ScenarioFunction(AffineTerm{d.support->transpose() * d.probs});
  }
  return ScenarioFunction(EmpiricalTerm{d.support, d.probs, inner, ctx.loss});
}

void check_supported(const CompositeSpec& spec, const DrawSet& draws, bool linear) {
  spec.outer.validate();
  spec.inner.validate();
  const std::string cell = cell_name(spec);
  if (spec.outer.kind == RiskKind::Expectation && spec.inner.kind != RiskKind::Expectation) {
    throw UnsupportedError("composite cell " + cell + " is not supported (outer expectation needs inner expectation)");
  }
  if (spec.closed_form_inner) {
    if (!draws.all_gaussian()) throw InputError("closed_form_inner requires Gaussian draws");
    if (!linear) throw InputError("closed_form_inner requires a linear loss");
  }
  if (spec.inner.kind == RiskKind::VaR && !spec.closed_form_inner) {
    throw UnsupportedError("composite cell " + cell + " is only supported through the Gaussian closed form");
  }
  if (spec.outer.kind == RiskKind::VaR && spec.inner.kind == RiskKind::CVaR && !spec.closed_form_inner) {
    throw UnsupportedError("composite cell " + cell + " is only supported through the Gaussian closed form");
  }
  if (spec.closed_form_inner && spec.inner.kind == RiskKind::VaR && spec.inner.level < 0.5) {
    throw UnsupportedError("inner VaR below level 0.5 has a negative spread loading and is not convex");
  }
  if (!spec.closed_form_inner && spec.inner.kind != RiskKind::Expectation &&
      spec.inner.kind != RiskKind::WorstCase && draws.all_gaussian() && spec.inner_sample_count == 0) {
    throw InputError("inner_sample_count must be positive");
  }
}

// Loose interval containing g(x) over the feasible set.
std::pair<double, double> scenario_range(const ScenarioFunction& s) {
  if (const auto* a = std::get_if<AffineTerm>(&s.term())) return {a->mean.minCoeff(), a->mean.maxCoeff()};
  if (const auto* m = std::get_if<MeanSpreadTerm>(&s.term())) {
    // sqrt(x'Gx) <= max_j sqrt(G_jj) on the simplex by the triangle inequality.
    const double spread = m->covariance.diagonal().cwiseMax(0.0).cwiseSqrt().maxCoeff();
    return {m->mean.minCoeff() + std::min(m->coef, 0.0) * spread,
            m->mean.maxCoeff() + std::max(m->coef, 0.0) * spread};
  }
  const auto& e = std::get<EmpiricalTerm>(s.term());
  return {e.samples->minCoeff(), e.samples->maxCoeff()};
}

double spread_to_big_m(double lo, double hi, double magnitude) {
  const double spread = hi - lo;
  if (spread > 0.0) return 1.1 * spread;
  return 0.1 * std::max(1.0, magnitude);
}

}  // namespace

double SaaProblem::objective_at(const Eigen::VectorXd& x) const {
  const auto* mb = std::get_if<MixedBinaryProblem>(&form);
  if (mb == nullptr) return model.value(x);
  std::vector<double> g(model.scenarios.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = model.scenarios[i].value(x);
  const auto k = static_cast<std::ptrdiff_t>(mb->cardinality);
  std::nth_element(g.begin(), g.begin() + k, g.end(), std::greater<>());
  return g[static_cast<std::size_t>(k)];
}

std::optional<LpProblem> epigraph_lp(const ScenarioModel& model, std::size_t row_limit,
                                     std::size_t sample_row_limit) {
  const std::size_t n_scen = model.scenarios.size();
  std::size_t rows = 1 + (model.aggregation == Aggregation::Mean ? 0 : n_scen);
  std::size_t sample_rows = 0;
  for (const auto& s : model.scenarios) {
    if (!s.polyhedral()) return std::nullopt;
    if (const auto* e = std::get_if<EmpiricalTerm>(&s.term())) {
      if (e->inner.kind != RiskKind::Expectation) sample_rows += static_cast<std::size_t>(e->samples->rows());
    }
  }
  rows += sample_rows;
  if (rows > row_limit || sample_rows > sample_row_limit) return std::nullopt;

  const Eigen::Index n = model.feasible.dimension;
  LpBuilder b;
  Terms budget;
  for (Eigen::Index j = 0; j < n; ++j) budget.emplace_back(b.add_column(0.0, 0.0, model.feasible.cap(j)), 1.0);
  b.add_row(budget, Sense::Equal, 1.0);

  auto linear_terms = [&](const Eigen::VectorXd& coef) {
    Terms t;
    for (Eigen::Index j = 0; j < n; ++j) t.emplace_back(j, coef(j));
    return t;
  };

  std::vector<Terms> expr(n_scen);
  for (std::size_t i = 0; i < n_scen; ++i) {
    const auto& term = model.scenarios[i].term();
    if (const auto* a = std::get_if<AffineTerm>(&term)) {
      expr[i] = linear_terms(a->mean);
      continue;
    }
    const auto& e = std::get<EmpiricalTerm>(term);
    const Eigen::MatrixXd& xi = *e.samples;
    const Eigen::Index m = xi.rows();
    auto weight = [&](Eigen::Index j) {
      return e.weights.size() ? e.weights(j) : 1.0 / static_cast<double>(m);
    };
    switch (e.inner.kind) {
      case RiskKind::Expectation: {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        for (Eigen::Index j = 0; j < m; ++j) mean += weight(j) * xi.row(j).transpose();
        expr[i] = linear_terms(mean);
        break;
      }
      case RiskKind::CVaR: {
        const Eigen::Index v = b.add_column(0.0, -kInf, kInf);
        expr[i].emplace_back(v, 1.0);
        for (Eigen::Index j = 0; j < m; ++j) {
          if (weight(j) <= 0.0) continue;
          const Eigen::Index w = b.add_column(0.0);
          Terms row = linear_terms(xi.row(j).transpose());
          row.emplace_back(v, -1.0);
          row.emplace_back(w, -1.0);
          b.add_row(row, Sense::LessEqual, 0.0);
          expr[i].emplace_back(w, weight(j) / (1.0 - e.inner.level));
        }
        break;
      }
      case RiskKind::WorstCase: {
        const Eigen::Index y = b.add_column(0.0, -kInf, kInf);
        for (Eigen::Index j = 0; j < m; ++j) {
          if (weight(j) <= 0.0) continue;
          Terms row = linear_terms(xi.row(j).transpose());
          row.emplace_back(y, -1.0);
          b.add_row(row, Sense::LessEqual, 0.0);
        }
        expr[i].emplace_back(y, 1.0);
        break;
      }
      case RiskKind::VaR: return std::nullopt;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n_scen);
  switch (model.aggregation) {
    case Aggregation::Mean:
      for (const auto& e : expr) {
        for (const auto& [col, coef] : e) b.add_cost(col, inv_n * coef);
      }
      break;
    case Aggregation::Max: {
      const Eigen::Index t = b.add_column(1.0, -kInf, kInf);
      for (auto e : expr) {
        e.emplace_back(t, -1.0);
        b.add_row(e, Sense::LessEqual, 0.0);
      }
      break;
    }
    case Aggregation::Cvar: {
      const Eigen::Index alpha = b.add_column(1.0, -kInf, kInf);
      const double tail = tail_mass(model.level, n_scen);
      for (auto e : expr) {
        const Eigen::Index u = b.add_column(1.0 / tail);
        e.emplace_back(alpha, -1.0);
        e.emplace_back(u, -1.0);
        b.add_row(e, Sense::LessEqual, 0.0);
      }
      break;
    }
  }
  return LpProblem{b.build(), 0};
}

SaaProblem build_composite(const CompositeSpec& spec, const DrawSet& draws, const LossSpec& loss,
                           const FeasibleSet& feasible, const BuildOptions& options) {
  feasible.validate();
  if (draws.size() == 0) throw InputError("draw set is empty");
  if (draws.dimension() != feasible.dimension) {
    throw InputError("draw dimension " + std::to_string(draws.dimension()) +
                     " does not match feasible set dimension " + std::to_string(feasible.dimension));
  }
  std::shared_ptr<const GeneralLoss> general;
  if (const auto* gl = std::get_if<GeneralLoss>(&loss)) {
    if (!gl->convex_in_x) throw InputError("loss is not convex in x; the composite problem would not be convex");
    if (!gl->evaluate || !gl->subgradient_x) throw InputError("general loss needs evaluate and subgradient_x");
    general = std::make_shared<const GeneralLoss>(*gl);
  }
  check_supported(spec, draws, general == nullptr);

  SaaProblem p;
  p.label = cell_name(spec) + (spec.closed_form_inner ? "-normal" : "");
  p.seed = options.seed;
  p.warnings = draws.warnings;
  p.model.feasible = feasible;
  p.model.level = spec.outer.level;

  const bool sampled_inner = !spec.closed_form_inner && draws.all_gaussian() &&
                             (spec.inner.kind == RiskKind::CVaR || general != nullptr);
  p.inner_sample_count = sampled_inner ? spec.inner_sample_count : 0;
  if (sampled_inner && spec.inner.kind == RiskKind::CVaR) {
    const double need = std::ceil(1.0 / (1.0 - spec.inner.level) - 1e-9);
    if (static_cast<double>(spec.inner_sample_count) < need) {
      p.warnings.push_back("inner sample count " + std::to_string(spec.inner_sample_count) +
                           " is below ceil(1/(1-epsilon)); the inner tail holds less than one sample");
    }
  }

  const Context ctx{spec, general, options.seed};
  std::vector<std::optional<ScenarioFunction>> slots(draws.size());
  parallel_for(draws.size(), options.workers, [&](std::size_t i) {
    slots[i].emplace(make_scenario(draws.draws[i], i, ctx));
  });
  p.model.scenarios.reserve(draws.size());
  for (auto& s : slots) p.model.scenarios.push_back(std::move(*s));

  switch (spec.outer.kind) {
    case RiskKind::VaR: {
      p.model.aggregation = Aggregation::Max;
      MixedBinaryProblem mb;
      mb.cardinality = tail_count(spec.outer.level, draws.size());
      if (options.big_m) {
        if (!(*options.big_m >= 0.0) || !std::isfinite(*options.big_m)) throw InputError("big_m must be finite and nonnegative");
        mb.big_m = *options.big_m;
      } else {
        if (general) throw InputError("a general loss under an outer VaR needs a user-supplied big_m");
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& s : p.model.scenarios) {
          const auto [a, c] = scenario_range(s);
          lo = std::min(lo, a);
          hi = std::max(hi, c);
        }
        mb.big_m = spread_to_big_m(lo, hi, std::max(std::abs(lo), std::abs(hi)));
      }
      p.form = mb;
      return p;
    }
    case RiskKind::CVaR: p.model.aggregation = Aggregation::Cvar; break;
    case RiskKind::WorstCase: p.model.aggregation = Aggregation::Max; break;
    case RiskKind::Expectation: p.model.aggregation = Aggregation::Mean; break;
  }
  if (auto lp = epigraph_lp(p.model, options.lp_row_limit, options.lp_sample_row_limit)) {
    p.form = std::move(*lp);
  } else {
    p.form = MinimaxProblem{};
  }
  return p;
}

SaaProblem build_var_expectation(const DrawSet& draws, const LossSpec& loss,
                                 const FeasibleSet& feasible, double delta,
                                 const BuildOptions& options) {
  return build_composite({{RiskKind::VaR, delta}, {RiskKind::Expectation, 0.5}}, draws, loss, feasible, options);
}

SaaProblem build_cvar_expectation(const DrawSet& draws, const LossSpec& loss,
                                  const FeasibleSet& feasible, double delta,
                                  const BuildOptions& options) {
  return build_composite({{RiskKind::CVaR, delta}, {RiskKind::Expectation, 0.5}}, draws, loss, feasible, options);
}

SaaProblem build_cvar_cvar(const DrawSet& draws, const LossSpec& loss, const FeasibleSet& feasible,
                           double delta, double epsilon, std::size_t m_inner, std::uint64_t seed,
                           const BuildOptions& options) {
  BuildOptions o = options;
  o.seed = seed;
  return build_composite({{RiskKind::CVaR, delta}, {RiskKind::CVaR, epsilon}, m_inner, false}, draws, loss,
                         feasible, o);
}

SaaProblem build_worstcase_expectation(const DrawSet& draws, const LossSpec& loss,
                                       const FeasibleSet& feasible, const BuildOptions& options) {
  return build_composite({{RiskKind::WorstCase, 0.5}, {RiskKind::Expectation, 0.5}}, draws, loss, feasible,
                         options);
}

SaaProblem build_worstcase_cvar(const DrawSet& draws, const LossSpec& loss,
                                const FeasibleSet& feasible, double epsilon, std::size_t m_inner,
                                std::uint64_t seed, const BuildOptions& options) {
  BuildOptions o = options;
  o.seed = seed;
  return build_composite({{RiskKind::WorstCase, 0.5}, {RiskKind::CVaR, epsilon}, m_inner, false}, draws, loss,
                         feasible, o);
}

SaaProblem build_normal_composite(const DrawSet& draws, const FeasibleSet& feasible,
                                  const RiskSpec& outer, const RiskSpec& inner,
                                  const BuildOptions& options) {
  if (!draws.all_gaussian()) throw InputError("normal composite requires every draw to be Gaussian");
  if (inner.kind == RiskKind::WorstCase) throw UnsupportedError("inner worst case of a Gaussian draw is unbounded");
  return build_composite({outer, inner, 0, true}, draws, LinearLoss{}, feasible, options);
}

SaaProblem build_expectation_expectation(const DrawSet& draws, const LossSpec& loss,
                                         const FeasibleSet& feasible, const BuildOptions& options) {
  return build_composite({{RiskKind::Expectation, 0.5}, {RiskKind::Expectation, 0.5}}, draws, loss, feasible,
                         options);
}

double big_m(const DrawSet& draws, const LossSpec& loss, const FeasibleSet& feasible) {
  feasible.validate();
  if (std::holds_alternative<GeneralLoss>(loss)) {
    throw InputError("big-M for a general loss must be supplied by the caller");
  }
  if (draws.size() == 0) throw InputError("draw set is empty");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& d : draws.draws) {
    const Eigen::VectorXd mu = draw_mean(d);
    if (mu.size() != feasible.dimension) throw InputError("draw dimension does not match feasible set");
    lo = std::min(lo, mu.minCoeff());
    hi = std::max(hi, mu.maxCoeff());
  }
  return spread_to_big_m(lo, hi, std::max(std::abs(lo), std::abs(hi)));
}

void SampleSizeRequest::validate() const {
  if (!(tau > 0.0) || tau > 1.0 - delta + 1e-15) throw InputError("tau must lie in (0, 1 - delta]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  if (n < 0) throw InputError("dimension n must be nonnegative");
  if (!(lipschitz > 0.0) || !(diameter > 0.0)) throw InputError("Lipschitz constant and diameter must be positive");
  for (double c : {c1, c2, c3, d1, d2, d3}) {
    if (!(c > 0.0)) throw InputError("sample-bound constants must be positive");
  }
}

long sample_size_n0(const SampleSizeRequest& r) {
  r.validate();
  const double cells = std::ceil(2.0 * r.lipschitz * r.diameter / r.gamma - 1e-12);
  const double ticks = std::ceil(2.0 / r.tau - 1e-12);
  const double value = (2.0 / (r.tau * r.tau)) *
                       (std::log(1.0 / r.epsilon) + r.n * std::log(cells) + std::log(ticks));
  return static_cast<long>(std::ceil(value - 1e-9));
}

SampleBounds sample_bounds(const SampleSizeRequest& r) {
  r.validate();
  const double g2 = r.gamma * r.gamma;
  const double m = (r.c1 / g2) * (r.c2 * r.n + r.c3 * std::log(1.0 / r.epsilon));
  const double nb = (r.d1 / g2) * (r.n * std::log(r.d2 / r.gamma) + std::log(r.d3 / r.epsilon));
  return {std::max(0L, static_cast<long>(std::ceil(m - 1e-9))),
          std::max(0L, static_cast<long>(std::ceil(nb - 1e-9)))};
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      out.push_back(v(i));
    } else {
      out.push_back(v(i) > 0 ? "inf" : "-inf");
    }
  }
  return out;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

std::string_view sense_name(Sense s) {
  switch (s) {
    case Sense::LessEqual: return "<=";
    case Sense::GreaterEqual: return ">=";
    case Sense::Equal: return "=";
  }
  return "?";
}

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Max: return "max";
    case Aggregation::Cvar: return "cvar";
  }
  return "?";
}

}  // namespace

std::string problem_to_json(const SaaProblem& p, int indent) {
  nlohmann::json j;
  j["label"] = p.label;
  j["seed"] = p.seed;
  j["inner_sample_count"] = p.inner_sample_count;
  j["warnings"] = p.warnings;
  j["dimension"] = p.model.feasible.dimension;
  j["upper_bounds"] = vector_json(p.model.feasible.upper);
  j["scenario_count"] = p.model.scenarios.size();
  j["aggregation"] = aggregation_name(p.model.aggregation);
  j["level"] = p.model.level;

  nlohmann::json scen = nlohmann::json::array();
  for (const auto& s : p.model.scenarios) {
    nlohmann::json e;
    if (const auto* a = std::get_if<AffineTerm>(&s.term())) {
      e["type"] = "affine";
      e["mean"] = vector_json(a->mean);
    } else if (const auto* m = std::get_if<MeanSpreadTerm>(&s.term())) {
      e["type"] = "mean_spread";
      e["mean"] = vector_json(m->mean);
      e["covariance"] = matrix_json(m->covariance);
      e["coef"] = m->coef;
    } else {
      const auto& emp = std::get<EmpiricalTerm>(s.term());
      e["type"] = "empirical";
      e["inner"] = to_string(emp.inner.kind);
      e["inner_level"] = emp.inner.level;
      e["sample_count"] = emp.samples->rows();
      e["weighted"] = emp.weights.size() > 0;
      e["linear_loss"] = emp.loss == nullptr;
    }
    scen.push_back(std::move(e));
  }
  j["scenarios"] = std::move(scen);

  if (const auto* lp = std::get_if<LpProblem>(&p.form)) {
    j["form"] = "linear_program";
    nlohmann::json l;
    l["x_begin"] = lp->x_begin;
    l["objective"] = vector_json(lp->lp.objective);
    l["objective_offset"] = lp->lp.objective_offset;
    l["lower"] = vector_json(lp->lp.lower);
    l["upper"] = vector_json(lp->lp.upper);
    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = lp->lp.constraints;
    nlohmann::json rj = nlohmann::json::array();
    for (Eigen::Index r = 0; r < rows.outerSize(); ++r) {
      nlohmann::json terms = nlohmann::json::array();
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it) {
        terms.push_back({it.col(), it.value()});
      }
      rj.push_back({{"terms", terms}, {"sense", sense_name(lp->lp.senses[static_cast<std::size_t>(r)])},
                    {"rhs", lp->lp.rhs(r)}});
    }
    l["rows"] = std::move(rj);
    j["lp"] = std::move(l);
  } else if (const auto* mb = std::get_if<MixedBinaryProblem>(&p.form)) {
    j["form"] = "mixed_binary";
    j["big_m"] = mb->big_m;
    j["cardinality"] = mb->cardinality;
  } else {
    j["form"] = "convex_minimax";
  }
  return j.dump(indent);
}

}  // namespace crm
