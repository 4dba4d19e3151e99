#include "crm/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>

#include "crm/errors.hpp"

namespace crm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class Trace {
 public:
  explicit Trace(const std::string& path) {
    if (!path.empty()) out_.open(path, std::ios::app);
  }
  template <class... Args>
  void row(const Args&... args) {
    if (!out_.is_open()) return;
    bool first = true;
    ((out_ << (first ? "" : ",") << args, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

double tolerance(const SolverConfig& cfg, double value) {
  return cfg.opt_tol * std::max(1.0, std::abs(value));
}

Eigen::VectorXd clean_weights(const FeasibleSet& feasible, Eigen::VectorXd x) {
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = std::clamp(x(j), 0.0, feasible.cap(j));
  return x;
}

Solution solve_lp_form(const LpProblem& form, const FeasibleSet& feasible, const SolverConfig& cfg) {
  const auto start = Clock::now();
  const LpResult r = solve_linear_program(form.lp, cfg);
  Solution s;
  s.status = r.status;
  s.iterations = r.iterations;
  if (r.status == SolveStatus::Optimal) {
    s.x = clean_weights(feasible, r.x.segment(form.x_begin, feasible.dimension));
    s.objective = r.objective;
    s.dual_objective = r.dual_objective;
    s.gap = std::abs(r.objective - r.dual_objective);
  } else {
    s.objective = std::numeric_limits<double>::quiet_NaN();
  }
  s.wall_time = seconds_since(start);
  return s;
}

}  // namespace

Solution solve_lp(const SaaProblem& p, const SolverConfig& cfg) {
  const auto* form = std::get_if<LpProblem>(&p.form);
  if (form == nullptr) throw InputError("solve_lp needs a linear program");
  Solution s = solve_lp_form(*form, p.model.feasible, cfg);
  s.warnings = p.warnings;
  return s;
}

Solution solve_minimax(const ScenarioModel& model, const SolverConfig& cfg) {
  cfg.validate();
  model.feasible.validate();
  if (model.scenarios.empty()) throw InputError("minimax problem has no scenarios");
  const auto start = Clock::now();
  Trace trace(cfg.trace_path);
  const Eigen::Index n = model.feasible.dimension;

  struct Cut {
    Eigen::VectorXd grad;
    double constant;  // f(x_k) - grad' x_k
  };
  std::vector<Cut> cuts;
  Solution s;
  Eigen::VectorXd x = model.feasible.center();
  Eigen::VectorXd g;
  double best = std::numeric_limits<double>::infinity();
  auto evaluate = [&](const Eigen::VectorXd& point) {
    const double f = model.value(point, g);
    cuts.push_back({g, f - g.dot(point)});
    if (f < best) {
      best = f;
      s.x = point;
    }
    return f;
  };

  // Warm phase: projected subgradient with steps step * diam / (|g| sqrt(k + 1)).
  const double diameter = std::sqrt(2.0);
  long iter = 0;
  for (; iter < cfg.subgradient_iters; ++iter) {
    const double f = evaluate(x);
    const double norm = g.norm();
    trace.row("minimax", iter, "subgradient", f, best);
    if (norm == 0.0) {
      s.objective = best;
      s.status = SolveStatus::Optimal;
      s.iterations = iter + 1;
      s.wall_time = seconds_since(start);
      return s;
    }
    x = model.feasible.project(x - (cfg.subgradient_step * diameter / (norm * std::sqrt(iter + 1.0))) * g);
  }
  if (cuts.empty()) evaluate(x);

  // Cutting-plane phase: min theta s.t. theta >= f_k + g_k'(x - x_k), x feasible.
  // theta is shifted by max_k constant so every cut row has a nonpositive rhs and
  // its slack starts basic.
  double lower = -std::numeric_limits<double>::infinity();
  s.status = SolveStatus::ToleranceReached;
  for (long k = 0; k < cfg.cutting_plane_iters; ++k, ++iter) {
    double shift = -std::numeric_limits<double>::infinity();
    for (const auto& c : cuts) shift = std::max(shift, c.constant);
    LpBuilder b;
    std::vector<std::pair<Eigen::Index, double>> budget;
    for (Eigen::Index j = 0; j < n; ++j) budget.emplace_back(b.add_column(0.0, 0.0, model.feasible.cap(j)), 1.0);
    b.add_row(budget, Sense::Equal, 1.0);
    const Eigen::Index theta = b.add_column(1.0, -kInf, kInf);
    for (const auto& c : cuts) {
      std::vector<std::pair<Eigen::Index, double>> row;
      for (Eigen::Index j = 0; j < n; ++j) row.emplace_back(j, c.grad(j));
      row.emplace_back(theta, -1.0);
      b.add_row(row, Sense::LessEqual, shift - c.constant);
    }
    LinearProgram lp = b.build();
    lp.objective_offset = shift;
    const LpResult r = solve_linear_program(lp, cfg);
    if (r.status != SolveStatus::Optimal) break;
    lower = std::max(lower, r.objective);
    trace.row("minimax", iter, "cutting_plane", best, lower);
    if (best - lower <= tolerance(cfg, best)) {
      s.status = SolveStatus::Optimal;
      break;
    }
    const Eigen::VectorXd next = model.feasible.project(r.x.head(n));
    const double before = best;
    evaluate(next);
    // A repeated point adds no information; the model is exact there.
    if (best == before && (next - s.x).norm() == 0.0) {
      lower = std::max(lower, std::min(best, r.objective));
    }
  }
  if (s.status != SolveStatus::Optimal && cfg.cutting_plane_iters > 0 && best - lower > tolerance(cfg, best)) {
    s.status = lower == -std::numeric_limits<double>::infinity() ? SolveStatus::IterLimit
                                                                 : SolveStatus::ToleranceReached;
  }
  if (cfg.cutting_plane_iters == 0) s.status = SolveStatus::IterLimit;
  s.objective = best;
  s.gap = std::isfinite(lower) ? std::max(0.0, best - lower) : std::numeric_limits<double>::infinity();
  s.iterations = iter;
  s.wall_time = seconds_since(start);
  return s;
}

Solution solve_minimax(const SaaProblem& p, const SolverConfig& cfg) {
  Solution s = solve_minimax(p.model, cfg);
  s.warnings = p.warnings;
  return s;
}

Solution solve_max_over(const ScenarioModel& model, const std::vector<std::size_t>& keep,
                        const SolverConfig& cfg) {
  if (keep.empty()) throw InputError("min-max over an empty scenario set");
  ScenarioModel sub = model.subset(keep);
  sub.aggregation = Aggregation::Max;
  if (auto lp = epigraph_lp(sub, cfg.lp_row_limit, cfg.lp_sample_row_limit)) {
    Solution s = solve_lp_form(*lp, sub.feasible, cfg);
    if (s.status != SolveStatus::Optimal) {
      throw SolverError("scenario min-max LP ended with status " + std::string(to_string(s.status)));
    }
    return s;
  }
  return solve_minimax(sub, cfg);
}

namespace {

const MixedBinaryProblem& mixed_binary(const SaaProblem& p) {
  const auto* mb = std::get_if<MixedBinaryProblem>(&p.form);
  if (mb == nullptr) throw InputError("scenario selection needs a mixed-binary problem");
  if (mb->cardinality >= p.model.scenarios.size()) throw InputError("cardinality must be below the scenario count");
  return *mb;
}

Eigen::VectorXd scenario_values(const ScenarioModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(model.scenarios.size()));
  for (std::size_t i = 0; i < model.scenarios.size(); ++i) g(static_cast<Eigen::Index>(i)) = model.scenarios[i].value(x);
  return g;
}

}  // namespace

Solution solve_heuristic_drop(const SaaProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const MixedBinaryProblem& mb = mixed_binary(p);
  std::vector<std::size_t> kept(p.model.scenarios.size());
  std::iota(kept.begin(), kept.end(), std::size_t{0});
  std::vector<std::size_t> dropped;
  Solution best;
  best.objective = std::numeric_limits<double>::infinity();
  long iterations = 0;
  for (std::size_t round = 0;; ++round) {
    const Solution sub = solve_max_over(p.model, kept, cfg);
    iterations += sub.iterations;
    const double value = p.objective_at(sub.x);
    if (value < best.objective) {
      best.objective = value;
      best.x = sub.x;
    }
    if (round == mb.cardinality) break;
    std::size_t worst = 0;
    double worst_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double g = p.model.scenarios[kept[k]].value(sub.x);
      if (g > worst_value) {
        worst_value = g;
        worst = k;
      }
    }
    dropped.push_back(kept[worst]);
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  // Report the scenarios actually above the objective at the chosen point.
  const Eigen::VectorXd g = scenario_values(p.model, best.x);
  std::vector<std::size_t> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g(static_cast<Eigen::Index>(a)) > g(static_cast<Eigen::Index>(b));
  });
  best.dropped.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mb.cardinality));
  std::sort(best.dropped.begin(), best.dropped.end());
  best.status = SolveStatus::ToleranceReached;
  best.gap = std::numeric_limits<double>::quiet_NaN();
  best.iterations = iterations;
  best.warnings = p.warnings;
  best.wall_time = seconds_since(start);
  return best;
}

Solution solve_bnb(const SaaProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  Trace trace(cfg.trace_path);
  const MixedBinaryProblem& mb = mixed_binary(p);
  const std::size_t n_scen = p.model.scenarios.size();
  const std::size_t k_drop = mb.cardinality;
  constexpr double kNoBound = -std::numeric_limits<double>::infinity();

  enum : char { kFree = 0, kKept = 1, kDropped = 2 };
  struct Node {
    long id;
    double bound;
    std::vector<char> state;
    std::size_t dropped;
  };
  auto worse = [](const Node& a, const Node& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.id > b.id);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);

  Solution inc = solve_heuristic_drop(p, cfg);
  long iterations = inc.iterations;
  auto offer = [&](const Eigen::VectorXd& x) {
    const double v = p.objective_at(x);
    if (v < inc.objective) {
      inc.objective = v;
      inc.x = x;
    }
  };

  long next_id = 0;
  open.push({next_id++, kNoBound, std::vector<char>(n_scen, kFree), 0});
  long nodes = 0;
  double pruned_bound = std::numeric_limits<double>::infinity();
  bool limit_hit = false;

  while (!open.empty()) {
    if (nodes >= cfg.bnb_node_limit) {
      limit_hit = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (node.bound >= inc.objective - tolerance(cfg, inc.objective)) {
      pruned_bound = std::min(pruned_bound, node.bound);
      continue;
    }
    ++nodes;
    std::vector<std::size_t> kept, unfixed;
    for (std::size_t i = 0; i < n_scen; ++i) {
      if (node.state[i] == kKept) kept.push_back(i);
      if (node.state[i] == kFree) unfixed.push_back(i);
    }
    const std::size_t remaining = k_drop - node.dropped;

    // Leaves: every remaining scenario is forced one way.
    if (remaining == 0 || unfixed.size() == remaining) {
      std::vector<std::size_t> cover = kept;
      if (remaining == 0) cover.insert(cover.end(), unfixed.begin(), unfixed.end());
      std::sort(cover.begin(), cover.end());
      const Solution leaf = solve_max_over(p.model, cover, cfg);
      iterations += leaf.iterations;
      offer(leaf.x);
      trace.row("bnb", node.id, "leaf", leaf.objective, inc.objective);
      continue;
    }

    double bound = node.bound;
    Eigen::VectorXd point;
    if (kept.empty()) {
      std::vector<std::size_t> cover = unfixed;
      const Solution guide = solve_max_over(p.model, cover, cfg);
      iterations += guide.iterations;
      point = guide.x;
    } else {
      const Solution relax = solve_max_over(p.model, kept, cfg);
      iterations += relax.iterations;
      // Only the certified lower end of the relaxation is a valid bound.
      const double certified = relax.objective - relax.gap;
      bound = std::max(bound, certified);
      point = relax.x;
    }
    offer(point);
    trace.row("bnb", node.id, "node", bound, inc.objective);
    if (bound >= inc.objective - tolerance(cfg, inc.objective)) {
      pruned_bound = std::min(pruned_bound, bound);
      continue;
    }

    std::size_t branch = unfixed.front();
    double branch_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i : unfixed) {
      const double g = p.model.scenarios[i].value(point);
      if (g > branch_value) {
        branch_value = g;
        branch = i;
      }
    }
    // The point already covers every unfixed scenario at the bound: the
    // subtree cannot beat it.
    if (!kept.empty() && branch_value <= bound) continue;

    Node keep_child{next_id++, bound, node.state, node.dropped};
    keep_child.state[branch] = kKept;
    Node drop_child{next_id++, bound, std::move(node.state), node.dropped + 1};
    drop_child.state[branch] = kDropped;
    open.push(std::move(keep_child));
    open.push(std::move(drop_child));
  }

  double frontier = pruned_bound;
  while (!open.empty()) {
    frontier = std::min(frontier, open.top().bound);
    open.pop();
  }
  inc.status = limit_hit ? SolveStatus::ToleranceReached : SolveStatus::Optimal;
  inc.gap = std::isfinite(frontier) ? std::max(0.0, inc.objective - frontier) : 0.0;
  if (limit_hit && !std::isfinite(frontier)) inc.gap = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd g = scenario_values(p.model, inc.x);
  std::vector<std::size_t> order(n_scen);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g(static_cast<Eigen::Index>(a)) > g(static_cast<Eigen::Index>(b));
  });
  inc.dropped.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_drop));
  std::sort(inc.dropped.begin(), inc.dropped.end());
  inc.nodes = nodes;
  inc.iterations = iterations;
  inc.warnings = p.warnings;
  inc.wall_time = seconds_since(start);
  return inc;
}

Solution solve(const SaaProblem& p, const SolverConfig& cfg) {
  if (p.is_lp()) return solve_lp(p, cfg);
  if (p.is_minimax()) return solve_minimax(p, cfg);
  if (cfg.prefer_heuristic || p.model.scenarios.size() > cfg.exact_limit) return solve_heuristic_drop(p, cfg);
  return solve_bnb(p, cfg);
}

}  // namespace crm
