#include "crm/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "crm/errors.hpp"
#include "crm/parallel.hpp"
#include "crm/rng.hpp"

namespace crm {

Eigen::Index DrawSet::dimension() const {
  if (draws.empty()) return 0;
  return std::visit(
      [](const auto& d) -> Eigen::Index {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, GaussianDraw>) {
          return d.mean.size();
        } else {
          return d.support->cols();
        }
      },
      draws.front());
}

bool DrawSet::all_gaussian() const {
  return std::all_of(draws.begin(), draws.end(),
                     [](const auto& d) { return std::holds_alternative<GaussianDraw>(d); });
}

bool DrawSet::all_discrete() const {
  return std::all_of(draws.begin(), draws.end(),
                     [](const auto& d) { return std::holds_alternative<DiscreteDraw>(d); });
}

Eigen::VectorXd draw_mean(const DistributionDraw& d) {
  if (const auto* g = std::get_if<GaussianDraw>(&d)) return g->mean;
  const auto& disc = std::get<DiscreteDraw>(d);
  return disc.support->transpose() * disc.probs;
}

NiwPosterior niw_posterior(const Eigen::MatrixXd& window) {
  const Eigen::Index t = window.rows();
  const Eigen::Index n = window.cols();
  if (n < 1) throw InputError("window has no assets");
  if (!window.allFinite()) throw InputError("window contains missing or non-finite entries");
  if (t < n + 2) {
    std::ostringstream msg;
    msg << "posterior is improper: window length " << t << " < assets + 2 = " << n + 2;
    throw DegeneratePosteriorError(msg.str());
  }
  NiwPosterior p;
  p.mu0 = window.colwise().mean().transpose();
  const Eigen::MatrixXd centered = window.rowwise() - p.mu0.transpose();
  p.sigma0 = (centered.transpose() * centered) / static_cast<double>(t);
  p.t = static_cast<int>(t);
  return p;
}

DrawSet sample_niw(const NiwPosterior& p, std::size_t n_draws, std::uint64_t seed,
                   unsigned workers) {
  const Eigen::Index n = p.mu0.size();
  if (p.sigma0.rows() != n || p.sigma0.cols() != n) {
    throw InputError("sigma0 dimension does not match mu0");
  }
  if (p.t < n + 2) throw DegeneratePosteriorError("posterior is improper: t < n + 2");
  if (n_draws < 1) throw InputError("n_draws must be at least 1");

  DrawSet out;
  out.seed = seed;
  out.posterior = p;

  const double t = p.t;
  Eigen::MatrixXd scale = t * p.sigma0;
  scale = 0.5 * (scale + scale.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scale, Eigen::EigenvaluesOnly);
  const double trace = p.sigma0.trace();
  const double ridge_unit = trace > 0.0 ? 1e-12 * trace / static_cast<double>(n) : 1e-12;
  if (llt.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= ridge_unit) {
    const double ridge = 1e-12 * (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
    Eigen::MatrixXd reg = p.sigma0;
    reg.diagonal().array() += ridge;
    scale = t * reg;
    llt.compute(scale);
    std::ostringstream msg;
    msg << "sigma0 is singular; added ridge " << ridge << " to its diagonal";
    out.warnings.push_back(msg.str());
    if (llt.info() != Eigen::Success) throw InputError("sigma0 is not positive semidefinite");
  }
  const Eigen::MatrixXd chol = llt.matrixL();
  const double dof = t - 1.0;
  const double inv_sqrt_t = 1.0 / std::sqrt(t);

  out.draws.resize(n_draws);
  parallel_for(n_draws, workers, [&](std::size_t i) {
    Rng rng = Rng::substream(seed, i);
    // Bartlett factor A of Wishart(I, dof).
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      a(r, r) = std::sqrt(rng.chi_square(dof - static_cast<double>(r)));
      for (Eigen::Index c = 0; c < r; ++c) a(r, c) = rng.normal();
    }
    // W = L^{-T} A A^T L^{-1} ~ Wishart(scale^{-1}, dof), so
    // Sigma = W^{-1} = U U^T with U = L A^{-T}.
    const Eigen::MatrixXd a_inv_t =
        a.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd u = chol * a_inv_t;
    Eigen::MatrixXd sigma = u * u.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) z(k) = rng.normal();
    GaussianDraw draw;
    draw.mean = p.mu0 + inv_sqrt_t * (u * z);
    draw.covariance = std::move(sigma);
    out.draws[i] = std::move(draw);
  });
  return out;
}

DirichletPosterior dirichlet_posterior(const std::vector<long>& counts,
                                       const Eigen::VectorXd& prior_alpha,
                                       const Eigen::MatrixXd& support) {
  const auto m = static_cast<Eigen::Index>(counts.size());
  if (prior_alpha.size() != m || support.rows() != m) {
    throw InputError("counts, prior alpha and support differ in length");
  }
  if (m < 1) throw InputError("support is empty");
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<double> row(static_cast<std::size_t>(support.cols()));
    for (Eigen::Index c = 0; c < support.cols(); ++c) row[c] = support(i, c);
    if (!seen.insert(row).second) throw InputError("support points must be distinct");
  }
  DirichletPosterior p;
  p.alpha = prior_alpha;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(prior_alpha(i) > 0.0)) throw InputError("prior alpha must be positive");
    if (counts[i] < 0) throw InputError("counts must be nonnegative");
    p.alpha(i) += static_cast<double>(counts[i]);
  }
  p.support = std::make_shared<const Eigen::MatrixXd>(support);
  return p;
}

DrawSet sample_dirichlet(const DirichletPosterior& p, std::size_t n_draws, std::uint64_t seed,
                         unsigned workers) {
  if (!p.support || p.support->rows() != p.alpha.size()) {
    throw InputError("Dirichlet support does not match alpha");
  }
  if ((p.alpha.array() <= 0.0).any()) throw InputError("Dirichlet alpha must be positive");
  if (n_draws < 1) throw InputError("n_draws must be at least 1");
  const Eigen::Index m = p.alpha.size();
  DrawSet out;
  out.seed = seed;
  out.posterior = p;
  out.draws.resize(n_draws);
  parallel_for(n_draws, workers, [&](std::size_t i) {
    Rng rng = Rng::substream(seed, i);
    Eigen::VectorXd g(m);
    for (Eigen::Index k = 0; k < m; ++k) g(k) = rng.gamma(p.alpha(k));
    const double total = g.sum();
    if (total > 0.0) {
      g /= total;
    } else {
      Eigen::Index best = 0;
      p.alpha.maxCoeff(&best);
      g.setZero();
      g(best) = 1.0;
    }
    out.draws[i] = DiscreteDraw{p.support, std::move(g)};
  });
  return out;
}

DrawSet mh_sample(const CustomPosterior& p, std::size_t n_draws, std::size_t burn_in,
                  double step_scale, std::uint64_t seed) {
  if (!p.log_numerator) throw InputError("log_numerator is not set");
  if (p.init.size() != p.dimension || p.dimension < 1) {
    throw InputError("init does not match the stated dimension");
  }
  if (!(step_scale > 0.0)) throw InputError("step_scale must be positive");
  if (n_draws < 1) throw InputError("n_draws must be at least 1");
  Eigen::VectorXd state = p.init;
  double log_p = p.log_numerator(state);
  if (!std::isfinite(log_p)) throw InputError("log_numerator is not finite at init");

  Rng rng = Rng::substream(seed, 0);
  Eigen::VectorXd proposal(p.dimension);
  auto step = [&]() -> bool {
    for (Eigen::Index k = 0; k < proposal.size(); ++k) {
      proposal(k) = state(k) + step_scale * rng.normal();
    }
    const double log_q = p.log_numerator(proposal);
    const double u = rng.uniform_open();
    if (std::isfinite(log_q) && std::log(u) < log_q - log_p) {
      state = proposal;
      log_p = log_q;
      return true;
    }
    return false;
  };

  std::size_t burn_accepts = 0;
  for (std::size_t i = 0; i < burn_in; ++i) burn_accepts += step();
  if (burn_in > 0 && burn_accepts == 0) {
    throw DiagnosticsError("Metropolis-Hastings accepted no proposal during burn-in; "
                           "try a smaller step_scale");
  }

  DrawSet out;
  out.seed = seed;
  out.posterior = p;
  out.parameters.reserve(n_draws);
  out.draws.reserve(n_draws);
  std::size_t accepts = 0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    accepts += step();
    out.parameters.push_back(state);
    if (p.decode) {
      out.draws.push_back(p.decode(state));
    } else {
      out.draws.push_back(GaussianDraw{state, Eigen::MatrixXd::Zero(p.dimension, p.dimension)});
    }
  }
  out.acceptance_rate = static_cast<double>(accepts) / static_cast<double>(n_draws);
  return out;
}

}  // namespace crm
