#pragma once

// Posteriors over distribution parameters and seeded sampling of candidate
// distributions from them.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace crm {

/// Normal-inverse-Wishart posterior of a multivariate normal under the
/// Jeffreys prior: mu | Sigma ~ N(mu0, Sigma / t), Sigma ~ IW(t * sigma0, t - 1).
struct NiwPosterior {
  Eigen::VectorXd mu0;
  Eigen::MatrixXd sigma0;
  int t = 0;
};

/// Dirichlet posterior over the probabilities of a fixed finite support.
struct DirichletPosterior {
  Eigen::VectorXd alpha;
  /// One support point per row.
  std::shared_ptr<const Eigen::MatrixXd> support;
};

struct GaussianDraw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct DiscreteDraw {
  std::shared_ptr<const Eigen::MatrixXd> support;  // m x dim, one point per row
  Eigen::VectorXd probs;
};

using DistributionDraw = std::variant<GaussianDraw, DiscreteDraw>;

/// Unnormalized posterior for Metropolis-Hastings sampling.
struct CustomPosterior {
  std::function<double(const Eigen::VectorXd&)> log_numerator;
  int dimension = 0;
  Eigen::VectorXd init;
  /// Maps a parameter vector to the distribution it indexes. When unset the
  /// parameter is read as a point mass xi = theta.
  std::function<DistributionDraw(const Eigen::VectorXd&)> decode;
};

using PosteriorParams = std::variant<NiwPosterior, DirichletPosterior, CustomPosterior>;

struct DrawSet {
  std::vector<DistributionDraw> draws;
  /// Raw parameter vectors (filled by the MH sampler).
  std::vector<Eigen::VectorXd> parameters;
  std::uint64_t seed = 0;
  PosteriorParams posterior;
  double acceptance_rate = 1.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return draws.size(); }
  /// Dimension of xi for the first draw.
  Eigen::Index dimension() const;
  bool all_gaussian() const;
  bool all_discrete() const;
};

/// NIW posterior from a t x n window: mu0 = column means, sigma0 = covariance
/// with denominator t. Throws DegeneratePosteriorError when t < n + 2.
NiwPosterior niw_posterior(const Eigen::MatrixXd& window);

/// Samples Sigma ~ IW(t sigma0, t - 1) by a Bartlett factor of the Wishart of
/// the inverse scale, then mu ~ N(mu0, Sigma / t). Draw i uses substream i of
/// `seed`, so `workers` never changes the result.
DrawSet sample_niw(const NiwPosterior& p, std::size_t n_draws, std::uint64_t seed,
                   unsigned workers = 1);

/// Conjugate update: alpha = prior_alpha + counts.
DirichletPosterior dirichlet_posterior(const std::vector<long>& counts,
                                       const Eigen::VectorXd& prior_alpha,
                                       const Eigen::MatrixXd& support);

/// Gamma-ratio construction; every draw is Discrete over p.support.
DrawSet sample_dirichlet(const DirichletPosterior& p, std::size_t n_draws, std::uint64_t seed,
                         unsigned workers = 1);

/// Random-walk Metropolis-Hastings with isotropic N(0, step_scale^2 I) proposals.
/// Keeps every post-burn-in state. Throws DiagnosticsError if no proposal is
/// accepted during burn-in.
DrawSet mh_sample(const CustomPosterior& p, std::size_t n_draws, std::size_t burn_in,
                  double step_scale, std::uint64_t seed);

/// Mean of xi under a draw.
Eigen::VectorXd draw_mean(const DistributionDraw& d);

}  // namespace crm
