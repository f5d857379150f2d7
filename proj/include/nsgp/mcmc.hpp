/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_MCMC_HPP
#define NSGP_MCMC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsgp/likelihood.hpp"
#include "nsgp/ordering.hpp"
#include "nsgp/process_models.hpp"
#include "nsgp/theta.hpp"

namespace nsgp {

/// Marginalized posterior bound to one ordered data set. Likelihood
/// factorizations are cached against the covariance part of theta, so
/// mean-only updates (beta and the mu(.) process) cost one residual sweep.
class PosteriorModel {
 public:
  /// Rows of `ordered_coords`, `ordered_z` and the design matrices inside
  /// `model` must already share the same (maxmin) ordering. `graph` and
  /// `csets` may be empty for the fullGP likelihood.
  PosteriorModel(ModelSpec model, Eigen::MatrixXd ordered_coords, Eigen::VectorXd ordered_z,
                 NeighborGraph graph = {}, ConditioningSets csets = {});

  std::shared_ptr<const ThetaLayout> layout() const { return layout_; }
  const KernelFieldAssembler& assembler() const { return assembler_; }
  const ModelSpec& model() const { return assembler_.model(); }
  const Eigen::VectorXd& observations() const { return z_; }
  const NeighborGraph& graph() const { return graph_; }
  const ConditioningSets& conditioning() const { return csets_; }

  /// Selected log-likelihood + log priors + transform Jacobians; -inf
  /// outside the prior support. Numerical likelihood failures are logged
  /// and returned as -inf (the sampler treats them as rejections).
  double log_posterior(const ThetaState& theta) const;

  /// Log-likelihood alone at theta (no caching shortcut).
  double log_likelihood(const ThetaState& theta) const;

  void invalidate_cache() const;
  int numerical_rejections() const { return numerical_rejections_; }

 private:
  KernelFieldAssembler assembler_;
  Eigen::VectorXd z_;
  NeighborGraph graph_;
  ConditioningSets csets_;
  std::shared_ptr<const ThetaLayout> layout_;
  std::vector<int> covariance_indices_;  // unconstrained entries that move the kernel

  struct Cache;
  std::shared_ptr<Cache> cache_;
  mutable int numerical_rejections_ = 0;
};

/// One sampler assignment: a univariate random walk, a multivariate random
/// walk with adapted proposal covariance, or a univariate slice sampler.
/// Adaptation runs every `adapt_interval` iterations during burn-in with a
/// Robbins-Monro factor decaying as round^(-1/2), then freezes.
struct SamplerSpec {
  enum class Kind { rw, block_rw, slice };
  Kind kind = Kind::rw;
  std::vector<int> indices;  // positions in the unconstrained vector
  std::string label;
  double initial_scale = 0.5;
  int adapt_interval = 200;
  double target_accept = 0.44;  // 0.234 for blocks

  static SamplerSpec rw(int index, std::string label, double scale = 0.5);
  static SamplerSpec block_rw(std::vector<int> indices, std::string label, double scale = 0.5);
  static SamplerSpec slice(int index, std::string label, double width = 0.5);
};

/// Scheme knobs mirroring the sub-block sampling families: latent-field
/// sub-block size, joint vs separate component blocks, and the sampler kind
/// for latent hyperparameters.
struct SchemeConfig {
  int latent_block_size = 16;
  bool latent_joint = true;
  bool hyper_slice = false;  // slice instead of rw for latent hyperparameters
  double initial_scale = 0.5;
};

/// Groups knot indices into ceil(K / block_size) spatially compact blocks
/// (seeded k-means on the knot coordinates).
std::vector<std::vector<int>> spatial_subblocks(const Eigen::MatrixXd& knots, int block_size,
                                                std::uint64_t seed);

/// Default sampler assignment for a model: latent w fields get spatial
/// sub-block random walks, SPD and multi-coefficient blocks get block random
/// walks, scalars get univariate samplers.
std::vector<SamplerSpec> build_scheme(const ThetaLayout& layout, const ModelSpec& model,
                                      const SchemeConfig& config);

/// Mutable chain state threaded through the samplers.
struct ChainState {
  ThetaState theta;
  double log_post = 0.0;
  long iteration = 0;
  std::mt19937_64 rng;

  struct Adaptation {
    double scale = 0.5;
    long proposals = 0;
    long accepts = 0;
    long rounds = 0;
    long total_proposals = 0;
    long total_accepts = 0;
    double move_sum = 0.0;  // slice width adaptation
    // block proposal: running moments of the targeted subvector
    Eigen::VectorXd mean;
    Eigen::MatrixXd scatter;
    long moment_count = 0;
    Eigen::MatrixXd proposal_chol;  // empty until enough history
  };
  std::vector<Adaptation> adaptation;
  bool adapting = true;

  explicit ChainState(ThetaState theta_) : theta(std::move(theta_)) {}
};

/// Metropolis log acceptance probability min(0, proposed - current).
double metropolis_log_accept(double log_post_current, double log_post_proposed);

void rw_step(ChainState& state, const SamplerSpec& spec, int spec_index,
             const PosteriorModel& posterior);
void block_rw_step(ChainState& state, const SamplerSpec& spec, int spec_index,
                   const PosteriorModel& posterior);
void slice_step(ChainState& state, const SamplerSpec& spec, int spec_index,
                const PosteriorModel& posterior);

struct ChainOptions {
  long iterations = 1000;
  long burnin = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  bool progress = true;  // progress lines on stderr every 1000 iterations
  std::optional<ThetaState> init;
};

struct PosteriorSamples {
  Eigen::MatrixXd draws;  // L x P, constrained (original) scale
  std::vector<std::string> names;
  std::vector<int> sampled;  // per column: 1 when the parameter was sampled
  long iterations = 0;
  long burnin = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> sampler_labels;
  std::vector<double> acceptance_rates;  // slice samplers report 1
};

/// Sequential sweep over the scheme per iteration; retains thinned
/// post-burn-in draws. Throws config_error when the scheme does not cover
/// every sampled parameter exactly once, or when the initial posterior is
/// degenerate (the offending prior is named).
PosteriorSamples run_chain(const PosteriorModel& posterior,
                           const std::vector<SamplerSpec>& scheme, const ChainOptions& options);

/// Effective sample size via Geyer's initial positive sequence truncation.
/// A constant chain reports 0 (flagged, not an error). Requires L >= 10.
double effective_sample_size(const Eigen::VectorXd& draws);

struct EfficiencyReport {
  std::vector<std::string> names;
  Eigen::VectorXd ess;
  Eigen::VectorXd ess_per_second;
  double min_ess = 0.0;
  double min_efficiency = 0.0;  // the scheme-selection metric
  std::vector<int> constant_flags;
};

EfficiencyReport efficiency_report(const PosteriorSamples& samples);

}  // namespace nsgp

#endif  // NSGP_MCMC_HPP
