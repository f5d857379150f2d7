/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_PROCESS_MODELS_HPP
#define NSGP_PROCESS_MODELS_HPP

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nsgp/covariance.hpp"
#include "nsgp/matern.hpp"
#include "nsgp/theta.hpp"

namespace nsgp {

enum class ProcessTarget { mu, tau, sigma, Sigma };

/// Statistical model for one parameter process. Regression kinds read a
/// design matrix (intercept included); approximate-GP kinds read a knot set.
/// The iso kinds model a scalar anisotropy Sigma(s) * I_d.
enum class ProcessKind {
  constant,
  lin_reg,          // mu only
  log_lin_reg,      // tau, sigma
  approx_gp,        // mu (identity link), tau, sigma
  cov_reg,          // Sigma only
  comp_reg,         // Sigma only, d = 2
  np_approx_gp,     // Sigma only, d = 2
  iso_constant,     // Sigma only, scalar
  iso_log_lin_reg,  // Sigma only, scalar
  iso_approx_gp     // Sigma only, scalar
};

std::string to_string(ProcessTarget target);
std::string to_string(ProcessKind kind);
ProcessKind process_kind_from_string(const std::string& name);

struct ProcessModelSpec {
  ProcessTarget target = ProcessTarget::mu;
  ProcessKind kind = ProcessKind::constant;
  Eigen::MatrixXd design;  // N x p covariates, intercept column included
  Eigen::MatrixXd knots;   // K x d knot locations for approx-GP kinds
  double nu_phi = 5.0;     // latent-GP smoothness, fixed (never sampled)
  double eigen_cap = 0.0;  // > 0 caps the anisotropy eigenvalue processes
};

/// Rejects illegal (target, kind) pairs, missing design/knot inputs, and the
/// d != 2 restriction of the rotation parameterization. The message names
/// both the target and the kind.
void validate_process_spec(const ProcessModelSpec& spec, int spatial_dim);

struct ApproxGpHyper {
  double mu_phi = 0.0;
  double sigma_phi = 1.0;
  double rho_phi = 1.0;
  double nu_phi = 5.0;
};

/// Radial-basis representation of a latent stationary GP: P holds the
/// observation-to-knot Matern correlations and V_inv_sqrt the symmetric
/// inverse square root of the knot-to-knot correlation matrix.
struct ApproxGPBasis {
  Eigen::MatrixXd knots;
  Eigen::MatrixXd P;
  Eigen::MatrixXd V_inv_sqrt;
  ApproxGpHyper hyper;
  Eigen::VectorXd w;  // latent coefficients (empty until set by the caller)
};

/// Throws config_error on duplicate knots. Eigenvalues of the knot
/// correlation matrix are floored at 1e-10 before the inverse square root.
ApproxGPBasis build_basis(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& knots,
                          const ApproxGpHyper& hyper);

/// mu_phi * 1 + sigma_phi * P V^(-1/2) w  (the log-scale field). The first
/// overload reads the hyperparameters stored in the basis.
Eigen::VectorXd basis_log_field(const ApproxGPBasis& basis, const Eigen::VectorXd& w);
Eigen::VectorXd basis_log_field(const ApproxGPBasis& basis, double mu_phi, double sigma_phi,
                                const Eigen::VectorXd& w);

enum class LikelihoodKind { full_gp, nngp, sgv };
std::string to_string(LikelihoodKind kind);
LikelihoodKind likelihood_from_string(const std::string& name);

/// Declarative model: one process model per parameter, the likelihood kind,
/// the neighbor budget, the data-level smoothness, and prior overrides keyed
/// by parameter name.
struct ModelSpec {
  ProcessModelSpec mu;
  ProcessModelSpec tau;
  ProcessModelSpec sigma;
  ProcessModelSpec Sigma;
  LikelihoodKind likelihood = LikelihoodKind::full_gp;
  int k = 15;
  MaternSpec matern;
  int dense_cap = 5000;
  std::map<std::string, PriorSpec> priors;
};

ModelSpec make_default_model();
void validate_model(const ModelSpec& model, int spatial_dim);

/// Design matrices for evaluating the parameter processes at new locations.
/// Only targets whose model is regression-based need a matrix.
struct DesignSet {
  Eigen::MatrixXd mu, tau, sigma, Sigma;
};

/// Defaults: beta and latent-GP means ~ Normal(0, 100^2); tau, sigma and
/// latent-GP sd/range ~ Uniform(0, 100); regression coefficients and SPD
/// Cholesky entries ~ Normal(0, 10^2); latent w ~ Normal(0, 1) (structural);
/// rotation gamma ~ Uniform(0, pi/2). ModelSpec.priors overrides by name;
/// unknown names are rejected.
std::shared_ptr<const ThetaLayout> build_theta_layout(const ModelSpec& model, int spatial_dim);

/// Per-location values of a scalar parameter process (mu, tau or sigma).
Eigen::VectorXd eval_scalar_process(const ProcessModelSpec& spec, const ThetaState& theta,
                                    const Eigen::MatrixXd& coords);

/// Per-location anisotropy matrices (full kinds).
std::vector<Eigen::MatrixXd> eval_anisotropy(const ProcessModelSpec& spec, const ThetaState& theta,
                                             const Eigen::MatrixXd& coords);
/// Per-location scalar anisotropy (iso kinds).
Eigen::VectorXd eval_anisotropy_scalar(const ProcessModelSpec& spec, const ThetaState& theta,
                                       const Eigen::MatrixXd& coords);

bool is_iso_kind(ProcessKind kind);

/// Evaluates all four processes into a KernelField. Deterministic in
/// (model, theta, coords).
KernelField assemble_kernel_field(const ModelSpec& model, const ThetaState& theta,
                                  const Eigen::MatrixXd& coords);

/// Assembler bound to one coordinate set. Memoizes the approx-GP bases,
/// which change only when the corresponding range hyperparameter moves;
/// repeated assembly inside an MCMC sweep is the hot path.
class KernelFieldAssembler {
 public:
  KernelFieldAssembler(ModelSpec model, Eigen::MatrixXd coords);

  const ModelSpec& model() const { return model_; }
  const Eigen::MatrixXd& coords() const { return coords_; }
  int spatial_dim() const { return static_cast<int>(coords_.cols()); }

  KernelField assemble(const ThetaState& theta) const;

  /// Mean vector only (cheap path for mean-parameter updates).
  Eigen::VectorXd assemble_mean(const ThetaState& theta) const;

  /// Evaluation at new locations (predictions). Regression-based processes
  /// take their covariates from `designs`; approx-GP processes rebuild P.
  KernelField assemble_at(const ThetaState& theta, const Eigen::MatrixXd& coords,
                          const DesignSet& designs) const;

 private:
  ModelSpec model_;
  Eigen::MatrixXd coords_;
  struct Caches;
  std::shared_ptr<Caches> caches_;
};

}  // namespace nsgp

#endif  // NSGP_PROCESS_MODELS_HPP
