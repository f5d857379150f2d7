/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/process_models.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kHalfPi = M_PI / 2.0;

Eigen::MatrixXd rotation_sigma(double lambda1, double lambda2, double gamma) {
  const double c = std::cos(gamma);
  const double s = std::sin(gamma);
  Eigen::MatrixXd out(2, 2);
  out(0, 0) = c * c * lambda1 + s * s * lambda2;
  out(0, 1) = c * s * (lambda1 - lambda2);
  out(1, 0) = out(0, 1);
  out(1, 1) = s * s * lambda1 + c * c * lambda2;
  return out;
}

const Eigen::MatrixXd& require_design(const ProcessModelSpec& spec, const Eigen::MatrixXd& coords,
                                      const Eigen::MatrixXd* design_override) {
  const Eigen::MatrixXd& design =
      (design_override && design_override->size() > 0) ? *design_override : spec.design;
  if (design.size() == 0) {
    throw data_error("process model '" + to_string(spec.kind) + "' for target '" +
                     to_string(spec.target) + "' requires a design matrix");
  }
  if (design.rows() != coords.rows()) {
    throw data_error("design matrix for target '" + to_string(spec.target) + "' has " +
                     std::to_string(design.rows()) + " rows, expected " +
                     std::to_string(coords.rows()));
  }
  return design;
}

// One memoized basis per latent process, keyed by the range hyperparameter.
struct CacheSlot {
  std::mutex mutex;
  double rho = -1.0;
  std::shared_ptr<const ApproxGPBasis> basis;
};

std::shared_ptr<const ApproxGPBasis> basis_for(const ProcessModelSpec& spec,
                                               const Eigen::MatrixXd& coords, double rho,
                                               CacheSlot* slot) {
  if (slot) {
    std::lock_guard<std::mutex> guard(slot->mutex);
    if (slot->basis && slot->rho == rho) return slot->basis;
    auto basis = std::make_shared<ApproxGPBasis>(
        build_basis(coords, spec.knots, ApproxGpHyper{0.0, 1.0, rho, spec.nu_phi}));
    slot->rho = rho;
    slot->basis = basis;
    return basis;
  }
  return std::make_shared<ApproxGPBasis>(
      build_basis(coords, spec.knots, ApproxGpHyper{0.0, 1.0, rho, spec.nu_phi}));
}

// Latent log-scale field for an approx-GP component with parameter names
// prefix_gp_mean / prefix_gp_sd / prefix_gp_range / prefix_w.
Eigen::VectorXd latent_log_field(const ProcessModelSpec& spec, const ThetaState& theta,
                                 const Eigen::MatrixXd& coords, const std::string& prefix,
                                 CacheSlot* slot) {
  const double mu_phi = theta.constrained_scalar(prefix + "_gp_mean");
  const double sigma_phi = theta.constrained_scalar(prefix + "_gp_sd");
  const double rho_phi = theta.constrained_scalar(prefix + "_gp_range");
  const Eigen::VectorXd w = theta.constrained(prefix + "_w");
  const auto basis = basis_for(spec, coords, rho_phi, slot);
  return basis_log_field(*basis, mu_phi, sigma_phi, w);
}

Eigen::VectorXd scalar_process_values(const ProcessModelSpec& spec, const ThetaState& theta,
                                      const Eigen::MatrixXd& coords,
                                      const Eigen::MatrixXd* design_override, CacheSlot* slot) {
  const Eigen::Index n = coords.rows();
  const std::string prefix = to_string(spec.target);
  const bool is_mu = spec.target == ProcessTarget::mu;
  switch (spec.kind) {
    case ProcessKind::constant: {
      const double value = theta.constrained_scalar(is_mu ? "beta" : prefix);
      return Eigen::VectorXd::Constant(n, value);
    }
    case ProcessKind::lin_reg: {
      const Eigen::MatrixXd& design = require_design(spec, coords, design_override);
      const Eigen::VectorXd beta = theta.constrained("beta");
      if (beta.size() != design.cols()) {
        throw data_error("design matrix for target 'mu' has " + std::to_string(design.cols()) +
                         " columns, expected " + std::to_string(beta.size()));
      }
      return design * beta;
    }
    case ProcessKind::log_lin_reg: {
      const Eigen::MatrixXd& design = require_design(spec, coords, design_override);
      const Eigen::VectorXd coef = theta.constrained(prefix + "_coef");
      if (coef.size() != design.cols()) {
        throw data_error("design matrix for target '" + prefix + "' has " +
                         std::to_string(design.cols()) + " columns, expected " +
                         std::to_string(coef.size()));
      }
      return (design * coef).array().exp();
    }
    case ProcessKind::approx_gp: {
      const Eigen::VectorXd log_field = latent_log_field(spec, theta, coords, prefix, slot);
      return is_mu ? log_field : log_field.array().exp().matrix();
    }
    default:
      throw config_error("process model '" + to_string(spec.kind) +
                         "' is not a scalar process model for target '" + prefix + "'");
  }
}

std::vector<Eigen::MatrixXd> anisotropy_values(const ProcessModelSpec& spec,
                                               const ThetaState& theta,
                                               const Eigen::MatrixXd& coords,
                                               const Eigen::MatrixXd* design_override,
                                               CacheSlot* slots) {
  const Eigen::Index n = coords.rows();
  const int d = static_cast<int>(coords.cols());
  const double cap = spec.eigen_cap;
  const auto capped = [cap](double x) { return cap > 0.0 ? std::min(x, cap) : x; };

  std::vector<Eigen::MatrixXd> out;
  out.reserve(n);
  switch (spec.kind) {
    case ProcessKind::constant: {
      Eigen::MatrixXd sigma_mat;
      if (d == 2) {
        sigma_mat = rotation_sigma(capped(theta.constrained_scalar("Sigma_lambda1")),
                                   capped(theta.constrained_scalar("Sigma_lambda2")),
                                   theta.constrained_scalar("Sigma_gamma"));
      } else {
        sigma_mat = theta.spd_matrix("Sigma_chol");
      }
      out.assign(n, sigma_mat);
      return out;
    }
    case ProcessKind::cov_reg: {
      const Eigen::MatrixXd& design = require_design(spec, coords, design_override);
      const Eigen::MatrixXd psi = theta.spd_matrix("Sigma_psi");
      const Eigen::VectorXd gamma_flat = theta.constrained("Sigma_gamma_mat");
      if (gamma_flat.size() != d * design.cols()) {
        throw data_error("covReg coefficient matrix expects " +
                         std::to_string(d * design.cols()) + " entries, got " +
                         std::to_string(gamma_flat.size()));
      }
      const Eigen::Map<const Eigen::MatrixXd> gamma(gamma_flat.data(), d, design.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd gx = gamma * design.row(i).transpose();
        out.push_back(psi + gx * gx.transpose());
      }
      return out;
    }
    case ProcessKind::comp_reg: {
      const Eigen::MatrixXd& design = require_design(spec, coords, design_override);
      const Eigen::VectorXd a1 = theta.constrained("Sigma_coef1");
      const Eigen::VectorXd a2 = theta.constrained("Sigma_coef2");
      const Eigen::VectorXd a3 = theta.constrained("Sigma_coef3");
      if (a1.size() != design.cols()) {
        throw data_error("compReg design has " + std::to_string(design.cols()) +
                         " columns, expected " + std::to_string(a1.size()));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda1 = capped(std::exp(design.row(i).dot(a1)));
        const double lambda2 = capped(std::exp(design.row(i).dot(a2)));
        const double gamma = kHalfPi * expit(design.row(i).dot(a3));
        out.push_back(rotation_sigma(lambda1, lambda2, gamma));
      }
      return out;
    }
    case ProcessKind::np_approx_gp: {
      const Eigen::VectorXd f1 =
          latent_log_field(spec, theta, coords, "Sigma1", slots ? &slots[0] : nullptr);
      const Eigen::VectorXd f2 =
          latent_log_field(spec, theta, coords, "Sigma2", slots ? &slots[1] : nullptr);
      const Eigen::VectorXd f3 =
          latent_log_field(spec, theta, coords, "Sigma3", slots ? &slots[2] : nullptr);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda1 = capped(std::exp(f1(i)));
        const double lambda2 = capped(std::exp(f2(i)));
        const double gamma = kHalfPi * expit(f3(i));
        out.push_back(rotation_sigma(lambda1, lambda2, gamma));
      }
      return out;
    }
    default:
      throw config_error("process model '" + to_string(spec.kind) +
                         "' is not a full anisotropy model");
  }
}

Eigen::VectorXd anisotropy_scalar_values(const ProcessModelSpec& spec, const ThetaState& theta,
                                         const Eigen::MatrixXd& coords,
                                         const Eigen::MatrixXd* design_override, CacheSlot* slot) {
  const Eigen::Index n = coords.rows();
  switch (spec.kind) {
    case ProcessKind::iso_constant:
      return Eigen::VectorXd::Constant(n, theta.constrained_scalar("Sigma_iso"));
    case ProcessKind::iso_log_lin_reg: {
      const Eigen::MatrixXd& design = require_design(spec, coords, design_override);
      const Eigen::VectorXd coef = theta.constrained("Sigma_coef");
      if (coef.size() != design.cols()) {
        throw data_error("isoLogLinReg design has " + std::to_string(design.cols()) +
                         " columns, expected " + std::to_string(coef.size()));
      }
      return (design * coef).array().exp();
    }
    case ProcessKind::iso_approx_gp:
      return latent_log_field(spec, theta, coords, "Sigma", slot).array().exp();
    default:
      throw config_error("process model '" + to_string(spec.kind) +
                         "' is not a scalar anisotropy model");
  }
}

}  // namespace

std::string to_string(ProcessTarget target) {
  switch (target) {
    case ProcessTarget::mu:
      return "mu";
    case ProcessTarget::tau:
      return "tau";
    case ProcessTarget::sigma:
      return "sigma";
    case ProcessTarget::Sigma:
      return "Sigma";
  }
  return "?";
}

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::constant:
      return "constant";
    case ProcessKind::lin_reg:
      return "linReg";
    case ProcessKind::log_lin_reg:
      return "logLinReg";
    case ProcessKind::approx_gp:
      return "approxGP";
    case ProcessKind::cov_reg:
      return "covReg";
    case ProcessKind::comp_reg:
      return "compReg";
    case ProcessKind::np_approx_gp:
      return "npApproxGP";
    case ProcessKind::iso_constant:
      return "isoConstant";
    case ProcessKind::iso_log_lin_reg:
      return "isoLogLinReg";
    case ProcessKind::iso_approx_gp:
      return "isoApproxGP";
  }
  return "?";
}

ProcessKind process_kind_from_string(const std::string& name) {
  if (name == "constant") return ProcessKind::constant;
  if (name == "linReg") return ProcessKind::lin_reg;
  if (name == "logLinReg") return ProcessKind::log_lin_reg;
  if (name == "approxGP") return ProcessKind::approx_gp;
  if (name == "covReg") return ProcessKind::cov_reg;
  if (name == "compReg") return ProcessKind::comp_reg;
  if (name == "npApproxGP") return ProcessKind::np_approx_gp;
  if (name == "isoConstant") return ProcessKind::iso_constant;
  if (name == "isoLogLinReg") return ProcessKind::iso_log_lin_reg;
  if (name == "isoApproxGP") return ProcessKind::iso_approx_gp;
  throw config_error("unknown process model kind: '" + name + "'");
}

std::string to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::full_gp:
      return "fullGP";
    case LikelihoodKind::nngp:
      return "NNGP";
    case LikelihoodKind::sgv:
      return "SGV";
  }
  return "?";
}

LikelihoodKind likelihood_from_string(const std::string& name) {
  if (name == "fullGP") return LikelihoodKind::full_gp;
  if (name == "NNGP") return LikelihoodKind::nngp;
  if (name == "SGV") return LikelihoodKind::sgv;
  throw config_error("unknown likelihood kind: '" + name + "' (expected fullGP, NNGP or SGV)");
}

bool is_iso_kind(ProcessKind kind) {
  return kind == ProcessKind::iso_constant || kind == ProcessKind::iso_log_lin_reg ||
         kind == ProcessKind::iso_approx_gp;
}

void validate_process_spec(const ProcessModelSpec& spec, int spatial_dim) {
  const auto illegal = [&] {
    throw config_error("process model '" + to_string(spec.kind) + "' is not legal for target '" +
                       to_string(spec.target) + "'");
  };
  const bool scalar_target = spec.target != ProcessTarget::Sigma;
  switch (spec.kind) {
    case ProcessKind::constant:
      break;
    case ProcessKind::lin_reg:
      if (spec.target != ProcessTarget::mu) illegal();
      break;
    case ProcessKind::log_lin_reg:
      if (!scalar_target || spec.target == ProcessTarget::mu) illegal();
      break;
    case ProcessKind::approx_gp:
      if (!scalar_target) illegal();
      break;
    case ProcessKind::cov_reg:
      if (scalar_target) illegal();
      break;
    case ProcessKind::comp_reg:
    case ProcessKind::np_approx_gp:
      if (scalar_target) illegal();
      if (spatial_dim != 2) {
        throw config_error("process model '" + to_string(spec.kind) +
                           "' uses the 2-D rotation parameterization; got d=" +
                           std::to_string(spatial_dim) + " (use an iso model instead)");
      }
      break;
    case ProcessKind::iso_constant:
    case ProcessKind::iso_log_lin_reg:
    case ProcessKind::iso_approx_gp:
      if (scalar_target) illegal();
      break;
  }

  const bool needs_design =
      spec.kind == ProcessKind::lin_reg || spec.kind == ProcessKind::log_lin_reg ||
      spec.kind == ProcessKind::cov_reg || spec.kind == ProcessKind::comp_reg ||
      spec.kind == ProcessKind::iso_log_lin_reg;
  if (needs_design && spec.design.size() == 0) {
    throw config_error("process model '" + to_string(spec.kind) + "' for target '" +
                       to_string(spec.target) + "' requires a design matrix");
  }
  const bool needs_knots = spec.kind == ProcessKind::approx_gp ||
                           spec.kind == ProcessKind::np_approx_gp ||
                           spec.kind == ProcessKind::iso_approx_gp;
  if (needs_knots) {
    if (spec.knots.size() == 0) {
      throw config_error("process model '" + to_string(spec.kind) + "' for target '" +
                         to_string(spec.target) + "' requires knot locations");
    }
    if (!(spec.nu_phi > 0.0)) throw config_error("latent-GP smoothness nu_phi must be positive");
  }
}

ModelSpec make_default_model() {
  ModelSpec model;
  model.mu = {ProcessTarget::mu, ProcessKind::constant, {}, {}, 5.0, 0.0};
  model.tau = {ProcessTarget::tau, ProcessKind::constant, {}, {}, 5.0, 0.0};
  model.sigma = {ProcessTarget::sigma, ProcessKind::constant, {}, {}, 5.0, 0.0};
  model.Sigma = {ProcessTarget::Sigma, ProcessKind::constant, {}, {}, 5.0, 0.0};
  return model;
}

void validate_model(const ModelSpec& model, int spatial_dim) {
  if (model.mu.target != ProcessTarget::mu || model.tau.target != ProcessTarget::tau ||
      model.sigma.target != ProcessTarget::sigma || model.Sigma.target != ProcessTarget::Sigma) {
    throw config_error("ModelSpec process targets are mismatched");
  }
  validate_process_spec(model.mu, spatial_dim);
  validate_process_spec(model.tau, spatial_dim);
  validate_process_spec(model.sigma, spatial_dim);
  validate_process_spec(model.Sigma, spatial_dim);
  if (model.k < 1 && model.likelihood != LikelihoodKind::full_gp) {
    throw config_error("neighbor budget k must be >= 1 for approximate likelihoods");
  }
  MaternSpec check(model.matern.nu);
  (void)check;
}

ApproxGPBasis build_basis(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& knots,
                          const ApproxGpHyper& hyper) {
  const Eigen::Index n = coords.rows();
  const Eigen::Index k = knots.rows();
  if (k < 1) throw config_error("approx-GP basis requires at least one knot");
  if (knots.cols() != coords.cols()) {
    throw config_error("knot dimension disagrees with coordinate dimension");
  }
  if (!(hyper.rho_phi > 0.0)) throw std::domain_error("approx-GP range rho_phi must be positive");

  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      if ((knots.row(a) - knots.row(b)).norm() == 0.0) {
        throw config_error("degenerate knots: rows " + std::to_string(a) + " and " +
                           std::to_string(b) + " coincide");
      }
    }
  }

  const MaternSpec latent(hyper.nu_phi);
  ApproxGPBasis basis;
  basis.knots = knots;
  basis.hyper = hyper;
  basis.P.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      basis.P(i, j) =
          matern_correlation((coords.row(i) - knots.row(j)).norm() / hyper.rho_phi, latent);
    }
  }
  Eigen::MatrixXd v(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    v(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      v(i, j) = matern_correlation((knots.row(i) - knots.row(j)).norm() / hyper.rho_phi, latent);
      v(j, i) = v(i, j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  if (es.info() != Eigen::Success) {
    throw numerical_error("eigendecomposition of the knot correlation matrix failed");
  }
  const Eigen::VectorXd floored = es.eigenvalues().cwiseMax(1e-10);
  basis.V_inv_sqrt = es.eigenvectors() * floored.array().rsqrt().matrix().asDiagonal() *
                     es.eigenvectors().transpose();
  return basis;
}

Eigen::VectorXd basis_log_field(const ApproxGPBasis& basis, const Eigen::VectorXd& w) {
  return basis_log_field(basis, basis.hyper.mu_phi, basis.hyper.sigma_phi, w);
}

Eigen::VectorXd basis_log_field(const ApproxGPBasis& basis, double mu_phi, double sigma_phi,
                                const Eigen::VectorXd& w) {
  if (w.size() != basis.P.cols()) {
    throw config_error("latent coefficient vector has size " + std::to_string(w.size()) +
                       ", expected " + std::to_string(basis.P.cols()));
  }
  return Eigen::VectorXd::Constant(basis.P.rows(), mu_phi) +
         sigma_phi * (basis.P * (basis.V_inv_sqrt * w));
}

std::shared_ptr<const ThetaLayout> build_theta_layout(const ModelSpec& model, int spatial_dim) {
  validate_model(model, spatial_dim);
  auto layout = std::make_shared<ThetaLayout>();

  const PriorSpec diffuse_normal = PriorSpec::normal(0.0, 100.0);
  const PriorSpec coef_normal = PriorSpec::normal(0.0, 10.0);
  const PriorSpec positive_uniform = PriorSpec::uniform(0.0, 100.0);
  const PriorSpec unit_normal = PriorSpec::normal(0.0, 1.0);

  const auto add_latent_gp = [&](const std::string& prefix, int num_knots, bool mean_only) {
    layout->add({prefix + "_gp_mean", 0, 1, Transform::identity, 0, 1, 0, diffuse_normal,
                 mean_only});
    layout->add({prefix + "_gp_sd", 0, 1, Transform::log_positive, 0, 1, 0, positive_uniform,
                 mean_only});
    layout->add({prefix + "_gp_range", 0, 1, Transform::log_positive, 0, 1, 0, positive_uniform,
                 mean_only});
    layout->add({prefix + "_w", 0, num_knots, Transform::identity, 0, 1, 0, unit_normal,
                 mean_only});
  };

  // mu(.) enters the likelihood through the mean only
  switch (model.mu.kind) {
    case ProcessKind::constant:
      layout->add({"beta", 0, 1, Transform::identity, 0, 1, 0, diffuse_normal, true});
      break;
    case ProcessKind::lin_reg:
      layout->add({"beta", 0, static_cast<int>(model.mu.design.cols()), Transform::identity, 0, 1,
                   0, diffuse_normal, true});
      break;
    case ProcessKind::approx_gp:
      add_latent_gp("mu", static_cast<int>(model.mu.knots.rows()), true);
      break;
    default:
      throw config_error("process model '" + to_string(model.mu.kind) +
                         "' is not legal for target 'mu'");
  }

  for (const ProcessModelSpec* spec : {&model.tau, &model.sigma}) {
    const std::string prefix = to_string(spec->target);
    switch (spec->kind) {
      case ProcessKind::constant:
        layout->add({prefix, 0, 1, Transform::log_positive, 0, 1, 0, positive_uniform, false});
        break;
      case ProcessKind::log_lin_reg:
        layout->add({prefix + "_coef", 0, static_cast<int>(spec->design.cols()),
                     Transform::identity, 0, 1, 0, coef_normal, false});
        break;
      case ProcessKind::approx_gp:
        add_latent_gp(prefix, static_cast<int>(spec->knots.rows()), false);
        break;
      default:
        throw config_error("process model '" + to_string(spec->kind) +
                           "' is not legal for target '" + prefix + "'");
    }
  }

  const double lambda_hi = model.Sigma.eigen_cap > 0.0 ? model.Sigma.eigen_cap : 100.0;
  switch (model.Sigma.kind) {
    case ProcessKind::constant:
      if (spatial_dim == 2) {
        layout->add({"Sigma_lambda1", 0, 1, Transform::log_positive, 0, 1, 0,
                     PriorSpec::uniform(0.0, lambda_hi), false});
        layout->add({"Sigma_lambda2", 0, 1, Transform::log_positive, 0, 1, 0,
                     PriorSpec::uniform(0.0, lambda_hi), false});
        layout->add({"Sigma_gamma", 0, 1, Transform::scaled_logit, 0.0, kHalfPi, 0,
                     PriorSpec::uniform(0.0, kHalfPi), false});
      } else {
        layout->add({"Sigma_chol", 0, 0, Transform::cholesky_spd, 0, 1, spatial_dim, coef_normal,
                     false});
      }
      break;
    case ProcessKind::cov_reg:
      layout->add({"Sigma_psi", 0, 0, Transform::cholesky_spd, 0, 1, spatial_dim, coef_normal,
                   false});
      layout->add({"Sigma_gamma_mat", 0,
                   spatial_dim * static_cast<int>(model.Sigma.design.cols()), Transform::identity,
                   0, 1, 0, coef_normal, false});
      break;
    case ProcessKind::comp_reg: {
      const int p = static_cast<int>(model.Sigma.design.cols());
      layout->add({"Sigma_coef1", 0, p, Transform::identity, 0, 1, 0, coef_normal, false});
      layout->add({"Sigma_coef2", 0, p, Transform::identity, 0, 1, 0, coef_normal, false});
      layout->add({"Sigma_coef3", 0, p, Transform::identity, 0, 1, 0, coef_normal, false});
      break;
    }
    case ProcessKind::np_approx_gp: {
      const int num_knots = static_cast<int>(model.Sigma.knots.rows());
      add_latent_gp("Sigma1", num_knots, false);
      add_latent_gp("Sigma2", num_knots, false);
      add_latent_gp("Sigma3", num_knots, false);
      break;
    }
    case ProcessKind::iso_constant:
      layout->add({"Sigma_iso", 0, 1, Transform::log_positive, 0, 1, 0, positive_uniform, false});
      break;
    case ProcessKind::iso_log_lin_reg:
      layout->add({"Sigma_coef", 0, static_cast<int>(model.Sigma.design.cols()),
                   Transform::identity, 0, 1, 0, coef_normal, false});
      break;
    case ProcessKind::iso_approx_gp:
      add_latent_gp("Sigma", static_cast<int>(model.Sigma.knots.rows()), false);
      break;
    default:
      throw config_error("process model '" + to_string(model.Sigma.kind) +
                         "' is not legal for target 'Sigma'");
  }

  auto with_priors = std::make_shared<ThetaLayout>();
  for (ParamBlock block : layout->blocks()) {
    const auto it = model.priors.find(block.name);
    if (it != model.priors.end()) block.prior = it->second;
    block.offset = 0;
    with_priors->add(std::move(block));
  }
  for (const auto& [name, prior] : model.priors) {
    if (!with_priors->has(name)) {
      throw config_error("prior override for unknown parameter '" + name + "'");
    }
  }
  return with_priors;
}

Eigen::VectorXd eval_scalar_process(const ProcessModelSpec& spec, const ThetaState& theta,
                                    const Eigen::MatrixXd& coords) {
  return scalar_process_values(spec, theta, coords, nullptr, nullptr);
}

std::vector<Eigen::MatrixXd> eval_anisotropy(const ProcessModelSpec& spec, const ThetaState& theta,
                                             const Eigen::MatrixXd& coords) {
  return anisotropy_values(spec, theta, coords, nullptr, nullptr);
}

Eigen::VectorXd eval_anisotropy_scalar(const ProcessModelSpec& spec, const ThetaState& theta,
                                       const Eigen::MatrixXd& coords) {
  return anisotropy_scalar_values(spec, theta, coords, nullptr, nullptr);
}

struct KernelFieldAssembler::Caches {
  CacheSlot mu, tau, sigma;
  CacheSlot Sigma[3];
};

KernelFieldAssembler::KernelFieldAssembler(ModelSpec model, Eigen::MatrixXd coords)
    : model_(std::move(model)), coords_(std::move(coords)), caches_(std::make_shared<Caches>()) {
  validate_model(model_, spatial_dim());
}

KernelField assemble_kernel_field(const ModelSpec& model, const ThetaState& theta,
                                  const Eigen::MatrixXd& coords) {
  return KernelFieldAssembler(model, coords).assemble(theta);
}

KernelField KernelFieldAssembler::assemble(const ThetaState& theta) const {
  Eigen::VectorXd mu = scalar_process_values(model_.mu, theta, coords_, nullptr, &caches_->mu);
  Eigen::VectorXd tau = scalar_process_values(model_.tau, theta, coords_, nullptr, &caches_->tau);
  Eigen::VectorXd sigma =
      scalar_process_values(model_.sigma, theta, coords_, nullptr, &caches_->sigma);
  if (is_iso_kind(model_.Sigma.kind)) {
    Eigen::VectorXd scalar =
        anisotropy_scalar_values(model_.Sigma, theta, coords_, nullptr, &caches_->Sigma[0]);
    return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(scalar),
                       spatial_dim());
  }
  std::vector<Eigen::MatrixXd> mats =
      anisotropy_values(model_.Sigma, theta, coords_, nullptr, caches_->Sigma);
  return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(mats));
}

Eigen::VectorXd KernelFieldAssembler::assemble_mean(const ThetaState& theta) const {
  return scalar_process_values(model_.mu, theta, coords_, nullptr, &caches_->mu);
}

KernelField KernelFieldAssembler::assemble_at(const ThetaState& theta,
                                              const Eigen::MatrixXd& coords,
                                              const DesignSet& designs) const {
  Eigen::VectorXd mu = scalar_process_values(model_.mu, theta, coords, &designs.mu, nullptr);
  Eigen::VectorXd tau = scalar_process_values(model_.tau, theta, coords, &designs.tau, nullptr);
  Eigen::VectorXd sigma =
      scalar_process_values(model_.sigma, theta, coords, &designs.sigma, nullptr);
  if (is_iso_kind(model_.Sigma.kind)) {
    Eigen::VectorXd scalar =
        anisotropy_scalar_values(model_.Sigma, theta, coords, &designs.Sigma, nullptr);
    return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(scalar),
                       spatial_dim());
  }
  std::vector<Eigen::MatrixXd> mats =
      anisotropy_values(model_.Sigma, theta, coords, &designs.Sigma, nullptr);
  return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(mats));
}

}  // namespace nsgp
