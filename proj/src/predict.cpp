/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nsgp/errors.hpp"
#include "nsgp/likelihood.hpp"
#include "nsgp/linalg.hpp"
#include "nsgp/ordering.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

namespace {

KernelField concat_fields(const KernelField& a, const KernelField& b) {
  const int na = a.size(), nb = b.size();
  Eigen::VectorXd mu(na + nb), tau(na + nb), sigma(na + nb);
  mu << a.mu_vector(), b.mu_vector();
  tau << a.tau_vector(), b.tau_vector();
  sigma << a.sigma_vector(), b.sigma_vector();
  if (a.isotropic() != b.isotropic() || a.dim() != b.dim()) {
    throw config_error("cannot join kernel fields with different anisotropy modes");
  }
  if (a.isotropic()) {
    Eigen::VectorXd scalars(na + nb);
    for (int i = 0; i < na; ++i) scalars(i) = a.anisotropy_scalar(i);
    for (int i = 0; i < nb; ++i) scalars(na + i) = b.anisotropy_scalar(i);
    return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(scalars),
                       a.dim());
  }
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(na + nb);
  for (int i = 0; i < na; ++i) mats.push_back(a.anisotropy(i));
  for (int i = 0; i < nb; ++i) mats.push_back(b.anisotropy(i));
  return KernelField(std::move(mu), std::move(tau), std::move(sigma), std::move(mats));
}

Eigen::MatrixXd stack_coords(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

std::vector<int> iota_vec(int start, int count) {
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = start + i;
  return out;
}

// Strided retained-sample indices for prediction.
std::vector<long> prediction_rows(const PosteriorSamples& samples, int stride) {
  std::vector<long> rows;
  const long total = samples.draws.rows();
  const long step = std::max(1, stride);
  for (long l = 0; l < total; l += step) rows.push_back(l);
  return rows;
}

}  // namespace

PredictiveMoments predict_full_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                       const PredictionRequest& request) {
  const auto& assembler = posterior.assembler();
  const int n = static_cast<int>(assembler.coords().rows());
  const int m = static_cast<int>(request.coords.rows());
  PredictiveMoments out;
  if (m == 0) return out;

  const KernelField field_obs = assembler.assemble(theta);
  const KernelField field_pred = assembler.assemble_at(theta, request.coords, request.designs);
  const KernelField field = concat_fields(field_obs, field_pred);
  const Eigen::MatrixXd coords = stack_coords(assembler.coords(), request.coords);
  const MaternSpec& spec = posterior.model().matern;

  const Eigen::MatrixXd c_z = cov_matrix_full(assembler.coords(), field_obs, spec, true);
  const std::vector<int> obs_idx = iota_vec(0, n);
  const std::vector<int> pred_idx = iota_vec(n, m);
  const Eigen::MatrixXd c_cross = cov_matrix(pred_idx, obs_idx, coords, field, spec, false);
  const Eigen::MatrixXd c_pp = cov_matrix(pred_idx, pred_idx, coords, field, spec, false);

  const Eigen::LLT<Eigen::MatrixXd> llt =
      cholesky_with_jitter(c_z, "observed covariance for dense prediction");
  const Eigen::VectorXd resid = posterior.observations() - field_obs.mu_vector();
  out.mean = field_pred.mu_vector() + c_cross * llt.solve(resid);
  out.cov = c_pp - c_cross * llt.solve(c_cross.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  if (request.target == PredictTarget::z) {
    out.cov.diagonal() += field_pred.tau_vector().array().square().matrix();
  }
  out.var = out.cov.diagonal();
  return out;
}

PredictiveMoments predict_nngp_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                       const PredictionRequest& request) {
  const auto& assembler = posterior.assembler();
  const int n = static_cast<int>(assembler.coords().rows());
  const int m = static_cast<int>(request.coords.rows());
  PredictiveMoments out;
  if (m == 0) return out;

  const KernelField field_obs = assembler.assemble(theta);
  const KernelField field_pred = assembler.assemble_at(theta, request.coords, request.designs);
  const KernelField field = concat_fields(field_obs, field_pred);
  const Eigen::MatrixXd coords = stack_coords(assembler.coords(), request.coords);
  const MaternSpec& spec = posterior.model().matern;
  const int k = std::min(posterior.model().k, n);
  const Eigen::VectorXd resid = posterior.observations() - field_obs.mu_vector();

  out.mean.resize(m);
  out.var.resize(m);
  for (int p = 0; p < m; ++p) {
    // k nearest observed sites, ties to the smallest index
    std::vector<std::pair<double, int>> cand(n);
    for (int j = 0; j < n; ++j) {
      cand[j] = {(coords.row(n + p) - coords.row(j)).squaredNorm(), j};
    }
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    cand.resize(k);

    Eigen::MatrixXd k_gg(k, k);
    Eigen::VectorXd k_gp(k), r_g(k);
    for (int a = 0; a < k; ++a) {
      const int ja = cand[a].second;
      r_g(a) = resid(ja);
      k_gp(a) = covariance(n + p, ja, coords, field, spec);
      k_gg(a, a) = covariance(ja, ja, coords, field, spec) + field.tau(ja) * field.tau(ja);
      for (int b = a + 1; b < k; ++b) {
        const int jb = cand[b].second;
        k_gg(a, b) = covariance(ja, jb, coords, field, spec);
        k_gg(b, a) = k_gg(a, b);
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(
        std::move(k_gg), "local kriging system at prediction site " + std::to_string(p));
    const Eigen::VectorXd weights = llt.solve(k_gp);
    out.mean(p) = field_pred.mu(p) + weights.dot(r_g);
    double v = field_pred.sigma(p) * field_pred.sigma(p) - weights.dot(k_gp);
    if (request.target == PredictTarget::z) v += field_pred.tau(p) * field_pred.tau(p);
    out.var(p) = std::max(v, 0.0);
  }
  return out;
}

namespace {

// Extended SGV system over (w_O, y_P): observed columns from the fitted
// factor, one latent-only column per prediction site.
struct SgvPrediction {
  ReverseCholesky latent_precision;       // (N+M) x (N+M)
  Eigen::SparseMatrix<double> lambda_yz;  // (N+M) x N
  Eigen::VectorXd mean_resid;             // conditional mean of all latents
};

SgvPrediction build_sgv_prediction(const PosteriorModel& posterior, const ThetaState& theta,
                                   const PredictionRequest& request) {
  const auto& assembler = posterior.assembler();
  const int n = static_cast<int>(assembler.coords().rows());
  const int m = static_cast<int>(request.coords.rows());
  const MaternSpec& spec = posterior.model().matern;

  const KernelField field_obs = assembler.assemble(theta);
  const KernelField field_pred = assembler.assemble_at(theta, request.coords, request.designs);
  const KernelField field = concat_fields(field_obs, field_pred);

  OrderedCoords ord;
  ord.coords = assembler.coords();
  ord.perm = iota_vec(0, n);
  ord.inverse_perm = ord.perm;
  ord.n_observed = n;
  const auto [ext, ext_graph] =
      obs_pred_extend(ord, posterior.graph(), request.coords, std::max(1, posterior.model().k));

  const SparseUFactor u_obs = build_u_sgv(assembler.coords(), field_obs, spec, posterior.graph(),
                                          posterior.conditioning());

  std::vector<Eigen::Triplet<double>> y_rows, z_rows;
  for (int col = 0; col < u_obs.u.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(u_obs.u, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row % 2 == 0) {
        y_rows.emplace_back(row / 2, col, it.value());
      } else {
        z_rows.emplace_back(row / 2, col, it.value());
      }
    }
  }
  // prediction-site columns condition on latent values of their neighbors
  for (int j = 0; j < m; ++j) {
    const std::vector<int>& parents = ext_graph.nbr[n + j];
    const int np = static_cast<int>(parents.size());
    Eigen::MatrixXd k_pp(np, np);
    Eigen::VectorXd k_pi(np);
    for (int a = 0; a < np; ++a) {
      k_pi(a) = covariance(parents[a], n + j, ext.coords, field, spec);
      k_pp(a, a) = covariance(parents[a], parents[a], ext.coords, field, spec);
      for (int b = a + 1; b < np; ++b) {
        k_pp(a, b) = covariance(parents[a], parents[b], ext.coords, field, spec);
        k_pp(b, a) = k_pp(a, b);
      }
    }
    Eigen::VectorXd b_coef(np);
    double d = field.sigma(n + j) * field.sigma(n + j);
    if (np > 0) {
      const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(
          std::move(k_pp), "SGV prediction column " + std::to_string(j));
      b_coef = llt.solve(k_pi);
      d -= k_pi.dot(b_coef);
    }
    if (!(d > 0.0)) {
      throw numerical_error("nonpositive conditional variance at prediction site " +
                            std::to_string(j));
    }
    const double inv_sd = 1.0 / std::sqrt(d);
    const int col = 2 * n + j;
    for (int a = 0; a < np; ++a) y_rows.emplace_back(parents[a], col, -b_coef(a) * inv_sd);
    y_rows.emplace_back(n + j, col, inv_sd);
  }

  Eigen::SparseMatrix<double> u_y(n + m, 2 * n + m), u_z(n, 2 * n + m);
  u_y.setFromTriplets(y_rows.begin(), y_rows.end());
  u_z.setFromTriplets(z_rows.begin(), z_rows.end());

  SgvPrediction out;
  Eigen::SparseMatrix<double> a = u_y * u_y.transpose();
  out.lambda_yz = u_y * u_z.transpose();
  out.lambda_yz.makeCompressed();
  out.latent_precision = ReverseCholesky(std::move(a));
  const Eigen::VectorXd resid = posterior.observations() - field_obs.mu_vector();
  out.mean_resid = out.latent_precision.solve(-(out.lambda_yz * resid));
  return out;
}

}  // namespace

PredictiveMoments predict_sgv_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                      const PredictionRequest& request) {
  const int n = static_cast<int>(posterior.assembler().coords().rows());
  const int m = static_cast<int>(request.coords.rows());
  PredictiveMoments out;
  if (m == 0) return out;

  const SgvPrediction pred = build_sgv_prediction(posterior, theta, request);
  const KernelField field_pred =
      posterior.assembler().assemble_at(theta, request.coords, request.designs);

  out.mean = field_pred.mu_vector() + pred.mean_resid.tail(m);
  out.var = pred.latent_precision.marginal_variances(iota_vec(n, m));
  if (request.target == PredictTarget::z) {
    out.var += field_pred.tau_vector().array().square().matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

PredictiveDraws run_sample_loop(const PosteriorModel& posterior, const PosteriorSamples& samples,
                                const PredictionRequest& request, const PredictOptions& options,
                                LikelihoodKind kind) {
  const int m = static_cast<int>(request.coords.rows());
  const auto rows = prediction_rows(samples, options.sample_stride);
  const long num_draws = static_cast<long>(rows.size());

  PredictiveDraws out;
  out.draws.resize(num_draws, m);
  if (m == 0 || num_draws == 0) {
    out.draws.resize(num_draws, m);
    out.mean = Eigen::VectorXd::Zero(m);
    out.sd = Eigen::VectorXd::Zero(m);
    return out;
  }

  for (long t = 0; t < num_draws; ++t) {
    const long l = rows[t];
    const ThetaState theta =
        theta_from_constrained(posterior.layout(), samples.draws.row(l).transpose());
    try {
      std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(l)));
      std::normal_distribution<double> nd;
      switch (kind) {
        case LikelihoodKind::full_gp: {
          const PredictiveMoments mom = predict_full_moments(posterior, theta, request);
          if (request.joint) {
            const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(
                mom.cov, "predictive covariance at sample " + std::to_string(l));
            Eigen::VectorXd xi(m);
            for (int p = 0; p < m; ++p) xi(p) = nd(rng);
            out.draws.row(t) = (mom.mean + Eigen::MatrixXd(llt.matrixL()) * xi).transpose();
          } else {
            for (int p = 0; p < m; ++p) {
              std::mt19937_64 site_rng(
                  mix_seed(options.seed, static_cast<std::uint64_t>(l), p + 1));
              out.draws(t, p) = mom.mean(p) + std::sqrt(std::max(mom.var(p), 0.0)) *
                                                  std::normal_distribution<double>()(site_rng);
            }
          }
          break;
        }
        case LikelihoodKind::nngp: {
          const PredictiveMoments mom = predict_nngp_moments(posterior, theta, request);
          for (int p = 0; p < m; ++p) {
            std::mt19937_64 site_rng(
                mix_seed(options.seed, static_cast<std::uint64_t>(l), p + 1));
            out.draws(t, p) = mom.mean(p) + std::sqrt(std::max(mom.var(p), 0.0)) *
                                                std::normal_distribution<double>()(site_rng);
          }
          break;
        }
        case LikelihoodKind::sgv: {
          const int n = static_cast<int>(posterior.assembler().coords().rows());
          const SgvPrediction pred = build_sgv_prediction(posterior, theta, request);
          const KernelField field_pred =
              posterior.assembler().assemble_at(theta, request.coords, request.designs);
          Eigen::VectorXd xi(n + m);
          for (int p = 0; p < n + m; ++p) xi(p) = nd(rng);
          const Eigen::VectorXd latent = pred.latent_precision.correlated_draw(pred.mean_resid, xi);
          Eigen::VectorXd value = field_pred.mu_vector() + latent.tail(m);
          if (request.target == PredictTarget::z) {
            for (int p = 0; p < m; ++p) value(p) += field_pred.tau(p) * nd(rng);
          }
          out.draws.row(t) = value.transpose();
          break;
        }
      }
    } catch (const numerical_error& err) {
      throw numerical_error("prediction failed at retained sample " + std::to_string(l) + ": " +
                            err.what());
    }
  }
  summarize(out);
  return out;
}

}  // namespace

PredictiveDraws predict_full(const PosteriorModel& posterior, const PosteriorSamples& samples,
                             const PredictionRequest& request, const PredictOptions& options) {
  if (posterior.model().likelihood != LikelihoodKind::full_gp) {
    throw config_error("predict_full requires a fullGP fit");
  }
  return run_sample_loop(posterior, samples, request, options, LikelihoodKind::full_gp);
}

PredictiveDraws predict_nngp(const PosteriorModel& posterior, const PosteriorSamples& samples,
                             const PredictionRequest& request, const PredictOptions& options) {
  if (posterior.model().likelihood != LikelihoodKind::nngp) {
    throw config_error("predict_nngp requires an NNGP fit");
  }
  if (request.joint) {
    throw config_error("NNGP prediction is marginal only (local kriging); "
                       "joint draws require SGV or fullGP");
  }
  return run_sample_loop(posterior, samples, request, options, LikelihoodKind::nngp);
}

PredictiveDraws predict_sgv(const PosteriorModel& posterior, const PosteriorSamples& samples,
                            const PredictionRequest& request, const PredictOptions& options) {
  if (posterior.model().likelihood != LikelihoodKind::sgv) {
    throw config_error("predict_sgv requires an SGV fit");
  }
  return run_sample_loop(posterior, samples, request, options, LikelihoodKind::sgv);
}

PredictiveDraws predict(const PosteriorModel& posterior, const PosteriorSamples& samples,
                        const PredictionRequest& request, const PredictOptions& options) {
  switch (posterior.model().likelihood) {
    case LikelihoodKind::full_gp:
      return predict_full(posterior, samples, request, options);
    case LikelihoodKind::nngp:
      return predict_nngp(posterior, samples, request, options);
    case LikelihoodKind::sgv:
      return predict_sgv(posterior, samples, request, options);
  }
  throw config_error("unknown likelihood kind");
}

void summarize(PredictiveDraws& draws) {
  const Eigen::Index m = draws.draws.cols();
  const Eigen::Index l = draws.draws.rows();
  draws.mean.resize(m);
  draws.sd.resize(m);
  if (m == 0) return;
  if (l < 2) throw config_error("summaries require at least 2 predictive draws");
  for (Eigen::Index p = 0; p < m; ++p) {
    const double mean = draws.draws.col(p).mean();
    draws.mean(p) = mean;
    draws.sd(p) =
        std::sqrt((draws.draws.col(p).array() - mean).square().sum() / static_cast<double>(l - 1));
  }
}

}  // namespace nsgp
