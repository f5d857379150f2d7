/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_PREDICT_HPP
#define NSGP_PREDICT_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "nsgp/mcmc.hpp"
#include "nsgp/process_models.hpp"

namespace nsgp {

/// Prediction of the latent process y(.) or the response z(.) (the latter
/// adds the nugget variance at the prediction sites).
enum class PredictTarget { y, z };

struct PredictionRequest {
  Eigen::MatrixXd coords;  // M x d prediction locations
  DesignSet designs;       // covariates at the prediction sites
  PredictTarget target = PredictTarget::y;
  bool joint = false;  // joint draws; forbidden with the NNGP likelihood
};

/// Analytic conditional moments at one parameter draw: per-site predictive
/// mean and variance, plus the full predictive covariance when available
/// (fullGP path).
struct PredictiveMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  Eigen::MatrixXd cov;  // empty unless the dense path produced it
};

/// L x M draw matrix with per-site summaries (the summaries are the column
/// statistics of the draw matrix).
struct PredictiveDraws {
  Eigen::MatrixXd draws;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct PredictOptions {
  int sample_stride = 10;  // use every stride-th retained draw
  std::uint64_t seed = 0;
};

PredictiveMoments predict_full_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                       const PredictionRequest& request);
PredictiveMoments predict_nngp_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                       const PredictionRequest& request);
PredictiveMoments predict_sgv_moments(const PosteriorModel& posterior, const ThetaState& theta,
                                      const PredictionRequest& request);

/// Dense conditional-Gaussian prediction over retained samples (fullGP fit).
PredictiveDraws predict_full(const PosteriorModel& posterior, const PosteriorSamples& samples,
                             const PredictionRequest& request, const PredictOptions& options = {});

/// Local kriging (NNGP fit): each site conditions on its k nearest observed
/// sites under the marginal kernel. Marginal only; joint requests are
/// rejected.
PredictiveDraws predict_nngp(const PosteriorModel& posterior, const PosteriorSamples& samples,
                             const PredictionRequest& request, const PredictOptions& options = {});

/// Conditional simulation through the obs-pred extended sparse factor (SGV
/// fit): per sample, a fresh joint draw of the observed-site latents given
/// the data, then the appended prediction block.
PredictiveDraws predict_sgv(const PosteriorModel& posterior, const PosteriorSamples& samples,
                            const PredictionRequest& request, const PredictOptions& options = {});

/// Dispatch on the fitted likelihood kind.
PredictiveDraws predict(const PosteriorModel& posterior, const PosteriorSamples& samples,
                        const PredictionRequest& request, const PredictOptions& options = {});

/// Column mean and SD (denominator L-1) of a draw matrix, in site order.
/// Requires L >= 2.
void summarize(PredictiveDraws& draws);

}  // namespace nsgp

#endif  // NSGP_PREDICT_HPP
