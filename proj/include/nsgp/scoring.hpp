/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_SCORING_HPP
#define NSGP_SCORING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nsgp/mcmc.hpp"
#include "nsgp/predict.hpp"

namespace nsgp {

/// Random assignment of observations to folds 1..F; fold sizes differ by at
/// most one.
struct FoldPlan {
  std::vector<int> fold;  // fold id per observation, 0-based
  int num_folds = 0;
  std::uint64_t seed = 0;
};

FoldPlan make_folds(int n, int num_folds, std::uint64_t seed);

/// Mean squared prediction error. Throws data_error on empty input.
double score_mspe(const Eigen::VectorXd& pred_means, const Eigen::VectorXd& truth);

/// Empirical-CDF CRPS of an ensemble against a realized value:
///   (1/L) sum |x_l - y| - 1/(2 L^2) sum_lm |x_l - x_m|,
/// evaluated in O(L log L) through sorted prefix sums.
double score_crps_empirical(const Eigen::VectorXd& draws, double y);

/// Naive O(L^2) double sum, kept as the algebraic cross-check.
double score_crps_empirical_naive(const Eigen::VectorXd& draws, double y);

/// Closed-form CRPS of a Gaussian predictive density:
///   sd * [w (2 Phi(w) - 1) + 2 phi(w) - 1/sqrt(pi)], w = (y - mu)/sd.
double score_crps_gaussian(double mu, double sd, double y);

struct CvOptions {
  long iterations = 2000;
  long burnin = 1000;
  long thin = 1;
  std::uint64_t seed = 0;
  SchemeConfig scheme;
  int prediction_stride = 10;
  bool progress = false;
};

struct CvResult {
  Eigen::VectorXd fold_mspe;
  Eigen::VectorXd fold_crps;
  double mspe_mean = 0.0, mspe_sd = 0.0;
  double crps_mean = 0.0, crps_sd = 0.0;
};

/// Dataset handed to cross-validation in original (unordered) row order.
struct CvDataset {
  Eigen::MatrixXd coords;
  Eigen::VectorXd z;
  DesignSet designs;  // full-data design matrices (rows follow coords)
};

/// Refits the model on each fold complement (ordering, neighbors and
/// conditioning sets rebuilt per fold), predicts the held-out sites, and
/// aggregates MSPE and empirical CRPS with across-fold SDs.
CvResult cross_validate(const CvDataset& dataset, const ModelSpec& model, const FoldPlan& folds,
                        const CvOptions& options);

}  // namespace nsgp

#endif  // NSGP_SCORING_HPP
