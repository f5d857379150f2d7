/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nsgp/errors.hpp"
#include "nsgp/ordering.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

FoldPlan make_folds(int n, int num_folds, std::uint64_t seed) {
  if (num_folds < 2 || num_folds > n) {
    throw config_error("fold count must lie in [2, N]");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.fold.assign(n, 0);
  plan.num_folds = num_folds;
  plan.seed = seed;
  for (int t = 0; t < n; ++t) plan.fold[order[t]] = t % num_folds;
  return plan;
}

double score_mspe(const Eigen::VectorXd& pred_means, const Eigen::VectorXd& truth) {
  if (pred_means.size() == 0) throw data_error("score_mspe: empty input");
  if (pred_means.size() != truth.size()) throw data_error("score_mspe: length mismatch");
  return (pred_means - truth).squaredNorm() / static_cast<double>(truth.size());
}

double score_crps_empirical(const Eigen::VectorXd& draws, double y) {
  const Eigen::Index l = draws.size();
  if (l < 1) throw data_error("score_crps_empirical: empty ensemble");
  std::vector<double> x(draws.data(), draws.data() + l);
  std::sort(x.begin(), x.end());

  double abs_term = 0.0;
  double pair_term = 0.0;  // sum over l<m of x_(m) - x_(l)
  for (Eigen::Index i = 0; i < l; ++i) {
    abs_term += std::abs(x[i] - y);
    pair_term += (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(l)) * x[i];
  }
  return abs_term / static_cast<double>(l) - pair_term / (static_cast<double>(l) * l);
}

double score_crps_empirical_naive(const Eigen::VectorXd& draws, double y) {
  const Eigen::Index l = draws.size();
  if (l < 1) throw data_error("score_crps_empirical: empty ensemble");
  double abs_term = 0.0, pair_term = 0.0;
  for (Eigen::Index a = 0; a < l; ++a) {
    abs_term += std::abs(draws(a) - y);
    for (Eigen::Index b = 0; b < l; ++b) pair_term += std::abs(draws(a) - draws(b));
  }
  return abs_term / static_cast<double>(l) - pair_term / (2.0 * static_cast<double>(l) * l);
}

double score_crps_gaussian(double mu, double sd, double y) {
  if (!(sd > 0.0)) throw std::domain_error("score_crps_gaussian: sd must be positive");
  const double w = (y - mu) / sd;
  const double cdf = 0.5 * std::erfc(-w / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * w * w) / std::sqrt(2.0 * M_PI);
  return sd * (w * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  if (m.size() == 0) return m;
  Eigen::MatrixXd out(rows.size(), m.cols());
  for (std::size_t t = 0; t < rows.size(); ++t) out.row(t) = m.row(rows[t]);
  return out;
}

DesignSet take_design_rows(const DesignSet& designs, const std::vector<int>& rows) {
  return {take_rows(designs.mu, rows), take_rows(designs.tau, rows),
          take_rows(designs.sigma, rows), take_rows(designs.Sigma, rows)};
}

}  // namespace

CvResult cross_validate(const CvDataset& dataset, const ModelSpec& model, const FoldPlan& folds,
                        const CvOptions& options) {
  const int n = static_cast<int>(dataset.coords.rows());
  if (static_cast<int>(folds.fold.size()) != n) {
    throw config_error("fold plan size disagrees with the dataset");
  }
  const int num_folds = folds.num_folds;

  CvResult result;
  result.fold_mspe.resize(num_folds);
  result.fold_crps.resize(num_folds);

  for (int f = 0; f < num_folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (folds.fold[i] == f ? test : train).push_back(i);
    if (static_cast<int>(train.size()) < model.k + 1) {
      throw config_error("fold " + std::to_string(f) + " leaves only " +
                         std::to_string(train.size()) + " training points (need k+1 = " +
                         std::to_string(model.k + 1) + ")");
    }

    const Eigen::MatrixXd train_coords = take_rows(dataset.coords, train);
    const OrderedCoords ordered = order_maxmin(train_coords, mix_seed(folds.seed, f));

    std::vector<int> train_ordered(train.size());
    for (std::size_t t = 0; t < train.size(); ++t) train_ordered[t] = train[ordered.perm[t]];
    Eigen::VectorXd z_train(train.size());
    for (std::size_t t = 0; t < train.size(); ++t) z_train(t) = dataset.z(train_ordered[t]);
    const DesignSet train_designs = take_design_rows(dataset.designs, train_ordered);

    ModelSpec fold_model = model;
    fold_model.mu.design = train_designs.mu;
    fold_model.tau.design = train_designs.tau;
    fold_model.sigma.design = train_designs.sigma;
    fold_model.Sigma.design = train_designs.Sigma;

    NeighborGraph graph;
    ConditioningSets csets;
    if (fold_model.likelihood != LikelihoodKind::full_gp) {
      graph = determine_neighbors(ordered, fold_model.k);
      if (fold_model.likelihood == LikelihoodKind::sgv) graph.k = fold_model.k;
      csets = fold_model.likelihood == LikelihoodKind::sgv ? sgv_setup(graph)
                                                           : ConditioningSets{};
    }

    PosteriorModel posterior(fold_model, ordered.coords, z_train, graph, csets);
    const auto scheme = build_scheme(*posterior.layout(), fold_model, options.scheme);

    ChainOptions chain_options;
    chain_options.iterations = options.iterations;
    chain_options.burnin = options.burnin;
    chain_options.thin = options.thin;
    chain_options.seed = mix_seed(options.seed, f, 1);
    chain_options.progress = options.progress;
    const PosteriorSamples samples = run_chain(posterior, scheme, chain_options);

    PredictionRequest request;
    request.coords = take_rows(dataset.coords, test);
    request.designs = take_design_rows(dataset.designs, test);
    request.target = PredictTarget::z;
    request.joint = false;

    PredictOptions predict_options;
    predict_options.sample_stride = options.prediction_stride;
    predict_options.seed = mix_seed(options.seed, f, 2);
    const PredictiveDraws draws = predict(posterior, samples, request, predict_options);

    Eigen::VectorXd z_test(test.size());
    for (std::size_t t = 0; t < test.size(); ++t) z_test(t) = dataset.z(test[t]);

    result.fold_mspe(f) = score_mspe(draws.mean, z_test);
    double crps = 0.0;
    for (Eigen::Index p = 0; p < z_test.size(); ++p) {
      crps += score_crps_empirical(draws.draws.col(p), z_test(p));
    }
    result.fold_crps(f) = crps / static_cast<double>(z_test.size());
  }

  const auto mean_sd = [](const Eigen::VectorXd& v) {
    const double mean = v.mean();
    const double sd = v.size() > 1
                          ? std::sqrt((v.array() - mean).square().sum() /
                                      static_cast<double>(v.size() - 1))
                          : 0.0;
    return std::pair<double, double>(mean, sd);
  };
  std::tie(result.mspe_mean, result.mspe_sd) = mean_sd(result.fold_mspe);
  std::tie(result.crps_mean, result.crps_sd) = mean_sd(result.fold_crps);
  return result;
}

}  // namespace nsgp
