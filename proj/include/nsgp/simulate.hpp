/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_SIMULATE_HPP
#define NSGP_SIMULATE_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "nsgp/process_models.hpp"
#include "nsgp/theta.hpp"

namespace nsgp {

struct SimulatedData {
  Eigen::VectorXd y;  // latent process draw
  Eigen::VectorXd z;  // y + measurement error
};

/// Exact draw from the model at the given true parameters: y from the dense
/// latent covariance, z = y + eps with per-location noise SD tau(s). Throws
/// config_error when N exceeds `dense_cap` (simulation is exact only).
SimulatedData simulate_gp(const ModelSpec& model, const ThetaState& theta,
                          const Eigen::MatrixXd& coords, std::uint64_t seed,
                          int dense_cap = 5000);

/// Uniform coordinates on an axis-aligned box (bounds is d x 2).
Eigen::MatrixXd uniform_coords(int n, const Eigen::MatrixXd& bounds, std::uint64_t seed);

}  // namespace nsgp

#endif  // NSGP_SIMULATE_HPP
