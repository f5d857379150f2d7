/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/simulate.hpp"

#include <random>

#include "nsgp/covariance.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/linalg.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

SimulatedData simulate_gp(const ModelSpec& model, const ThetaState& theta,
                          const Eigen::MatrixXd& coords, std::uint64_t seed, int dense_cap) {
  const int n = static_cast<int>(coords.rows());
  if (n > dense_cap) {
    throw config_error("simulation is exact only: N=" + std::to_string(n) +
                       " exceeds the dense cap " + std::to_string(dense_cap));
  }
  const KernelField field = assemble_kernel_field(model, theta, coords);
  Eigen::MatrixXd c_y = cov_matrix_full(coords, field, model.matern, /*add_nugget=*/false);
  const Eigen::LLT<Eigen::MatrixXd> llt =
      cholesky_with_jitter(std::move(c_y), "latent covariance (simulation)");

  std::mt19937_64 rng_y(mix_seed(seed, 1));
  std::mt19937_64 rng_eps(mix_seed(seed, 2));
  std::normal_distribution<double> nd;

  Eigen::VectorXd xi(n);
  for (int i = 0; i < n; ++i) xi(i) = nd(rng_y);

  SimulatedData out;
  out.y = field.mu_vector() + Eigen::MatrixXd(llt.matrixL()) * xi;
  out.z = out.y;
  for (int i = 0; i < n; ++i) out.z(i) += field.tau(i) * nd(rng_eps);
  return out;
}

Eigen::MatrixXd uniform_coords(int n, const Eigen::MatrixXd& bounds, std::uint64_t seed) {
  if (n < 1) throw config_error("simulation requires N >= 1");
  if (bounds.cols() != 2 || bounds.rows() < 1) {
    throw config_error("domain bounds must be a d x 2 matrix");
  }
  const int d = static_cast<int>(bounds.rows());
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Eigen::MatrixXd coords(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      coords(i, j) = bounds(j, 0) + (bounds(j, 1) - bounds(j, 0)) * ud(rng);
    }
  }
  return coords;
}

}  // namespace nsgp
