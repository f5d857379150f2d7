/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_MATERN_HPP
#define NSGP_MATERN_HPP

namespace nsgp {

/// Smoothness of the Matern correlation family. The argument convention
/// carries no sqrt(2*nu) factor: all distance scaling lives in the
/// anisotropy process, so nu = 0.5 gives exp(-t) exactly.
struct MaternSpec {
  double nu = 0.5;

  explicit MaternSpec(double nu_);
  MaternSpec() = default;
};

/// Matern correlation M_nu(t) = 2^(1-nu)/Gamma(nu) * t^nu * K_nu(t),
/// with M_nu(0) = 1. Half-integer nu in {0.5, 1.5, 2.5} dispatch to the
/// closed forms; other nu evaluate the Bessel form in log space.
/// Throws std::domain_error for negative or non-finite t.
double matern_correlation(double t, const MaternSpec& spec);

}  // namespace nsgp

#endif  // NSGP_MATERN_HPP
