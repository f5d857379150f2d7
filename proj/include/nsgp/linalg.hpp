/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_LINALG_HPP
#define NSGP_LINALG_HPP

#include <Eigen/Dense>
#include <string>

namespace nsgp {

/// Lower Cholesky of a symmetric positive definite matrix with the retry
/// policy: on failure add 1e-8 * mean(diag) to the diagonal, up to 3 times,
/// scaling the jitter by 10 each round. Throws numerical_error (annotated
/// with `context`) when all retries fail.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a, const std::string& context);

/// log |A| from its lower Cholesky factor.
double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Log density of N(0, A) at r, given the Cholesky factor of A.
double mvn_logpdf_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& r);

/// Inverse and determinant of a small symmetric positive definite matrix
/// (closed form for d <= 3, LU beyond). Throws numerical_error when the
/// matrix is numerically singular (inf-norm condition estimate > 1e12).
struct SpdInverse {
  Eigen::MatrixXd inverse;
  double det = 0.0;
};
SpdInverse spd_inverse(const Eigen::MatrixXd& a, const std::string& context);

/// Symmetry (1e-12 relative) and positive-eigenvalue check.
bool is_spd(const Eigen::MatrixXd& a);

}  // namespace nsgp

#endif  // NSGP_LINALG_HPP
