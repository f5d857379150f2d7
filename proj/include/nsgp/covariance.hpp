/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_COVARIANCE_HPP
#define NSGP_COVARIANCE_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nsgp/matern.hpp"

namespace nsgp {

/// Validates that `sigma_mat` is a symmetric (1e-12 relative) positive
/// definite anisotropy matrix; throws std::domain_error otherwise.
void check_anisotropy_matrix(const Eigen::MatrixXd& sigma_mat);

/// Per-location evaluations of the four parameter processes: mu(s), tau(s),
/// sigma(s) and the anisotropy Sigma(s). The anisotropy is stored either as
/// full d x d matrices or, in locally isotropic mode, as a positive scalar
/// per location (Sigma(s) = scalar * I_d).
///
/// Determinant roots and the packed upper triangles of the Sigma(s) are
/// precomputed: the pairwise covariance loop is the dominant cost of every
/// likelihood evaluation.
class KernelField {
 public:
  /// Full anisotropy mode. All vectors length N, one SPD matrix per location.
  KernelField(Eigen::VectorXd mu, Eigen::VectorXd tau, Eigen::VectorXd sigma,
              std::vector<Eigen::MatrixXd> sigma_mats);

  /// Locally isotropic mode: Sigma(s) = sigma_scalar(s) * I_dim.
  KernelField(Eigen::VectorXd mu, Eigen::VectorXd tau, Eigen::VectorXd sigma,
              Eigen::VectorXd sigma_scalar, int dim);

  int size() const { return static_cast<int>(mu_.size()); }
  int dim() const { return dim_; }
  bool isotropic() const { return isotropic_; }

  double mu(int i) const { return mu_(i); }
  double tau(int i) const { return tau_(i); }
  double sigma(int i) const { return sigma_(i); }
  const Eigen::VectorXd& mu_vector() const { return mu_; }
  const Eigen::VectorXd& tau_vector() const { return tau_; }
  const Eigen::VectorXd& sigma_vector() const { return sigma_; }

  /// Full-mode accessors.
  const Eigen::MatrixXd& anisotropy(int i) const { return sigma_mats_[i]; }
  /// Iso-mode accessor (scalar Sigma(s)).
  double anisotropy_scalar(int i) const { return sigma_scalar_(i); }

  /// |Sigma(s_i)|^(1/4), cached.
  double det_quarter(int i) const { return det_quarter_(i); }

 private:
  Eigen::VectorXd mu_, tau_, sigma_;
  std::vector<Eigen::MatrixXd> sigma_mats_;
  Eigen::VectorXd sigma_scalar_;
  Eigen::VectorXd det_quarter_;
  int dim_ = 0;
  bool isotropic_ = false;
};

/// Q(s, s') = (s - s')' * ((Sigma(s) + Sigma(s'))/2)^(-1) * (s - s').
/// Throws numerical_error when the averaged matrix is numerically singular.
double ns_quadratic_form(const Eigen::VectorXd& s, const Eigen::VectorXd& s2,
                         const Eigen::MatrixXd& sig1, const Eigen::MatrixXd& sig2);

/// Nonstationary covariance between locations i and j of `coords`:
///   sigma_i sigma_j |Si|^(1/4) |Sj|^(1/4) / |(Si+Sj)/2|^(1/2) * M_nu(sqrt Q).
/// The pair (i, j) is canonicalized with i <= j so the value is exactly
/// symmetric in floating point. Requires a full-mode field.
double ns_covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                     const MaternSpec& spec);

/// Locally isotropic covariance (scalar anisotropy, any d >= 1):
///   sigma_i sigma_j (Si*Sj)^(d/4) / ((Si+Sj)/2)^(d/2) * M_nu(sqrt Q),
/// Q = |s_i - s_j|^2 / ((Si+Sj)/2). Requires an iso-mode field.
double iso_ns_covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                         const MaternSpec& spec);

/// Covariance between locations i and j, dispatching on the field's mode.
double covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                  const MaternSpec& spec);

/// Matrix of covariance values over the given row/column index sets. When
/// `add_nugget` is set, tau(i)^2 is added wherever the row and column refer
/// to the same location index.
Eigen::MatrixXd cov_matrix(std::span<const int> rows, std::span<const int> cols,
                           const Eigen::MatrixXd& coords, const KernelField& field,
                           const MaternSpec& spec, bool add_nugget);

/// Full N x N marginal covariance (all locations, optional nugget).
Eigen::MatrixXd cov_matrix_full(const Eigen::MatrixXd& coords, const KernelField& field,
                                const MaternSpec& spec, bool add_nugget);

}  // namespace nsgp

#endif  // NSGP_COVARIANCE_HPP
