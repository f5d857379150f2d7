/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_LIKELIHOOD_HPP
#define NSGP_LIKELIHOOD_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <functional>
#include <span>
#include <vector>

#include "nsgp/covariance.hpp"
#include "nsgp/ordering.hpp"
#include "nsgp/process_models.hpp"

namespace nsgp {

/// Coefficients of the conditional regression of one variable on its
/// conditioning vector: mean weight vector b and conditional variance d.
struct LocalRegression {
  Eigen::VectorXd b;
  double d = 0.0;
};

using CovAccessor = std::function<double(int, int)>;

/// b = C(cond,cond)^(-1) C(cond,i), d = C(i,i) - C(i,cond) b. Throws
/// numerical_error when d fails to be positive after the jitter policy.
LocalRegression vecchia_local_regression(int i, std::span<const int> cond_set,
                                         const CovAccessor& cov);

// ---------------------------------------------------------------------------
// Exact dense likelihood

struct FullFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
};

/// Dense Cholesky of the marginal covariance Delta + Omega. Throws
/// config_error when N exceeds `dense_cap`.
FullFactor prepare_full(const Eigen::MatrixXd& coords, const KernelField& field,
                        const MaternSpec& spec, int dense_cap = 5000);
double loglik_full_from(const FullFactor& factor, const Eigen::VectorXd& resid);
/// Convenience wrapper; the mean is the field's mu(.) vector.
double loglik_full(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                   const KernelField& field, const MaternSpec& spec, int dense_cap = 5000);

// ---------------------------------------------------------------------------
// NNGP-R: sequential conditionals of the marginal process

struct NngpFactor {
  std::vector<Eigen::VectorXd> weights;  // b_i, aligned with graph.nbr[i]
  Eigen::VectorXd cond_var;              // v_i
  Eigen::VectorXd log_cond_var;
};

NngpFactor prepare_nngp(const Eigen::MatrixXd& coords, const KernelField& field,
                        const MaternSpec& spec, const NeighborGraph& graph);
double loglik_nngp_from(const NngpFactor& factor, const NeighborGraph& graph,
                        const Eigen::VectorXd& resid);
double loglik_nngp(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                   const KernelField& field, const MaternSpec& spec, const NeighborGraph& graph);

// ---------------------------------------------------------------------------
// SGV: joint factor over the interleaved (y_i, z_i) vector

/// Upper-triangular factor U with U U' equal to the joint precision of the
/// interleaved (y_1, z_1, ..., y_N, z_N) vector under the general Vecchia
/// approximation. Column 2i belongs to y_i, column 2i+1 to z_i; each column
/// carries the diagonal entry d^(-1/2) and -b d^(-1/2) at its parents.
struct SparseUFactor {
  Eigen::SparseMatrix<double> u;  // 2N x 2N
  double sum_log_diag = 0.0;
  int n = 0;
};

/// Requires tau(i) > 0 everywhere: the z_i | y_i conditionals are degenerate
/// otherwise. Numerical failures are annotated with the column index.
SparseUFactor build_u_sgv(const Eigen::MatrixXd& coords, const KernelField& field,
                          const MaternSpec& spec, const NeighborGraph& graph,
                          const ConditioningSets& csets);

/// Sparse SPD matrix together with its Cholesky factor in reverse
/// row-column ordering: A = R' L L' R with R the index-reversal permutation.
class ReverseCholesky {
 public:
  ReverseCholesky() = default;
  explicit ReverseCholesky(Eigen::SparseMatrix<double> a);

  const Eigen::SparseMatrix<double>& matrix() const { return a_; }
  double log_det() const { return log_det_; }
  int size() const { return static_cast<int>(a_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// (A^(-1))_ii for the given indices.
  Eigen::VectorXd marginal_variances(std::span<const int> indices) const;
  /// mean + R' L^(-T) xi: a draw from N(mean, A^(-1)) given standard normals.
  Eigen::VectorXd correlated_draw(const Eigen::VectorXd& mean, const Eigen::VectorXd& xi) const;

 private:
  Eigen::SparseMatrix<double> a_, l_rev_, lt_rev_;
  double log_det_ = 0.0;
};

/// Marginalization factor: the latent-block precision A = (U U')_yy is
/// factored by a sparse Cholesky in reverse ordering.
struct SgvFactor {
  SparseUFactor u_factor;
  ReverseCholesky latent_precision;       // A and its reverse-order factor
  Eigen::SparseMatrix<double> lambda_yz;  // N x N cross block of U U'
};

SgvFactor prepare_sgv(const Eigen::MatrixXd& coords, const KernelField& field,
                      const MaternSpec& spec, const NeighborGraph& graph,
                      const ConditioningSets& csets);

/// Conditional mean of the latent residual y - mu given the observed
/// residual r: solves A m = -Lambda_yz r.
Eigen::VectorXd sgv_latent_conditional_mean(const SgvFactor& factor, const Eigen::VectorXd& resid);

/// log p(z): integrates the latent vector out of the joint factor. The
/// identity log p(z) = log p(y*, z) - log p(y* | z) holds at any evaluation
/// point y*; the default evaluates at the conditional mean.
double loglik_sgv_from(const SgvFactor& factor, const Eigen::VectorXd& resid);
/// Evaluation at an arbitrary latent residual point (for verification).
double loglik_sgv_from_at(const SgvFactor& factor, const Eigen::VectorXd& resid,
                          const Eigen::VectorXd& y_star_resid);
double loglik_sgv(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                  const KernelField& field, const MaternSpec& spec, const NeighborGraph& graph,
                  const ConditioningSets& csets);

}  // namespace nsgp

#endif  // NSGP_LIKELIHOOD_HPP
