/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/covariance.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>

#include "nsgp/errors.hpp"
#include "nsgp/linalg.hpp"

namespace nsgp {

void check_anisotropy_matrix(const Eigen::MatrixXd& sigma_mat) {
  if (sigma_mat.rows() != sigma_mat.cols() || sigma_mat.rows() < 1) {
    throw std::domain_error("anisotropy matrix must be square");
  }
  const double scale = std::max(1.0, sigma_mat.cwiseAbs().maxCoeff());
  if ((sigma_mat - sigma_mat.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::domain_error("anisotropy matrix must be symmetric to 1e-12");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_mat, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) {
    throw std::domain_error("anisotropy matrix must be positive definite");
  }
}

KernelField::KernelField(Eigen::VectorXd mu, Eigen::VectorXd tau, Eigen::VectorXd sigma,
                         std::vector<Eigen::MatrixXd> sigma_mats)
    : mu_(std::move(mu)),
      tau_(std::move(tau)),
      sigma_(std::move(sigma)),
      sigma_mats_(std::move(sigma_mats)),
      isotropic_(false) {
  const auto n = mu_.size();
  if (tau_.size() != n || sigma_.size() != n ||
      static_cast<Eigen::Index>(sigma_mats_.size()) != n) {
    throw std::invalid_argument("KernelField: field lengths disagree");
  }
  if (n == 0) throw std::invalid_argument("KernelField: empty field");
  if (!(tau_.minCoeff() >= 0.0)) throw std::domain_error("KernelField: tau must be nonnegative");
  if (!(sigma_.minCoeff() > 0.0)) throw std::domain_error("KernelField: sigma must be positive");
  dim_ = static_cast<int>(sigma_mats_[0].rows());
  det_quarter_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    check_anisotropy_matrix(sigma_mats_[i]);
    if (sigma_mats_[i].rows() != dim_) {
      throw std::invalid_argument("KernelField: anisotropy dimensions disagree");
    }
    det_quarter_(i) = std::pow(sigma_mats_[i].determinant(), 0.25);
  }
}

KernelField::KernelField(Eigen::VectorXd mu, Eigen::VectorXd tau, Eigen::VectorXd sigma,
                         Eigen::VectorXd sigma_scalar, int dim)
    : mu_(std::move(mu)),
      tau_(std::move(tau)),
      sigma_(std::move(sigma)),
      sigma_scalar_(std::move(sigma_scalar)),
      dim_(dim),
      isotropic_(true) {
  const auto n = mu_.size();
  if (tau_.size() != n || sigma_.size() != n || sigma_scalar_.size() != n) {
    throw std::invalid_argument("KernelField: field lengths disagree");
  }
  if (n == 0) throw std::invalid_argument("KernelField: empty field");
  if (dim_ < 1) throw std::invalid_argument("KernelField: dimension must be >= 1");
  if (!(tau_.minCoeff() >= 0.0)) throw std::domain_error("KernelField: tau must be nonnegative");
  if (!(sigma_.minCoeff() > 0.0)) throw std::domain_error("KernelField: sigma must be positive");
  if (!(sigma_scalar_.minCoeff() > 0.0)) {
    throw std::domain_error("KernelField: scalar anisotropy must be positive");
  }
  // |c * I_d|^(1/4) = c^(d/4)
  det_quarter_ = sigma_scalar_.array().pow(0.25 * dim_);
}

double ns_quadratic_form(const Eigen::VectorXd& s, const Eigen::VectorXd& s2,
                         const Eigen::MatrixXd& sig1, const Eigen::MatrixXd& sig2) {
  if (s.size() != s2.size() || sig1.rows() != s.size() || sig2.rows() != s.size()) {
    throw std::invalid_argument("ns_quadratic_form: dimension mismatch");
  }
  const Eigen::VectorXd diff = s - s2;
  if (diff.isZero(0.0)) return 0.0;
  const Eigen::MatrixXd avg = 0.5 * (sig1 + sig2);
  const SpdInverse inv = spd_inverse(avg, "ns_quadratic_form");
  const double q = diff.dot(inv.inverse * diff);
  return q > 0.0 ? q : 0.0;
}

namespace {

// Prefactor and Q for a full-mode pair. Specialized small-d paths: this is
// the innermost loop of every dense covariance and Vecchia evaluation.
struct PairTerms {
  double prefactor;
  double q;
};

PairTerms pair_terms_full(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field) {
  const int d = field.dim();
  const Eigen::MatrixXd& a = field.anisotropy(i);
  const Eigen::MatrixXd& b = field.anisotropy(j);
  PairTerms out{};
  if (d == 2) {
    const double m00 = 0.5 * (a(0, 0) + b(0, 0));
    const double m01 = 0.5 * (a(0, 1) + b(0, 1));
    const double m11 = 0.5 * (a(1, 1) + b(1, 1));
    const double det = m00 * m11 - m01 * m01;
    const double tr = m00 + m11;
    // exact 2x2 eigenvalue condition check
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double lmin = 0.5 * (tr - disc);
    if (!(lmin > 0.0) || (tr + disc) > 2e12 * lmin) {
      throw numerical_error("ill-conditioned kernel average at pair (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    }
    const double dx = coords(i, 0) - coords(j, 0);
    const double dy = coords(i, 1) - coords(j, 1);
    out.q = (m11 * dx * dx - 2.0 * m01 * dx * dy + m00 * dy * dy) / det;
    out.prefactor = field.det_quarter(i) * field.det_quarter(j) / std::sqrt(det);
  } else if (d == 1) {
    const double m = 0.5 * (a(0, 0) + b(0, 0));
    if (!(m > 0.0)) {
      throw numerical_error("ill-conditioned kernel average at pair (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    }
    const double dx = coords(i, 0) - coords(j, 0);
    out.q = dx * dx / m;
    out.prefactor = field.det_quarter(i) * field.det_quarter(j) / std::sqrt(m);
  } else {
    const Eigen::MatrixXd avg = 0.5 * (a + b);
    const SpdInverse inv =
        spd_inverse(avg, "pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
    const Eigen::VectorXd diff = coords.row(i) - coords.row(j);
    out.q = std::max(0.0, diff.dot(inv.inverse * diff));
    out.prefactor = field.det_quarter(i) * field.det_quarter(j) / std::sqrt(inv.det);
  }
  if (out.q < 0.0) out.q = 0.0;
  return out;
}

PairTerms pair_terms_iso(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field) {
  const double si = field.anisotropy_scalar(i);
  const double sj = field.anisotropy_scalar(j);
  const double avg = 0.5 * (si + sj);
  PairTerms out{};
  out.q = (coords.row(i) - coords.row(j)).squaredNorm() / avg;
  out.prefactor =
      field.det_quarter(i) * field.det_quarter(j) / std::pow(avg, 0.5 * field.dim());
  return out;
}

inline double pair_covariance(int i, int j, const Eigen::MatrixXd& coords,
                              const KernelField& field, const MaternSpec& spec) {
  // canonicalize so cov(i,j) and cov(j,i) are the same expression
  if (i > j) std::swap(i, j);
  if (i == j) {
    const double s = field.sigma(i);
    return s * s;
  }
  const PairTerms terms =
      field.isotropic() ? pair_terms_iso(i, j, coords, field) : pair_terms_full(i, j, coords, field);
  return field.sigma(i) * field.sigma(j) * terms.prefactor *
         matern_correlation(std::sqrt(terms.q), spec);
}

}  // namespace

double ns_covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                     const MaternSpec& spec) {
  if (field.isotropic()) {
    throw std::invalid_argument("ns_covariance: field is in locally isotropic mode");
  }
  return pair_covariance(i, j, coords, field, spec);
}

double iso_ns_covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                         const MaternSpec& spec) {
  if (!field.isotropic()) {
    throw std::invalid_argument("iso_ns_covariance: field is in full anisotropy mode");
  }
  return pair_covariance(i, j, coords, field, spec);
}

double covariance(int i, int j, const Eigen::MatrixXd& coords, const KernelField& field,
                  const MaternSpec& spec) {
  return pair_covariance(i, j, coords, field, spec);
}

Eigen::MatrixXd cov_matrix(std::span<const int> rows, std::span<const int> cols,
                           const Eigen::MatrixXd& coords, const KernelField& field,
                           const MaternSpec& spec, bool add_nugget) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  const bool symmetric = rows.size() == cols.size() &&
                         std::equal(rows.begin(), rows.end(), cols.begin());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t c0 = symmetric ? r : 0;
    for (std::size_t c = c0; c < cols.size(); ++c) {
      double v = pair_covariance(rows[r], cols[c], coords, field, spec);
      if (add_nugget && rows[r] == cols[c]) {
        v += field.tau(rows[r]) * field.tau(rows[r]);
      }
      out(r, c) = v;
      if (symmetric) out(c, r) = v;
    }
  }
  return out;
}

Eigen::MatrixXd cov_matrix_full(const Eigen::MatrixXd& coords, const KernelField& field,
                                const MaternSpec& spec, bool add_nugget) {
  const int n = field.size();
  Eigen::MatrixXd out(n, n);
  std::atomic<bool> failed{false};
  std::exception_ptr eptr;
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      for (int j = i; j < n; ++j) {
        double v = pair_covariance(i, j, coords, field, spec);
        if (add_nugget && i == j) v += field.tau(i) * field.tau(i);
        out(i, j) = v;
        out(j, i) = v;
      }
    } catch (...) {
#pragma omp critical(nsgp_cov_error)
      {
        if (!failed.exchange(true)) eptr = std::current_exception();
      }
    }
  }
  if (failed.load() && eptr) std::rethrow_exception(eptr);
  return out;
}

}  // namespace nsgp
