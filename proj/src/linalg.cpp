/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/linalg.hpp"

#include <cmath>

#include "nsgp/errors.hpp"

namespace nsgp {

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a, const std::string& context) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;

  const Eigen::Index n = a.rows();
  double jitter = 1e-8 * a.diagonal().mean();
  if (!(jitter > 0.0)) jitter = 1e-12;
  for (int round = 0; round < 3; ++round) {
    a.diagonal().array() += jitter;
    llt.compute(a);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 10.0;
  }
  throw numerical_error("Cholesky failed after jitter retries (n=" + std::to_string(n) +
                        "): " + context);
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double mvn_logpdf_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& r) {
  static const double log_2pi = std::log(2.0 * M_PI);
  const Eigen::VectorXd half = llt.matrixL().solve(r);
  return -0.5 * (static_cast<double>(r.size()) * log_2pi + log_det_from_llt(llt) +
                 half.squaredNorm());
}

SpdInverse spd_inverse(const Eigen::MatrixXd& a, const std::string& context) {
  const Eigen::Index d = a.rows();
  SpdInverse out;
  switch (d) {
    case 1:
      out.det = a(0, 0);
      out.inverse = Eigen::MatrixXd::Constant(1, 1, 1.0 / a(0, 0));
      break;
    case 2: {
      out.det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
      out.inverse.resize(2, 2);
      out.inverse << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
      out.inverse /= out.det;
      break;
    }
    case 3: {
      const double c00 = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
      const double c01 = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
      const double c02 = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
      out.det = a(0, 0) * c00 + a(0, 1) * c01 + a(0, 2) * c02;
      out.inverse.resize(3, 3);
      out.inverse << c00, a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2),
          a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1), c01, a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0),
          a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2), c02, a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1),
          a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
      out.inverse /= out.det;
      break;
    }
    default: {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
      out.det = lu.determinant();
      out.inverse = lu.inverse();
    }
  }
  const double norm_a = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(out.det > 0.0) || !std::isfinite(out.det)) {
    throw numerical_error("ill-conditioned kernel average (nonpositive determinant): " + context);
  }
  const double norm_inv = out.inverse.cwiseAbs().rowwise().sum().maxCoeff();
  if (!std::isfinite(norm_inv) || norm_a * norm_inv > 1e12) {
    throw numerical_error("ill-conditioned kernel average (condition estimate > 1e12): " +
                          context);
  }
  return out;
}

bool is_spd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (((a - a.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace nsgp
