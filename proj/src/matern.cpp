/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/matern.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

void disable_gsl_abort() {
  // GSL aborts on error by default; errors are handled via status codes here.
  static std::once_flag flag;
  std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

}  // namespace

MaternSpec::MaternSpec(double nu_) : nu(nu_) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw std::domain_error("MaternSpec: smoothness nu must be positive and finite, got " +
                            std::to_string(nu_));
  }
}

double matern_correlation(double t, const MaternSpec& spec) {
  if (!std::isfinite(t) || t < 0.0) {
    throw std::domain_error("matern_correlation: distance argument must be finite and >= 0");
  }
  if (t == 0.0) return 1.0;

  const double nu = spec.nu;
  if (nu == 0.5) return std::exp(-t);
  if (nu == 1.5) return (1.0 + t) * std::exp(-t);
  if (nu == 2.5) return (1.0 + t + t * t / 3.0) * std::exp(-t);

  disable_gsl_abort();
  gsl_sf_result lnk;
  const int status = gsl_sf_bessel_lnKnu_e(nu, t, &lnk);
  if (status == GSL_EUNDRFLW) return 0.0;
  if (status != 0) {
    throw numerical_error("matern_correlation: Bessel lnK failed (nu=" + std::to_string(nu) +
                          ", t=" + std::to_string(t) + "): " + gsl_strerror(status));
  }
  const double log_m = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(t) + lnk.val;
  return std::exp(log_m);
}

}  // namespace nsgp
