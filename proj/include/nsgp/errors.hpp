/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_ERRORS_HPP
#define NSGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nsgp {

/// Invalid model/run configuration (illegal model combination, bad key,
/// missing parameter). CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (NaN rows, missing columns,
/// shape mismatches). CLI exit code 3.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure that survived the retry policy (Cholesky breakdown,
/// ill-conditioned kernel average, nonpositive conditional variance).
/// CLI exit code 4.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nsgp

#endif  // NSGP_ERRORS_HPP
