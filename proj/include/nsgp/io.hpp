/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_IO_HPP
#define NSGP_IO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace nsgp {

/// Numeric table with named columns. Lines starting with '#' are metadata
/// comments and are collected separately.
struct DataTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<std::string> comments;

  int column(const std::string& name) const;  // throws data_error naming it
  bool has_column(const std::string& name) const;
  Eigen::VectorXd col(const std::string& name) const;
};

DataTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& values, const std::vector<std::string>& comments = {});

/// Shortest representation that round-trips a double exactly.
std::string format_double(double value);

/// FNV-1a 64-bit over a byte string; stable across platforms and runs.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(std::uint64_t hash);

/// FNV-1a over a file's bytes. Throws data_error when unreadable.
std::string file_fingerprint(const std::string& path);

}  // namespace nsgp

#endif  // NSGP_IO_HPP
