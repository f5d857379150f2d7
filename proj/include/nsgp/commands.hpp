/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_COMMANDS_HPP
#define NSGP_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nsgp {

/// Options shared by every subcommand; file paths may also come from the
/// config's io block (command-line values win).
struct CliOptions {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool standardize = false;
  std::optional<int> dense_cap;
};

void cmd_simulate(const CliOptions& options);
void cmd_fit(const CliOptions& options);
void cmd_predict(const CliOptions& options);
void cmd_cv(const CliOptions& options);
void cmd_bench(const CliOptions& options);

/// One timing row of the likelihood benchmark (medians over repeats; the
/// setup phase is excluded from the timed region).
struct BenchRow {
  std::string kind;
  int n = 0;
  double median_ms = 0.0;
  bool skipped = false;  // fullGP above the dense cap
};

std::vector<BenchRow> run_bench(const std::vector<std::string>& kinds,
                                const std::vector<int>& sizes, int repeats, int k,
                                std::uint64_t seed, int dense_cap);

}  // namespace nsgp

#endif  // NSGP_COMMANDS_HPP
