/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_THETA_HPP
#define NSGP_THETA_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace nsgp {

/// Map between the sampler's unconstrained scale and a parameter's legal
/// domain. `scaled_logit` maps onto (lo, hi); `cholesky_spd` maps a packed
/// vector (log-diagonal, free off-diagonal, column order) to vech of L L'.
enum class Transform { identity, log_positive, scaled_logit, cholesky_spd };

/// Prior on the constrained scale. `fixed` pins the value and removes the
/// parameter from sampling. For cholesky_spd blocks the prior is applied to
/// the unconstrained entries directly (they act as regression coefficients).
struct PriorSpec {
  enum class Kind { normal, uniform, flat, fixed };
  Kind kind = Kind::flat;
  double a = 0.0;  // normal mean / uniform lower / fixed value
  double b = 1.0;  // normal sd / uniform upper

  static PriorSpec normal(double mean, double sd) { return {Kind::normal, mean, sd}; }
  static PriorSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static PriorSpec flat() { return {Kind::flat, 0.0, 0.0}; }
  static PriorSpec fixed(double value) { return {Kind::fixed, value, 0.0}; }

  /// Median of the prior, used for chain initialization.
  double median() const;
  std::string describe() const;
};

struct ParamBlock {
  std::string name;
  int offset = 0;
  int size = 1;
  Transform transform = Transform::identity;
  double lo = 0.0, hi = 1.0;  // scaled_logit bounds
  int spd_dim = 0;            // cholesky_spd matrix dimension
  PriorSpec prior;
  bool mean_only = false;  // parameter enters the likelihood through mu(.) only

  bool sampled() const { return prior.kind != PriorSpec::Kind::fixed; }
};

/// Immutable description of the flat parameter vector: block names, sizes,
/// transforms and priors.
class ThetaLayout {
 public:
  int add(ParamBlock block);  // returns block index; assigns offset
  int total_size() const { return total_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(const std::string& name) const;
  bool has(const std::string& name) const;
  /// One name per scalar entry, "block" or "block[i]".
  std::vector<std::string> scalar_names() const;

 private:
  std::vector<ParamBlock> blocks_;
  int total_ = 0;
};

/// Named flat vector of all sampled quantities, stored on the unconstrained
/// scale. Value type: snapshots are cheap to copy and immutable by
/// convention once handed to a likelihood evaluation.
class ThetaState {
 public:
  explicit ThetaState(std::shared_ptr<const ThetaLayout> layout);

  const ThetaLayout& layout() const { return *layout_; }
  const Eigen::VectorXd& unconstrained() const { return x_; }
  Eigen::VectorXd& unconstrained() { return x_; }

  /// Constrained values of a named block (vech of the SPD matrix for
  /// cholesky_spd blocks). Throws config_error naming the block when absent.
  Eigen::VectorXd constrained(const std::string& name) const;
  double constrained_scalar(const std::string& name) const;
  /// SPD matrix reconstructed from a cholesky_spd block.
  Eigen::MatrixXd spd_matrix(const std::string& name) const;

  /// Sets a block from constrained values (inverse transform).
  void set_constrained(const std::string& name, const Eigen::VectorXd& values);
  void set_constrained_scalar(const std::string& name, double value);

  /// Constrained values for every scalar entry, in layout order.
  Eigen::VectorXd constrained_all() const;

  /// Sum over blocks of log prior density plus the transform log-Jacobian,
  /// evaluated at the current unconstrained vector; -inf outside support.
  double log_prior() const;

  /// Name of the first block whose prior density is zero at the current
  /// value, or empty when the state is inside the support.
  std::string first_unsupported_block() const;

 private:
  std::shared_ptr<const ThetaLayout> layout_;
  Eigen::VectorXd x_;
};

/// Elementwise forward transform of one block (unconstrained -> constrained).
Eigen::VectorXd transform_forward(const ParamBlock& block, const Eigen::VectorXd& x);
/// Elementwise inverse transform (constrained -> unconstrained).
Eigen::VectorXd transform_inverse(const ParamBlock& block, const Eigen::VectorXd& c);

/// Rebuilds a state from a full vector of constrained values in layout order
/// (e.g. one retained MCMC draw).
ThetaState theta_from_constrained(std::shared_ptr<const ThetaLayout> layout,
                                  const Eigen::VectorXd& constrained);

}  // namespace nsgp

#endif  // NSGP_THETA_HPP
