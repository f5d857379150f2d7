/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/theta.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

int vech_size(int d) { return d * (d + 1) / 2; }

Eigen::MatrixXd unpack_lower(const ParamBlock& block, const Eigen::VectorXd& x) {
  const int d = block.spd_dim;
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(d, d);
  int idx = 0;
  for (int c = 0; c < d; ++c) {
    lower(c, c) = std::exp(x(idx++));
    for (int r = c + 1; r < d; ++r) lower(r, c) = x(idx++);
  }
  return lower;
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXd out(vech_size(d));
  int idx = 0;
  for (int c = 0; c < d; ++c)
    for (int r = c; r < d; ++r) out(idx++) = m(r, c);
  return out;
}

Eigen::MatrixXd unvech(int d, const Eigen::VectorXd& v) {
  Eigen::MatrixXd m(d, d);
  int idx = 0;
  for (int c = 0; c < d; ++c)
    for (int r = c; r < d; ++r) {
      m(r, c) = v(idx);
      m(c, r) = v(idx);
      ++idx;
    }
  return m;
}

double log_prior_density(const PriorSpec& prior, double c) {
  switch (prior.kind) {
    case PriorSpec::Kind::normal: {
      const double z = (c - prior.a) / prior.b;
      return -0.5 * z * z - std::log(prior.b) - 0.5 * std::log(2.0 * M_PI);
    }
    case PriorSpec::Kind::uniform:
      return (c >= prior.a && c <= prior.b) ? -std::log(prior.b - prior.a) : kNegInf;
    case PriorSpec::Kind::flat:
      return 0.0;
    case PriorSpec::Kind::fixed:
      return 0.0;
  }
  return kNegInf;
}

}  // namespace

double PriorSpec::median() const {
  switch (kind) {
    case Kind::normal:
      return a;
    case Kind::uniform:
      return 0.5 * (a + b);
    case Kind::flat:
      return 0.0;
    case Kind::fixed:
      return a;
  }
  return 0.0;
}

std::string PriorSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::normal:
      os << "Normal(mean=" << a << ", sd=" << b << ")";
      break;
    case Kind::uniform:
      os << "Uniform(" << a << ", " << b << ")";
      break;
    case Kind::flat:
      os << "Flat";
      break;
    case Kind::fixed:
      os << "Fixed(" << a << ")";
      break;
  }
  return os.str();
}

int ThetaLayout::add(ParamBlock block) {
  if (has(block.name)) throw config_error("duplicate parameter block name: " + block.name);
  if (block.transform == Transform::cholesky_spd) {
    block.size = vech_size(block.spd_dim);
  }
  if (block.size < 1) throw config_error("parameter block must be nonempty: " + block.name);
  block.offset = total_;
  total_ += block.size;
  blocks_.push_back(std::move(block));
  return static_cast<int>(blocks_.size()) - 1;
}

const ParamBlock& ThetaLayout::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw config_error("unknown parameter name: " + name);
}

bool ThetaLayout::has(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

std::vector<std::string> ThetaLayout::scalar_names() const {
  std::vector<std::string> names;
  names.reserve(total_);
  for (const auto& b : blocks_) {
    if (b.size == 1) {
      names.push_back(b.name);
    } else {
      for (int i = 0; i < b.size; ++i) names.push_back(b.name + "[" + std::to_string(i) + "]");
    }
  }
  return names;
}

Eigen::VectorXd transform_forward(const ParamBlock& block, const Eigen::VectorXd& x) {
  switch (block.transform) {
    case Transform::identity:
      return x;
    case Transform::log_positive:
      return x.array().exp();
    case Transform::scaled_logit: {
      Eigen::VectorXd c(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        c(i) = block.lo + (block.hi - block.lo) * expit(x(i));
      }
      return c;
    }
    case Transform::cholesky_spd: {
      const Eigen::MatrixXd lower = unpack_lower(block, x);
      return vech(lower * lower.transpose());
    }
  }
  throw std::logic_error("unreachable transform");
}

Eigen::VectorXd transform_inverse(const ParamBlock& block, const Eigen::VectorXd& c) {
  switch (block.transform) {
    case Transform::identity:
      return c;
    case Transform::log_positive:
      if (!(c.minCoeff() > 0.0)) {
        throw std::domain_error("value for log-transformed parameter '" + block.name +
                                "' must be positive");
      }
      return c.array().log();
    case Transform::scaled_logit: {
      Eigen::VectorXd x(c.size());
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double p = (c(i) - block.lo) / (block.hi - block.lo);
        if (!(p > 0.0 && p < 1.0)) {
          throw std::domain_error("value for '" + block.name + "' outside (" +
                                  std::to_string(block.lo) + ", " + std::to_string(block.hi) +
                                  ")");
        }
        x(i) = std::log(p / (1.0 - p));
      }
      return x;
    }
    case Transform::cholesky_spd: {
      const Eigen::MatrixXd m = unvech(block.spd_dim, c);
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() != Eigen::Success) {
        throw std::domain_error("value for '" + block.name + "' is not positive definite");
      }
      const Eigen::MatrixXd lower = llt.matrixL();
      Eigen::VectorXd x(block.size);
      int idx = 0;
      for (int col = 0; col < block.spd_dim; ++col) {
        x(idx++) = std::log(lower(col, col));
        for (int row = col + 1; row < block.spd_dim; ++row) x(idx++) = lower(row, col);
      }
      return x;
    }
  }
  throw std::logic_error("unreachable transform");
}

ThetaState::ThetaState(std::shared_ptr<const ThetaLayout> layout)
    : layout_(std::move(layout)), x_(Eigen::VectorXd::Zero(layout_->total_size())) {
  for (const auto& b : layout_->blocks()) {
    const double med = b.prior.median();
    if (b.transform == Transform::cholesky_spd) {
      // prior applies to the unconstrained entries; median lives there too
      x_.segment(b.offset, b.size).setConstant(med);
      continue;
    }
    Eigen::VectorXd c = Eigen::VectorXd::Constant(b.size, med);
    if (b.transform == Transform::log_positive && !(med > 0.0)) c.setConstant(1.0);
    if (b.transform == Transform::scaled_logit && !(med > b.lo && med < b.hi)) {
      c.setConstant(0.5 * (b.lo + b.hi));
    }
    x_.segment(b.offset, b.size) = transform_inverse(b, c);
  }
}

Eigen::VectorXd ThetaState::constrained(const std::string& name) const {
  const ParamBlock& b = layout_->block(name);
  return transform_forward(b, x_.segment(b.offset, b.size));
}

double ThetaState::constrained_scalar(const std::string& name) const {
  const Eigen::VectorXd v = constrained(name);
  if (v.size() != 1) throw config_error("parameter '" + name + "' is not scalar");
  return v(0);
}

Eigen::MatrixXd ThetaState::spd_matrix(const std::string& name) const {
  const ParamBlock& b = layout_->block(name);
  if (b.transform != Transform::cholesky_spd) {
    throw config_error("parameter '" + name + "' is not an SPD block");
  }
  return unvech(b.spd_dim, constrained(name));
}

void ThetaState::set_constrained(const std::string& name, const Eigen::VectorXd& values) {
  const ParamBlock& b = layout_->block(name);
  if (values.size() != b.size) {
    throw config_error("parameter '" + name + "' expects " + std::to_string(b.size) +
                       " values, got " + std::to_string(values.size()));
  }
  x_.segment(b.offset, b.size) = transform_inverse(b, values);
}

void ThetaState::set_constrained_scalar(const std::string& name, double value) {
  set_constrained(name, Eigen::VectorXd::Constant(1, value));
}

Eigen::VectorXd ThetaState::constrained_all() const {
  Eigen::VectorXd out(layout_->total_size());
  for (const auto& b : layout_->blocks()) {
    out.segment(b.offset, b.size) = transform_forward(b, x_.segment(b.offset, b.size));
  }
  return out;
}

double ThetaState::log_prior() const {
  double total = 0.0;
  for (const auto& b : layout_->blocks()) {
    if (!b.sampled()) continue;
    const auto x = x_.segment(b.offset, b.size);
    if (b.transform == Transform::cholesky_spd) {
      for (int i = 0; i < b.size; ++i) total += log_prior_density(b.prior, x(i));
      continue;
    }
    for (int i = 0; i < b.size; ++i) {
      double c = 0.0, log_jac = 0.0;
      switch (b.transform) {
        case Transform::identity:
          c = x(i);
          break;
        case Transform::log_positive:
          c = std::exp(x(i));
          log_jac = x(i);
          break;
        case Transform::scaled_logit:
          c = b.lo + (b.hi - b.lo) * expit(x(i));
          log_jac = std::log(b.hi - b.lo) - softplus(x(i)) - softplus(-x(i));
          break;
        default:
          throw std::logic_error("unreachable transform");
      }
      const double lp = log_prior_density(b.prior, c);
      if (lp == kNegInf) return kNegInf;
      total += lp + log_jac;
    }
  }
  return total;
}

ThetaState theta_from_constrained(std::shared_ptr<const ThetaLayout> layout,
                                  const Eigen::VectorXd& constrained) {
  if (constrained.size() != layout->total_size()) {
    throw config_error("constrained vector length disagrees with the parameter layout");
  }
  ThetaState theta(layout);
  for (const auto& b : layout->blocks()) {
    theta.unconstrained().segment(b.offset, b.size) =
        transform_inverse(b, constrained.segment(b.offset, b.size));
  }
  return theta;
}

std::string ThetaState::first_unsupported_block() const {
  for (const auto& b : layout_->blocks()) {
    if (!b.sampled() || b.transform == Transform::cholesky_spd) continue;
    const Eigen::VectorXd c = transform_forward(b, x_.segment(b.offset, b.size));
    for (int i = 0; i < b.size; ++i) {
      if (log_prior_density(b.prior, c(i)) == kNegInf) return b.name;
    }
  }
  return {};
}

}  // namespace nsgp
