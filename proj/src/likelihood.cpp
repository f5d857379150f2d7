/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/likelihood.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <string>

#include "nsgp/errors.hpp"
#include "nsgp/linalg.hpp"

namespace nsgp {

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

// Exceptions may not escape an OpenMP region; worker loops record the first
// one here and rethrow after the join.
struct LoopError {
  std::atomic<bool> failed{false};
  std::exception_ptr eptr;

  template <typename Fn>
  void run(Fn&& fn) noexcept {
    if (failed.load(std::memory_order_relaxed)) return;
    try {
      fn();
    } catch (...) {
#pragma omp critical(nsgp_loop_error)
      {
        if (!failed.exchange(true)) eptr = std::current_exception();
      }
    }
  }
  void rethrow() const {
    if (failed.load() && eptr) std::rethrow_exception(eptr);
  }
};

LocalRegression local_regression_impl(int i, std::span<const int> cond, const CovAccessor& cov,
                                      const std::string& context) {
  LocalRegression out;
  const int m = static_cast<int>(cond.size());
  const double c_ii = cov(i, i);
  if (m == 0) {
    out.b.resize(0);
    out.d = c_ii;
  } else {
    Eigen::MatrixXd k_pp(m, m);
    Eigen::VectorXd k_pi(m);
    for (int a = 0; a < m; ++a) {
      k_pi(a) = cov(cond[a], i);
      k_pp(a, a) = cov(cond[a], cond[a]);
      for (int b = a + 1; b < m; ++b) {
        k_pp(a, b) = cov(cond[a], cond[b]);
        k_pp(b, a) = k_pp(a, b);
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(std::move(k_pp), context);
    out.b = llt.solve(k_pi);
    out.d = c_ii - k_pi.dot(out.b);
  }
  if (!(out.d > 0.0)) {
    throw numerical_error("nonpositive conditional variance at " + context);
  }
  return out;
}

}  // namespace

LocalRegression vecchia_local_regression(int i, std::span<const int> cond_set,
                                         const CovAccessor& cov) {
  for (int j : cond_set) {
    if (j >= i) throw config_error("conditioning indices must precede the target index");
  }
  return local_regression_impl(i, cond_set, cov,
                               "local regression for index " + std::to_string(i));
}

// ---------------------------------------------------------------------------

FullFactor prepare_full(const Eigen::MatrixXd& coords, const KernelField& field,
                        const MaternSpec& spec, int dense_cap) {
  if (field.size() > dense_cap) {
    throw config_error("fullGP likelihood with N=" + std::to_string(field.size()) +
                       " exceeds the dense cap " + std::to_string(dense_cap));
  }
  Eigen::MatrixXd c = cov_matrix_full(coords, field, spec, /*add_nugget=*/true);
  FullFactor factor;
  factor.llt = cholesky_with_jitter(std::move(c), "marginal covariance (fullGP)");
  return factor;
}

double loglik_full_from(const FullFactor& factor, const Eigen::VectorXd& resid) {
  return mvn_logpdf_from_llt(factor.llt, resid);
}

double loglik_full(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                   const KernelField& field, const MaternSpec& spec, int dense_cap) {
  const FullFactor factor = prepare_full(coords, field, spec, dense_cap);
  return loglik_full_from(factor, z - field.mu_vector());
}

// ---------------------------------------------------------------------------

NngpFactor prepare_nngp(const Eigen::MatrixXd& coords, const KernelField& field,
                        const MaternSpec& spec, const NeighborGraph& graph) {
  const int n = field.size();
  if (static_cast<int>(graph.nbr.size()) != n) {
    throw config_error("neighbor graph size disagrees with the field");
  }
  NngpFactor factor;
  factor.weights.resize(n);
  factor.cond_var.resize(n);

  // marginal kernel C_z: nugget on the diagonal only (index equality)
  const auto cov_z = [&](int a, int b) {
    double v = covariance(a, b, coords, field, spec);
    if (a == b) v += field.tau(a) * field.tau(a);
    return v;
  };

  LoopError guard;
#pragma omp parallel for schedule(dynamic, 32)
  for (int i = 0; i < n; ++i) {
    guard.run([&] {
      const LocalRegression reg = local_regression_impl(
          i, graph.nbr[i], cov_z, "NNGP conditional for ordered index " + std::to_string(i));
      factor.weights[i] = reg.b;
      factor.cond_var(i) = reg.d;
    });
  }
  guard.rethrow();
  factor.log_cond_var = factor.cond_var.array().log();
  return factor;
}

double loglik_nngp_from(const NngpFactor& factor, const NeighborGraph& graph,
                        const Eigen::VectorXd& resid) {
  const int n = static_cast<int>(factor.cond_var.size());
  Eigen::VectorXd terms(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::vector<int>& nbr = graph.nbr[i];
    double mean = 0.0;
    for (std::size_t t = 0; t < nbr.size(); ++t) mean += factor.weights[i](t) * resid(nbr[t]);
    const double e = resid(i) - mean;
    terms(i) = factor.log_cond_var(i) + e * e / factor.cond_var(i);
  }
  // sequential reduction keeps repeated evaluations bitwise identical
  return -0.5 * (n * kLog2Pi + terms.sum());
}

double loglik_nngp(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                   const KernelField& field, const MaternSpec& spec, const NeighborGraph& graph) {
  const NngpFactor factor = prepare_nngp(coords, field, spec, graph);
  return loglik_nngp_from(factor, graph, z - field.mu_vector());
}

// ---------------------------------------------------------------------------

namespace {

// Parent of a y-node in the interleaved ordering: the latent y_j or the
// observed z_j of an earlier location j.
struct Parent {
  int owner;
  bool is_z;
};

double joint_cov(const Parent& a, const Parent& b, const Eigen::MatrixXd& coords,
                 const KernelField& field, const MaternSpec& spec) {
  double v = covariance(a.owner, b.owner, coords, field, spec);
  if (a.is_z && b.is_z && a.owner == b.owner) v += field.tau(a.owner) * field.tau(a.owner);
  return v;
}

}  // namespace

SparseUFactor build_u_sgv(const Eigen::MatrixXd& coords, const KernelField& field,
                          const MaternSpec& spec, const NeighborGraph& graph,
                          const ConditioningSets& csets) {
  const int n = field.size();
  if (static_cast<int>(graph.nbr.size()) != n || static_cast<int>(csets.q_y.size()) != n ||
      static_cast<int>(csets.q_z.size()) != n) {
    throw config_error("SGV structures disagree with the field size");
  }
  for (int i = 0; i < n; ++i) {
    if (csets.q_y[i].size() + csets.q_z[i].size() != graph.nbr[i].size()) {
      throw config_error("conditioning sets do not partition the neighbor set at index " +
                         std::to_string(i));
    }
  }
  if (!(field.tau_vector().minCoeff() > 0.0)) {
    throw numerical_error("SGV factor requires tau > 0 at every location");
  }

  // column entries computed independently per location, then merged
  std::vector<std::vector<Eigen::Triplet<double>>> col_entries(n);
  std::vector<double> log_diag(2 * n);

  LoopError guard;
#pragma omp parallel for schedule(dynamic, 32)
  for (int i = 0; i < n; ++i) {
    guard.run([&] {
      std::vector<Parent> parents;
      parents.reserve(csets.q_y[i].size() + csets.q_z[i].size());
      for (int j : csets.q_y[i]) parents.push_back({j, false});
      for (int j : csets.q_z[i]) parents.push_back({j, true});

      const int m = static_cast<int>(parents.size());
      Eigen::VectorXd k_pi(m);
      Eigen::VectorXd b_coef(m);
      double d = field.sigma(i) * field.sigma(i);
      if (m > 0) {
        Eigen::MatrixXd k_pp(m, m);
        const Parent self{i, false};
        for (int a = 0; a < m; ++a) {
          k_pi(a) = joint_cov(parents[a], self, coords, field, spec);
          for (int b = a; b < m; ++b) {
            k_pp(a, b) = joint_cov(parents[a], parents[b], coords, field, spec);
            k_pp(b, a) = k_pp(a, b);
          }
        }
        const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(
            std::move(k_pp), "SGV column for y at ordered index " + std::to_string(i));
        b_coef = llt.solve(k_pi);
        d -= k_pi.dot(b_coef);
      }
      if (!(d > 0.0)) {
        throw numerical_error("nonpositive conditional variance in SGV column " +
                              std::to_string(2 * i));
      }
      const double inv_sd = 1.0 / std::sqrt(d);

      auto& entries = col_entries[i];
      entries.reserve(m + 3);
      const int col_y = 2 * i;
      for (int a = 0; a < m; ++a) {
        const int row = 2 * parents[a].owner + (parents[a].is_z ? 1 : 0);
        entries.emplace_back(row, col_y, -b_coef(a) * inv_sd);
      }
      entries.emplace_back(col_y, col_y, inv_sd);
      log_diag[col_y] = std::log(inv_sd);

      // the conditioning vector for z_i is always y_i: unit weight, variance tau^2
      const double inv_tau = 1.0 / field.tau(i);
      const int col_z = 2 * i + 1;
      entries.emplace_back(col_y, col_z, -inv_tau);
      entries.emplace_back(col_z, col_z, inv_tau);
      log_diag[col_z] = std::log(inv_tau);
    });
  }
  guard.rethrow();

  std::vector<Eigen::Triplet<double>> triplets;
  std::size_t total = 0;
  for (const auto& entries : col_entries) total += entries.size();
  triplets.reserve(total);
  for (const auto& entries : col_entries) {
    triplets.insert(triplets.end(), entries.begin(), entries.end());
  }

  SparseUFactor factor;
  factor.n = n;
  factor.u.resize(2 * n, 2 * n);
  factor.u.setFromTriplets(triplets.begin(), triplets.end());
  factor.u.makeCompressed();
  factor.sum_log_diag = 0.0;
  for (double v : log_diag) factor.sum_log_diag += v;
  return factor;
}

ReverseCholesky::ReverseCholesky(Eigen::SparseMatrix<double> a) : a_(std::move(a)) {
  const int n = static_cast<int>(a_.rows());
  a_.makeCompressed();
  std::vector<Eigen::Triplet<double>> rev_trips;
  rev_trips.reserve(a_.nonZeros());
  for (int col = 0; col < a_.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a_, col); it; ++it) {
      rev_trips.emplace_back(n - 1 - static_cast<int>(it.row()), n - 1 - col, it.value());
    }
  }
  Eigen::SparseMatrix<double> a_rev(n, n);
  a_rev.setFromTriplets(rev_trips.begin(), rev_trips.end());
  a_rev.makeCompressed();

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>
      llt(a_rev);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("sparse Cholesky of the latent precision failed");
  }
  l_rev_ = llt.matrixL();
  lt_rev_ = l_rev_.transpose();
  log_det_ = 2.0 * l_rev_.diagonal().array().log().sum();
}

Eigen::VectorXd ReverseCholesky::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd t = rhs.reverse();
  l_rev_.triangularView<Eigen::Lower>().solveInPlace(t);
  lt_rev_.triangularView<Eigen::Upper>().solveInPlace(t);
  return t.reverse();
}

Eigen::VectorXd ReverseCholesky::marginal_variances(std::span<const int> indices) const {
  const int n = size();
  Eigen::VectorXd out(indices.size());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(n - 1 - indices[t]) = 1.0;
    l_rev_.triangularView<Eigen::Lower>().solveInPlace(e);
    out(t) = e.squaredNorm();
  }
  return out;
}

Eigen::VectorXd ReverseCholesky::correlated_draw(const Eigen::VectorXd& mean,
                                                 const Eigen::VectorXd& xi) const {
  Eigen::VectorXd t = xi;
  lt_rev_.triangularView<Eigen::Upper>().solveInPlace(t);
  return mean + t.reverse();
}

SgvFactor prepare_sgv(const Eigen::MatrixXd& coords, const KernelField& field,
                      const MaternSpec& spec, const NeighborGraph& graph,
                      const ConditioningSets& csets) {
  SgvFactor factor;
  factor.u_factor = build_u_sgv(coords, field, spec, graph, csets);
  const int n = factor.u_factor.n;

  // split U into its y-rows and z-rows (N x 2N each)
  std::vector<Eigen::Triplet<double>> y_rows, z_rows;
  const Eigen::SparseMatrix<double>& u = factor.u_factor.u;
  for (int col = 0; col < u.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(u, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (row % 2 == 0) {
        y_rows.emplace_back(row / 2, col, it.value());
      } else {
        z_rows.emplace_back(row / 2, col, it.value());
      }
    }
  }
  Eigen::SparseMatrix<double> u_y(n, 2 * n), u_z(n, 2 * n);
  u_y.setFromTriplets(y_rows.begin(), y_rows.end());
  u_z.setFromTriplets(z_rows.begin(), z_rows.end());

  Eigen::SparseMatrix<double> a = u_y * u_y.transpose();
  factor.lambda_yz = u_y * u_z.transpose();
  factor.lambda_yz.makeCompressed();
  factor.latent_precision = ReverseCholesky(std::move(a));
  return factor;
}

Eigen::VectorXd sgv_latent_conditional_mean(const SgvFactor& factor,
                                            const Eigen::VectorXd& resid) {
  return factor.latent_precision.solve(-(factor.lambda_yz * resid));
}

namespace {

Eigen::VectorXd interleave(const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  Eigen::VectorXd w(2 * y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    w(2 * i) = y(i);
    w(2 * i + 1) = z(i);
  }
  return w;
}

}  // namespace

double loglik_sgv_from_at(const SgvFactor& factor, const Eigen::VectorXd& resid,
                          const Eigen::VectorXd& y_star_resid) {
  const int n = factor.u_factor.n;
  const Eigen::VectorXd w = interleave(y_star_resid, resid);
  const Eigen::VectorXd ut_w = factor.u_factor.u.transpose() * w;
  const double log_joint = -n * kLog2Pi + factor.u_factor.sum_log_diag - 0.5 * ut_w.squaredNorm();

  const Eigen::VectorXd m = sgv_latent_conditional_mean(factor, resid);
  const Eigen::VectorXd dev = y_star_resid - m;
  const double quad = dev.dot(factor.latent_precision.matrix() * dev);
  const double log_cond = -0.5 * n * kLog2Pi + 0.5 * factor.latent_precision.log_det() - 0.5 * quad;
  return log_joint - log_cond;
}

double loglik_sgv_from(const SgvFactor& factor, const Eigen::VectorXd& resid) {
  const int n = factor.u_factor.n;
  const Eigen::VectorXd m = sgv_latent_conditional_mean(factor, resid);
  const Eigen::VectorXd w = interleave(m, resid);
  const Eigen::VectorXd ut_w = factor.u_factor.u.transpose() * w;
  return -0.5 * n * kLog2Pi + factor.u_factor.sum_log_diag - 0.5 * factor.latent_precision.log_det() -
         0.5 * ut_w.squaredNorm();
}

double loglik_sgv(const Eigen::VectorXd& z, const Eigen::MatrixXd& coords,
                  const KernelField& field, const MaternSpec& spec, const NeighborGraph& graph,
                  const ConditioningSets& csets) {
  const SgvFactor factor = prepare_sgv(coords, field, spec, graph, csets);
  return loglik_sgv_from(factor, z - field.mu_vector());
}

}  // namespace nsgp
