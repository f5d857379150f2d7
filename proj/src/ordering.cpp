/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/ordering.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <utility>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

double sq_dist(const Eigen::MatrixXd& a, int i, const Eigen::MatrixXd& b, int j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

OrderedCoords order_maxmin(const Eigen::MatrixXd& coords, std::uint64_t seed, int max_exact,
                           int subsample) {
  const int n = static_cast<int>(coords.rows());
  if (n < 1) throw data_error("order_maxmin: empty coordinate set");
  if (!coords.allFinite()) throw data_error("order_maxmin: coordinates must be finite");

  OrderedCoords out;
  out.perm.reserve(n);

  const Eigen::RowVectorXd centroid = coords.colwise().mean();
  int first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d = (coords.row(i) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  out.perm.push_back(first);

  std::vector<int> remaining;
  remaining.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    if (i != first) remaining.push_back(i);
  }
  std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
  for (int j : remaining) dmin[j] = sq_dist(coords, j, coords, first);

  const bool exact = n <= max_exact;
  std::mt19937_64 rng(seed);

  while (!remaining.empty()) {
    int pick_pos = 0;
    if (exact || static_cast<int>(remaining.size()) <= subsample) {
      double best_d = -1.0;
      int best_idx = n;
      for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
        const int j = remaining[pos];
        if (dmin[j] > best_d || (dmin[j] == best_d && j < best_idx)) {
          best_d = dmin[j];
          best_idx = j;
          pick_pos = static_cast<int>(pos);
        }
      }
    } else {
      // seeded uniform subsample of candidates, selected without replacement
      double best_d = -1.0;
      int best_idx = n;
      for (int t = 0; t < subsample; ++t) {
        const std::size_t swap_with =
            t + static_cast<std::size_t>(rng() % (remaining.size() - t));
        std::swap(remaining[t], remaining[swap_with]);
        const int j = remaining[t];
        if (dmin[j] > best_d || (dmin[j] == best_d && j < best_idx)) {
          best_d = dmin[j];
          best_idx = j;
          pick_pos = t;
        }
      }
    }
    const int chosen = remaining[pick_pos];
    remaining[pick_pos] = remaining.back();
    remaining.pop_back();
    out.perm.push_back(chosen);
    for (int j : remaining) {
      const double d = sq_dist(coords, j, coords, chosen);
      if (d < dmin[j]) dmin[j] = d;
    }
  }

  out.coords.resize(n, coords.cols());
  out.inverse_perm.assign(n, 0);
  for (int pos = 0; pos < n; ++pos) {
    out.coords.row(pos) = coords.row(out.perm[pos]);
    out.inverse_perm[out.perm[pos]] = pos;
  }
  out.n_observed = n;
  return out;
}

NeighborGraph determine_neighbors(const OrderedCoords& ordered, int k) {
  if (k < 1) throw config_error("determine_neighbors: k must be >= 1");
  const int n = static_cast<int>(ordered.coords.rows());
  NeighborGraph graph;
  graph.k = k;
  graph.nbr.resize(n);

#pragma omp parallel
  {
    std::vector<std::pair<double, int>> cand;
#pragma omp for schedule(dynamic, 32)
    for (int i = 1; i < n; ++i) {
      const int m = std::min(k, i);
      cand.clear();
      cand.reserve(i);
      for (int j = 0; j < i; ++j) {
        cand.emplace_back(sq_dist(ordered.coords, i, ordered.coords, j), j);
      }
      // lexicographic (distance, index) comparison: ties go to the smallest index
      std::nth_element(cand.begin(), cand.begin() + (m - 1), cand.end());
      cand.resize(m);
      std::vector<int>& nbr = graph.nbr[i];
      nbr.reserve(m);
      for (const auto& [d, j] : cand) nbr.push_back(j);
      std::sort(nbr.begin(), nbr.end());
    }
  }
  return graph;
}

ConditioningSets sgv_setup(const NeighborGraph& graph, SgvStrategy strategy) {
  const int n = static_cast<int>(graph.nbr.size());
  ConditioningSets sets;
  sets.q_y.resize(n);
  sets.q_z.resize(n);
  switch (strategy) {
    case SgvStrategy::observed_only:
      sets.q_z = graph.nbr;
      return sets;
    case SgvStrategy::latent_only:
      sets.q_y = graph.nbr;
      return sets;
    case SgvStrategy::sgv:
      break;
  }
  // j joins q_y(i) iff j's own latent conditioning set is visible from i,
  // i.e. q_y(j) is a subset of nbr[i]; all vectors kept sorted.
  for (int i = 1; i < n; ++i) {
    const std::vector<int>& nbr = graph.nbr[i];
    for (int j : nbr) {
      if (std::includes(nbr.begin(), nbr.end(), sets.q_y[j].begin(), sets.q_y[j].end())) {
        sets.q_y[i].push_back(j);
      } else {
        sets.q_z[i].push_back(j);
      }
    }
  }
  return sets;
}

std::pair<OrderedCoords, NeighborGraph> obs_pred_extend(const OrderedCoords& ordered,
                                                        const NeighborGraph& graph,
                                                        const Eigen::MatrixXd& pred_coords,
                                                        int k) {
  const int n = static_cast<int>(ordered.coords.rows());
  const int m = static_cast<int>(pred_coords.rows());
  if (m == 0) return {ordered, graph};
  if (pred_coords.cols() != ordered.coords.cols()) {
    throw data_error("obs_pred_extend: prediction coordinate dimension mismatch");
  }
  if (k < 1) throw config_error("obs_pred_extend: k must be >= 1");

  OrderedCoords ext;
  ext.coords.resize(n + m, ordered.coords.cols());
  ext.coords.topRows(n) = ordered.coords;
  ext.coords.bottomRows(m) = pred_coords;
  ext.perm = ordered.perm;
  ext.inverse_perm = ordered.inverse_perm;
  for (int j = 0; j < m; ++j) {
    ext.perm.push_back(n + j);
    ext.inverse_perm.push_back(n + j);
  }
  ext.n_observed = n;

  NeighborGraph ext_graph = graph;
  ext_graph.k = std::max(graph.k, k);
  ext_graph.nbr.resize(n + m);
  std::vector<std::pair<double, int>> cand;
  for (int j = 0; j < m; ++j) {
    const int node = n + j;
    const int avail = node;
    const int take = std::min(k, avail);
    cand.clear();
    cand.reserve(avail);
    for (int t = 0; t < avail; ++t) {
      cand.emplace_back(sq_dist(ext.coords, node, ext.coords, t), t);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<int>& nbr = ext_graph.nbr[node];
    nbr.reserve(take);
    for (int t = 0; t < take; ++t) nbr.push_back(cand[t].second);
    std::sort(nbr.begin(), nbr.end());
  }
  return {std::move(ext), std::move(ext_graph)};
}

}  // namespace nsgp
