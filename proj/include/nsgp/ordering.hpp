/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#ifndef NSGP_ORDERING_HPP
#define NSGP_ORDERING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace nsgp {

/// Locations in maxmin (or obs-pred extended) order. perm maps new position
/// to original index; inverse_perm is its inverse.
struct OrderedCoords {
  Eigen::MatrixXd coords;          // N x d, reordered
  std::vector<int> perm;           // perm[new] = old
  std::vector<int> inverse_perm;   // inverse_perm[old] = new
  int n_observed = 0;              // prefix length of observed sites (obs-pred)
};

/// Previous-point conditioning sets: nbr[i] lists the (up to k) nearest
/// earlier-ordered locations of point i, ascending index order.
struct NeighborGraph {
  int k = 0;
  std::vector<std::vector<int>> nbr;
};

/// SGV latent/observed split of each conditioning set: q_y[i] and q_z[i]
/// partition nbr[i].
struct ConditioningSets {
  std::vector<std::vector<int>> q_y;
  std::vector<std::vector<int>> q_z;
};

enum class SgvStrategy { sgv, observed_only, latent_only };

/// Approximate maximum-minimum-distance ordering. The first point is the one
/// nearest the coordinate centroid; each subsequent point maximizes its
/// minimum distance to the already-ordered set; ties break to the smallest
/// original index. Exact greedy for N <= max_exact; beyond that, each step
/// selects within a seeded uniform subsample of `subsample` unordered points.
OrderedCoords order_maxmin(const Eigen::MatrixXd& coords, std::uint64_t seed = 0,
                           int max_exact = 10000, int subsample = 2000);

/// Exact k-nearest earlier-ordered neighbors (Euclidean), ties to the
/// smallest index. k >= N is clamped per point (full conditioning).
NeighborGraph determine_neighbors(const OrderedCoords& ordered, int k);

/// Splits each conditioning set into latent/observed parts. The sgv rule
/// places j in q_y(i) iff q_y(j) is contained in nbr[i]; observed_only gives
/// the NNGP-R structure, latent_only conditions on the process everywhere.
ConditioningSets sgv_setup(const NeighborGraph& graph, SgvStrategy strategy = SgvStrategy::sgv);

/// Appends M prediction locations after the observed ones (obs-pred
/// ordering, prediction sites in user order). Prediction-site neighbors are
/// the k nearest among all earlier-ordered points; the observed-block graph
/// is returned unchanged.
std::pair<OrderedCoords, NeighborGraph> obs_pred_extend(const OrderedCoords& ordered,
                                                        const NeighborGraph& graph,
                                                        const Eigen::MatrixXd& pred_coords, int k);

}  // namespace nsgp

#endif  // NSGP_ORDERING_HPP
