/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double std_normal(std::mt19937_64& rng) { return std::normal_distribution<double>()(rng); }

}  // namespace

// ---------------------------------------------------------------------------

struct PosteriorModel::Cache {
  std::mutex mutex;
  bool valid = false;
  Eigen::VectorXd cov_key;
  std::optional<FullFactor> full;
  std::optional<NngpFactor> nngp;
  std::optional<SgvFactor> sgv;
};

PosteriorModel::PosteriorModel(ModelSpec model, Eigen::MatrixXd ordered_coords,
                               Eigen::VectorXd ordered_z, NeighborGraph graph,
                               ConditioningSets csets)
    : assembler_(std::move(model), std::move(ordered_coords)),
      z_(std::move(ordered_z)),
      graph_(std::move(graph)),
      csets_(std::move(csets)),
      cache_(std::make_shared<Cache>()) {
  if (z_.size() != assembler_.coords().rows()) {
    throw data_error("observation vector length disagrees with the coordinate count");
  }
  layout_ = build_theta_layout(assembler_.model(), assembler_.spatial_dim());
  const LikelihoodKind kind = assembler_.model().likelihood;
  if (kind != LikelihoodKind::full_gp) {
    if (static_cast<Eigen::Index>(graph_.nbr.size()) != z_.size()) {
      throw config_error("likelihood '" + to_string(kind) + "' requires a neighbor graph");
    }
  } else if (!graph_.nbr.empty()) {
    throw config_error("fullGP likelihood forbids a neighbor graph");
  }
  if (kind == LikelihoodKind::sgv &&
      static_cast<Eigen::Index>(csets_.q_y.size()) != z_.size()) {
    throw config_error("SGV likelihood requires conditioning sets");
  }
  for (const ParamBlock& block : layout_->blocks()) {
    if (block.mean_only) continue;
    for (int i = 0; i < block.size; ++i) covariance_indices_.push_back(block.offset + i);
  }
}

void PosteriorModel::invalidate_cache() const {
  std::lock_guard<std::mutex> guard(cache_->mutex);
  cache_->valid = false;
}

double PosteriorModel::log_likelihood(const ThetaState& theta) const {
  Eigen::VectorXd key(covariance_indices_.size());
  for (std::size_t t = 0; t < covariance_indices_.size(); ++t) {
    key(t) = theta.unconstrained()(covariance_indices_[t]);
  }
  const LikelihoodKind kind = assembler_.model().likelihood;

  std::lock_guard<std::mutex> guard(cache_->mutex);
  Eigen::VectorXd mean;
  if (!cache_->valid || cache_->cov_key.size() != key.size() || cache_->cov_key != key) {
    const KernelField field = assembler_.assemble(theta);
    mean = field.mu_vector();
    switch (kind) {
      case LikelihoodKind::full_gp:
        cache_->full = prepare_full(assembler_.coords(), field, assembler_.model().matern,
                                    assembler_.model().dense_cap);
        break;
      case LikelihoodKind::nngp:
        cache_->nngp = prepare_nngp(assembler_.coords(), field, assembler_.model().matern, graph_);
        break;
      case LikelihoodKind::sgv:
        cache_->sgv =
            prepare_sgv(assembler_.coords(), field, assembler_.model().matern, graph_, csets_);
        break;
    }
    cache_->cov_key = key;
    cache_->valid = true;
  } else {
    mean = assembler_.assemble_mean(theta);
  }

  const Eigen::VectorXd resid = z_ - mean;
  switch (kind) {
    case LikelihoodKind::full_gp:
      return loglik_full_from(*cache_->full, resid);
    case LikelihoodKind::nngp:
      return loglik_nngp_from(*cache_->nngp, graph_, resid);
    case LikelihoodKind::sgv:
      return loglik_sgv_from(*cache_->sgv, resid);
  }
  return kNegInf;
}

double PosteriorModel::log_posterior(const ThetaState& theta) const {
  const double prior = theta.log_prior();
  if (prior == kNegInf) return kNegInf;
  try {
    return prior + log_likelihood(theta);
  } catch (const numerical_error& err) {
    ++numerical_rejections_;
    if (numerical_rejections_ <= 5) {
      std::cerr << "[nsgp] likelihood failure treated as rejection: " << err.what() << "\n";
    }
    invalidate_cache();
    return kNegInf;
  }
}

// ---------------------------------------------------------------------------

SamplerSpec SamplerSpec::rw(int index, std::string label, double scale) {
  SamplerSpec spec;
  spec.kind = Kind::rw;
  spec.indices = {index};
  spec.label = std::move(label);
  spec.initial_scale = scale;
  spec.target_accept = 0.44;
  return spec;
}

SamplerSpec SamplerSpec::block_rw(std::vector<int> indices, std::string label, double scale) {
  SamplerSpec spec;
  spec.kind = Kind::block_rw;
  spec.indices = std::move(indices);
  spec.label = std::move(label);
  spec.initial_scale = scale;
  spec.target_accept = 0.234;
  return spec;
}

SamplerSpec SamplerSpec::slice(int index, std::string label, double width) {
  SamplerSpec spec;
  spec.kind = Kind::slice;
  spec.indices = {index};
  spec.label = std::move(label);
  spec.initial_scale = width;
  spec.target_accept = 1.0;
  return spec;
}

double metropolis_log_accept(double log_post_current, double log_post_proposed) {
  if (log_post_proposed == kNegInf) return kNegInf;
  return std::min(0.0, log_post_proposed - log_post_current);
}

namespace {

void robbins_monro_scale(ChainState::Adaptation& ad, double target) {
  if (ad.proposals == 0) return;
  ++ad.rounds;
  const double rate = static_cast<double>(ad.accepts) / static_cast<double>(ad.proposals);
  const double gain = 1.0 / std::sqrt(static_cast<double>(ad.rounds));
  ad.scale *= std::exp(gain * (rate - target));
  ad.scale = std::clamp(ad.scale, 1e-12, 1e6);
  ad.proposals = 0;
  ad.accepts = 0;
}

void update_block_moments(ChainState::Adaptation& ad, const Eigen::VectorXd& value) {
  if (ad.mean.size() != value.size()) {
    ad.mean = Eigen::VectorXd::Zero(value.size());
    ad.scatter = Eigen::MatrixXd::Zero(value.size(), value.size());
    ad.moment_count = 0;
  }
  ++ad.moment_count;
  const Eigen::VectorXd delta = value - ad.mean;
  ad.mean += delta / static_cast<double>(ad.moment_count);
  ad.scatter += delta * (value - ad.mean).transpose();
}

void refresh_block_proposal(ChainState::Adaptation& ad, int dim) {
  if (ad.moment_count < 10 * dim) return;
  Eigen::MatrixXd cov = ad.scatter / static_cast<double>(ad.moment_count - 1);
  cov *= 5.6644 / static_cast<double>(dim);  // 2.38^2 / d
  cov.diagonal().array() += 1e-10;
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) ad.proposal_chol = llt.matrixL();
}

}  // namespace

void rw_step(ChainState& state, const SamplerSpec& spec, int spec_index,
             const PosteriorModel& posterior) {
  ChainState::Adaptation& ad = state.adaptation[spec_index];
  const int index = spec.indices[0];

  ThetaState proposal = state.theta;
  proposal.unconstrained()(index) += ad.scale * std_normal(state.rng);
  const double lp = posterior.log_posterior(proposal);
  ++ad.proposals;
  ++ad.total_proposals;
  if (std::log(uniform01(state.rng)) < metropolis_log_accept(state.log_post, lp)) {
    state.theta = std::move(proposal);
    state.log_post = lp;
    ++ad.accepts;
    ++ad.total_accepts;
  }
  if (state.adapting && ad.proposals >= spec.adapt_interval) {
    robbins_monro_scale(ad, spec.target_accept);
  }
}

void block_rw_step(ChainState& state, const SamplerSpec& spec, int spec_index,
                   const PosteriorModel& posterior) {
  ChainState::Adaptation& ad = state.adaptation[spec_index];
  const int dim = static_cast<int>(spec.indices.size());

  Eigen::VectorXd noise(dim);
  for (int t = 0; t < dim; ++t) noise(t) = std_normal(state.rng);
  Eigen::VectorXd step =
      ad.proposal_chol.size() > 0 ? Eigen::VectorXd(ad.proposal_chol * noise) : noise;

  ThetaState proposal = state.theta;
  for (int t = 0; t < dim; ++t) {
    proposal.unconstrained()(spec.indices[t]) += ad.scale * step(t);
  }
  const double lp = posterior.log_posterior(proposal);
  ++ad.proposals;
  ++ad.total_proposals;
  if (std::log(uniform01(state.rng)) < metropolis_log_accept(state.log_post, lp)) {
    state.theta = std::move(proposal);
    state.log_post = lp;
    ++ad.accepts;
    ++ad.total_accepts;
  }

  if (state.adapting) {
    Eigen::VectorXd current(dim);
    for (int t = 0; t < dim; ++t) current(t) = state.theta.unconstrained()(spec.indices[t]);
    update_block_moments(ad, current);
    if (ad.proposals >= spec.adapt_interval) {
      refresh_block_proposal(ad, dim);
      robbins_monro_scale(ad, spec.target_accept);
    }
  }
}

void slice_step(ChainState& state, const SamplerSpec& spec, int spec_index,
                const PosteriorModel& posterior) {
  ChainState::Adaptation& ad = state.adaptation[spec_index];
  const int index = spec.indices[0];
  const double x0 = state.theta.unconstrained()(index);

  const auto logpost_at = [&](double x) {
    ThetaState probe = state.theta;
    probe.unconstrained()(index) = x;
    return posterior.log_posterior(probe);
  };

  const double log_y = state.log_post + std::log(uniform01(state.rng));
  const double width = ad.scale;

  // stepping out
  double lo = x0 - width * uniform01(state.rng);
  double hi = lo + width;
  int expand = 0;
  while (logpost_at(lo) > log_y) {
    lo -= width;
    if (++expand > 1000) throw numerical_error("slice sampler: interval expansion did not stop");
  }
  while (logpost_at(hi) > log_y) {
    hi += width;
    if (++expand > 1000) throw numerical_error("slice sampler: interval expansion did not stop");
  }

  // shrinkage
  int shrink = 0;
  double x1 = x0, lp1 = state.log_post;
  while (true) {
    x1 = lo + (hi - lo) * uniform01(state.rng);
    lp1 = logpost_at(x1);
    if (lp1 > log_y) break;
    if (x1 < x0) {
      lo = x1;
    } else {
      hi = x1;
    }
    if (++shrink > 1000) {
      throw numerical_error("slice sampler: >1000 shrink iterations (pathological target)");
    }
  }

  state.theta.unconstrained()(index) = x1;
  state.log_post = lp1;
  ++ad.proposals;
  ++ad.total_proposals;
  ++ad.accepts;
  ++ad.total_accepts;
  ad.move_sum += std::abs(x1 - x0);

  if (state.adapting && ad.proposals >= spec.adapt_interval) {
    const double mean_move = ad.move_sum / static_cast<double>(ad.proposals);
    if (mean_move > 0.0) {
      ++ad.rounds;
      const double gain = 1.0 / std::sqrt(static_cast<double>(ad.rounds));
      ad.scale *= std::exp(gain * std::log(2.0 * mean_move / ad.scale));
      ad.scale = std::clamp(ad.scale, 1e-10, 1e6);
    }
    ad.proposals = 0;
    ad.accepts = 0;
    ad.move_sum = 0.0;
  }
}

// ---------------------------------------------------------------------------

std::vector<std::vector<int>> spatial_subblocks(const Eigen::MatrixXd& knots, int block_size,
                                                std::uint64_t seed) {
  const int n = static_cast<int>(knots.rows());
  if (block_size < 1) throw config_error("latent sub-block size must be >= 1");
  const int groups = (n + block_size - 1) / block_size;
  if (groups <= 1) return {[&] {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    return all;
  }()};

  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::MatrixXd centers(groups, knots.cols());
  for (int g = 0; g < groups; ++g) centers.row(g) = knots.row(order[g]);

  std::vector<int> assign(n, 0);
  for (int round = 0; round < 25; ++round) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int g = 0; g < groups; ++g) {
        const double d = (knots.row(i) - centers.row(g)).squaredNorm();
        if (d < best) {
          best = d;
          assign[i] = g;
        }
      }
    }
    for (int g = 0; g < groups; ++g) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(knots.cols());
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (assign[i] == g) {
          mean += knots.row(i);
          ++count;
        }
      }
      if (count > 0) {
        centers.row(g) = mean / count;
      } else {
        centers.row(g) = knots.row(order[rng() % n]);
      }
    }
  }
  std::vector<std::vector<int>> out(groups);
  for (int i = 0; i < n; ++i) out[assign[i]].push_back(i);
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const std::vector<int>& g) { return g.empty(); }),
            out.end());
  return out;
}

std::vector<SamplerSpec> build_scheme(const ThetaLayout& layout, const ModelSpec& model,
                                      const SchemeConfig& config) {
  std::vector<SamplerSpec> scheme;
  const double s0 = config.initial_scale;

  const auto knots_for = [&](const std::string& block_name) -> const Eigen::MatrixXd& {
    if (block_name.rfind("mu", 0) == 0) return model.mu.knots;
    if (block_name.rfind("tau", 0) == 0) return model.tau.knots;
    if (block_name.rfind("sigma", 0) == 0) return model.sigma.knots;
    return model.Sigma.knots;
  };

  const auto add_latent_blocks = [&](const std::vector<const ParamBlock*>& latents,
                                     const Eigen::MatrixXd& knots, const std::string& label) {
    const auto groups = spatial_subblocks(knots, config.latent_block_size, /*seed=*/17);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<int> indices;
      for (const ParamBlock* block : latents) {
        for (int idx : groups[g]) indices.push_back(block->offset + idx);
      }
      scheme.push_back(
          SamplerSpec::block_rw(std::move(indices), label + "[" + std::to_string(g) + "]", s0));
    }
  };

  bool np_handled = false;
  for (const ParamBlock& block : layout.blocks()) {
    if (!block.sampled()) continue;
    const bool is_latent = block.name.size() > 2 &&
                           block.name.compare(block.name.size() - 2, 2, "_w") == 0;
    if (is_latent) {
      const bool np_component = block.name.rfind("Sigma1", 0) == 0 ||
                                block.name.rfind("Sigma2", 0) == 0 ||
                                block.name.rfind("Sigma3", 0) == 0;
      if (np_component && config.latent_joint) {
        if (np_handled) continue;
        np_handled = true;
        std::vector<const ParamBlock*> latents;
        for (const char* name : {"Sigma1_w", "Sigma2_w", "Sigma3_w"}) {
          if (layout.has(name)) latents.push_back(&layout.block(name));
        }
        add_latent_blocks(latents, model.Sigma.knots, "Sigma_w_joint");
      } else {
        add_latent_blocks({&block}, knots_for(block.name), block.name);
      }
      continue;
    }
    if (block.size > 1 || block.transform == Transform::cholesky_spd) {
      std::vector<int> indices(block.size);
      for (int i = 0; i < block.size; ++i) indices[i] = block.offset + i;
      scheme.push_back(SamplerSpec::block_rw(std::move(indices), block.name, s0));
      continue;
    }
    const bool is_hyper = block.name.find("_gp_") != std::string::npos;
    if (is_hyper && config.hyper_slice) {
      scheme.push_back(SamplerSpec::slice(block.offset, block.name, s0));
    } else {
      scheme.push_back(SamplerSpec::rw(block.offset, block.name, s0));
    }
  }
  return scheme;
}

// ---------------------------------------------------------------------------

PosteriorSamples run_chain(const PosteriorModel& posterior,
                           const std::vector<SamplerSpec>& scheme, const ChainOptions& options) {
  const auto layout = posterior.layout();

  if (options.burnin > options.iterations) {
    throw config_error("burnin exceeds the iteration count");
  }
  if (options.thin < 1 || (options.iterations - options.burnin) % options.thin != 0) {
    throw config_error("thin must divide (iterations - burnin) exactly");
  }

  // every sampled parameter covered exactly once, fixed parameters untouched
  {
    std::set<int> covered;
    for (const SamplerSpec& spec : scheme) {
      if (spec.indices.empty()) throw config_error("sampler '" + spec.label + "' has no targets");
      for (int idx : spec.indices) {
        if (!covered.insert(idx).second) {
          throw config_error("parameter index " + std::to_string(idx) +
                             " is targeted by more than one sampler");
        }
      }
    }
    for (const ParamBlock& block : layout->blocks()) {
      for (int i = 0; i < block.size; ++i) {
        const bool has = covered.count(block.offset + i) > 0;
        if (block.sampled() && !has) {
          throw config_error("sampled parameter '" + block.name + "' is not covered by the scheme");
        }
        if (!block.sampled() && has) {
          throw config_error("fixed parameter '" + block.name + "' is targeted by a sampler");
        }
      }
    }
  }

  ChainState state(options.init ? *options.init : ThetaState(layout));
  state.rng.seed(options.seed);
  state.adaptation.resize(scheme.size());
  for (std::size_t s = 0; s < scheme.size(); ++s) state.adaptation[s].scale = scheme[s].initial_scale;

  posterior.invalidate_cache();
  state.log_post = posterior.log_posterior(state.theta);
  if (!std::isfinite(state.log_post)) {
    const std::string offender = state.theta.first_unsupported_block();
    throw config_error("initial posterior is degenerate" +
                       (offender.empty() ? std::string(" (likelihood failure at the start value)")
                                         : " (prior violated for '" + offender + "')"));
  }

  const long total_kept = (options.iterations - options.burnin) / options.thin;
  PosteriorSamples samples;
  samples.names = layout->scalar_names();
  samples.sampled.assign(layout->total_size(), 0);
  for (const ParamBlock& block : layout->blocks()) {
    for (int i = 0; i < block.size; ++i) samples.sampled[block.offset + i] = block.sampled() ? 1 : 0;
  }
  samples.draws.resize(total_kept, layout->total_size());
  samples.iterations = options.iterations;
  samples.burnin = options.burnin;
  samples.thin = options.thin;
  samples.seed = options.seed;

  const auto t_start = std::chrono::steady_clock::now();
  long kept = 0;
  for (long iter = 1; iter <= options.iterations; ++iter) {
    state.iteration = iter;
    state.adapting = iter <= options.burnin;
    for (std::size_t s = 0; s < scheme.size(); ++s) {
      switch (scheme[s].kind) {
        case SamplerSpec::Kind::rw:
          rw_step(state, scheme[s], static_cast<int>(s), posterior);
          break;
        case SamplerSpec::Kind::block_rw:
          block_rw_step(state, scheme[s], static_cast<int>(s), posterior);
          break;
        case SamplerSpec::Kind::slice:
          slice_step(state, scheme[s], static_cast<int>(s), posterior);
          break;
      }
    }
    if (iter > options.burnin && (iter - options.burnin) % options.thin == 0) {
      samples.draws.row(kept++) = state.theta.constrained_all();
    }
    if (iter % 1000 == 0) {
      // cache-coherence spot check on the stored posterior value
      posterior.invalidate_cache();
      const double fresh = posterior.log_posterior(state.theta);
      if (std::abs(fresh - state.log_post) > 1e-8 * std::max(1.0, std::abs(fresh))) {
        throw numerical_error("chain log-posterior cache drifted from a fresh evaluation");
      }
      state.log_post = fresh;
      if (options.progress) {
        double acc = 0.0;
        long np = 0;
        for (const auto& ad : state.adaptation) {
          acc += static_cast<double>(ad.total_accepts);
          np += ad.total_proposals;
        }
        std::cerr << "[nsgp] iteration " << iter << "/" << options.iterations
                  << "  log-posterior " << state.log_post << "  mean acceptance "
                  << (np > 0 ? acc / static_cast<double>(np) : 0.0) << "\n";
      }
    }
  }
  const auto t_end = std::chrono::steady_clock::now();
  samples.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();

  samples.sampler_labels.reserve(scheme.size());
  samples.acceptance_rates.reserve(scheme.size());
  for (std::size_t s = 0; s < scheme.size(); ++s) {
    samples.sampler_labels.push_back(scheme[s].label);
    const auto& ad = state.adaptation[s];
    samples.acceptance_rates.push_back(
        ad.total_proposals > 0
            ? static_cast<double>(ad.total_accepts) / static_cast<double>(ad.total_proposals)
            : 0.0);
  }
  return samples;
}

// ---------------------------------------------------------------------------

double effective_sample_size(const Eigen::VectorXd& draws) {
  const long n = draws.size();
  if (n < 10) throw config_error("effective_sample_size requires at least 10 draws");
  const double mean = draws.mean();
  const Eigen::VectorXd centered = draws.array() - mean;
  const double gamma0 = centered.squaredNorm() / static_cast<double>(n);
  if (gamma0 == 0.0) return 0.0;  // constant chain, flagged by the caller

  const auto gamma_at = [&](long lag) {
    if (lag >= n) return 0.0;
    double acc = 0.0;
    for (long t = 0; t + lag < n; ++t) acc += centered(t) * centered(t + lag);
    return acc / static_cast<double>(n);
  };

  // Geyer initial positive sequence: sum successive autocovariance pairs
  // while they stay positive.
  double sigma2 = -gamma0;
  for (long m = 0; 2 * m + 1 < n; ++m) {
    const double pair = gamma_at(2 * m) + gamma_at(2 * m + 1);
    if (pair <= 0.0) break;
    sigma2 += 2.0 * pair;
  }
  if (sigma2 <= 0.0) return static_cast<double>(n);
  return static_cast<double>(n) * gamma0 / sigma2;
}

EfficiencyReport efficiency_report(const PosteriorSamples& samples) {
  const int p = static_cast<int>(samples.draws.cols());
  EfficiencyReport report;
  report.names = samples.names;
  report.ess.resize(p);
  report.ess_per_second.resize(p);
  report.constant_flags.assign(p, 0);
  report.min_ess = std::numeric_limits<double>::infinity();

  const double seconds = std::max(samples.wall_seconds, 1e-12);
  for (int j = 0; j < p; ++j) {
    if (!samples.sampled[j]) {
      report.ess(j) = 0.0;
      report.ess_per_second(j) = 0.0;
      continue;
    }
    const double ess = effective_sample_size(samples.draws.col(j));
    report.ess(j) = ess;
    report.ess_per_second(j) = ess / seconds;
    if (ess == 0.0) report.constant_flags[j] = 1;
    report.min_ess = std::min(report.min_ess, ess);
  }
  if (!std::isfinite(report.min_ess)) report.min_ess = 0.0;
  report.min_efficiency = report.min_ess / seconds;
  return report;
}

}  // namespace nsgp
