/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "nsgp/errors.hpp"
#include "nsgp/io.hpp"
#include "nsgp/likelihood.hpp"
#include "nsgp/mcmc.hpp"
#include "nsgp/ordering.hpp"
#include "nsgp/predict.hpp"
#include "nsgp/process_models.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/scoring.hpp"
#include "nsgp/simulate.hpp"

namespace nsgp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config parsing

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::exception& err) {
    throw config_error("config '" + path + "' is not valid JSON: " + err.what());
  }
  return config;
}

void check_keys(const json& node, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!node.is_object()) throw config_error("config section '" + context + "' must be an object");
  for (const auto& [key, value] : node.items()) {
    if (!allowed.count(key)) {
      throw config_error("unknown key '" + key + "' in config section '" + context + "'");
    }
  }
}

template <typename T>
T get_or(const json& node, const std::string& key, T fallback) {
  if (!node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T require(const json& node, const std::string& key, const std::string& context) {
  if (!node.contains(key)) {
    throw config_error("config section '" + context + "' requires key '" + key + "'");
  }
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + context + "." + key + "' has the wrong type");
  }
}

PriorSpec parse_prior(const json& node, const std::string& name) {
  check_keys(node, {"dist", "mean", "sd", "lower", "upper", "value"}, "priors." + name);
  const std::string dist = require<std::string>(node, "dist", "priors." + name);
  if (dist == "normal") {
    return PriorSpec::normal(require<double>(node, "mean", name),
                             require<double>(node, "sd", name));
  }
  if (dist == "uniform") {
    return PriorSpec::uniform(require<double>(node, "lower", name),
                              require<double>(node, "upper", name));
  }
  if (dist == "flat") return PriorSpec::flat();
  if (dist == "fixed") return PriorSpec::fixed(require<double>(node, "value", name));
  throw config_error("prior '" + name + "' has unknown dist '" + dist +
                     "' (expected normal, uniform, flat or fixed)");
}

// Standardization statistics of the covariate columns used by the fit.
struct Standardizer {
  bool active = false;
  std::vector<std::string> names;
  std::vector<double> mean, sd;

  double apply(const std::string& name, double value) const {
    if (!active) return value;
    for (std::size_t t = 0; t < names.size(); ++t) {
      if (names[t] == name) return (value - mean[t]) / sd[t];
    }
    return value;
  }
};

// A covariate term is a plain column name or a '*' product of columns.
Eigen::VectorXd covariate_column(const DataTable& table, const std::string& term,
                                 const Standardizer& standardizer) {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(table.values.rows());
  std::stringstream ss(term);
  std::string part;
  while (std::getline(ss, part, '*')) {
    const Eigen::VectorXd raw = table.col(part);
    for (Eigen::Index i = 0; i < raw.size(); ++i) out(i) *= standardizer.apply(part, raw(i));
  }
  return out;
}

Eigen::MatrixXd build_design(const DataTable& table, const std::vector<std::string>& terms,
                             const Standardizer& standardizer) {
  Eigen::MatrixXd design(table.values.rows(), 1 + terms.size());
  design.col(0).setOnes();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    design.col(1 + static_cast<Eigen::Index>(t)) = covariate_column(table, terms[t], standardizer);
  }
  return design;
}

Eigen::MatrixXd knots_from_config(const json& node, const Eigen::MatrixXd& coords,
                                  const std::string& context) {
  check_keys(node, {"grid", "points"}, context + ".knots");
  if (node.contains("grid")) {
    const auto grid = node.at("grid").get<std::vector<int>>();
    if (static_cast<Eigen::Index>(grid.size()) != coords.cols()) {
      throw config_error(context + ".knots.grid must list one count per coordinate dimension");
    }
    int total = 1;
    for (int g : grid) {
      if (g < 1) throw config_error(context + ".knots.grid entries must be >= 1");
      total *= g;
    }
    const Eigen::VectorXd lo = coords.colwise().minCoeff();
    const Eigen::VectorXd hi = coords.colwise().maxCoeff();
    Eigen::MatrixXd knots(total, coords.cols());
    std::vector<int> idx(grid.size(), 0);
    for (int t = 0; t < total; ++t) {
      for (std::size_t d = 0; d < grid.size(); ++d) {
        const double frac = grid[d] == 1 ? 0.5 : static_cast<double>(idx[d]) / (grid[d] - 1);
        knots(t, static_cast<Eigen::Index>(d)) = lo(d) + frac * (hi(d) - lo(d));
      }
      for (int d = static_cast<int>(grid.size()) - 1; d >= 0; --d) {
        if (++idx[d] < grid[d]) break;
        idx[d] = 0;
      }
    }
    return knots;
  }
  if (node.contains("points")) {
    const auto points = node.at("points").get<std::vector<std::vector<double>>>();
    if (points.empty()) throw config_error(context + ".knots.points is empty");
    Eigen::MatrixXd knots(points.size(), points[0].size());
    for (std::size_t r = 0; r < points.size(); ++r) {
      if (static_cast<Eigen::Index>(points[r].size()) != knots.cols()) {
        throw config_error(context + ".knots.points rows have unequal dimension");
      }
      for (std::size_t c = 0; c < points[r].size(); ++c) knots(r, c) = points[r][c];
    }
    return knots;
  }
  throw config_error(context + ".knots requires 'grid' or 'points'");
}

struct ProcessConfig {
  std::string kind;
  std::vector<std::string> covariates;
  json knots;
  double nu_phi = 5.0;
  double eigen_cap = 0.0;
};

ProcessConfig parse_process(const json& node, const std::string& context) {
  check_keys(node, {"kind", "covariates", "knots", "nu_phi", "eigen_cap"}, context);
  ProcessConfig out;
  out.kind = require<std::string>(node, "kind", context);
  out.covariates = get_or<std::vector<std::string>>(node, "covariates", {});
  if (node.contains("knots")) out.knots = node.at("knots");
  out.nu_phi = get_or<double>(node, "nu_phi", 5.0);
  out.eigen_cap = get_or<double>(node, "eigen_cap", 0.0);
  return out;
}

struct ParsedModel {
  json model_block;
  std::vector<std::string> coord_names;
  std::string response;
  ProcessConfig mu, tau, sigma, Sigma;
  std::string likelihood;
  int k = 15;
  double nu = 0.5;
  int dense_cap = 5000;
  std::map<std::string, PriorSpec> priors;
  std::map<std::string, std::vector<double>> inits;
};

ParsedModel parse_model(const json& config) {
  if (!config.contains("model")) throw config_error("config requires a 'model' section");
  const json& m = config.at("model");
  check_keys(m,
             {"likelihood", "k", "nu", "dense_cap", "coords", "response", "mu_model", "tau_model",
              "sigma_model", "Sigma_model", "priors", "inits"},
             "model");
  ParsedModel out;
  out.model_block = m;
  out.coord_names = require<std::vector<std::string>>(m, "coords", "model");
  out.response = require<std::string>(m, "response", "model");
  out.likelihood = get_or<std::string>(m, "likelihood", std::string("fullGP"));
  out.k = get_or<int>(m, "k", 15);
  out.nu = get_or<double>(m, "nu", 0.5);
  out.dense_cap = get_or<int>(m, "dense_cap", 5000);
  out.mu = parse_process(m.value("mu_model", json{{"kind", "constant"}}), "model.mu_model");
  out.tau = parse_process(m.value("tau_model", json{{"kind", "constant"}}), "model.tau_model");
  out.sigma =
      parse_process(m.value("sigma_model", json{{"kind", "constant"}}), "model.sigma_model");
  out.Sigma =
      parse_process(m.value("Sigma_model", json{{"kind", "constant"}}), "model.Sigma_model");
  if (m.contains("priors")) {
    for (const auto& [name, node] : m.at("priors").items()) {
      out.priors[name] = parse_prior(node, name);
    }
  }
  if (m.contains("inits")) {
    for (const auto& [name, node] : m.at("inits").items()) {
      if (node.is_number()) {
        out.inits[name] = {node.get<double>()};
      } else {
        out.inits[name] = node.get<std::vector<double>>();
      }
    }
  }
  return out;
}

std::string model_hash(const ParsedModel& parsed) {
  // nlohmann objects are key-sorted, so dump() is canonical
  return hash_hex(fnv1a(parsed.model_block.dump()));
}

struct McmcConfig {
  long iterations = 2000;
  long burnin = 1000;
  long thin = 1;
  std::uint64_t seed = 0;
  SchemeConfig scheme;
};

McmcConfig parse_mcmc(const json& config) {
  McmcConfig out;
  if (!config.contains("mcmc")) return out;
  const json& m = config.at("mcmc");
  check_keys(m, {"iterations", "burnin", "thin", "seed", "scheme"}, "mcmc");
  out.iterations = get_or<long>(m, "iterations", out.iterations);
  out.burnin = get_or<long>(m, "burnin", out.burnin);
  out.thin = get_or<long>(m, "thin", out.thin);
  out.seed = get_or<std::uint64_t>(m, "seed", out.seed);
  if (m.contains("scheme")) {
    const json& s = m.at("scheme");
    check_keys(s, {"latent_block_size", "latent_joint", "hyper_sampler", "initial_scale"},
               "mcmc.scheme");
    out.scheme.latent_block_size = get_or<int>(s, "latent_block_size", 16);
    out.scheme.latent_joint = get_or<bool>(s, "latent_joint", true);
    const std::string hyper = get_or<std::string>(s, "hyper_sampler", std::string("rw"));
    if (hyper != "rw" && hyper != "slice") {
      throw config_error("mcmc.scheme.hyper_sampler must be 'rw' or 'slice'");
    }
    out.scheme.hyper_slice = hyper == "slice";
    out.scheme.initial_scale = get_or<double>(s, "initial_scale", 0.5);
  }
  return out;
}

std::string io_path(const json& config, const std::string& key, const std::string& cli_value,
                    bool required, const std::string& what) {
  if (!cli_value.empty()) return cli_value;
  if (config.contains("io")) {
    const json& io = config.at("io");
    check_keys(io, {"data", "out", "samples", "pred"}, "io");
    if (io.contains(key)) return io.at(key).get<std::string>();
  }
  if (required) {
    throw config_error("no " + what + " path given (io." + key + " or the command line flag)");
  }
  return {};
}

std::string prepare_out_dir(const json& config, const CliOptions& options) {
  std::string out = io_path(config, "out", options.out_dir, true, "output");
  fs::create_directories(out);
  return out;
}

// ---------------------------------------------------------------------------
// shared fit machinery

std::vector<std::string> used_column_names(const ParsedModel& parsed, bool include_response) {
  std::vector<std::string> used = parsed.coord_names;
  if (include_response) used.push_back(parsed.response);
  const auto add_terms = [&](const std::vector<std::string>& terms) {
    for (const auto& term : terms) {
      std::stringstream ss(term);
      std::string part;
      while (std::getline(ss, part, '*')) used.push_back(part);
    }
  };
  add_terms(parsed.mu.covariates);
  add_terms(parsed.tau.covariates);
  add_terms(parsed.sigma.covariates);
  add_terms(parsed.Sigma.covariates);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  return used;
}

void check_missing_values(const DataTable& table, const std::vector<std::string>& used) {
  for (const auto& name : used) {
    const int c = table.column(name);
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
      if (!std::isfinite(table.values(r, c))) {
        throw data_error("missing or non-finite value in column '" + name + "' at data row " +
                         std::to_string(r + 1));
      }
    }
  }
}

Standardizer make_standardizer(const DataTable& table, const ParsedModel& parsed, bool active) {
  Standardizer out;
  out.active = active;
  if (!active) return out;
  std::set<std::string> names;
  const auto add_terms = [&](const std::vector<std::string>& terms) {
    for (const auto& term : terms) {
      std::stringstream ss(term);
      std::string part;
      while (std::getline(ss, part, '*')) names.insert(part);
    }
  };
  add_terms(parsed.mu.covariates);
  add_terms(parsed.tau.covariates);
  add_terms(parsed.sigma.covariates);
  add_terms(parsed.Sigma.covariates);
  for (const auto& name : names) {
    const Eigen::VectorXd values = table.col(name);
    const double mean = values.mean();
    double sd = std::sqrt((values.array() - mean).square().sum() /
                          std::max<double>(1.0, static_cast<double>(values.size() - 1)));
    if (!(sd > 0.0)) sd = 1.0;
    out.names.push_back(name);
    out.mean.push_back(mean);
    out.sd.push_back(sd);
  }
  return out;
}

Eigen::MatrixXd coords_from_table(const DataTable& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd coords(table.values.rows(), names.size());
  for (std::size_t d = 0; d < names.size(); ++d) {
    coords.col(static_cast<Eigen::Index>(d)) = table.col(names[d]);
  }
  return coords;
}

void maybe_warn_geographic(const Eigen::MatrixXd& coords) {
  if (coords.cols() != 2) return;
  const double lo0 = coords.col(0).minCoeff(), hi0 = coords.col(0).maxCoeff();
  const double lo1 = coords.col(1).minCoeff(), hi1 = coords.col(1).maxCoeff();
  const bool lon_like = lo0 >= -180.0 && hi0 <= 360.0 && (hi0 - lo0) > 5.0;
  const bool lat_like = lo1 >= -90.0 && hi1 <= 90.0 && (hi1 - lo1) > 5.0;
  if (lon_like && lat_like) {
    std::cerr << "[nsgp] note: coordinate ranges suggest geographic degrees; "
                 "they are used as planar coordinates\n";
  }
}

DataTable reorder_table(const DataTable& table, const std::vector<int>& perm) {
  DataTable out = table;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(r)) = table.values.row(perm[r]);
  }
  return out;
}

struct Structures {
  ModelSpec model;  // designs in ordered rows
  OrderedCoords ordered;
  NeighborGraph graph;
  ConditioningSets csets;
  Eigen::VectorXd z_ordered;
  Standardizer standardizer;
};

Structures build_structures(const ParsedModel& parsed, const DataTable& table, bool standardize,
                            const std::optional<int>& dense_cap_override,
                            std::uint64_t ordering_seed) {
  check_missing_values(table, used_column_names(parsed, /*include_response=*/true));
  const Eigen::MatrixXd coords = coords_from_table(table, parsed.coord_names);
  maybe_warn_geographic(coords);

  Structures out;
  out.standardizer = make_standardizer(table, parsed, standardize);
  out.ordered = order_maxmin(coords, ordering_seed);
  const DataTable ordered_table = reorder_table(table, out.ordered.perm);
  out.z_ordered = ordered_table.col(parsed.response);

  ModelSpec model;
  model.likelihood = likelihood_from_string(parsed.likelihood);
  model.k = parsed.k;
  model.matern = MaternSpec(parsed.nu);
  model.dense_cap = dense_cap_override.value_or(parsed.dense_cap);
  model.priors = parsed.priors;
  model.mu = to_process_spec(ProcessTarget::mu, parsed.mu, ordered_table, out.standardizer,
                             out.ordered.coords, "model.mu_model");
  model.tau = to_process_spec(ProcessTarget::tau, parsed.tau, ordered_table, out.standardizer,
                              out.ordered.coords, "model.tau_model");
  model.sigma = to_process_spec(ProcessTarget::sigma, parsed.sigma, ordered_table,
                                out.standardizer, out.ordered.coords, "model.sigma_model");
  model.Sigma = to_process_spec(ProcessTarget::Sigma, parsed.Sigma, ordered_table,
                                out.standardizer, out.ordered.coords, "model.Sigma_model");
  out.model = std::move(model);

  if (out.model.likelihood != LikelihoodKind::full_gp) {
    out.graph = determine_neighbors(out.ordered, out.model.k);
    if (out.model.likelihood == LikelihoodKind::sgv) {
      out.csets = sgv_setup(out.graph);
    }
  } else {
    // duplicate coordinates with an exact likelihood and a pinned zero nugget
    const auto tau_fix = parsed.priors.find("tau");
    const bool zero_nugget = parsed.tau.kind == "constant" && tau_fix != parsed.priors.end() &&
                             tau_fix->second.kind == PriorSpec::Kind::fixed &&
                             tau_fix->second.a == 0.0;
    if (zero_nugget) {
      for (int i = 1; i < out.ordered.coords.rows(); ++i) {
        for (int j = 0; j < i; ++j) {
          if ((out.ordered.coords.row(i) - out.ordered.coords.row(j)).norm() == 0.0) {
            std::cerr << "[nsgp] warning: duplicate coordinates with fullGP and tau fixed at 0 "
                         "make the covariance singular\n";
            i = static_cast<int>(out.ordered.coords.rows());
            break;
          }
        }
      }
    }
  }
  return out;
}

ProcessModelSpec to_process_spec(ProcessTarget target, const ProcessConfig& config,
                                 const DataTable& table, const Standardizer& standardizer,
                                 const Eigen::MatrixXd& coords, const std::string& context);

}  // namespace

}  // namespace nsgp
