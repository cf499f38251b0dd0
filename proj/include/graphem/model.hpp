#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/graph.hpp"
#include "graphem/types.hpp"

namespace graphem {

/// Parameters of the background-augmented spherical Gaussian mixture:
/// K centroids mu (K x D), per-component variances sigma2 (covariance
/// sigma2_k * I_D), mixing weights pi, background weight alpha and the
/// fixed uniform background density rho. Invariant: sum(pi) + alpha = 1.
struct MixtureParams {
  Matrix mu;
  Vector sigma2;
  Vector pi;
  double alpha = 0.0;
  double rho = 1.0;

  int component_count() const { return static_cast<int>(mu.rows()); }
  int dimension() const { return static_cast<int>(mu.cols()); }

  void validate(double floor = 0.0) const {
    const int k = component_count();
    if (sigma2.size() != k || pi.size() != k) {
      throw shape_error("MixtureParams: sigma2/pi size does not match mu rows");
    }
    for (int c = 0; c < k; ++c) {
      if (!(sigma2(c) > 0.0) || sigma2(c) < floor) {
        throw domain_error("MixtureParams: sigma2[" + std::to_string(c) + "] = " +
                           std::to_string(sigma2(c)) + " below floor");
      }
      if (!(pi(c) >= 0.0)) throw domain_error("MixtureParams: negative mixing weight");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw domain_error("MixtureParams: alpha outside [0,1]");
    if (!(rho > 0.0)) throw domain_error("MixtureParams: rho must be positive");
    if (std::abs(pi.sum() + alpha - 1.0) > 1e-10) {
      throw domain_error("MixtureParams: sum(pi) + alpha != 1 (off by " +
                         std::to_string(pi.sum() + alpha - 1.0) + ")");
    }
  }
};

/// Topology update policy for the fit loop.
struct TopologyPolicy {
  enum class Kind { fixed, refresh_mst, refresh_average };
  Kind kind = Kind::fixed;
  int every = 1;  // refresh period in iterations

  static TopologyPolicy fixed() { return {Kind::fixed, 0}; }
  static TopologyPolicy refresh_mst_every(int n) { return {Kind::refresh_mst, n}; }
  static TopologyPolicy refresh_average_every(int n) { return {Kind::refresh_average, n}; }
};

struct Hyperparams {
  double lambda_mu = 0.0;
  double lambda_sigma = 0.0;
  double lambda_pi = 0.0;
  int component_count = 100;            // K
  double epsilon = 1e-4;                // convergence threshold on |log-posterior increment|
  int max_iters = 500;
  std::optional<TopologyPolicy> topology;  // unset: derived from the graph prior
  double variance_floor = 1e-8;

  void validate() const {
    if (lambda_mu < 0 || lambda_sigma < 0 || lambda_pi < 0) {
      throw config_error("Hyperparams: lambda values must be nonnegative");
    }
    if (!(epsilon > 0.0)) throw config_error("Hyperparams: epsilon must be positive");
    if (max_iters < 1) throw config_error("Hyperparams: max_iters must be >= 1");
    if (component_count < 1) throw config_error("Hyperparams: K must be >= 1");
    if (!(variance_floor > 0.0)) throw config_error("Hyperparams: variance floor must be positive");
  }
};

/// Posterior responsibilities from the E-step. Row i of p plus p_bkg(i)
/// sums to one.
struct Responsibilities {
  Matrix p;       // N x K, Gaussian components
  Vector p_bkg;   // N, background component
};

/// Per-iteration record of a fit. log_posterior has one entry per completed
/// iteration plus the initial state; increments[t] = log_posterior[t+1] -
/// log_posterior[t]. graph_edge_counts[t] is the edge count of the graph in
/// effect when log_posterior[t] was evaluated, and graph_changed[t] flags a
/// topology refresh that altered the edge set right after iteration t+1.
struct FitTrace {
  std::vector<double> log_posterior;
  std::vector<double> increments;
  std::vector<int> graph_edge_counts;
  std::vector<bool> graph_changed;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// log(pi_k N(x_i; theta_k)) for all i,k plus the per-point background term
// log(alpha rho); alpha or pi_k equal to zero map to -inf and fall out of
// the log-sum-exp naturally.
struct LogComponentMatrix {
  Matrix log_weighted;  // N x K
  double log_bkg;       // log(alpha * rho)
};

inline LogComponentMatrix log_component_matrix(const Matrix& x, const MixtureParams& params) {
  const Index n = x.rows();
  const Index d = x.cols();
  const int k = params.component_count();
  if (params.dimension() != d) {
    throw shape_error("model: data dimension " + std::to_string(d) + " != centroid dimension " +
                      std::to_string(params.dimension()));
  }

  const Vector x_sq = x.rowwise().squaredNorm();
  const Vector mu_sq = params.mu.rowwise().squaredNorm();
  Matrix cross = x * params.mu.transpose();  // N x K

  LogComponentMatrix out;
  out.log_weighted.resize(n, k);
  const double dim = static_cast<double>(d);
  for (int c = 0; c < k; ++c) {
    const double s2 = params.sigma2(c);
    const double log_norm = -0.5 * dim * std::log(2.0 * std::numbers::pi * s2);
    const double log_pi = params.pi(c) > 0.0 ? std::log(params.pi(c))
                                             : -std::numeric_limits<double>::infinity();
    const double inv_2s2 = 1.0 / (2.0 * s2);
    out.log_weighted.col(c) =
        (log_pi + log_norm) -
        inv_2s2 * (x_sq.array() + mu_sq(c) - 2.0 * cross.col(c).array()).max(0.0).matrix().array();
  }
  out.log_bkg = params.alpha > 0.0 ? std::log(params.alpha) + std::log(params.rho)
                                   : -std::numeric_limits<double>::infinity();
  return out;
}

// exp with an explicit underflow cutoff: shifted log densities below -700
// contribute nothing at double precision, and letting them underflow into
// subnormals costs two orders of magnitude in throughput on the hot path.
inline double exp_or_zero(double shifted) {
  return shifted < -700.0 ? 0.0 : std::exp(shifted);
}

inline Vector shifted_log_max(const LogComponentMatrix& lcm) {
  const Index n = lcm.log_weighted.rows();
  Vector row_max = Vector::Constant(n, lcm.log_bkg);
  for (Index c = 0; c < lcm.log_weighted.cols(); ++c) {
    row_max = row_max.cwiseMax(lcm.log_weighted.col(c));
  }
  if (!row_max.allFinite()) {
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(row_max(i))) {
        throw numerical_error("model: zero mixture density at point " + std::to_string(i));
      }
    }
  }
  return row_max;
}

// log(sum_k exp(row) + exp(log_bkg)) per row, accumulated column by column
// so the column-major matrix streams through once.
inline Vector log_norm_constants(const LogComponentMatrix& lcm) {
  const Index n = lcm.log_weighted.rows();
  const Vector row_max = shifted_log_max(lcm);
  Vector acc(n);
  for (Index i = 0; i < n; ++i) acc(i) = exp_or_zero(lcm.log_bkg - row_max(i));
  for (Index c = 0; c < lcm.log_weighted.cols(); ++c) {
    const double* col = lcm.log_weighted.col(c).data();
    for (Index i = 0; i < n; ++i) acc(i) += exp_or_zero(col[i] - row_max(i));
  }
  return row_max.array() + acc.array().log();
}

}  // namespace detail

/// Observed-data log-likelihood sum_i log(sum_k pi_k N(x_i) + alpha rho),
/// evaluated with log-sum-exp.
inline double log_likelihood(const Matrix& x, const MixtureParams& params) {
  const auto lcm = detail::log_component_matrix(x, params);
  const double value = detail::log_norm_constants(lcm).sum();
  if (!std::isfinite(value)) throw numerical_error("log_likelihood: non-finite result");
  return value;
}

/// Log prior density of the parameters given the graph, up to additive
/// constants: the Gaussian smoothness prior on centroids, the inverse-Gamma
/// style neighborhood prior on variances, and the Gaussian prior pulling
/// mixing weights toward (1-alpha)/K.
inline double log_prior(const MixtureParams& params, const Graph& g, const Hyperparams& hp) {
  const int k = params.component_count();
  if (g.node_count() != k) {
    throw shape_error("log_prior: graph has " + std::to_string(g.node_count()) +
                      " nodes for K=" + std::to_string(k));
  }
  double value = 0.0;
  if (hp.lambda_mu > 0.0) {
    value -= 0.5 * hp.lambda_mu * smoothness(params.mu, g);
  }
  if (hp.lambda_sigma > 0.0) {
    const Vector neighbor = neighbor_mean_variances(g, params.sigma2);
    for (int c = 0; c < k; ++c) {
      if (!(params.sigma2(c) > 0.0)) throw domain_error("log_prior: non-positive sigma2");
      value -= hp.lambda_sigma * (std::log(params.sigma2(c)) + neighbor(c) / params.sigma2(c));
    }
  }
  if (hp.lambda_pi > 0.0) {
    const double target = (1.0 - params.alpha) / k;
    for (int c = 0; c < k; ++c) {
      const double delta = target - params.pi(c);
      value -= 0.5 * hp.lambda_pi * delta * delta;
    }
  }
  return value;
}

/// MAP objective: log_likelihood + log_prior.
inline double log_posterior(const Matrix& x, const MixtureParams& params, const Graph& g,
                            const Hyperparams& hp) {
  return log_likelihood(x, params) + log_prior(params, g, hp);
}

}  // namespace graphem
