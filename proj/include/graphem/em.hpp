#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/geometry.hpp"
#include "graphem/graph.hpp"
#include "graphem/model.hpp"
#include "graphem/types.hpp"

namespace graphem {

enum class InitMu { all_data_points, random_subset, user_provided };
enum class GraphPrior { mst, average_mst, user_provided };

/// Everything fit() needs beyond the data: initialization policy, graph
/// prior construction, and the hyperparameters.
struct FitOptions {
  InitMu init_mu = InitMu::random_subset;
  std::optional<Matrix> mu0;              // used when init_mu == user_provided
  std::optional<double> init_sigma0;      // initial variance sigma0^2; unset: mean 5-NN distance squared
  double init_alpha = 0.10;

  GraphPrior graph_prior = GraphPrior::mst;
  int avg_ensemble_size = 500;            // B
  double avg_subsample_ratio = 0.75;      // K_b / K
  double avg_threshold = 0.35;            // m
  std::optional<Graph> prior_graph;       // used when graph_prior == user_provided

  Hyperparams hp;
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;            // optional progress/warning sink
};

struct FitResult {
  MixtureParams params;
  Graph graph;
  FitTrace trace;
};

/// Thrown when the optimization hits a numerical failure mid-fit; carries
/// the trace accumulated up to the failing iteration.
struct fit_error : numerical_error {
  FitTrace trace;
  fit_error(const std::string& msg, FitTrace t) : numerical_error(msg), trace(std::move(t)) {}
};

namespace detail {

struct EStepResult {
  Responsibilities resp;
  double log_lik = 0.0;
};

inline EStepResult e_step_with_loglik(const Matrix& x, const MixtureParams& params) {
  auto lcm = log_component_matrix(x, params);
  const Index n = x.rows();
  const Index k = lcm.log_weighted.cols();
  const Vector row_max = shifted_log_max(lcm);

  // Exponentiate the shifted log weights in place and accumulate the
  // normalizer; each responsibility is then a single division, which also
  // makes every row sum to one exactly.
  Vector bkg_weight(n);
  for (Index i = 0; i < n; ++i) bkg_weight(i) = exp_or_zero(lcm.log_bkg - row_max(i));
  Vector acc = bkg_weight;
  for (Index c = 0; c < k; ++c) {
    double* col = lcm.log_weighted.col(c).data();
    for (Index i = 0; i < n; ++i) {
      col[i] = exp_or_zero(col[i] - row_max(i));
      acc(i) += col[i];
    }
  }

  EStepResult out;
  const Vector inv_acc = acc.cwiseInverse();
  out.resp.p = std::move(lcm.log_weighted);
  for (Index c = 0; c < k; ++c) out.resp.p.col(c).array() *= inv_acc.array();
  out.resp.p_bkg = bkg_weight.cwiseProduct(inv_acc);
  out.log_lik = (row_max.array() + acc.array().log()).sum();
  if (!std::isfinite(out.log_lik)) throw numerical_error("e_step: non-finite log-likelihood");
  return out;
}

}  // namespace detail

/// Posterior responsibilities of the Gaussian components and the background
/// for every data point, computed in log space.
inline Responsibilities e_step(const Matrix& x, const MixtureParams& params) {
  return detail::e_step_with_loglik(x, params).resp;
}

/// alpha update: mean background responsibility.
inline double m_step_alpha(const Responsibilities& resp) {
  if (resp.p_bkg.size() == 0) throw shape_error("m_step_alpha: empty responsibilities");
  return resp.p_bkg.mean();
}

/// Mixing weight update, shrunk toward the uniform value (1-alpha)/K with
/// strength lambda_pi. Uses alpha at time t+1; the resulting weights sum to
/// 1 - alpha_new identically.
inline Vector m_step_pi(const Responsibilities& resp, double alpha_new, const Hyperparams& hp) {
  const double n = static_cast<double>(resp.p.rows());
  const double k = static_cast<double>(resp.p.cols());
  const Vector mean_resp = resp.p.colwise().sum() / n;
  return (mean_resp.array() + hp.lambda_pi * (1.0 - alpha_new) / k) / (1.0 + hp.lambda_pi);
}

/// Centroid update: solves [Gamma S^-1 + 2 lambda_mu L] mu = S^-1 R^T X,
/// the symmetric positive definite system coupling all nodes through the
/// graph Laplacian. Sigma2 enters at time t. Retries with diagonal jitter
/// 1e-10, 1e-8, 1e-6 before giving up on starved components.
inline Matrix m_step_mu(const Matrix& x, const Responsibilities& resp, const MixtureParams& params_t,
                        const Graph& g, const Hyperparams& hp) {
  const int k = params_t.component_count();
  if (resp.p.cols() != k || resp.p.rows() != x.rows()) {
    throw shape_error("m_step_mu: responsibility matrix shape mismatch");
  }
  if (g.node_count() != k) throw shape_error("m_step_mu: graph node count != K");

  const Vector gamma = resp.p.colwise().sum();
  Matrix rhs = resp.p.transpose() * x;  // K x D
  for (int c = 0; c < k; ++c) rhs.row(c) /= params_t.sigma2(c);

  // a component with no responsibility mass and no graph coupling has an
  // identically zero row: underdetermined, jitter cannot rescue it
  if (hp.lambda_mu == 0.0 || g.edge_count() == 0) {
    const auto degrees = g.degrees();
    std::string dead;
    for (int c = 0; c < k; ++c) {
      if (gamma(c) == 0.0 && (hp.lambda_mu == 0.0 || degrees[static_cast<std::size_t>(c)] == 0)) {
        dead += (dead.empty() ? "" : ", ") + std::to_string(c);
      }
    }
    if (!dead.empty()) {
      throw solver_error("m_step_mu: centroid system is singular; components with zero "
                         "responsibility mass and no graph coupling: " + dead);
    }
  }

  Eigen::SparseMatrix<double> system(k, k);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(k) + 4 * g.edges().size());
    for (int c = 0; c < k; ++c) trips.emplace_back(c, c, gamma(c) / params_t.sigma2(c));
    if (hp.lambda_mu > 0.0) {
      const double w = 2.0 * hp.lambda_mu;
      for (const auto& e : g.edges()) {
        trips.emplace_back(e.i, e.j, -w);
        trips.emplace_back(e.j, e.i, -w);
        trips.emplace_back(e.i, e.i, w);
        trips.emplace_back(e.j, e.j, w);
      }
    }
    system.setFromTriplets(trips.begin(), trips.end());
  }

  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  const double jitters[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (double jitter : jitters) {
    Eigen::SparseMatrix<double> sys = system;
    if (jitter > 0.0) {
      for (int c = 0; c < k; ++c) sys.coeffRef(c, c) += jitter;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(sys);
    if (solver.info() != Eigen::Success) continue;
    Matrix mu_new = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !mu_new.allFinite()) continue;
    const double residual = (system * mu_new - rhs).norm();
    if (residual <= 1e-8 * rhs_norm) return mu_new;
  }

  // name the most starved components in the failure
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + std::min(k, 3), order.end(),
                    [&](int a, int b) { return gamma(a) < gamma(b); });
  std::string who;
  for (int c = 0; c < std::min(k, 3); ++c) {
    who += (c ? ", " : "") + std::to_string(order[static_cast<std::size_t>(c)]) + " (gamma=" +
           std::to_string(gamma(order[static_cast<std::size_t>(c)])) + ")";
  }
  throw solver_error("m_step_mu: centroid system singular after jitter retries; starved components: " + who);
}

/// Variance update per component:
///   sigma2_k = (sum_i p_ik ||x_i - mu_k||^2 + 4 lambda_sigma s2N_k)
///            / (D sum_i p_ik + 4 lambda_sigma),
/// with mu, the neighbor mean variances s2N and the graph all taken at
/// time t. Result is clamped at the variance floor.
inline Vector m_step_sigma(const Matrix& x, const Responsibilities& resp, const Matrix& mu_t,
                           const Graph& g, const Eigen::Ref<const Vector>& variances_t,
                           const Hyperparams& hp) {
  const int k = static_cast<int>(mu_t.rows());
  const double dim = static_cast<double>(x.cols());
  if (resp.p.cols() != k || resp.p.rows() != x.rows()) {
    throw shape_error("m_step_sigma: responsibility matrix shape mismatch");
  }

  const Vector gamma = resp.p.colwise().sum();
  const Vector x_sq = x.rowwise().squaredNorm();
  const Vector p_xsq = resp.p.transpose() * x_sq;          // K
  const Matrix p_x = resp.p.transpose() * x;               // K x D
  const Vector s2n = neighbor_mean_variances(g, variances_t);

  Vector out(k);
  for (int c = 0; c < k; ++c) {
    const double sse = std::max(
        p_xsq(c) - 2.0 * p_x.row(c).dot(mu_t.row(c)) + gamma(c) * mu_t.row(c).squaredNorm(), 0.0);
    const double denom = dim * gamma(c) + 4.0 * hp.lambda_sigma;
    double s2 = denom > 0.0 ? (sse + 4.0 * hp.lambda_sigma * s2n(c)) / denom : variances_t(c);
    out(c) = std::max(s2, hp.variance_floor);
  }
  return out;
}

/// Pattern/background decision per point: pattern iff the summed Gaussian
/// responsibility beats the background responsibility under a fresh E-step.
inline std::vector<PointLabel> classify_points(const Matrix& x, const MixtureParams& params) {
  const Responsibilities resp = e_step(x, params);
  std::vector<PointLabel> labels(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] =
        resp.p.row(i).sum() > resp.p_bkg(i) ? PointLabel::pattern : PointLabel::background;
  }
  return labels;
}

/// Mean distance to the 5th nearest neighbor, squared: the default prior
/// guess for sigma0^2 when the caller has none.
inline double mean_knn_distance_squared(const Matrix& x, int k_neighbors = 5,
                                        std::uint64_t seed = 0) {
  const Index n = x.rows();
  if (n < 2) throw config_error("mean_knn_distance_squared: need at least 2 points");
  const int kn = static_cast<int>(std::min<Index>(k_neighbors, n - 1));

  // cap the number of query points; distances still go against the full set
  std::vector<Index> queries;
  const Index max_queries = 2000;
  if (n <= max_queries) {
    queries.resize(static_cast<std::size_t>(n));
    std::iota(queries.begin(), queries.end(), Index{0});
  } else {
    std::mt19937_64 rng(detail::derive_seed(seed, 71));
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index t = 0; t < max_queries; ++t) {
      std::uniform_int_distribution<Index> pick(t, n - 1);
      std::swap(all[static_cast<std::size_t>(t)], all[static_cast<std::size_t>(pick(rng))]);
    }
    queries.assign(all.begin(), all.begin() + max_queries);
  }

  double total = 0.0;
  std::vector<double> dists(static_cast<std::size_t>(n));
  for (Index qi : queries) {
    for (Index j = 0; j < n; ++j) {
      dists[static_cast<std::size_t>(j)] = (x.row(qi) - x.row(j)).squaredNorm();
    }
    dists[static_cast<std::size_t>(qi)] = std::numeric_limits<double>::infinity();
    std::nth_element(dists.begin(), dists.begin() + (kn - 1), dists.end());
    total += std::sqrt(dists[static_cast<std::size_t>(kn - 1)]);
  }
  const double mean_dist = total / static_cast<double>(queries.size());
  return mean_dist * mean_dist;
}

namespace detail {

// Background density with fallbacks: exact hull (D<=3), bounding box, then
// product of the nonzero axis ranges for data confined to an axis-aligned
// subspace. Each fallback is reported on the log stream.
inline double resolve_background_density(const Matrix& x, std::ostream* log) {
  const Index d = x.cols();
  if (d <= 3 && x.rows() >= d + 1) {
    try {
      return support_volume(x, SupportMethod::convex_hull).density;
    } catch (const degenerate_support_error&) {
      if (log) *log << "[graphem] degenerate convex hull; falling back to bounding box\n";
    }
  } else if (d > 3 && log) {
    *log << "[graphem] D=" << d << " > 3: using bounding-box support volume\n";
  }
  try {
    return support_volume(x, SupportMethod::bounding_box).density;
  } catch (const degenerate_support_error&) {
    if (log) *log << "[graphem] degenerate bounding box; using nonzero axis ranges\n";
  }
  double vol = 1.0;
  bool any = false;
  for (Index c = 0; c < d; ++c) {
    const double range = x.col(c).maxCoeff() - x.col(c).minCoeff();
    if (range > 0.0) {
      vol *= range;
      any = true;
    }
  }
  if (!any) throw degenerate_support_error("fit: all data points coincide");
  return 1.0 / vol;
}

inline Matrix init_centroids(const Matrix& x, const FitOptions& opts, int& k_out) {
  const Index n = x.rows();
  switch (opts.init_mu) {
    case InitMu::all_data_points:
      k_out = static_cast<int>(n);
      return x;
    case InitMu::user_provided: {
      if (!opts.mu0) throw config_error("fit: init_mu=user_provided but no mu0 given");
      if (opts.mu0->cols() != x.cols()) throw shape_error("fit: mu0 dimension != data dimension");
      k_out = static_cast<int>(opts.mu0->rows());
      return *opts.mu0;
    }
    case InitMu::random_subset:
    default: {
      const int k = opts.hp.component_count;
      if (k > n) {
        throw config_error("fit: K=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
      }
      std::mt19937_64 rng(derive_seed(opts.seed, 13));
      std::vector<Index> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), Index{0});
      for (int t = 0; t < k; ++t) {
        std::uniform_int_distribution<Index> pick(t, n - 1);
        std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick(rng))]);
      }
      std::sort(idx.begin(), idx.begin() + k);
      Matrix mu(k, x.cols());
      for (int t = 0; t < k; ++t) mu.row(t) = x.row(idx[static_cast<std::size_t>(t)]);
      k_out = k;
      return mu;
    }
  }
}

}  // namespace detail

/// Graph-regularized mixture model fit: initializes per the options, then
/// alternates E-step, M-step (alpha, pi, mu, sigma) and an optional topology
/// refresh until the log-posterior increment falls below epsilon or
/// max_iters is reached.
inline FitResult fit(const Matrix& x, const FitOptions& opts) {
  opts.hp.validate();
  const Index n = x.rows();
  if (n < 2) throw config_error("fit: need at least 2 data points");
  if (!x.allFinite()) throw domain_error("fit: non-finite data values");
  if (!(opts.init_alpha >= 0.0 && opts.init_alpha < 1.0)) {
    throw config_error("fit: init_alpha must lie in [0,1)");
  }

  // ---- initialization (mu, sigma, pi, alpha, rho, prior graph) ----
  int k = 0;
  MixtureParams params;
  params.mu = detail::init_centroids(x, opts, k);
  if (k < 1) throw config_error("fit: K must be >= 1");

  double sigma0 = opts.init_sigma0 ? *opts.init_sigma0 : mean_knn_distance_squared(x, 5, opts.seed);
  if (!(sigma0 > 0.0) || sigma0 < opts.hp.variance_floor) {
    throw config_error("fit: sigma0^2 must be at least the variance floor");
  }
  params.sigma2 = Vector::Constant(k, sigma0);
  params.alpha = opts.init_alpha;
  params.pi = Vector::Constant(k, (1.0 - params.alpha) / k);
  params.rho = detail::resolve_background_density(x, opts.log);

  Graph graph;
  std::vector<std::pair<int, int>> frozen_extra_edges;  // thresholded average-graph edges
  TopologyPolicy policy;
  switch (opts.graph_prior) {
    case GraphPrior::user_provided:
      if (!opts.prior_graph) throw config_error("fit: graph_prior=user_provided but no graph given");
      if (opts.prior_graph->node_count() != k) {
        throw shape_error("fit: prior graph node count != K");
      }
      graph = *opts.prior_graph;
      policy = TopologyPolicy::fixed();
      break;
    case GraphPrior::average_mst: {
      const auto freq = edge_frequencies(params.mu, opts.avg_ensemble_size, opts.avg_subsample_ratio,
                                         detail::derive_seed(opts.seed, 29));
      graph = average_graph(params.mu, freq, opts.avg_threshold);
      for (const auto& e : graph.edges()) {
        if (freq.entries(e.i, e.j) > opts.avg_threshold) frozen_extra_edges.emplace_back(e.i, e.j);
      }
      policy = TopologyPolicy::refresh_average_every(1);
      break;
    }
    case GraphPrior::mst:
    default:
      graph = mst(params.mu);
      policy = TopologyPolicy::refresh_mst_every(1);
      break;
  }
  if (opts.hp.topology) policy = *opts.hp.topology;
  if (policy.kind == TopologyPolicy::Kind::refresh_average && frozen_extra_edges.empty() &&
      opts.graph_prior != GraphPrior::average_mst) {
    const auto freq = edge_frequencies(params.mu, opts.avg_ensemble_size, opts.avg_subsample_ratio,
                                       detail::derive_seed(opts.seed, 29));
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        if (freq.entries(i, j) > opts.avg_threshold) frozen_extra_edges.emplace_back(i, j);
      }
    }
  }
  params.validate(opts.hp.variance_floor);

  auto rebuild_graph = [&](const Matrix& mu) {
    if (policy.kind == TopologyPolicy::Kind::refresh_mst) return mst(mu);
    // refresh_average: fresh MST unioned with the frozen thresholded edges
    Graph tree = mst(mu);
    std::vector<Edge> edges = tree.edges();
    for (const auto& [i, j] : frozen_extra_edges) {
      bool present = false;
      for (const auto& e : edges) {
        if (e.i == i && e.j == j) {
          present = true;
          break;
        }
      }
      if (!present) edges.push_back(Edge{i, j, (mu.row(i) - mu.row(j)).squaredNorm()});
    }
    return Graph(k, std::move(edges));
  };

  // ---- outer loop ----
  FitTrace trace;
  try {
    auto estep = detail::e_step_with_loglik(x, params);
    double lp_prev = estep.log_lik + log_prior(params, graph, opts.hp);
    trace.log_posterior.push_back(lp_prev);
    trace.graph_edge_counts.push_back(graph.edge_count());

    for (int t = 1; t <= opts.hp.max_iters; ++t) {
      const double alpha_new = m_step_alpha(estep.resp);
      const Vector pi_new = m_step_pi(estep.resp, alpha_new, opts.hp);
      Matrix mu_new = m_step_mu(x, estep.resp, params, graph, opts.hp);
      Vector sigma2_new = m_step_sigma(x, estep.resp, params.mu, graph, params.sigma2, opts.hp);

      params.mu = std::move(mu_new);
      params.sigma2 = std::move(sigma2_new);
      params.pi = pi_new;
      params.alpha = alpha_new;

      estep = detail::e_step_with_loglik(x, params);
      const double lp = estep.log_lik + log_prior(params, graph, opts.hp);
      const double increment = lp - lp_prev;
      trace.log_posterior.push_back(lp);
      trace.increments.push_back(increment);
      trace.graph_edge_counts.push_back(graph.edge_count());
      trace.iterations = t;
      lp_prev = lp;

      bool changed = false;
      if (policy.kind != TopologyPolicy::Kind::fixed && policy.every > 0 && t % policy.every == 0) {
        Graph refreshed = rebuild_graph(params.mu);
        changed = !refreshed.same_edge_set(graph);
        graph = std::move(refreshed);
        if (changed && increment < -1e-9 && opts.log) {
          *opts.log << "[graphem] iteration " << t
                    << ": log-posterior decreased by " << -increment
                    << " under topology refresh\n";
        }
      }
      trace.graph_changed.push_back(changed);

      if (std::abs(increment) < opts.hp.epsilon) {
        trace.converged = true;
        break;
      }
    }
  } catch (const numerical_error& err) {
    throw fit_error(std::string("fit: ") + err.what() + " at iteration " +
                        std::to_string(trace.iterations + 1),
                    trace);
  }

  return FitResult{std::move(params), std::move(graph), std::move(trace)};
}

}  // namespace graphem
