#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/types.hpp"

namespace graphem {

/// Undirected edge, stored canonically with i < j. The weight is the
/// squared Euclidean length of the edge in data space.
struct Edge {
  int i = 0;
  int j = 0;
  double weight = 0.0;

  friend bool operator==(const Edge& a, const Edge& b) {
    return a.i == b.i && a.j == b.j && a.weight == b.weight;
  }
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  std::vector<int> rank;

  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)), rank(static_cast<std::size_t>(n), 0) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)]) ++rank[static_cast<std::size_t>(a)];
    return true;
  }
};

}  // namespace detail

/// Undirected weighted graph over K nodes. No self-loops, symmetric by
/// construction, canonical edge order (i < j, lexicographic) so that two
/// graphs with the same edge set compare and serialize identically.
class Graph {
 public:
  Graph() = default;

  Graph(int node_count, std::vector<Edge> edges) : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ < 0) throw config_error("Graph: negative node count");
    for (auto& e : edges_) {
      if (e.i == e.j) {
        throw config_error("Graph: self-loop at node " + std::to_string(e.i));
      }
      if (e.i > e.j) std::swap(e.i, e.j);
      if (e.i < 0 || e.j >= node_count_) {
        throw config_error("Graph: edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                           ") out of range for K=" + std::to_string(node_count_));
      }
      if (!(e.weight >= 0.0)) {
        throw config_error("Graph: negative or non-finite weight on edge (" +
                           std::to_string(e.i) + "," + std::to_string(e.j) + ")");
      }
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return std::pair(a.i, a.j) < std::pair(b.i, b.j);
    });
    for (std::size_t k = 1; k < edges_.size(); ++k) {
      if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
        throw config_error("Graph: duplicate edge (" + std::to_string(edges_[k].i) + "," +
                           std::to_string(edges_[k].j) + ")");
      }
    }
  }

  int node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  std::vector<std::vector<int>> adjacency_list() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(node_count_));
    for (const auto& e : edges_) {
      adj[static_cast<std::size_t>(e.i)].push_back(e.j);
      adj[static_cast<std::size_t>(e.j)].push_back(e.i);
    }
    return adj;
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(node_count_), 0);
    for (const auto& e : edges_) {
      ++deg[static_cast<std::size_t>(e.i)];
      ++deg[static_cast<std::size_t>(e.j)];
    }
    return deg;
  }

  Matrix adjacency_matrix() const {
    Matrix a = Matrix::Zero(node_count_, node_count_);
    for (const auto& e : edges_) {
      a(e.i, e.j) = 1.0;
      a(e.j, e.i) = 1.0;
    }
    return a;
  }

  bool same_edge_set(const Graph& other) const {
    if (node_count_ != other.node_count_ || edges_.size() != other.edges_.size()) return false;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      if (edges_[k].i != other.edges_[k].i || edges_[k].j != other.edges_[k].j) return false;
    }
    return true;
  }

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
};

/// L = D - A with binary adjacency; rows sum to zero.
inline Matrix laplacian(const Graph& g) {
  const int k = g.node_count();
  Matrix lap = Matrix::Zero(k, k);
  for (const auto& e : g.edges()) {
    lap(e.i, e.j) -= 1.0;
    lap(e.j, e.i) -= 1.0;
    lap(e.i, e.i) += 1.0;
    lap(e.j, e.j) += 1.0;
  }
  return lap;
}

inline Eigen::SparseMatrix<double> laplacian_sparse(const Graph& g) {
  const int k = g.node_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(4 * g.edges().size());
  for (const auto& e : g.edges()) {
    trips.emplace_back(e.i, e.j, -1.0);
    trips.emplace_back(e.j, e.i, -1.0);
    trips.emplace_back(e.i, e.i, 1.0);
    trips.emplace_back(e.j, e.j, 1.0);
  }
  Eigen::SparseMatrix<double> lap(k, k);
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

/// Graph smoothness of the node positions: sum over ordered pairs of
/// a_ij * ||mu_i - mu_j||^2, i.e. twice the sum over edges, equal to
/// 2 * Tr(mu^T L mu).
inline double smoothness(const Matrix& positions, const Graph& g) {
  if (positions.rows() != g.node_count()) {
    throw shape_error("smoothness: positions have " + std::to_string(positions.rows()) +
                      " rows but graph has " + std::to_string(g.node_count()) + " nodes");
  }
  double total = 0.0;
  for (const auto& e : g.edges()) {
    total += 2.0 * (positions.row(e.i) - positions.row(e.j)).squaredNorm();
  }
  return total;
}

/// Cyclomatic number |E| - |V| + (number of connected components):
/// the count of independent cycles.
inline int cycle_count(const Graph& g) {
  detail::UnionFind uf(g.node_count());
  int components = g.node_count();
  for (const auto& e : g.edges()) {
    if (uf.unite(e.i, e.j)) --components;
  }
  return g.edge_count() - g.node_count() + components;
}

/// Mean variance over the neighbors of node k. An isolated node falls back
/// to its own variance, which turns the neighborhood prior into a no-op.
inline double neighbor_mean_variance(const Graph& g, const Eigen::Ref<const Vector>& variances, int k) {
  if (variances.size() != g.node_count()) {
    throw shape_error("neighbor_mean_variance: variance vector size mismatch");
  }
  double sum = 0.0;
  int count = 0;
  for (const auto& e : g.edges()) {
    if (e.i == k) {
      sum += variances(e.j);
      ++count;
    } else if (e.j == k) {
      sum += variances(e.i);
      ++count;
    }
  }
  if (count == 0) return variances(k);
  return sum / count;
}

/// neighbor_mean_variance for every node at once.
inline Vector neighbor_mean_variances(const Graph& g, const Eigen::Ref<const Vector>& variances) {
  if (variances.size() != g.node_count()) {
    throw shape_error("neighbor_mean_variances: variance vector size mismatch");
  }
  Vector sums = Vector::Zero(g.node_count());
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(g.node_count());
  for (const auto& e : g.edges()) {
    sums(e.i) += variances(e.j);
    sums(e.j) += variances(e.i);
    ++counts(e.i);
    ++counts(e.j);
  }
  Vector out(g.node_count());
  for (int k = 0; k < g.node_count(); ++k) {
    out(k) = counts(k) > 0 ? sums(k) / counts(k) : variances(k);
  }
  return out;
}

namespace detail {

struct CandidateEdge {
  double weight;
  int i;
  int j;
};

// Kruskal with deterministic tie-breaking: (weight, min index, max index).
inline std::vector<Edge> kruskal(int node_count, std::vector<CandidateEdge>& candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const CandidateEdge& a, const CandidateEdge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  UnionFind uf(node_count);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(node_count > 0 ? node_count - 1 : 0));
  for (const auto& c : candidates) {
    if (uf.unite(c.i, c.j)) {
      edges.push_back(Edge{c.i, c.j, c.weight});
      if (static_cast<int>(edges.size()) == node_count - 1) break;
    }
  }
  return edges;
}

inline std::vector<Edge> mst_edges(const Matrix& positions) {
  const int k = static_cast<int>(positions.rows());
  std::vector<CandidateEdge> candidates;
  candidates.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      candidates.push_back(CandidateEdge{(positions.row(i) - positions.row(j)).squaredNorm(), i, j});
    }
  }
  return kruskal(k, candidates);
}

}  // namespace detail

/// Minimum spanning tree over the complete graph on the given positions,
/// minimizing the total squared Euclidean edge length (Kruskal).
inline Graph mst(const Matrix& positions) {
  const int k = static_cast<int>(positions.rows());
  if (k == 0) throw config_error("mst: empty position set");
  if (!positions.allFinite()) throw domain_error("mst: non-finite positions");
  if (k == 1) return Graph(1, {});
  return Graph(k, detail::mst_edges(positions));
}

/// Edge appearance frequencies across B minimum spanning trees, each built
/// on a uniform without-replacement subsample of floor(ratio*K) nodes and
/// mapped back to the full index set.
struct EdgeFrequencyMatrix {
  Matrix entries;          // symmetric K x K, values in [0,1], zero diagonal
  int ensemble_size = 0;   // B
  double subsample_ratio = 1.0;
};

inline EdgeFrequencyMatrix edge_frequencies(const Matrix& positions, int ensemble_size,
                                            double subsample_ratio, std::uint64_t seed) {
  const int k = static_cast<int>(positions.rows());
  if (k < 2) throw config_error("edge_frequencies: need at least 2 nodes");
  if (!(subsample_ratio > 0.0) || subsample_ratio > 1.0) {
    throw config_error("edge_frequencies: subsample ratio must be in (0,1]");
  }
  if (ensemble_size < 1) throw config_error("edge_frequencies: ensemble size must be >= 1");
  const int kb = static_cast<int>(std::floor(subsample_ratio * k));
  if (kb < 2) {
    throw config_error("edge_frequencies: ratio " + std::to_string(subsample_ratio) +
                       " leaves fewer than 2 of " + std::to_string(k) + " nodes");
  }

  std::mt19937_64 rng(seed);
  std::vector<int> indices(static_cast<std::size_t>(k));
  std::iota(indices.begin(), indices.end(), 0);

  // All candidate edges sorted once; each subsample MST is Kruskal over the
  // presorted list restricted to the surviving nodes, which visits edges in
  // the same order as sorting the subsample from scratch.
  std::vector<detail::CandidateEdge> candidates;
  candidates.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(k - 1) / 2);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      candidates.push_back(
          detail::CandidateEdge{(positions.row(i) - positions.row(j)).squaredNorm(), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const detail::CandidateEdge& a, const detail::CandidateEdge& b) {
              if (a.weight != b.weight) return a.weight < b.weight;
              if (a.i != b.i) return a.i < b.i;
              return a.j < b.j;
            });

  Matrix counts = Matrix::Zero(k, k);
  std::vector<char> in_subsample(static_cast<std::size_t>(k));
  for (int b = 0; b < ensemble_size; ++b) {
    // partial Fisher-Yates draw of the subsample
    for (int t = 0; t < kb; ++t) {
      std::uniform_int_distribution<int> pick(t, k - 1);
      std::swap(indices[static_cast<std::size_t>(t)], indices[static_cast<std::size_t>(pick(rng))]);
    }
    std::fill(in_subsample.begin(), in_subsample.end(), 0);
    for (int t = 0; t < kb; ++t) in_subsample[static_cast<std::size_t>(indices[static_cast<std::size_t>(t)])] = 1;

    detail::UnionFind uf(k);
    int accepted = 0;
    for (const auto& c : candidates) {
      if (!in_subsample[static_cast<std::size_t>(c.i)] || !in_subsample[static_cast<std::size_t>(c.j)]) continue;
      if (uf.unite(c.i, c.j)) {
        counts(c.i, c.j) += 1.0;
        counts(c.j, c.i) += 1.0;
        if (++accepted == kb - 1) break;
      }
    }
  }
  counts /= static_cast<double>(ensemble_size);
  return EdgeFrequencyMatrix{std::move(counts), ensemble_size, subsample_ratio};
}

/// Union of the MST with every edge whose subsampling frequency exceeds the
/// threshold. Contains all MST edges by construction, hence stays connected,
/// and is the construction that lets the topology carry cycles.
inline Graph average_graph(const Matrix& positions, const EdgeFrequencyMatrix& freq, double threshold) {
  const int k = static_cast<int>(positions.rows());
  if (freq.entries.rows() != k || freq.entries.cols() != k) {
    throw shape_error("average_graph: frequency matrix does not match node count");
  }
  Graph tree = mst(positions);
  std::vector<Edge> edges = tree.edges();
  std::vector<bool> in_tree(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), false);
  for (const auto& e : edges) {
    in_tree[static_cast<std::size_t>(e.i) * static_cast<std::size_t>(k) + static_cast<std::size_t>(e.j)] = true;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (freq.entries(i, j) > threshold &&
          !in_tree[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)]) {
        edges.push_back(Edge{i, j, (positions.row(i) - positions.row(j)).squaredNorm()});
      }
    }
  }
  return Graph(k, std::move(edges));
}

}  // namespace graphem
