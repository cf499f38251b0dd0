#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/graph.hpp"
#include "graphem/types.hpp"

namespace graphem {

/// Seeded synthetic dataset with ground truth attached.
struct SyntheticSet {
  Matrix points;
  std::vector<PointLabel> labels;
  std::optional<int> truth_cycle_count;
  std::optional<Vector> truth_sigma;  // per-point generating sigma; NaN for background points
};

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
  double length() const { return (b - a).norm(); }
};

/// Layout of the three-branch pattern: three segments of length 0.4 meeting
/// at the center of the unit square, 120 degrees apart. Each runs from the
/// center (wide end) out to its tip (narrow end).
inline std::array<Segment, 3> three_branch_segments() {
  const Eigen::Vector2d center(0.5, 0.5);
  const double length = 0.4;
  std::array<Segment, 3> out;
  const double angles[] = {90.0, 210.0, 330.0};
  for (int b = 0; b < 3; ++b) {
    const double a = angles[b] * std::numbers::pi / 180.0;
    out[static_cast<std::size_t>(b)] =
        Segment{center, center + length * Eigen::Vector2d(std::cos(a), std::sin(a))};
  }
  return out;
}

/// Three branches with transverse Gaussian noise whose standard deviation
/// interpolates linearly along each branch, from sigma_hi where the branches
/// meet down to sigma_lo at the tips, plus floor(bkg_frac*n) uniform
/// background points in the unit square. Total point count is n.
inline SyntheticSet gen_three_branch(int n = 2400, double bkg_frac = 0.25, double sigma_lo = 0.015,
                                     double sigma_hi = 0.15, std::uint64_t seed = 0) {
  if (n < 1) throw config_error("gen_three_branch: n must be positive");
  if (!(bkg_frac >= 0.0 && bkg_frac < 1.0)) throw config_error("gen_three_branch: bkg_frac in [0,1)");
  if (sigma_lo > sigma_hi) throw config_error("gen_three_branch: sigma_lo must be <= sigma_hi");

  const int n_bkg = static_cast<int>(std::floor(bkg_frac * n));
  const int n_pattern = n - n_bkg;
  const auto segments = three_branch_segments();

  std::mt19937_64 rng(detail::derive_seed(seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticSet out;
  out.points.resize(n, 2);
  out.labels.resize(static_cast<std::size_t>(n));
  Vector truth_sigma = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());

  for (int i = 0; i < n_pattern; ++i) {
    const auto& seg = segments[static_cast<std::size_t>(i % 3)];
    const Eigen::Vector2d dir = (seg.b - seg.a).normalized();
    const Eigen::Vector2d normal(-dir.y(), dir.x());
    const double u = unit(rng);  // 0 at center, 1 at tip
    const double sigma = sigma_hi + (sigma_lo - sigma_hi) * u;
    const Eigen::Vector2d p = seg.a + u * (seg.b - seg.a) + sigma * gauss(rng) * normal;
    out.points.row(i) = p.transpose();
    out.labels[static_cast<std::size_t>(i)] = PointLabel::pattern;
    truth_sigma(i) = sigma;
  }
  for (int i = n_pattern; i < n; ++i) {
    out.points(i, 0) = unit(rng);
    out.points(i, 1) = unit(rng);
    out.labels[static_cast<std::size_t>(i)] = PointLabel::background;
  }
  out.truth_cycle_count = 0;
  out.truth_sigma = std::move(truth_sigma);
  return out;
}

/// Voronoi diagram of the seed points clipped to the unit square, with the
/// ground-truth skeleton graph and the count of cells that do not touch the
/// square boundary (each of those closes one cycle of the pattern).
struct VoronoiPattern {
  std::vector<Segment> edges;               // clipped bisector segments
  std::vector<std::pair<int, int>> seed_pairs;  // seed pair generating each segment
  Graph truth_graph;                        // over the merged Voronoi vertices
  int interior_cells = 0;
};

namespace detail {

struct TaggedVertex {
  Eigen::Vector2d p;
  int tag;  // seed index whose bisector carries the edge out of this vertex; -1 = square side
};

inline std::vector<TaggedVertex> clip_halfplane(const std::vector<TaggedVertex>& poly,
                                                const Eigen::Vector2d& mid,
                                                const Eigen::Vector2d& dir, int tag) {
  std::vector<TaggedVertex> out;
  const std::size_t n = poly.size();
  out.reserve(n + 2);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& cur = poly[k];
    const auto& nxt = poly[(k + 1) % n];
    const double s_cur = (cur.p - mid).dot(dir);
    const double s_nxt = (nxt.p - mid).dot(dir);
    const bool in_cur = s_cur <= 0.0;
    const bool in_nxt = s_nxt <= 0.0;
    if (in_cur) out.push_back(cur);
    if (in_cur != in_nxt) {
      const double t = s_cur / (s_cur - s_nxt);
      const Eigen::Vector2d x = cur.p + t * (nxt.p - cur.p);
      // leaving: continue along the bisector; entering: resume the original edge
      out.push_back(TaggedVertex{x, in_cur ? tag : cur.tag});
    }
  }
  return out;
}

// Merge endpoints that coincide up to tolerance; returns the vertex index
// of every input point.
inline std::vector<int> merge_points(const std::vector<Eigen::Vector2d>& pts, double tol,
                                     std::vector<Eigen::Vector2d>& merged) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].x() != pts[b].x()) return pts[a].x() < pts[b].x();
    return pts[a].y() < pts[b].y();
  });

  std::vector<int> vertex_of(n, -1);
  merged.clear();
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    // look back within the x-window for an existing vertex
    for (std::size_t oj = oi; oj-- > 0;) {
      const std::size_t j = order[oj];
      if (pts[i].x() - pts[j].x() > tol) break;
      if ((pts[i] - pts[j]).norm() <= tol) {
        vertex_of[i] = vertex_of[j];
        break;
      }
    }
    if (vertex_of[i] < 0) {
      vertex_of[i] = static_cast<int>(merged.size());
      merged.push_back(pts[i]);
    }
  }
  return vertex_of;
}

}  // namespace detail

/// Clipped Voronoi diagram of n_seeds uniform seeds in the unit square.
/// Degenerate seed layouts are regenerated with perturbed seeds (logged).
inline VoronoiPattern voronoi_pattern(int n_seeds, std::uint64_t seed, std::ostream* log = nullptr) {
  if (n_seeds < 3) throw config_error("voronoi_pattern: need at least 3 seeds");

  for (int attempt = 0; attempt < 10; ++attempt) {
    std::mt19937_64 rng(detail::derive_seed(seed, 101 + static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Vector2d> seeds(static_cast<std::size_t>(n_seeds));
    for (auto& s : seeds) s = Eigen::Vector2d(unit(rng), unit(rng));

    bool degenerate = false;
    for (std::size_t i = 0; i < seeds.size() && !degenerate; ++i) {
      for (std::size_t j = i + 1; j < seeds.size(); ++j) {
        if ((seeds[i] - seeds[j]).norm() < 1e-6) {
          degenerate = true;
          break;
        }
      }
    }

    VoronoiPattern out;
    int interior = 0;
    if (!degenerate) {
      for (int i = 0; i < n_seeds && !degenerate; ++i) {
        std::vector<detail::TaggedVertex> cell = {
            {{0.0, 0.0}, -1}, {{1.0, 0.0}, -1}, {{1.0, 1.0}, -1}, {{0.0, 1.0}, -1}};
        for (int j = 0; j < n_seeds; ++j) {
          if (j == i) continue;
          const Eigen::Vector2d mid = 0.5 * (seeds[static_cast<std::size_t>(i)] +
                                             seeds[static_cast<std::size_t>(j)]);
          const Eigen::Vector2d dir = seeds[static_cast<std::size_t>(j)] -
                                      seeds[static_cast<std::size_t>(i)];
          cell = detail::clip_halfplane(cell, mid, dir, j);
          if (cell.size() < 3) break;
        }
        if (cell.size() < 3) {
          degenerate = true;
          break;
        }
        bool touches_boundary = false;
        for (std::size_t k = 0; k < cell.size(); ++k) {
          const auto& cur = cell[k];
          const auto& nxt = cell[(k + 1) % cell.size()];
          const double len = (nxt.p - cur.p).norm();
          if (len < 1e-6) continue;
          if (cur.tag < 0) {
            touches_boundary = true;
          } else if (cur.tag > i) {
            out.edges.push_back(Segment{cur.p, nxt.p});
            out.seed_pairs.emplace_back(i, cur.tag);
          }
        }
        if (!touches_boundary) ++interior;
      }
    }

    if (degenerate || out.edges.empty()) {
      if (log) {
        *log << "[graphem] degenerate Voronoi seed layout (attempt " << attempt
             << "); regenerating with perturbed seeds\n";
      }
      continue;
    }

    std::vector<Eigen::Vector2d> endpoints;
    endpoints.reserve(2 * out.edges.size());
    for (const auto& e : out.edges) {
      endpoints.push_back(e.a);
      endpoints.push_back(e.b);
    }
    std::vector<Eigen::Vector2d> merged;
    const std::vector<int> vid = detail::merge_points(endpoints, 1e-9, merged);
    std::vector<Edge> graph_edges;
    graph_edges.reserve(out.edges.size());
    for (std::size_t e = 0; e < out.edges.size(); ++e) {
      const int u = vid[2 * e];
      const int v = vid[2 * e + 1];
      if (u == v) continue;
      graph_edges.push_back(Edge{std::min(u, v), std::max(u, v),
                                 (merged[static_cast<std::size_t>(u)] -
                                  merged[static_cast<std::size_t>(v)]).squaredNorm()});
    }
    out.truth_graph = Graph(static_cast<int>(merged.size()), std::move(graph_edges));
    out.interior_cells = interior;
    return out;
  }
  throw config_error("voronoi_pattern: failed to build a non-degenerate diagram");
}

/// Point cloud sampled along the Voronoi skeleton with isotropic Gaussian
/// jitter, plus uniform background. samples_per_edge is the average count
/// per edge; the allocation is proportional to edge length so the linear
/// sampling density stays even. truth_cycle_count counts the fully interior
/// Voronoi cells.
inline SyntheticSet gen_voronoi_pattern(int n_seeds, int samples_per_edge, double noise_sigma,
                                        double bkg_frac, std::uint64_t seed,
                                        std::ostream* log = nullptr) {
  if (samples_per_edge < 1) throw config_error("gen_voronoi_pattern: samples_per_edge must be >= 1");
  if (!(bkg_frac >= 0.0 && bkg_frac < 1.0)) throw config_error("gen_voronoi_pattern: bkg_frac in [0,1)");
  if (noise_sigma < 0.0) throw config_error("gen_voronoi_pattern: negative noise_sigma");

  const VoronoiPattern pattern = voronoi_pattern(n_seeds, seed, log);
  const std::size_t n_edges = pattern.edges.size();
  double total_len = 0.0;
  for (const auto& e : pattern.edges) total_len += e.length();

  // length-proportional allocation, largest remainder, at least one per edge
  const long target = static_cast<long>(samples_per_edge) * static_cast<long>(n_edges);
  std::vector<long> alloc(n_edges, 1);
  std::vector<std::pair<double, std::size_t>> remainders(n_edges);
  long assigned = static_cast<long>(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e) {
    const double share = static_cast<double>(target) * pattern.edges[e].length() / total_len;
    const long extra = std::max(0L, static_cast<long>(std::floor(share)) - 1L);
    alloc[e] += extra;
    assigned += extra;
    remainders[e] = {share - std::floor(share), e};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r, ++assigned) {
    ++alloc[remainders[r].second];
  }

  long n_pattern = 0;
  for (long a : alloc) n_pattern += a;
  const long n_bkg = std::lround(bkg_frac / (1.0 - bkg_frac) * static_cast<double>(n_pattern));
  const long n_total = n_pattern + n_bkg;

  std::mt19937_64 rng(detail::derive_seed(seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticSet out;
  out.points.resize(n_total, 2);
  out.labels.resize(static_cast<std::size_t>(n_total));
  long row = 0;
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto& seg = pattern.edges[e];
    for (long s = 0; s < alloc[e]; ++s, ++row) {
      const double u = unit(rng);
      Eigen::Vector2d p = seg.a + u * (seg.b - seg.a);
      p.x() += noise_sigma * gauss(rng);
      p.y() += noise_sigma * gauss(rng);
      out.points.row(row) = p.transpose();
      out.labels[static_cast<std::size_t>(row)] = PointLabel::pattern;
    }
  }
  for (long b = 0; b < n_bkg; ++b, ++row) {
    out.points(row, 0) = unit(rng);
    out.points(row, 1) = unit(rng);
    out.labels[static_cast<std::size_t>(row)] = PointLabel::background;
  }
  out.truth_cycle_count = pattern.interior_cells;
  return out;
}

}  // namespace graphem
