#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/types.hpp"

namespace graphem {

/// log N(x; mu, sigma2 * I_D) for a spherical Gaussian.
/// All density work in this library happens in log space; ratios of
/// far-apart components underflow doubles otherwise.
inline double gaussian_log_pdf(const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& mu,
                               double sigma2) {
  if (!(sigma2 > 0.0)) {
    throw domain_error("gaussian_log_pdf: sigma2 must be positive, got " +
                       std::to_string(sigma2));
  }
  if (x.size() != mu.size()) {
    throw shape_error("gaussian_log_pdf: x has dimension " + std::to_string(x.size()) +
                      " but mu has dimension " + std::to_string(mu.size()));
  }
  const double d = static_cast<double>(x.size());
  const double sq = (x - mu).squaredNorm();
  return -0.5 * d * std::log(2.0 * std::numbers::pi * sigma2) - sq / (2.0 * sigma2);
}

enum class SupportMethod { convex_hull, bounding_box };

/// Uniform background component over the data support: density = 1/volume.
struct BackgroundModel {
  double volume = 0.0;
  double density = 0.0;
  SupportMethod method = SupportMethod::convex_hull;
};

namespace detail {

inline double bounding_box_volume(const Matrix& points) {
  double vol = 1.0;
  for (Index d = 0; d < points.cols(); ++d) {
    vol *= points.col(d).maxCoeff() - points.col(d).minCoeff();
  }
  return vol;
}

inline double max_axis_range(const Matrix& points) {
  double r = 0.0;
  for (Index d = 0; d < points.cols(); ++d) {
    r = std::max(r, points.col(d).maxCoeff() - points.col(d).minCoeff());
  }
  return r;
}

// Andrew's monotone chain; returns hull area via the shoelace formula.
inline double convex_hull_area_2d(const Matrix& points) {
  const Index n = points.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (points(a, 0) != points(b, 0)) return points(a, 0) < points(b, 0);
    return points(a, 1) < points(b, 1);
  });

  auto cross = [&](Index o, Index a, Index b) {
    return (points(a, 0) - points(o, 0)) * (points(b, 1) - points(o, 1)) -
           (points(a, 1) - points(o, 1)) * (points(b, 0) - points(o, 0));
  };

  std::vector<Index> hull(2 * order.size());
  std::size_t m = 0;
  for (Index idx : order) {
    while (m >= 2 && cross(hull[m - 2], hull[m - 1], idx) <= 0) --m;
    hull[m++] = idx;
  }
  const std::size_t lower = m + 1;
  for (auto it = order.rbegin() + 1; it != order.rend(); ++it) {
    while (m >= lower && cross(hull[m - 2], hull[m - 1], *it) <= 0) --m;
    hull[m++] = *it;
  }
  hull.resize(m > 0 ? m - 1 : 0);

  double twice_area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Index a = hull[i];
    const Index b = hull[(i + 1) % hull.size()];
    twice_area += points(a, 0) * points(b, 1) - points(b, 0) * points(a, 1);
  }
  return 0.5 * std::abs(twice_area);
}

// Incremental 3D convex hull. Only the enclosed volume is needed, so faces
// carry no adjacency beyond their vertex triples.
inline double convex_hull_volume_3d(const Matrix& points) {
  using Vec3 = Eigen::Vector3d;
  const Index n = points.rows();
  auto at = [&](Index i) -> Vec3 { return points.row(i).transpose(); };

  const double scale = std::max(max_axis_range(points), 1e-300);
  const double eps = 1e-12 * scale * scale * scale;

  // Seed tetrahedron: spread-out extremes first.
  Index p0 = 0, p1 = 0;
  double best = -1.0;
  for (Index i = 1; i < n; ++i) {
    const double d = (at(i) - at(0)).squaredNorm();
    if (d > best) { best = d; p1 = i; }
  }
  if (best <= 0.0) throw degenerate_support_error("convex hull: all points coincide");
  Index p2 = 0;
  best = -1.0;
  for (Index i = 0; i < n; ++i) {
    const double d = (at(i) - at(p0)).cross(at(i) - at(p1)).squaredNorm();
    if (d > best) { best = d; p2 = i; }
  }
  Index p3 = 0;
  best = -1.0;
  const Vec3 normal0 = (at(p1) - at(p0)).cross(at(p2) - at(p0));
  for (Index i = 0; i < n; ++i) {
    const double d = std::abs(normal0.dot(at(i) - at(p0)));
    if (d > best) { best = d; p3 = i; }
  }
  if (best <= eps) {
    throw degenerate_support_error("convex hull: points are coplanar in 3D");
  }

  struct Face {
    Index a, b, c;
    bool alive = true;
  };
  std::vector<Face> faces;
  const Vec3 interior = 0.25 * (at(p0) + at(p1) + at(p2) + at(p3));

  auto signed_vol = [&](Index a, Index b, Index c, const Vec3& d) {
    return (at(b) - at(a)).cross(at(c) - at(a)).dot(d - at(a));
  };
  auto add_face = [&](Index a, Index b, Index c) {
    // orient so the interior point sits behind the face
    if (signed_vol(a, b, c, interior) > 0) std::swap(b, c);
    faces.push_back(Face{a, b, c});
  };
  add_face(p0, p1, p2);
  add_face(p0, p1, p3);
  add_face(p0, p2, p3);
  add_face(p1, p2, p3);

  for (Index i = 0; i < n; ++i) {
    if (i == p0 || i == p1 || i == p2 || i == p3) continue;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      if (signed_vol(faces[f].a, faces[f].b, faces[f].c, at(i)) > eps) visible.push_back(f);
    }
    if (visible.empty()) continue;

    // horizon = edges of visible faces not shared with another visible face
    std::vector<std::array<Index, 2>> horizon;
    auto toggle_edge = [&](Index u, Index v) {
      for (auto it = horizon.begin(); it != horizon.end(); ++it) {
        if ((*it)[0] == v && (*it)[1] == u) {
          horizon.erase(it);
          return;
        }
      }
      horizon.push_back({u, v});
    };
    for (std::size_t f : visible) {
      toggle_edge(faces[f].a, faces[f].b);
      toggle_edge(faces[f].b, faces[f].c);
      toggle_edge(faces[f].c, faces[f].a);
      faces[f].alive = false;
    }
    for (const auto& e : horizon) add_face(e[0], e[1], i);
  }

  double six_vol = 0.0;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    six_vol += std::abs(signed_vol(f.a, f.b, f.c, interior));
  }
  return six_vol / 6.0;
}

}  // namespace detail

/// Volume of the data support, used to fix the background density rho.
/// Exact convex hull for D in {1,2,3}; bounding box for any D.
inline BackgroundModel support_volume(const Matrix& points, SupportMethod method) {
  const Index n = points.rows();
  const Index dim = points.cols();
  if (n == 0 || dim == 0) throw config_error("support_volume: empty point set");
  if (!points.allFinite()) throw domain_error("support_volume: non-finite coordinates");

  double vol = 0.0;
  if (method == SupportMethod::bounding_box) {
    vol = detail::bounding_box_volume(points);
  } else {
    if (n < dim + 1) {
      throw degenerate_support_error("support_volume: convex hull needs at least D+1 points");
    }
    switch (dim) {
      case 1:
        vol = points.col(0).maxCoeff() - points.col(0).minCoeff();
        break;
      case 2:
        vol = detail::convex_hull_area_2d(points);
        break;
      case 3:
        vol = detail::convex_hull_volume_3d(points);
        break;
      default:
        throw config_error("support_volume: exact convex hull is only available for D <= 3");
    }
  }

  const double scale = detail::max_axis_range(points);
  if (!(scale > 0.0) || vol < 1e-12 * std::pow(scale, static_cast<double>(dim))) {
    throw degenerate_support_error("support_volume: data support has zero volume");
  }
  return BackgroundModel{vol, 1.0 / vol, method};
}

}  // namespace graphem
