#pragma once

// Grouping of measurements by reflecting wall. Each measurement defines a
// circular arc of candidate wall-normal points that passes through the
// receiver; arcs from one wall meet at the true wall-normal point. Two
// strategies find those meeting arcs: unit-sphere inversion (arcs become
// straight segments in 3D) and gnomonic projection (arcs become straight
// segments on hemisphere tangent planes).

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "ildars/error.hpp"
#include "ildars/geometry.hpp"
#include "ildars/simulation.hpp"

namespace ildars {

/// Locus of wall-normal candidates n(p) for hypothetical sender distance
/// p in (0, inf): the foot of the perpendicular from the receiver onto the
/// bisector plane of p*v and (p + delta)*w.
struct CircularSegment {
  std::size_t measurement_index = 0;
  Vec3 endpoint_near;  // n(0) = (delta / 2) w
  Vec3 endpoint_far;   // lim n(p) = delta (w - v) / |w - v|^2
  Vec3 v;
  Vec3 w;
  double delta = 0.0;

  Vec3 at(double p) const {
    const Vec3 chord = (p + delta) * w - p * v;
    return (p * delta + 0.5 * delta * delta) * chord / chord.squaredNorm();
  }
};

struct InvertedSegment {
  Vec3 a;  // inverted near endpoint, 2w / delta
  Vec3 b;  // inverted far endpoint, (w - v) / delta
  std::size_t measurement_index = 0;
};

struct MeasurementCluster {
  std::vector<std::size_t> measurement_indices;
  std::optional<Vec3> wall_normal;

  std::size_t size() const { return measurement_indices.size(); }
};

inline CircularSegment circular_segment(const Measurement& m, std::size_t index = 0) {
  if (!(m.delta > 0.0)) throw Error(ErrorKind::DegenerateMeasurement, "delta must be positive");
  const Vec3 chord = m.w.vec() - m.v.vec();
  const double chord2 = chord.squaredNorm();
  if (std::sqrt(chord2) <= tol::kDegenerate)
    throw Error(ErrorKind::DegenerateMeasurement, "direct and reflected directions coincide");
  CircularSegment cs;
  cs.measurement_index = index;
  cs.endpoint_near = 0.5 * m.delta * m.w.vec();
  cs.endpoint_far = m.delta * chord / chord2;
  cs.v = m.v;
  cs.w = m.w;
  cs.delta = m.delta;
  return cs;
}

/// Closed-form inversion of both endpoints.
inline InvertedSegment invert_segment(const CircularSegment& cs) {
  if (cs.endpoint_near.norm() <= tol::kZeroNorm || cs.endpoint_far.norm() <= tol::kZeroNorm)
    throw Error(ErrorKind::DegenerateInput, "circular segment endpoint at the origin");
  return {2.0 * cs.w / cs.delta, (cs.w - cs.v) / cs.delta, cs.measurement_index};
}

// ---------------------------------------------------------------------------
// Inversion clustering

/// Distance-evaluation counter for complexity checks.
struct InversionStats {
  std::size_t distance_evaluations = 0;
};

struct LineCluster {
  std::vector<InvertedSegment> members;
  std::optional<Vec3> center;

  void add(const InvertedSegment& seg) {
    if (members.size() == 1) {
      const auto& first = members.front();
      const auto [c1, c2] = closest_points_segments(first.a, first.b, seg.a, seg.b);
      center_sum_ = c1 + c2;
      center_count_ = 2;
      center = 0.5 * center_sum_;
    } else if (members.size() >= 2) {
      center_sum_ += closest_point_on_segment(*center, seg.a, seg.b);
      ++center_count_;
      center = center_sum_ / static_cast<double>(center_count_);
    }
    members.push_back(seg);
  }

  /// Segment distance for a singleton, center distance otherwise.
  double distance_to(const InvertedSegment& seg) const {
    if (members.size() == 1) return segment_segment_distance(members.front().a, members.front().b, seg.a, seg.b);
    return point_segment_distance(*center, seg.a, seg.b);
  }

 private:
  Vec3 center_sum_ = Vec3::Zero();
  std::size_t center_count_ = 0;
};

/// Greedy single pass in input order: each segment joins the first cluster
/// within `threshold`, else seeds a new one. Measurements whose arc is
/// degenerate (v == w) become singleton clusters that accept nobody.
inline std::vector<MeasurementCluster> cluster_by_inversion(const std::vector<Measurement>& ms, double threshold,
                                                            InversionStats* stats = nullptr) {
  if (!(threshold >= 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be non-negative");
  struct Slot {
    LineCluster lines;
    std::vector<std::size_t> indices;
    bool open = true;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    std::optional<InvertedSegment> seg;
    try {
      seg = invert_segment(circular_segment(ms[i], i));
    } catch (const Error&) {
      slots.push_back({{}, {i}, false});
      continue;
    }
    bool placed = false;
    for (auto& slot : slots) {
      if (!slot.open) continue;
      if (stats) ++stats->distance_evaluations;
      if (slot.lines.distance_to(*seg) <= threshold) {
        slot.lines.add(*seg);
        slot.indices.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      Slot slot;
      slot.lines.add(*seg);
      slot.indices.push_back(i);
      slots.push_back(std::move(slot));
    }
  }
  std::vector<MeasurementCluster> out;
  out.reserve(slots.size());
  for (auto& slot : slots) out.push_back({std::move(slot.indices), std::nullopt});
  return out;
}

// ---------------------------------------------------------------------------
// Gnomonic projection clustering

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Latitude/longitude of p / |p|. Longitude uses atan2, which is 0 at the
/// poles.
inline LatLon project_to_sphere_latlon(const Vec3& p) {
  const double n = p.norm();
  if (!(n > tol::kZeroNorm)) throw Error(ErrorKind::DegenerateInput, "cannot project the origin onto the sphere");
  const Vec3 q = p / n;
  return {std::asin(std::clamp(q.z(), -1.0, 1.0)), std::atan2(q.y(), q.x())};
}

namespace gnomonic {
/// Points with cos(c) at or below this are outside the open hemisphere.
inline constexpr double kHemisphereEps = 1e-9;
}  // namespace gnomonic

/// Gnomonic (central) projection of `point` onto the plane tangent to the
/// sphere at `center`.
inline Vec2 gnomonic_project(const LatLon& point, const LatLon& center) {
  const double dlon = point.lon - center.lon;
  const double cos_c = std::sin(center.lat) * std::sin(point.lat) +
                       std::cos(center.lat) * std::cos(point.lat) * std::cos(dlon);
  if (!(cos_c > gnomonic::kHemisphereEps))
    throw Error(ErrorKind::OutsideHemisphere, "point is not inside the hemisphere");
  const double x = std::cos(point.lat) * std::sin(dlon) / cos_c;
  const double y =
      (std::cos(center.lat) * std::sin(point.lat) - std::sin(center.lat) * std::cos(point.lat) * std::cos(dlon)) /
      cos_c;
  return {x, y};
}

/// The 12 vertices of a regular icosahedron on the unit sphere.
inline std::array<Vec3, 12> icosahedron_vertices() {
  const double phi = std::numbers::phi;
  std::array<Vec3, 12> out;
  std::size_t k = 0;
  for (const double a : {-1.0, 1.0}) {
    for (const double b : {-phi, phi}) {
      out[k++] = Vec3(0.0, a, b).normalized();
      out[k++] = Vec3(a, b, 0.0).normalized();
      out[k++] = Vec3(b, 0.0, a).normalized();
    }
  }
  return out;
}

/// Uniformly distributed rotation (random unit quaternion, Shoemake).
inline Eigen::Matrix3d random_rotation(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u1 = unit(rng);
  const double u2 = unit(rng);
  const double u3 = unit(rng);
  const double tau = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const Eigen::Quaterniond q(a * std::sin(tau * u2), a * std::cos(tau * u2), b * std::sin(tau * u3),
                             b * std::cos(tau * u3));
  return q.normalized().toRotationMatrix();
}

inline std::array<Vec3, 12> hemisphere_centers(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Matrix3d rot = random_rotation(rng);
  auto centers = icosahedron_vertices();
  for (auto& c : centers) c = (rot * c).normalized();
  return centers;
}

namespace detail {

struct ProjectedPiece {
  std::size_t hemisphere;
  Segment2 segment;
};

inline bool fits(const Vec3& center, const Vec3& p, const Vec3& q) {
  return center.dot(p) > gnomonic::kHemisphereEps && center.dot(q) > gnomonic::kHemisphereEps;
}

// Projects the short great-circle arc p -> q into every hemisphere that
// contains it; an arc that fits nowhere is split at its midpoint.
inline void project_arc(const Vec3& p, const Vec3& q, const std::array<Vec3, 12>& centers,
                        const std::array<LatLon, 12>& center_ll, int depth, std::vector<ProjectedPiece>& out) {
  bool any = false;
  for (std::size_t h = 0; h < centers.size(); ++h) {
    if (!fits(centers[h], p, q)) continue;
    any = true;
    try {
      const Vec2 a = gnomonic_project(project_to_sphere_latlon(p), center_ll[h]);
      const Vec2 b = gnomonic_project(project_to_sphere_latlon(q), center_ll[h]);
      if (a != b) out.push_back({h, Segment2(a, b)});
    } catch (const Error&) {
      // Rounding in lat/lon put an endpoint on the boundary; skip this one.
    }
  }
  if (any || depth <= 0) return;
  const Vec3 mid = p + q;
  if (mid.norm() <= tol::kZeroNorm) return;
  const Vec3 m = mid.normalized();
  project_arc(p, m, centers, center_ll, depth - 1, out);
  project_arc(m, q, centers, center_ll, depth - 1, out);
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// Connected components of the arc intersection graph. Nodes are
/// measurements; two nodes are adjacent when their projected arcs intersect
/// on at least one shared hemisphere. Components are ordered by their
/// smallest measurement index.
inline std::vector<MeasurementCluster> cluster_by_gnomonic(const std::vector<Measurement>& ms,
                                                           std::uint64_t seed) {
  const auto centers = hemisphere_centers(seed);
  std::array<LatLon, 12> center_ll;
  for (std::size_t h = 0; h < centers.size(); ++h) center_ll[h] = project_to_sphere_latlon(centers[h]);

  const std::size_t n = ms.size();
  std::vector<std::vector<detail::ProjectedPiece>> pieces(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto cs = circular_segment(ms[i], i);
      detail::project_arc(cs.endpoint_near.normalized(), cs.endpoint_far.normalized(), centers, center_ll, 8,
                          pieces[i]);
    } catch (const Error&) {
      // Degenerate arc: isolated node.
    }
  }

  detail::DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sets.find(i) == sets.find(j)) continue;
      bool hit = false;
      for (const auto& pi : pieces[i]) {
        for (const auto& pj : pieces[j]) {
          if (pi.hemisphere == pj.hemisphere && segments_intersect_2d(pi.segment, pj.segment)) {
            hit = true;
            break;
          }
        }
        if (hit) break;
      }
      if (hit) sets.unite(i, j);
    }
  }

  std::vector<MeasurementCluster> out;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    if (slot[root] == n) {
      slot[root] = out.size();
      out.push_back({});
    }
    out[slot[root]].measurement_indices.push_back(i);
  }
  return out;
}

/// `cluster_id: index,index,...` per line.
inline void write_clusters(std::ostream& os, const std::vector<MeasurementCluster>& clusters) {
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    os << c << ':';
    const auto& idx = clusters[c].measurement_indices;
    for (std::size_t k = 0; k < idx.size(); ++k) os << (k == 0 ? " " : ",") << idx[k];
    os << '\n';
  }
}

}  // namespace ildars
