#pragma once

// Exact 3D/2D primitives shared by every stage of the pipeline. All functions
// are pure and operate on values.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include "ildars/error.hpp"

namespace ildars {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

namespace tol {
/// Norms at or below this are treated as zero vectors.
inline constexpr double kZeroNorm = 1e-12;
/// Allowed deviation of a unit vector's norm from 1.
inline constexpr double kUnitNorm = 1e-12;
/// |cos| between directions above 1 - kParallel counts as parallel.
inline constexpr double kParallel = 1e-9;
/// Generic threshold for vanishing denominators / cross products.
inline constexpr double kDegenerate = 1e-9;
/// Largest admissible condition number of the multi-line normal equations.
inline constexpr double kMaxCondition = 1e12;
}  // namespace tol

inline bool is_finite(const Vec3& p) { return p.allFinite(); }

inline void require_finite(const Vec3& p, const char* what) {
  if (!is_finite(p)) throw Error(ErrorKind::DegenerateInput, std::string(what) + " is not finite");
}

/// A direction. Construction always yields a vector with norm 1 (within
/// tol::kUnitNorm); the raw vector is reachable through vec() or implicit
/// conversion.
class UnitVec3 {
 public:
  UnitVec3() : v_(Vec3::UnitX()) {}

  static UnitVec3 normalize(const Vec3& p) {
    require_finite(p, "direction");
    const double n = p.norm();
    if (n <= tol::kZeroNorm) throw Error(ErrorKind::DegenerateInput, "cannot normalize a zero vector");
    UnitVec3 u;
    u.v_ = p / n;
    return u;
  }

  /// Keeps p bit-for-bit when it is already unit length, else normalizes.
  static UnitVec3 from_unit(const Vec3& p) {
    require_finite(p, "direction");
    if (std::abs(p.norm() - 1.0) <= tol::kUnitNorm) {
      UnitVec3 u;
      u.v_ = p;
      return u;
    }
    return normalize(p);
  }

  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)
  double operator[](int i) const { return v_[i]; }
  double dot(const Vec3& o) const { return v_.dot(o); }
  UnitVec3 operator-() const {
    UnitVec3 u;
    u.v_ = -v_;
    return u;
  }

  friend bool operator==(const UnitVec3& a, const UnitVec3& b) { return a.v_ == b.v_; }

 private:
  Vec3 v_;
};

struct Line3 {
  Vec3 anchor;
  UnitVec3 direction;
};

/// Closed 2D segment with distinct endpoints.
class Segment2 {
 public:
  Segment2(const Vec2& a, const Vec2& b) : a_(a), b_(b) {
    if (!a.allFinite() || !b.allFinite()) throw Error(ErrorKind::DegenerateInput, "segment endpoint not finite");
    if (a == b) throw Error(ErrorKind::DegenerateInput, "degenerate segment");
  }
  const Vec2& a() const { return a_; }
  const Vec2& b() const { return b_; }

 private:
  Vec2 a_;
  Vec2 b_;
};

/// Unit-sphere inversion p -> p / |p|^2.
inline Vec3 invert_point(const Vec3& p) {
  const double n2 = p.squaredNorm();
  if (!(std::sqrt(n2) > tol::kZeroNorm)) throw Error(ErrorKind::DegenerateInput, "cannot invert the origin");
  return p / n2;
}

/// Mirror of p across the plane {x : x . unit_normal = distance}.
inline Vec3 reflect_across_plane(const Vec3& p, const UnitVec3& unit_normal, double distance) {
  if (!(distance >= 0.0)) throw Error(ErrorKind::InvalidArgument, "plane distance must be non-negative");
  const Vec3& n = unit_normal.vec();
  return p - 2.0 * (p.dot(n) - distance) * n;
}

/// Mirror of a direction across a plane with the given unit normal.
inline Vec3 reflect_direction(const Vec3& d, const UnitVec3& unit_normal) {
  const Vec3& n = unit_normal.vec();
  return d - 2.0 * d.dot(n) * n;
}

/// Midpoint of the common perpendicular between two non-parallel lines.
inline Vec3 closest_point_two_lines(const Line3& g, const Line3& h) {
  const Vec3& d1 = g.direction.vec();
  const Vec3& d2 = h.direction.vec();
  const double b = d1.dot(d2);
  if (std::abs(b) >= 1.0 - tol::kParallel) throw Error(ErrorKind::ParallelLines, "lines are (nearly) parallel");
  const Vec3 r = g.anchor - h.anchor;
  const double c = d1.dot(r);
  const double f = d2.dot(r);
  const double lambda = (b * f - c) / (1.0 - b * b);
  const double mu = f + b * lambda;
  return 0.5 * ((g.anchor + lambda * d1) + (h.anchor + mu * d2));
}

/// Least-squares point of a set of lines: minimizes the sum of squared
/// distances by solving sum_i (I - d_i d_i^T)(x - a_i) = 0.
inline Vec3 closest_point_n_lines(std::span<const Line3> lines) {
  if (lines.size() < 2) throw Error(ErrorKind::DegenerateConfiguration, "need at least two lines");
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const auto& line : lines) {
    const Vec3& d = line.direction.vec();
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
    normal += proj;
    rhs += proj * line.anchor;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  const Vec3& ev = eig.eigenvalues();  // ascending
  if (!(ev[0] > 0.0) || ev[2] / ev[0] > tol::kMaxCondition) {
    throw Error(ErrorKind::DegenerateConfiguration, "line configuration is singular");
  }
  const Eigen::Matrix3d& basis = eig.eigenvectors();
  return basis * (basis.transpose() * rhs).cwiseQuotient(ev);
}

/// Rodrigues rotation of a direction about a unit axis.
inline UnitVec3 rotate_about_axis(const UnitVec3& v, const UnitVec3& axis, double angle) {
  const Vec3& x = v.vec();
  const Vec3& k = axis.vec();
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return UnitVec3::normalize(x * c + k.cross(x) * s + k * (k.dot(x) * (1.0 - c)));
}

/// Closest point to p on the closed segment [a, b].
inline Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

/// Closest pair of points between closed segments [p1, q1] and [p2, q2].
/// Follows the clamped-parameter scheme from Ericson, Real-Time Collision
/// Detection, 5.1.9.
inline std::pair<Vec3, Vec3> closest_points_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                                     const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= 0.0 && e <= 0.0) return {p1, p2};
  if (a <= 0.0) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 0.0) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {p1 + s * d1, p2 + t * d2};
}

inline double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const auto [c1, c2] = closest_points_segments(p1, q1, p2, q2);
  return (c1 - c2).norm();
}

namespace detail {

inline int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double cross = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  return (cross > 0.0) - (cross < 0.0);
}

// c is collinear with [a, b]; is it inside the bounding box?
inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& c) {
  return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= c.y() && c.y() <= std::max(a.y(), b.y());
}

}  // namespace detail

/// Closed-segment intersection test; touching endpoints and collinear
/// overlap both count.
inline bool segments_intersect_2d(const Segment2& s1, const Segment2& s2) {
  using detail::on_segment;
  using detail::orientation;
  const int o1 = orientation(s1.a(), s1.b(), s2.a());
  const int o2 = orientation(s1.a(), s1.b(), s2.b());
  const int o3 = orientation(s2.a(), s2.b(), s1.a());
  const int o4 = orientation(s2.a(), s2.b(), s1.b());
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(s1.a(), s1.b(), s2.a())) return true;
  if (o2 == 0 && on_segment(s1.a(), s1.b(), s2.b())) return true;
  if (o3 == 0 && on_segment(s2.a(), s2.b(), s1.a())) return true;
  if (o4 == 0 && on_segment(s2.a(), s2.b(), s1.b())) return true;
  return false;
}

/// Angle in radians between two non-zero vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace ildars
