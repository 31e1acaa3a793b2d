#pragma once

// Ground-truth rooms, sender placement, first-order reflection measurements
// and the three measurement error models (angular, delay, misassignment).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ildars/error.hpp"
#include "ildars/geometry.hpp"

namespace ildars {

using Rng = std::mt19937_64;

/// Planar wall {x : x . unit_normal = distance}. unit_normal points from the
/// receiver at the origin toward the wall, so distance * unit_normal is the
/// wall normal vector (the closest wall point).
struct Wall {
  UnitVec3 unit_normal;
  double distance = 0.0;
  std::vector<Vec3> polygon;
  int id = 0;

  Vec3 normal_vector() const { return distance * unit_normal.vec(); }
};

struct Room {
  std::vector<Wall> walls;
  Vec3 receiver = Vec3::Zero();
};

/// One direct/reflected pair (v, w, delta). delta is a path-length
/// difference in meters (signal speed normalized to 1).
struct Measurement {
  UnitVec3 v;
  UnitVec3 w;
  double delta = 0.0;
  int sender_id = 0;
  // Ground truth, never read by the algorithms.
  std::optional<int> true_wall_id;
  bool misassigned = false;
};

struct ErrorConfig {
  double kappa = 131.312;
  double delta_sigma = 0.1;
  double misassign_rate = 0.05;
  std::uint64_t rng_seed = 0;

  /// No perturbation at all; kappa = inf stands for the kappa -> inf limit.
  static ErrorConfig zero(std::uint64_t seed = 0) {
    return {std::numeric_limits<double>::infinity(), 0.0, 0.0, seed};
  }

  void validate() const {
    if (!(kappa > 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
    if (!(delta_sigma >= 0.0) || !std::isfinite(delta_sigma))
      throw Error(ErrorKind::InvalidArgument, "delta_sigma must be finite and non-negative");
    if (!(misassign_rate >= 0.0 && misassign_rate <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "misassign_rate must lie in [0, 1]");
  }
};

/// Sender i sits at sender_positions[i].
struct GroundTruth {
  std::vector<Vec3> sender_positions;
  Room room;

  const Vec3& sender(int id) const { return sender_positions.at(static_cast<std::size_t>(id)); }
};

inline Room make_cube_room(double side) {
  if (!(side > 0.0) || !std::isfinite(side)) throw Error(ErrorKind::InvalidArgument, "room side must be positive");
  const double h = side / 2.0;
  Room room;
  int id = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (const double sign : {1.0, -1.0}) {
      Vec3 n = Vec3::Zero();
      n[axis] = sign;
      const int a1 = (axis + 1) % 3;
      const int a2 = (axis + 2) % 3;
      Wall wall;
      wall.unit_normal = UnitVec3::normalize(n);
      wall.distance = h;
      wall.id = id++;
      for (const auto& [c1, c2] : {std::pair{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}) {
        Vec3 p = h * n;
        p[a1] = c1 * h;
        p[a2] = c2 * h;
        wall.polygon.push_back(p);
      }
      room.walls.push_back(std::move(wall));
    }
  }
  return room;
}

namespace sim {
/// Senders keep this clearance from every wall and from the receiver.
inline constexpr double kClearance = 0.01;
}  // namespace sim

/// Uniform rejection sampling inside the room's bounding box, keeping only
/// points strictly on the receiver side of every wall.
inline GroundTruth place_senders(const Room& room, int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sender count must be at least 1");
  if (room.walls.empty()) throw Error(ErrorKind::InvalidArgument, "room has no walls");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& wall : room.walls) {
    for (const auto& p : wall.polygon) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  std::uniform_real_distribution<double> uz(lo.z(), hi.z());
  GroundTruth truth;
  truth.room = room;
  constexpr int kMaxAttempts = 1'000'000;
  int attempts = 0;
  while (static_cast<int>(truth.sender_positions.size()) < count) {
    if (++attempts > kMaxAttempts) throw Error(ErrorKind::InvalidArgument, "room interior too small for senders");
    const Vec3 s(ux(rng), uy(rng), uz(rng));
    if ((s - room.receiver).norm() <= sim::kClearance) continue;
    const bool inside = std::all_of(room.walls.begin(), room.walls.end(), [&](const Wall& w) {
      return s.dot(w.unit_normal.vec()) < w.distance - sim::kClearance;
    });
    if (inside) truth.sender_positions.push_back(s);
  }
  return truth;
}

namespace detail {

// Point-in-polygon for a point already on the wall plane. Boundary points
// count as inside.
inline bool wall_contains(const Wall& wall, const Vec3& x) {
  const Vec3& n = wall.unit_normal.vec();
  const Vec3 e1 = n.unitOrthogonal();
  const Vec3 e2 = n.cross(e1);
  const Vec2 q(x.dot(e1), x.dot(e2));
  const std::size_t k = wall.polygon.size();
  if (k < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = k - 1; i < k; j = i++) {
    const Vec2 a(wall.polygon[i].dot(e1), wall.polygon[i].dot(e2));
    const Vec2 b(wall.polygon[j].dot(e1), wall.polygon[j].dot(e2));
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    if ((a + t * ab - q).norm() <= 1e-12) return true;
    if ((a.y() > q.y()) != (b.y() > q.y()) && q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

}  // namespace detail

/// One measurement per (sender, wall), sender-major order. The reflected
/// direction points at the sender mirrored across the wall.
inline std::vector<Measurement> generate_measurements(const GroundTruth& truth) {
  std::vector<Measurement> out;
  out.reserve(truth.sender_positions.size() * truth.room.walls.size());
  for (std::size_t sid = 0; sid < truth.sender_positions.size(); ++sid) {
    const Vec3& s = truth.sender_positions[sid];
    for (const auto& wall : truth.room.walls) {
      const Vec3 mirrored = reflect_across_plane(s, wall.unit_normal, wall.distance);
      const double toward = mirrored.dot(wall.unit_normal.vec());
      if (!(toward > 0.0)) continue;
      // Where the unfolded path from the mirrored sender to the receiver
      // crosses the wall plane.
      const Vec3 hit = mirrored * (wall.distance / toward);
      if (!detail::wall_contains(wall, hit)) continue;
      Measurement m;
      m.v = UnitVec3::normalize(s);
      m.w = UnitVec3::normalize(mirrored);
      m.delta = mirrored.norm() - s.norm();
      m.sender_id = static_cast<int>(sid);
      m.true_wall_id = wall.id;
      out.push_back(m);
    }
  }
  return out;
}

/// Samples an angle from the von Mises distribution with mean 0, using the
/// Best-Fisher rejection scheme; very large kappa falls back to the normal
/// approximation with variance 1/kappa.
inline double sample_von_mises(double kappa, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (std::isinf(kappa)) return 0.0;
  if (kappa < 1e-8) return std::numbers::pi * (2.0 * unit(rng) - 1.0);
  if (kappa > 1e6) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(kappa));
    return std::remainder(normal(rng), 2.0 * std::numbers::pi);
  }
  const double s = 0.5 / kappa;
  const double r = s + std::sqrt(1.0 + s * s);
  double w = 0.0;
  while (true) {
    const double z = std::cos(std::numbers::pi * unit(rng));
    w = (1.0 + r * z) / (r + z);
    const double y = kappa * (r - w);
    const double v = unit(rng);
    if (y * (2.0 - y) - v >= 0.0 || std::log(y / v) + 1.0 - y >= 0.0) break;
  }
  const double theta = std::acos(std::clamp(w, -1.0, 1.0));
  return unit(rng) < 0.5 ? -theta : theta;
}

/// Rotates d by a von Mises distributed angle about an axis drawn uniformly
/// from the plane orthogonal to d.
inline UnitVec3 perturb_direction(const UnitVec3& d, double kappa, Rng& rng) {
  if (!(kappa > 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
  if (std::isinf(kappa)) return d;
  const double theta = sample_von_mises(kappa, rng);
  std::uniform_real_distribution<double> phi_dist(0.0, 2.0 * std::numbers::pi);
  const double phi = phi_dist(rng);
  const Vec3 e1 = d.vec().unitOrthogonal();
  const Vec3 e2 = d.vec().cross(e1);
  const UnitVec3 axis = UnitVec3::normalize(std::cos(phi) * e1 + std::sin(phi) * e2);
  return rotate_about_axis(d, axis, theta);
}

/// Applies, in order: angular noise (one draw per direct signal, i.e. per
/// sender, and one per reflection), absolute-valued Gaussian delay noise, and
/// reassignment of round(rate * n) reflections to a different sender's direct
/// signal.
inline std::vector<Measurement> apply_errors(const std::vector<Measurement>& ms, const ErrorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  std::vector<Measurement> out = ms;

  std::vector<int> sender_order;
  std::unordered_map<int, UnitVec3> direct;
  for (const auto& m : ms) {
    if (direct.emplace(m.sender_id, m.v).second) sender_order.push_back(m.sender_id);
  }
  for (const int sid : sender_order) direct[sid] = perturb_direction(direct[sid], cfg.kappa, rng);

  for (auto& m : out) {
    m.v = direct[m.sender_id];
    m.w = perturb_direction(m.w, cfg.kappa, rng);
    if (cfg.delta_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, cfg.delta_sigma);
      m.delta = std::abs(m.delta + noise(rng));
    }
  }

  const auto n = out.size();
  const auto k = static_cast<std::size_t>(std::llround(cfg.misassign_rate * static_cast<double>(n)));
  if (k == 0 || sender_order.size() < 2) return out;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k entries are a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    Measurement& m = out[idx[i]];
    std::uniform_int_distribution<std::size_t> other(0, sender_order.size() - 2);
    std::size_t j = other(rng);
    const auto own = static_cast<std::size_t>(
        std::find(sender_order.begin(), sender_order.end(), m.sender_id) - sender_order.begin());
    if (j >= own) ++j;
    m.sender_id = sender_order[j];
    m.v = direct[m.sender_id];
    m.misassigned = true;
  }
  return out;
}

// Line format: sender_id v.x v.y v.z w.x w.y w.z delta [true_wall_id [misassigned]]

inline void write_measurements(std::ostream& os, const std::vector<Measurement>& ms, bool with_truth = true) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& m : ms) {
    line.str({});
    line << m.sender_id << ' ' << m.v[0] << ' ' << m.v[1] << ' ' << m.v[2] << ' ' << m.w[0] << ' ' << m.w[1] << ' '
         << m.w[2] << ' ' << m.delta;
    if (with_truth && m.true_wall_id) {
      line << ' ' << *m.true_wall_id;
      if (m.misassigned) line << " 1";
    }
    os << line.str() << '\n';
  }
}

inline std::vector<Measurement> read_measurements(std::istream& is) {
  std::vector<Measurement> out;
  std::string text;
  int lineno = 0;
  while (std::getline(is, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos || text[0] == '#') continue;
    std::istringstream in(text);
    Measurement m;
    Vec3 v;
    Vec3 w;
    if (!(in >> m.sender_id >> v[0] >> v[1] >> v[2] >> w[0] >> w[1] >> w[2] >> m.delta))
      throw Error(ErrorKind::Parse, "measurement line " + std::to_string(lineno) + ": expected 8 fields");
    int wall = 0;
    if (in >> wall) {
      m.true_wall_id = wall;
      int flag = 0;
      if (in >> flag) m.misassigned = flag != 0;
    }
    if (!(m.delta > 0.0)) throw Error(ErrorKind::Parse, "measurement line " + std::to_string(lineno) + ": delta <= 0");
    if (std::abs(v.norm() - 1.0) > 1e-9 || std::abs(w.norm() - 1.0) > 1e-9)
      throw Error(ErrorKind::Parse, "measurement line " + std::to_string(lineno) + ": direction not unit length");
    m.v = UnitVec3::from_unit(v);
    m.w = UnitVec3::from_unit(w);
    out.push_back(m);
  }
  return out;
}

}  // namespace ildars
