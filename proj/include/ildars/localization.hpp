#pragma once

// Sender localization from measurements and calibrated walls: four
// single-wall methods, three wall-selection strategies, and a multi-wall
// least-squares method.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ildars/calibration.hpp"
#include "ildars/clustering.hpp"
#include "ildars/error.hpp"
#include "ildars/geometry.hpp"
#include "ildars/simulation.hpp"

namespace ildars {

enum class LocalizationMethod { MapToNormal, ReflectionGeometry, WallDirection, ClosestLines, ClosestLinesExtended };
enum class WallSelection { LargestCluster, NarrowestCluster, UnweightedAverage };

constexpr char token(LocalizationMethod m) {
  switch (m) {
    case LocalizationMethod::MapToNormal: return 'M';
    case LocalizationMethod::ReflectionGeometry: return 'R';
    case LocalizationMethod::WallDirection: return 'W';
    case LocalizationMethod::ClosestLines: return 'C';
    case LocalizationMethod::ClosestLinesExtended: return 'E';
  }
  return '?';
}

constexpr char token(WallSelection s) {
  switch (s) {
    case WallSelection::LargestCluster: return 'L';
    case WallSelection::NarrowestCluster: return 'N';
    case WallSelection::UnweightedAverage: return 'U';
  }
  return '?';
}

struct SenderPosition {
  int sender_id = 0;
  Vec3 position = Vec3::Zero();
  double p = 0.0;  // distance along the direct direction
};

namespace detail {

inline SenderPosition on_direct_ray(const Measurement& m, double p) {
  if (!std::isfinite(p)) throw Error(ErrorKind::DegenerateGeometry, "sender distance is not finite");
  if (!(p > 0.0)) throw Error(ErrorKind::NonPositiveDistance, "sender would lie behind the receiver");
  return {m.sender_id, p * m.v.vec(), p};
}

inline UnitVec3 wall_unit(const Vec3& n) {
  if (n.norm() <= tol::kZeroNorm) throw Error(ErrorKind::DegenerateGeometry, "wall normal vector is zero");
  return UnitVec3::normalize(n);
}

}  // namespace detail

/// p = ((2n - delta w).n) / ((v + w).n)
inline SenderPosition locate_map_to_normal(const Measurement& m, const Vec3& n) {
  const double denom = (m.v.vec() + m.w.vec()).dot(n);
  if (n.norm() <= tol::kZeroNorm || std::abs(denom) <= tol::kDegenerate * n.norm())
    throw Error(ErrorKind::DegenerateGeometry, "(v + w) is orthogonal to the wall normal");
  return detail::on_direct_ray(m, (2.0 * n - m.delta * m.w.vec()).dot(n) / denom);
}

/// p = 2(n.n)(w.b) / ((v.n)(w.b) + (v.b)(w.n)) with b = (u x v) x u.
inline SenderPosition locate_reflection_geometry(const Measurement& m, const Vec3& n) {
  const UnitVec3 u = detail::wall_unit(n);
  const Vec3& v = m.v;
  const Vec3& w = m.w;
  const Vec3 b = u.vec().cross(v).cross(u.vec());
  if (b.norm() <= tol::kDegenerate) throw Error(ErrorKind::DegenerateGeometry, "direct signal parallel to wall normal");
  const double denom = v.dot(n) * w.dot(b) + v.dot(b) * w.dot(n);
  if (std::abs(denom) <= tol::kDegenerate * n.norm())
    throw Error(ErrorKind::DegenerateGeometry, "reflection geometry denominator vanishes");
  return detail::on_direct_ray(m, 2.0 * n.dot(n) * w.dot(b) / denom);
}

/// Uses only the wall direction; the wall distance is not needed.
inline SenderPosition locate_wall_direction(const Measurement& m, const UnitVec3& u) {
  const auto p = sender_distance_from_direction(m, u);
  if (!p) throw Error(ErrorKind::DegenerateGeometry, "wall direction formula is degenerate");
  return detail::on_direct_ray(m, *p);
}

/// The reflected direction mirrored across the wall with normal n.
inline UnitVec3 mirror_direction(const UnitVec3& w, const Vec3& n) {
  return UnitVec3::normalize(reflect_direction(w, detail::wall_unit(n)));
}

/// Line through the mirrored receiver 2n along the mirrored reflection.
inline Line3 mirrored_reflection_line(const UnitVec3& w, const Vec3& n) { return {2.0 * n, mirror_direction(w, n)}; }

/// Closest point between the direct ray and the mirrored reflection line.
inline SenderPosition locate_closest_lines(const Measurement& m, const Vec3& n) {
  const Line3 g{Vec3::Zero(), m.v};
  const Vec3 x = closest_point_two_lines(g, mirrored_reflection_line(m.w, n));
  const double p = x.dot(m.v.vec());
  if (!(p > 0.0)) throw Error(ErrorKind::NonPositiveDistance, "sender would lie behind the receiver");
  return {m.sender_id, x, p};
}

/// A reflected direction paired with the wall normal vector of its cluster.
struct WallReflection {
  UnitVec3 w;
  Vec3 n;
};

/// Least-squares point of the direct line and one mirrored reflection line
/// per (reflection, wall) pair.
inline SenderPosition locate_closest_lines_extended(int sender_id, const UnitVec3& v,
                                                    std::span<const WallReflection> reflections) {
  if (reflections.empty()) throw Error(ErrorKind::DegenerateConfiguration, "need at least one reflection");
  std::vector<Line3> lines;
  lines.reserve(reflections.size() + 1);
  lines.push_back({Vec3::Zero(), v});
  for (const auto& r : reflections) lines.push_back(mirrored_reflection_line(r.w, r.n));
  const Vec3 x = closest_point_n_lines(lines);
  return {sender_id, x, x.dot(v.vec())};
}

// ---------------------------------------------------------------------------
// Wall selection

/// A wall available to one sender: the cluster one of its reflections was
/// assigned to, and that cluster's estimate.
struct CandidateWall {
  std::size_t cluster_id = 0;
  std::size_t cluster_size = 0;
  double spread = 0.0;  // mean angle between cluster reflections and n
  WallEstimate estimate;
};

struct AllWalls {};
using WallChoice = std::variant<std::size_t, AllWalls>;

/// Index into `candidates`, or AllWalls for unweighted averaging. Ties go to
/// the lowest cluster id.
inline WallChoice select_wall(std::span<const CandidateWall> candidates, WallSelection strategy) {
  if (candidates.empty()) throw Error(ErrorKind::NoWalls, "no calibrated wall available");
  if (strategy == WallSelection::UnweightedAverage) return AllWalls{};
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    bool better = false;
    if (strategy == WallSelection::LargestCluster) {
      better = c.cluster_size > b.cluster_size || (c.cluster_size == b.cluster_size && c.cluster_id < b.cluster_id);
    } else {
      better = c.spread < b.spread || (c.spread == b.spread && c.cluster_id < b.cluster_id);
    }
    if (better) best = i;
  }
  return best;
}

/// Mean angle between the reflected directions of a cluster and its wall
/// normal vector.
inline double cluster_spread(const std::vector<Measurement>& ms, const MeasurementCluster& cluster, const Vec3& n) {
  double sum = 0.0;
  for (const auto i : cluster.measurement_indices) sum += angle_between(ms.at(i).w.vec(), n);
  return cluster.measurement_indices.empty() ? 0.0 : sum / static_cast<double>(cluster.measurement_indices.size());
}

// ---------------------------------------------------------------------------
// Batch localization

struct MeasurementPosition {
  std::size_t measurement_index = 0;
  SenderPosition position;
};

struct LocalizationResult {
  std::vector<SenderPosition> senders;       // ascending sender_id
  std::vector<int> failed_senders;           // ascending sender_id
  std::vector<MeasurementPosition> per_measurement;
};

inline SenderPosition locate_single(const Measurement& m, const WallEstimate& wall, LocalizationMethod method) {
  switch (method) {
    case LocalizationMethod::MapToNormal: return locate_map_to_normal(m, wall.n);
    case LocalizationMethod::ReflectionGeometry: return locate_reflection_geometry(m, wall.n);
    case LocalizationMethod::WallDirection: return locate_wall_direction(m, wall.u);
    case LocalizationMethod::ClosestLines: return locate_closest_lines(m, wall.n);
    case LocalizationMethod::ClosestLinesExtended: break;
  }
  throw Error(ErrorKind::InvalidArgument, "not a single-wall method");
}

/// Localizes every sender that has a direct signal among `ms`.
///
/// Each reflection of a sender contributes the wall estimated from its own
/// cluster. LargestCluster and NarrowestCluster localize with the single
/// reflection whose cluster wins; UnweightedAverage averages the positions
/// from all reflections; ClosestLinesExtended always combines all of them.
/// Reflections whose cluster has no estimate, or whose localization fails,
/// are skipped. A sender with nothing left is reported as failed.
inline LocalizationResult locate_all(const std::vector<Measurement>& ms,
                                     const std::vector<MeasurementCluster>& clusters,
                                     const std::vector<WallEstimate>& estimates, LocalizationMethod method,
                                     WallSelection selection) {
  std::vector<std::optional<std::size_t>> cluster_of(ms.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto i : clusters[c].measurement_indices) cluster_of.at(i) = c;

  std::vector<std::optional<CandidateWall>> wall_of_cluster(clusters.size());
  for (const auto& est : estimates) {
    const auto& cluster = clusters.at(est.source_cluster);
    wall_of_cluster[est.source_cluster] =
        CandidateWall{est.source_cluster, cluster.size(), cluster_spread(ms, cluster, est.n), est};
  }

  std::map<int, std::vector<std::size_t>> by_sender;
  for (std::size_t i = 0; i < ms.size(); ++i) by_sender[ms[i].sender_id].push_back(i);

  LocalizationResult result;
  for (const auto& [sid, indices] : by_sender) {
    std::vector<std::size_t> usable;
    std::vector<CandidateWall> candidates;
    for (const auto i : indices) {
      if (!cluster_of[i] || !wall_of_cluster[*cluster_of[i]]) continue;
      usable.push_back(i);
      candidates.push_back(*wall_of_cluster[*cluster_of[i]]);
    }

    std::optional<SenderPosition> final_position;
    if (method == LocalizationMethod::ClosestLinesExtended) {
      std::vector<WallReflection> reflections;
      for (std::size_t k = 0; k < usable.size(); ++k) reflections.push_back({ms[usable[k]].w, candidates[k].estimate.n});
      try {
        if (!reflections.empty())
          final_position = locate_closest_lines_extended(sid, ms[indices.front()].v, reflections);
      } catch (const Error&) {
      }
    } else if (!candidates.empty()) {
      const WallChoice choice = select_wall(candidates, selection);
      std::vector<std::size_t> picks;
      if (std::holds_alternative<AllWalls>(choice)) {
        for (std::size_t k = 0; k < usable.size(); ++k) picks.push_back(k);
      } else {
        picks.push_back(std::get<std::size_t>(choice));
      }
      Vec3 sum = Vec3::Zero();
      double p_sum = 0.0;
      std::size_t n_ok = 0;
      for (const auto k : picks) {
        try {
          const SenderPosition pos = locate_single(ms[usable[k]], candidates[k].estimate, method);
          result.per_measurement.push_back({usable[k], pos});
          sum += pos.position;
          p_sum += pos.p;
          ++n_ok;
        } catch (const Error&) {
        }
      }
      if (n_ok > 0) {
        const auto count = static_cast<double>(n_ok);
        final_position = SenderPosition{sid, sum / count, p_sum / count};
      }
    }
    if (final_position && final_position->position.allFinite()) {
      result.senders.push_back(*final_position);
    } else {
      result.failed_senders.push_back(sid);
    }
  }
  return result;
}

/// Exact solution from two reflections off one wall: the wall direction
/// from the pair, then each sender from the direction alone. Every pair has
/// to be tested against every other, so this does not scale to many
/// measurements with unknown wall assignment.
inline std::pair<SenderPosition, SenderPosition> ildars3d_two_measurements(const Measurement& m1,
                                                                          const Measurement& m2) {
  const UnitVec3 u = wall_direction_from_pair(m1, m2);
  return {locate_wall_direction(m1, u), locate_wall_direction(m2, u)};
}

/// `sender_id x y z method selection` per line.
inline void write_positions(std::ostream& os, std::span<const SenderPosition> positions, LocalizationMethod method,
                            WallSelection selection) {
  const auto old = os.precision(17);
  for (const auto& s : positions)
    os << s.sender_id << ' ' << s.position.x() << ' ' << s.position.y() << ' ' << s.position.z() << ' '
       << token(method) << ' ' << token(selection) << '\n';
  os.precision(old);
}

}  // namespace ildars
