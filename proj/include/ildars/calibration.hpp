#pragma once

// Self-calibration: per measurement cluster, the wall direction from averaged
// nested cross products of measurement pairs, then the wall distance from
// averaged per-measurement sender reconstructions.

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ildars/clustering.hpp"
#include "ildars/error.hpp"
#include "ildars/geometry.hpp"
#include "ildars/simulation.hpp"

namespace ildars {

enum class PairSelection { AllPairs, DisjointPairs, OverlappingPairs };

struct WallEstimate {
  UnitVec3 u;
  double distance = 0.0;
  Vec3 n = Vec3::Zero();  // distance * u
  std::size_t source_cluster = 0;
};

/// Direction of the wall shared by two reflections. The sign is the one
/// closer to both reflected directions, i.e. minimizing
/// |x.w1 - 1| + |x.w2 - 1|.
inline UnitVec3 wall_direction_from_pair(const Measurement& m1, const Measurement& m2) {
  const Vec3 c = m1.v.vec().cross(m1.w.vec()).cross(m2.v.vec().cross(m2.w.vec()));
  if (c.norm() <= tol::kDegenerate) throw Error(ErrorKind::CoplanarPair, "nested cross product vanishes");
  const UnitVec3 u = UnitVec3::normalize(c);
  const auto score = [&](const Vec3& x) { return std::abs(x.dot(m1.w.vec()) - 1.0) + std::abs(x.dot(m2.w.vec()) - 1.0); };
  return score(u) <= score(-u.vec()) ? u : -u;
}

/// Index pairs into a cluster of size k for the given selection.
inline std::vector<std::pair<std::size_t, std::size_t>> select_pairs(std::size_t k, PairSelection selection) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  switch (selection) {
    case PairSelection::AllPairs:
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
      break;
    case PairSelection::DisjointPairs:
      for (std::size_t i = 0; i + 1 < k; i += 2) pairs.emplace_back(i, i + 1);
      break;
    case PairSelection::OverlappingPairs:
      for (std::size_t i = 0; i + 1 < k; ++i) pairs.emplace_back(i, i + 1);
      break;
  }
  return pairs;
}

inline UnitVec3 wall_direction_from_cluster(const std::vector<Measurement>& ms, const MeasurementCluster& cluster,
                                            PairSelection selection) {
  const auto& idx = cluster.measurement_indices;
  if (idx.size() < 2) throw Error(ErrorKind::InsufficientMeasurements, "wall direction needs two measurements");
  Vec3 sum = Vec3::Zero();
  std::size_t used = 0;
  for (const auto& [i, j] : select_pairs(idx.size(), selection)) {
    try {
      sum += wall_direction_from_pair(ms.at(idx[i]), ms.at(idx[j])).vec();
      ++used;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::CoplanarPair) throw;
    }
  }
  if (used == 0 || sum.norm() <= tol::kZeroNorm)
    throw Error(ErrorKind::AllPairsDegenerate, "no usable measurement pair in cluster");
  return UnitVec3::normalize(sum);
}

/// Sender distance along v from the wall direction alone:
/// p = delta (w.b) / ((v - w).b) with b = (u x v) x u. Returns nullopt when
/// the denominator vanishes.
inline std::optional<double> sender_distance_from_direction(const Measurement& m, const UnitVec3& u) {
  const Vec3 b = u.vec().cross(m.v.vec()).cross(u.vec());
  const double denom = (m.v.vec() - m.w.vec()).dot(b);
  if (b.norm() <= tol::kDegenerate || std::abs(denom) <= tol::kDegenerate) return std::nullopt;
  return m.delta * m.w.dot(b) / denom;
}

/// Mean over cluster members of the sender/mirrored-sender midpoint
/// projected on u. Members with degenerate geometry or p <= 0 are skipped.
inline double wall_distance(const std::vector<Measurement>& ms, const MeasurementCluster& cluster,
                            const UnitVec3& u) {
  if (cluster.measurement_indices.empty())
    throw Error(ErrorKind::InsufficientMeasurements, "wall distance needs a measurement");
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto i : cluster.measurement_indices) {
    const Measurement& m = ms.at(i);
    const auto p = sender_distance_from_direction(m, u);
    if (!p || !(*p > 0.0)) continue;
    const Vec3 sender = *p * m.v.vec();
    const Vec3 mirrored = (*p + m.delta) * m.w.vec();
    sum += (0.5 * (sender + mirrored)).dot(u.vec());
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::AllMeasurementsDegenerate, "no measurement yields a wall distance");
  return sum / static_cast<double>(used);
}

struct CalibrationDiagnostic {
  std::size_t cluster = 0;
  ErrorKind kind = ErrorKind::DegenerateInput;
  std::string message;
};

/// One estimate per cluster that survives both steps; failing clusters are
/// reported through `diagnostics` when given.
inline std::vector<WallEstimate> calibrate(const std::vector<Measurement>& ms,
                                           const std::vector<MeasurementCluster>& clusters, PairSelection selection,
                                           std::vector<CalibrationDiagnostic>* diagnostics = nullptr) {
  std::vector<WallEstimate> out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    try {
      WallEstimate est;
      est.u = wall_direction_from_cluster(ms, clusters[c], selection);
      est.distance = wall_distance(ms, clusters[c], est.u);
      if (!(est.distance > 0.0)) throw Error(ErrorKind::AllMeasurementsDegenerate, "wall distance is not positive");
      est.n = est.distance * est.u.vec();
      est.source_cluster = c;
      out.push_back(est);
    } catch (const Error& e) {
      if (diagnostics) diagnostics->push_back({c, e.kind(), e.what()});
    }
  }
  return out;
}

/// `cluster_id u.x u.y u.z distance` per line.
inline void write_wall_estimates(std::ostream& os, std::span<const WallEstimate> walls) {
  const auto old = os.precision(17);
  for (const auto& w : walls)
    os << w.source_cluster << ' ' << w.u[0] << ' ' << w.u[1] << ' ' << w.u[2] << ' ' << w.distance << '\n';
  os.precision(old);
}

}  // namespace ildars
