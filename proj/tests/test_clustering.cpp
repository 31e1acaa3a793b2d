#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "ildars/clustering.hpp"
#include "oracles.hpp"

using namespace ildars;

namespace {

Measurement make(const Vec3& v, const Vec3& w, double delta, int sender = 0) {
  Measurement m;
  m.v = UnitVec3::normalize(v);
  m.w = UnitVec3::normalize(w);
  m.delta = delta;
  m.sender_id = sender;
  return m;
}

// Every index appears exactly once.
void expect_partition(const std::vector<MeasurementCluster>& clusters, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& c : clusters) {
    EXPECT_GT(c.size(), 0u);
    for (const auto i : c.measurement_indices) ++seen.at(i);
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << "index " << i;
}

std::set<int> walls_of(const MeasurementCluster& c, const std::vector<Measurement>& ms) {
  std::set<int> out;
  for (const auto i : c.measurement_indices) out.insert(*ms[i].true_wall_id);
  return out;
}

// Components of an explicit adjacency relation, as sorted index sets.
std::set<std::vector<std::size_t>> components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : edges) {
      const auto m = std::min(label[a], label[b]);
      if (label[a] != m || label[b] != m) {
        label[a] = label[b] = m;
        changed = true;
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(i);
  std::set<std::vector<std::size_t>> out;
  for (auto& [k, g] : groups) out.insert(g);
  return out;
}

std::set<std::vector<std::size_t>> as_sets(const std::vector<MeasurementCluster>& clusters) {
  std::set<std::vector<std::size_t>> out;
  for (const auto& c : clusters) {
    auto idx = c.measurement_indices;
    std::sort(idx.begin(), idx.end());
    out.insert(idx);
  }
  return out;
}

}  // namespace

TEST(CircularSegment, PerpendicularExample) {
  const auto m = make({1, 0, 0}, {0, 1, 0}, 1.0);
  const auto cs = circular_segment(m);
  EXPECT_LT((cs.endpoint_near - Vec3(0, 0.5, 0)).norm(), 1e-15);
  EXPECT_LT((cs.endpoint_far - Vec3(-0.5, 0.5, 0)).norm(), 1e-15);
  EXPECT_LT((cs.at(0.0) - cs.endpoint_near).norm(), 1e-15);
  EXPECT_LT((cs.at(1e9) - cs.endpoint_far).norm(), 1e-8);

  std::vector<Vec3> pts{invert_point(cs.endpoint_near), invert_point(cs.endpoint_far)};
  for (const double p : {0.1, 1.0, 10.0, 100.0}) pts.push_back(invert_point(cs.at(p)));
  EXPECT_LT(oracle::collinearity_residual(pts), 1e-9);
}

TEST(CircularSegment, ArcPointIsPerpendicularFootOfBisector) {
  // Independent construction: the wall for sender distance p is the
  // perpendicular bisector of s = p v and s' = (p + delta) w.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int i = 0; i < 200; ++i) {
    const auto m = make({g(rng), g(rng), g(rng)}, {g(rng), g(rng), g(rng)}, u(rng));
    const auto cs = circular_segment(m);
    const double p = u(rng);
    const Vec3 s = p * m.v.vec();
    const Vec3 sm = (p + m.delta) * m.w.vec();
    const Vec3 n_hat = (sm - s).normalized();
    const Vec3 expected = (0.5 * (s + sm)).dot(n_hat) * n_hat;
    EXPECT_LT((cs.at(p) - expected).norm(), 1e-12);
  }
}

TEST(CircularSegment, CollinearAfterInversionForSimulatedMeasurements) {
  const auto scene = oracle::zero_error_scene(2);
  for (std::size_t i = 0; i < scene.measurements.size(); ++i) {
    const auto cs = circular_segment(scene.measurements[i], i);
    const auto inv = invert_segment(cs);
    std::vector<Vec3> pts{inv.a, inv.b};
    for (int k = 0; k < 10; ++k) pts.push_back(invert_point(cs.at(0.05 * std::pow(2.0, k))));
    EXPECT_LT(oracle::collinearity_residual(pts), 1e-9);
  }
}

TEST(CircularSegment, ContainsTrueWallNormal) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto scene = oracle::zero_error_scene(seed);
    for (const auto& m : scene.measurements) {
      const auto& wall = scene.truth.room.walls.at(static_cast<std::size_t>(*m.true_wall_id));
      const double p = scene.truth.sender(m.sender_id).norm();
      EXPECT_LT((circular_segment(m).at(p) - wall.normal_vector()).norm(), 1e-9);
    }
  }
}

TEST(CircularSegment, DeltaScaling) {
  const auto a = circular_segment(make({0.2, 0.9, -0.1}, {-0.4, 0.3, 0.8}, 0.7));
  const auto b = circular_segment(make({0.2, 0.9, -0.1}, {-0.4, 0.3, 0.8}, 1.4));
  EXPECT_LT((b.endpoint_near - 2.0 * a.endpoint_near).norm(), 1e-14);
  EXPECT_LT((b.endpoint_far - 2.0 * a.endpoint_far).norm(), 1e-14);
}

TEST(CircularSegment, RejectsDegenerate) {
  try {
    circular_segment(make({1, 0, 0}, {1, 0, 0}, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMeasurement);
  }
}

TEST(InvertSegment, ExampleAndAgreement) {
  const auto inv = invert_segment(circular_segment(make({1, 0, 0}, {0, 1, 0}, 1.0)));
  EXPECT_LT((inv.a - Vec3(0, 2, 0)).norm(), 1e-15);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int i = 0; i < 100; ++i) {
    const auto cs = circular_segment(make({g(rng), g(rng), g(rng)}, {g(rng), g(rng), g(rng)}, u(rng)));
    const auto seg = invert_segment(cs);
    EXPECT_LT((seg.a - invert_point(cs.endpoint_near)).norm(), 1e-12 * std::max(1.0, seg.a.norm()));
    EXPECT_LT((seg.b - invert_point(cs.endpoint_far)).norm(), 1e-12 * std::max(1.0, seg.b.norm()));
  }
}

TEST(InvertSegment, SameWallSegmentsShareInvertedNormal) {
  const auto scene = oracle::zero_error_scene(4);
  for (const auto& m : scene.measurements) {
    const auto& wall = scene.truth.room.walls.at(static_cast<std::size_t>(*m.true_wall_id));
    const auto seg = invert_segment(circular_segment(m));
    EXPECT_LT(point_segment_distance(invert_point(wall.normal_vector()), seg.a, seg.b), 1e-9);
  }
}

TEST(InversionClustering, ZeroErrorCubeGivesSixWalls) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = oracle::zero_error_scene(seed);
    InversionStats stats;
    const auto clusters = cluster_by_inversion(scene.measurements, 0.3, &stats);
    ASSERT_EQ(clusters.size(), 6u) << "seed " << seed;
    expect_partition(clusters, scene.measurements.size());
    for (const auto& c : clusters) {
      EXPECT_EQ(c.size(), 20u);
      EXPECT_EQ(walls_of(c, scene.measurements).size(), 1u);
    }
    EXPECT_LE(stats.distance_evaluations, scene.measurements.size() * clusters.size());
  }
}

TEST(InversionClustering, SingleAndEmpty) {
  const auto one = cluster_by_inversion({make({1, 0, 0}, {0, 1, 0}, 1.0)}, 0.3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].measurement_indices, std::vector<std::size_t>{0});
  EXPECT_TRUE(cluster_by_inversion({}, 0.3).empty());
}

TEST(InversionClustering, ZeroThresholdKeepsNoisyApart) {
  const auto scene = oracle::zero_error_scene(5);
  ErrorConfig cfg;
  cfg.rng_seed = 1;
  const auto ms = apply_errors(scene.measurements, cfg);
  const auto clusters = cluster_by_inversion(ms, 0.0);
  expect_partition(clusters, ms.size());
  EXPECT_GE(clusters.size(), ms.size() - 2);
}

TEST(InversionClustering, DegenerateMeasurementIsolated) {
  std::vector<Measurement> ms{make({1, 0, 0}, {0, 1, 0}, 1.0), make({1, 0, 0}, {1, 0, 0}, 1.0),
                              make({1, 0, 0}, {0, 1, 0}, 1.0)};
  const auto clusters = cluster_by_inversion(ms, 0.3);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0].measurement_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(clusters[1].measurement_indices, std::vector<std::size_t>{1});
}

TEST(InversionClustering, CenterRules) {
  const InvertedSegment s1{Vec3(0, 0, 0), Vec3(2, 0, 0), 0};
  const InvertedSegment s2{Vec3(1, -1, 1), Vec3(1, 1, 1), 1};
  LineCluster c;
  c.add(s1);
  EXPECT_FALSE(c.center.has_value());
  EXPECT_DOUBLE_EQ(c.distance_to(s2), 1.0);
  c.add(s2);
  ASSERT_TRUE(c.center.has_value());
  EXPECT_LT((*c.center - Vec3(1, 0, 0.5)).norm(), 1e-15);
  // Third segment passing at distance 0.5 from the center, closest point (1, 0, 1).
  const InvertedSegment s3{Vec3(0, 0, 1), Vec3(2, 0, 1), 2};
  EXPECT_DOUBLE_EQ(c.distance_to(s3), 0.5);
  c.add(s3);
  EXPECT_LT((*c.center - Vec3(1, 0, 2.0 / 3.0)).norm(), 1e-15);
}

TEST(LatLon, Examples) {
  const auto pole = project_to_sphere_latlon({0, 0, 1});
  EXPECT_DOUBLE_EQ(pole.lat, std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(pole.lon, 0.0);
  const auto px = project_to_sphere_latlon({1, 0, 0});
  EXPECT_DOUBLE_EQ(px.lat, 0.0);
  EXPECT_DOUBLE_EQ(px.lon, 0.0);
  const auto nx = project_to_sphere_latlon({-1, 0, 0});
  EXPECT_DOUBLE_EQ(nx.lat, 0.0);
  EXPECT_DOUBLE_EQ(nx.lon, std::numbers::pi);
  EXPECT_DOUBLE_EQ(project_to_sphere_latlon({0, 3, 0}).lon, std::numbers::pi / 2);
  EXPECT_THROW(project_to_sphere_latlon(Vec3::Zero()), Error);
}

TEST(Gnomonic, Examples) {
  const Vec2 origin = gnomonic_project({0.3, -1.1}, {0.3, -1.1});
  EXPECT_LT(origin.norm(), 1e-15);
  const Vec2 q = gnomonic_project({0.0, std::numbers::pi / 4}, {0.0, 0.0});
  EXPECT_NEAR(q.x(), 1.0, 1e-15);
  EXPECT_NEAR(q.y(), 0.0, 1e-15);
  try {
    gnomonic_project({0.0, std::numbers::pi / 2}, {0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutsideHemisphere);
  }
}

TEST(Gnomonic, MatchesTangentPlaneProjection) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  while (checked < 500) {
    const Vec3 c = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 p = Vec3(g(rng), g(rng), g(rng)).normalized();
    if (c.dot(p) < 0.1) continue;
    const auto cl = project_to_sphere_latlon(c);
    const Vec2 got = gnomonic_project(project_to_sphere_latlon(p), cl);
    const Vec2 want = oracle::tangent_plane_projection(p, cl.lat, cl.lon);
    EXPECT_LT((got - want).norm(), 1e-9 * std::max(1.0, want.norm()));
    ++checked;
  }
}

TEST(Gnomonic, GreatCirclesBecomeLines) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> t(0.0, 2.0 * std::numbers::pi);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 c = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 e1 = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 e2 = e1.cross(Vec3(g(rng), g(rng), g(rng))).normalized();
    if ((c - c.dot(e1.cross(e2)) * e1.cross(e2)).norm() < 0.5) continue;  // circle barely enters the hemisphere
    const auto cl = project_to_sphere_latlon(c);
    std::vector<Vec3> pts;
    while (pts.size() < 3) {
      const double a = t(rng);
      const Vec3 p = std::cos(a) * e1 + std::sin(a) * e2;
      if (p.dot(c) < 0.2) continue;
      const Vec2 q = gnomonic_project(project_to_sphere_latlon(p), cl);
      pts.emplace_back(q.x(), q.y(), 0.0);
    }
    EXPECT_LT(oracle::collinearity_residual(pts), 1e-9);
  }
}

TEST(Icosahedron, PairwiseAngles) {
  const double nearest = std::atan(2.0);  // 63.435 degrees
  for (const std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto c = hemisphere_centers(seed);
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_NEAR(c[i].norm(), 1.0, 1e-12);
      int neighbours = 0;
      double smallest = 10.0;
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (i == j) continue;
        const double a = angle_between(c[i], c[j]);
        smallest = std::min(smallest, a);
        if (std::abs(a - nearest) < 1e-9) ++neighbours;
      }
      EXPECT_NEAR(smallest, nearest, 1e-9);
      EXPECT_EQ(neighbours, 5);
      EXPECT_NEAR(nearest * 180.0 / std::numbers::pi, 63.435, 1e-3);
    }
  }
  const auto a = hemisphere_centers(1);
  const auto b = hemisphere_centers(2);
  EXPECT_NE(a[0], b[0]);
}

TEST(GnomonicClustering, DeterministicPartition) {
  const auto scene = oracle::zero_error_scene(8);
  ErrorConfig cfg;
  cfg.rng_seed = 2;
  const auto ms = apply_errors(scene.measurements, cfg);
  const auto a = cluster_by_gnomonic(ms, 17);
  const auto b = cluster_by_gnomonic(ms, 17);
  expect_partition(a, ms.size());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].measurement_indices, b[i].measurement_indices);
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_LT(a[i - 1].measurement_indices.front(), a[i].measurement_indices.front());
}

TEST(GnomonicClustering, ZeroErrorKeepsEachWallTogether) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = oracle::zero_error_scene(seed);
    const auto clusters = cluster_by_gnomonic(scene.measurements, seed);
    expect_partition(clusters, scene.measurements.size());
    std::map<int, std::size_t> home;
    for (std::size_t c = 0; c < clusters.size(); ++c)
      for (const auto i : clusters[c].measurement_indices) {
        const int wall = *scene.measurements[i].true_wall_id;
        const auto [it, fresh] = home.emplace(wall, c);
        EXPECT_EQ(it->second, c) << "wall " << wall << " split, seed " << seed;
      }
  }
}

TEST(GnomonicClustering, MatchesSphericalArcCrossingGraph) {
  // Two arcs can cross without any hemisphere containing both, and such
  // crossings are invisible to the projection. So: every projected hit is a
  // real crossing, every real crossing with a shared hemisphere is a hit, and
  // the clusters refine the components of the full crossing graph.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto scene = oracle::zero_error_scene(seed + 100);
    ErrorConfig cfg;
    cfg.rng_seed = seed;
    const auto ms = apply_errors(scene.measurements, cfg);
    const auto centers = hemisphere_centers(seed);
    std::vector<std::pair<Vec3, Vec3>> arcs;
    std::vector<std::set<std::size_t>> covering(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
      // Endpoints from the closed forms, normalized onto the sphere.
      const Vec3 w = ms[i].w.vec();
      const Vec3 v = ms[i].v.vec();
      arcs.emplace_back(w, (w - v).normalized());
      for (std::size_t h = 0; h < centers.size(); ++h)
        if (centers[h].dot(arcs[i].first) > 1e-9 && centers[h].dot(arcs[i].second) > 1e-9) covering[i].insert(h);
    }
    const auto clusters = cluster_by_gnomonic(ms, seed);
    std::vector<std::size_t> cluster_of(ms.size());
    for (std::size_t c = 0; c < clusters.size(); ++c)
      for (const auto i : clusters[c].measurement_indices) cluster_of[i] = c;

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::pair<std::size_t, std::size_t>> visible;
    for (std::size_t i = 0; i < arcs.size(); ++i)
      for (std::size_t j = i + 1; j < arcs.size(); ++j) {
        if (!oracle::arcs_cross(arcs[i].first, arcs[i].second, arcs[j].first, arcs[j].second)) continue;
        edges.emplace_back(i, j);
        const bool shared = std::any_of(covering[i].begin(), covering[i].end(),
                                        [&](std::size_t h) { return covering[j].contains(h); });
        if (shared) visible.emplace_back(i, j);
      }
    for (const auto& [i, j] : visible) EXPECT_EQ(cluster_of[i], cluster_of[j]) << i << "," << j << " seed " << seed;
    EXPECT_EQ(as_sets(clusters), components(ms.size(), visible)) << "seed " << seed;
    const auto full = components(ms.size(), edges);
    for (const auto& c : as_sets(clusters))
      EXPECT_TRUE(std::any_of(full.begin(), full.end(), [&](const auto& f) {
        return std::includes(f.begin(), f.end(), c.begin(), c.end());
      }));
  }
}

TEST(WriteClusters, Format) {
  std::vector<MeasurementCluster> clusters{{{0, 2, 5}, std::nullopt}, {{1}, std::nullopt}};
  std::ostringstream os;
  write_clusters(os, clusters);
  EXPECT_EQ(os.str(), "0: 0,2,5\n1: 1\n");
}
