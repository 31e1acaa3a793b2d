#pragma once

// Benchmark harness: enumerates algorithm combinations, runs seeded
// experiments in which every combination sees the same measurements,
// aggregates localization offsets, and writes ranking reports.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ildars/calibration.hpp"
#include "ildars/clustering.hpp"
#include "ildars/error.hpp"
#include "ildars/localization.hpp"
#include "ildars/simulation.hpp"
#include "ildars/stats.hpp"

namespace ildars {

enum class ClusteringMethod { Inversion, Gnomonic };

constexpr char token(ClusteringMethod c) { return c == ClusteringMethod::Inversion ? 'I' : 'G'; }

constexpr char token(PairSelection p) {
  switch (p) {
    case PairSelection::AllPairs: return 'A';
    case PairSelection::DisjointPairs: return 'D';
    case PairSelection::OverlappingPairs: return 'O';
  }
  return '?';
}

inline constexpr std::array kClusteringOrder{ClusteringMethod::Inversion, ClusteringMethod::Gnomonic};
inline constexpr std::array kAveragingOrder{PairSelection::AllPairs, PairSelection::DisjointPairs,
                                            PairSelection::OverlappingPairs};
inline constexpr std::array kSelectionOrder{WallSelection::LargestCluster, WallSelection::NarrowestCluster,
                                            WallSelection::UnweightedAverage};
inline constexpr std::array kLocalizationOrder{LocalizationMethod::ClosestLines,
                                               LocalizationMethod::ClosestLinesExtended,
                                               LocalizationMethod::MapToNormal, LocalizationMethod::ReflectionGeometry,
                                               LocalizationMethod::WallDirection};
/// Row order of the token membership table.
inline constexpr std::string_view kAllTokens = "IGADOLNUCEMRW";

struct ComboId {
  ClusteringMethod clustering = ClusteringMethod::Inversion;
  PairSelection averaging = PairSelection::AllPairs;
  WallSelection selection = WallSelection::LargestCluster;
  LocalizationMethod localization = LocalizationMethod::ClosestLines;

  std::string str() const { return {token(clustering), token(averaging), token(selection), token(localization)}; }
  bool has_token(char t) const {
    return token(clustering) == t || token(averaging) == t || token(selection) == t || token(localization) == t;
  }
  friend bool operator==(const ComboId&, const ComboId&) = default;
};

/// Valid combinations in canonical order. ClosestLinesExtended uses every
/// wall, so it only appears with UnweightedAverage.
///
/// `filter` is a comma- or space-separated list of single-letter tokens.
/// Within one category the tokens are alternatives; across categories they
/// must all match. "E" keeps the 6 extended combos; "I,A,N,C" keeps one.
inline std::vector<ComboId> enumerate_combos(std::string_view filter = {}) {
  std::string wanted;
  for (const char ch : filter) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) continue;
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (kAllTokens.find(up) == std::string_view::npos)
      throw Error(ErrorKind::UnknownComboToken, std::string("unknown combo token '") + ch + "'");
    wanted.push_back(up);
  }
  const auto category_ok = [&](std::string_view category, char value) {
    bool constrained = false;
    for (const char t : wanted) {
      if (category.find(t) == std::string_view::npos) continue;
      constrained = true;
      if (t == value) return true;
    }
    return !constrained;
  };
  std::vector<ComboId> out;
  for (const auto c : kClusteringOrder)
    for (const auto a : kAveragingOrder)
      for (const auto s : kSelectionOrder)
        for (const auto l : kLocalizationOrder) {
          if (l == LocalizationMethod::ClosestLinesExtended && s != WallSelection::UnweightedAverage) continue;
          const ComboId id{c, a, s, l};
          if (category_ok("IG", token(c)) && category_ok("ADO", token(a)) && category_ok("LNU", token(s)) &&
              category_ok("CEMRW", token(l)))
            out.push_back(id);
        }
  return out;
}

struct RunConfig {
  int n_experiments = 500;
  int n_senders = 20;
  double room_side = 2.0;
  ErrorConfig error{};
  double inversion_threshold = 0.3;
  std::uint64_t master_seed = 0;
  std::string combo_filter;
  unsigned threads = 0;  // 0: hardware concurrency
  bool record_measurement_offsets = false;

  void validate() const {
    if (n_experiments < 1) throw Error(ErrorKind::InvalidArgument, "experiments must be at least 1");
    if (n_senders < 1) throw Error(ErrorKind::InvalidArgument, "senders must be at least 1");
    if (!(room_side > 0.0) || !std::isfinite(room_side))
      throw Error(ErrorKind::InvalidArgument, "room side must be positive");
    if (!(inversion_threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be positive");
    error.validate();
  }
};

struct OffsetRecord {
  int experiment_id = 0;
  ComboId combo;
  int sender_id = 0;
  double offset = 0.0;
  bool failed = false;
};

struct MeasurementOffsetRecord {
  int experiment_id = 0;
  ComboId combo;
  std::size_t measurement_index = 0;
  int sender_id = 0;
  double offset = 0.0;
};

struct ExperimentResult {
  int experiment_id = 0;
  std::vector<OffsetRecord> records;
  std::vector<MeasurementOffsetRecord> measurement_records;
  /// Content hash of the measurement set each combo consumed, in combo order.
  std::vector<std::uint64_t> input_hashes;
  std::size_t inversion_clusters = 0;
  std::size_t gnomonic_clusters = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-experiment seed: mix64(master ^ mix64(experiment_id)). Stage seeds are
/// mix64(experiment_seed ^ k) with k = 1 placement, 2 errors, 3 hemispheres.
constexpr std::uint64_t experiment_seed(std::uint64_t master, int experiment_id) {
  return mix64(master ^ mix64(static_cast<std::uint64_t>(experiment_id)));
}

namespace seed_stream {
inline constexpr std::uint64_t kPlacement = 1;
inline constexpr std::uint64_t kErrors = 2;
inline constexpr std::uint64_t kHemispheres = 3;
}  // namespace seed_stream

/// FNV-1a over the bytes of every measurement field.
inline std::uint64_t hash_measurements(const std::vector<Measurement>& ms) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& m : ms) {
    feed(m.v.vec().data(), 3 * sizeof(double));
    feed(m.w.vec().data(), 3 * sizeof(double));
    feed(&m.delta, sizeof m.delta);
    feed(&m.sender_id, sizeof m.sender_id);
  }
  return h;
}

/// Everything one experiment computes before localization.
struct ExperimentInputs {
  GroundTruth truth;
  std::vector<Measurement> measurements;
};

inline ExperimentInputs make_experiment_inputs(const RunConfig& cfg, int experiment_id) {
  const std::uint64_t seed = experiment_seed(cfg.master_seed, experiment_id);
  ExperimentInputs in;
  in.truth = place_senders(make_cube_room(cfg.room_side), cfg.n_senders, mix64(seed ^ seed_stream::kPlacement));
  ErrorConfig err = cfg.error;
  err.rng_seed = mix64(seed ^ seed_stream::kErrors);
  in.measurements = apply_errors(generate_measurements(in.truth), err);
  return in;
}

/// Runs the given combos on one freshly generated measurement set. Clustering
/// and calibration are shared by all combos that use the same algorithms.
inline ExperimentResult run_experiment(const RunConfig& cfg, int experiment_id, const std::vector<ComboId>& combos) {
  const ExperimentInputs in = make_experiment_inputs(cfg, experiment_id);
  const auto& ms = in.measurements;
  const std::uint64_t seed = experiment_seed(cfg.master_seed, experiment_id);

  ExperimentResult result;
  result.experiment_id = experiment_id;

  std::map<ClusteringMethod, std::vector<MeasurementCluster>> clusters;
  std::map<std::pair<ClusteringMethod, PairSelection>, std::vector<WallEstimate>> walls;
  for (const auto& combo : combos) {
    if (!clusters.contains(combo.clustering)) {
      clusters[combo.clustering] = combo.clustering == ClusteringMethod::Inversion
                                       ? cluster_by_inversion(ms, cfg.inversion_threshold)
                                       : cluster_by_gnomonic(ms, mix64(seed ^ seed_stream::kHemispheres));
    }
    const auto key = std::pair{combo.clustering, combo.averaging};
    if (!walls.contains(key)) walls[key] = calibrate(ms, clusters[combo.clustering], combo.averaging);
  }
  if (clusters.contains(ClusteringMethod::Inversion))
    result.inversion_clusters = clusters[ClusteringMethod::Inversion].size();
  if (clusters.contains(ClusteringMethod::Gnomonic))
    result.gnomonic_clusters = clusters[ClusteringMethod::Gnomonic].size();

  for (const auto& combo : combos) {
    result.input_hashes.push_back(hash_measurements(ms));
    const auto loc = locate_all(ms, clusters[combo.clustering], walls[{combo.clustering, combo.averaging}],
                                combo.localization, combo.selection);
    std::vector<std::optional<Vec3>> found(static_cast<std::size_t>(cfg.n_senders));
    for (const auto& s : loc.senders) found.at(static_cast<std::size_t>(s.sender_id)) = s.position;
    for (int sid = 0; sid < cfg.n_senders; ++sid) {
      const auto& pos = found[static_cast<std::size_t>(sid)];
      OffsetRecord rec{experiment_id, combo, sid, 0.0, !pos.has_value()};
      if (pos) rec.offset = (*pos - in.truth.sender(sid)).norm();
      result.records.push_back(rec);
    }
    if (cfg.record_measurement_offsets) {
      for (const auto& mp : loc.per_measurement) {
        const int sid = mp.position.sender_id;
        result.measurement_records.push_back(
            {experiment_id, combo, mp.measurement_index, sid, (mp.position.position - in.truth.sender(sid)).norm()});
      }
    }
  }
  return result;
}

/// All experiments, in experiment order regardless of thread scheduling.
inline std::vector<ExperimentResult> run_all(const RunConfig& cfg, const std::vector<ComboId>& combos) {
  cfg.validate();
  std::vector<ExperimentResult> results(static_cast<std::size_t>(cfg.n_experiments));
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.n_experiments));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (int e = next++; e < cfg.n_experiments; e = next++) {
      try {
        results[static_cast<std::size_t>(e)] = run_experiment(cfg, e, combos);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct ComboStats {
  ComboId combo;
  Summary summary;
  std::size_t n_failed = 0;
};

/// Pools non-failed offsets per combo across experiments. Output follows the
/// order of `combos`.
inline std::vector<ComboStats> aggregate(const std::vector<OffsetRecord>& records, const std::vector<ComboId>& combos) {
  std::map<std::string, std::vector<double>> offsets;
  std::map<std::string, std::size_t> failed;
  for (const auto& r : records) {
    const auto key = r.combo.str();
    if (r.failed) {
      ++failed[key];
    } else {
      offsets[key].push_back(r.offset);
    }
  }
  std::vector<ComboStats> out;
  out.reserve(combos.size());
  for (const auto& combo : combos) {
    const auto key = combo.str();
    out.push_back({combo, summarize(offsets.contains(key) ? offsets[key] : std::vector<double>{}),
                   failed.contains(key) ? failed[key] : 0});
  }
  return out;
}

inline std::vector<OffsetRecord> collect_records(const std::vector<ExperimentResult>& results) {
  std::vector<OffsetRecord> out;
  for (const auto& r : results) out.insert(out.end(), r.records.begin(), r.records.end());
  return out;
}

enum class SortKey { Mean, Median, Std };

inline std::string_view to_string(SortKey k) {
  switch (k) {
    case SortKey::Mean: return "mean";
    case SortKey::Median: return "median";
    case SortKey::Std: return "std";
  }
  return "?";
}

inline double key_value(const ComboStats& s, SortKey k) {
  switch (k) {
    case SortKey::Mean: return s.summary.mean;
    case SortKey::Median: return s.summary.median;
    case SortKey::Std: return s.summary.std;
  }
  return 0.0;
}

/// Ascending by key, stable; combos without samples (NaN) go last.
inline std::vector<ComboStats> rank(std::vector<ComboStats> stats, SortKey key) {
  std::stable_sort(stats.begin(), stats.end(), [key](const ComboStats& a, const ComboStats& b) {
    const double x = key_value(a, key);
    const double y = key_value(b, key);
    if (std::isnan(x) || std::isnan(y)) return !std::isnan(x) && std::isnan(y);
    return x < y;
  });
  return stats;
}

namespace detail {

inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline nlohmann::ordered_json json_double(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return os;
}

inline void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace detail

inline constexpr std::string_view kRankingHeader =
    "rank,combo,clustering,averaging,selection,localization,mean,median,std,q1,q3,n,failed";

inline void write_ranking_csv(std::ostream& os, const std::vector<ComboStats>& ranked) {
  os << kRankingHeader << '\n';
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& s = ranked[i];
    const auto& c = s.combo;
    os << i + 1 << ',' << c.str() << ',' << token(c.clustering) << ',' << token(c.averaging) << ','
       << token(c.selection) << ',' << token(c.localization) << ',' << detail::fmt_double(s.summary.mean) << ','
       << detail::fmt_double(s.summary.median) << ',' << detail::fmt_double(s.summary.std) << ','
       << detail::fmt_double(s.summary.q1) << ',' << detail::fmt_double(s.summary.q3) << ',' << s.summary.n << ','
       << s.n_failed << '\n';
  }
}

/// For each token (rows, kAllTokens order) and rank position (columns),
/// 1 when the combo at that rank uses the token.
inline std::vector<std::vector<int>> token_table(const std::vector<ComboStats>& ranked) {
  std::vector<std::vector<int>> table;
  for (const char t : kAllTokens) {
    std::vector<int> row;
    for (const auto& s : ranked) row.push_back(s.combo.has_token(t) ? 1 : 0);
    table.push_back(std::move(row));
  }
  return table;
}

inline nlohmann::ordered_json config_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["experiments"] = cfg.n_experiments;
  j["senders"] = cfg.n_senders;
  j["room_side"] = cfg.room_side;
  j["kappa"] = std::isinf(cfg.error.kappa) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(cfg.error.kappa);
  j["delta_sigma"] = cfg.error.delta_sigma;
  j["misassign_rate"] = cfg.error.misassign_rate;
  j["threshold"] = cfg.inversion_threshold;
  j["seed"] = cfg.master_seed;
  j["combos"] = cfg.combo_filter;
  return j;
}

inline nlohmann::ordered_json summary_json(const RunConfig& cfg, const std::vector<ComboStats>& stats) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["config"] = config_json(cfg);
  ordered_json rankings;
  ordered_json tables;
  tables["tokens"] = std::string(kAllTokens);
  for (const auto key : {SortKey::Mean, SortKey::Median, SortKey::Std}) {
    const auto ranked = rank(stats, key);
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const auto& s = ranked[i];
      ordered_json e;
      e["rank"] = i + 1;
      e["combo"] = s.combo.str();
      e["mean"] = detail::json_double(s.summary.mean);
      e["median"] = detail::json_double(s.summary.median);
      e["std"] = detail::json_double(s.summary.std);
      e["q1"] = detail::json_double(s.summary.q1);
      e["q3"] = detail::json_double(s.summary.q3);
      e["iqr"] = detail::json_double(s.summary.iqr());
      e["whisker_low"] = detail::json_double(s.summary.whisker_low());
      e["whisker_high"] = detail::json_double(s.summary.whisker_high());
      e["n"] = s.summary.n;
      e["failed"] = s.n_failed;
      list.push_back(std::move(e));
    }
    rankings[std::string(to_string(key))] = std::move(list);
    tables[std::string(to_string(key))] = token_table(ranked);
  }
  root["rankings"] = std::move(rankings);
  root["token_table"] = std::move(tables);
  return root;
}

/// Writes ranking_{mean,median,std}.csv and summary.json into `dir`, plus
/// offsets.csv (and measurement_offsets.csv when recorded) if `dump_offsets`.
inline void rank_and_report(const RunConfig& cfg, const std::vector<ComboStats>& stats,
                            const std::filesystem::path& dir, const std::vector<ExperimentResult>* dump_offsets) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto key : {SortKey::Mean, SortKey::Median, SortKey::Std}) {
    const auto path = dir / ("ranking_" + std::string(to_string(key)) + ".csv");
    auto os = detail::open_for_write(path);
    write_ranking_csv(os, rank(stats, key));
    detail::finish(os, path);
  }
  {
    const auto path = dir / "summary.json";
    auto os = detail::open_for_write(path);
    os << summary_json(cfg, stats).dump(2) << '\n';
    detail::finish(os, path);
  }
  if (dump_offsets) {
    const auto path = dir / "offsets.csv";
    auto os = detail::open_for_write(path);
    os << "experiment,combo,sender,offset,failed\n";
    for (const auto& r : *dump_offsets)
      for (const auto& rec : r.records)
        os << rec.experiment_id << ',' << rec.combo.str() << ',' << rec.sender_id << ','
           << (rec.failed ? "nan" : detail::fmt_double(rec.offset)) << ',' << (rec.failed ? 1 : 0) << '\n';
    detail::finish(os, path);
    if (cfg.record_measurement_offsets) {
      const auto mpath = dir / "measurement_offsets.csv";
      auto ms = detail::open_for_write(mpath);
      ms << "experiment,combo,measurement,sender,offset\n";
      for (const auto& r : *dump_offsets)
        for (const auto& rec : r.measurement_records)
          ms << rec.experiment_id << ',' << rec.combo.str() << ',' << rec.measurement_index << ',' << rec.sender_id
             << ',' << detail::fmt_double(rec.offset) << '\n';
      detail::finish(ms, mpath);
    }
  }
}

}  // namespace ildars
