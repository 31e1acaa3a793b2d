#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "ildars/ildars.hpp"

namespace {

using namespace ildars;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  return os;
}

// Writes every intermediate artifact of one experiment in the line formats
// of the library.
void write_audit(const RunConfig& cfg, int experiment_id, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto in = make_experiment_inputs(cfg, experiment_id);
  const auto& ms = in.measurements;
  {
    auto os = open_out(dir / "measurements.txt");
    write_measurements(os, ms);
  }
  const std::uint64_t seed = experiment_seed(cfg.master_seed, experiment_id);
  for (const auto clustering : kClusteringOrder) {
    const auto clusters = clustering == ClusteringMethod::Inversion
                              ? cluster_by_inversion(ms, cfg.inversion_threshold)
                              : cluster_by_gnomonic(ms, mix64(seed ^ seed_stream::kHemispheres));
    {
      auto os = open_out(dir / (std::string("clusters_") + token(clustering) + ".txt"));
      write_clusters(os, clusters);
    }
    for (const auto averaging : kAveragingOrder) {
      const auto walls = calibrate(ms, clusters, averaging);
      {
        auto os = open_out(dir / (std::string("walls_") + token(clustering) + token(averaging) + ".txt"));
        write_wall_estimates(os, walls);
      }
      auto os = open_out(dir / (std::string("positions_") + token(clustering) + token(averaging) + ".txt"));
      for (const auto selection : kSelectionOrder)
        for (const auto method : kLocalizationOrder) {
          if (method == LocalizationMethod::ClosestLinesExtended && selection != WallSelection::UnweightedAverage)
            continue;
          const auto loc = locate_all(ms, clusters, walls, method, selection);
          write_positions(os, loc.senders, method, selection);
        }
    }
  }
  auto os = open_out(dir / "senders.txt");
  os.precision(17);
  for (std::size_t i = 0; i < in.truth.sender_positions.size(); ++i) {
    const auto& s = in.truth.sender_positions[i];
    os << i << ' ' << s.x() << ' ' << s.y() << ' ' << s.z() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and benchmark of direct/reflected signal localization algorithms"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string out_dir = "ildars_out";
  bool dump_offsets = false;
  bool zero_error = false;
  int audit_experiment = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--senders", cfg.n_senders, "Senders per experiment")->check(CLI::PositiveNumber);
    sub->add_option("--room-side", cfg.room_side, "Cube side length in meters")->check(CLI::PositiveNumber);
    sub->add_option("--kappa", cfg.error.kappa, "Von Mises concentration of angular noise")
        ->check(CLI::PositiveNumber);
    sub->add_option("--delta-sigma", cfg.error.delta_sigma, "Std. dev. of path-difference noise (m)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--misassign-rate", cfg.error.misassign_rate, "Fraction of reassigned reflections")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--threshold", cfg.inversion_threshold, "Inversion clustering threshold")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.master_seed, "Master seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--zero-error", zero_error, "Disable all measurement errors");
  };

  auto* run = app.add_subcommand("run", "Run experiments and write ranking reports");
  add_common(run);
  run->add_option("--experiments", cfg.n_experiments, "Number of experiments")->check(CLI::PositiveNumber);
  run->add_option("--combos", cfg.combo_filter, "Combo filter, e.g. \"I,A\" or \"E\"");
  run->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  run->add_flag("--dump-offsets", dump_offsets, "Also write offsets.csv and measurement_offsets.csv");

  auto* combos = app.add_subcommand("combos", "List the algorithm combinations");
  std::string list_filter;
  combos->add_option("--combos", list_filter, "Combo filter");

  auto* audit = app.add_subcommand("audit", "Dump measurements, clusters, walls and positions of one experiment");
  add_common(audit);
  audit->add_option("--experiment", audit_experiment, "Experiment id")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (zero_error) {
      cfg.error.kappa = std::numeric_limits<double>::infinity();
      cfg.error.delta_sigma = 0.0;
      cfg.error.misassign_rate = 0.0;
    }
    if (combos->parsed()) {
      for (const auto& c : enumerate_combos(list_filter)) std::cout << c.str() << '\n';
      return 0;
    }
    if (audit->parsed()) {
      cfg.validate();
      write_audit(cfg, audit_experiment, out_dir);
      std::cout << "audit written to " << out_dir << '\n';
      return 0;
    }
    const auto selected = enumerate_combos(cfg.combo_filter);
    cfg.record_measurement_offsets = dump_offsets;
    const auto results = run_all(cfg, selected);
    const auto stats = aggregate(collect_records(results), selected);
    rank_and_report(cfg, stats, out_dir, dump_offsets ? &results : nullptr);
    const auto best = rank(stats, SortKey::Median);
    std::cout << "ran " << cfg.n_experiments << " experiments x " << selected.size() << " combos; reports in "
              << out_dir << '\n';
    for (std::size_t i = 0; i < std::min<std::size_t>(5, best.size()); ++i)
      std::cout << "  #" << i + 1 << ' ' << best[i].combo.str() << "  median " << best[i].summary.median
                << "  mean " << best[i].summary.mean << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ildars: " << e.what() << '\n';
    return 2;
  }
}
