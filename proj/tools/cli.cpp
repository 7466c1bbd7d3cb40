#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "dataloc/augment.hpp"
#include "dataloc/beacon_log.hpp"
#include "dataloc/error.hpp"
#include "dataloc/features.hpp"
#include "dataloc/forest.hpp"
#include "dataloc/harness.hpp"
#include "dataloc/random.hpp"
#include "dataloc/sim.hpp"
#include "dataloc/text.hpp"
#include "manifest.hpp"

namespace dataloc::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag) { return derive_seed(seed, {fnv1a64(tag)}); }

PortionRange range_arg(const std::string& s) {
  try {
    return PortionRange::parse(s);
  } catch (const Error& e) {
    throw UsageError(std::string("--range: ") + e.what());
  }
}

std::vector<int> int_list_arg(const std::string& s, const char* flag) {
  std::vector<int> out;
  for (auto part : text::split(s, ',')) {
    const auto v = text::parse_int(part);
    if (!v) throw UsageError(std::string(flag) + ": expected comma-separated integers");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

std::vector<std::int64_t> portion_list_arg(const std::string& s) {
  std::vector<std::int64_t> out;
  for (auto part : text::split(s, ',')) {
    const auto v = text::parse_basis_points(part);
    if (!v || *v <= 0 || *v > kFullPortionBp) throw UsageError("--portions: expected fractions in (0, 1]");
    out.push_back(*v);
  }
  return out;
}

MaxFeatures max_features_arg(const std::string& s) {
  try {
    return MaxFeatures::parse(s);
  } catch (const Error& e) {
    throw UsageError(std::string("--max-features: ") + e.what());
  }
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const auto ext = p.extension().string();
  p.replace_extension();
  return p.string() + suffix + ext;
}

/// Collects written files and emits the manifest next to the primary output.
class Outputs {
 public:
  Outputs(std::string subcommand, std::vector<std::string> args)
      : manifest_{DATALOC_VERSION, std::move(subcommand), std::move(args), {}} {}

  void write(const std::string& path, const std::string& contents) {
    text::write_file(path, contents);
    manifest_.outputs.emplace_back(path, sha256_hex(contents));
  }

  void finish(const std::string& manifest_path) {
    if (manifest_.outputs.empty()) return;
    text::write_file(manifest_path, manifest_.to_json());
  }

  void finish() {
    if (!manifest_.outputs.empty()) finish(manifest_.outputs.front().first + ".manifest.json");
  }

 private:
  RunManifest manifest_;
};

struct GridFlags {
  std::string depths = "10,15,20,25,30";
  std::string estimators = "10,15,20,25,30";
  std::string max_features = "sqrt";
  int min_samples_split = 2;
  double test_fraction = kDefaultTestFraction;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--depths", depths, "Max-depth axis")->capture_default_str();
    cmd->add_option("--estimators", estimators, "Number-of-estimators axis")->capture_default_str();
    cmd->add_option("--max-features", max_features, "sqrt, all or an integer")->capture_default_str();
    cmd->add_option("--min-samples-split", min_samples_split)->capture_default_str();
    cmd->add_option("--test-fraction", test_fraction)->capture_default_str();
  }

  GridSpec grid_spec(std::uint64_t seed) const {
    GridSpec g;
    g.max_depths = int_list_arg(depths, "--depths");
    g.n_estimators_list = int_list_arg(estimators, "--estimators");
    g.base_config.max_features = max_features_arg(max_features);
    g.base_config.min_samples_split = min_samples_split;
    g.base_config.seed = sub_seed(seed, "forest");
    g.test_fraction = test_fraction;
    g.split_seed = sub_seed(seed, "split");
    return g;
  }
};

std::string describe_cell(const GridCell& c) {
  return "max_depth=" + std::to_string(c.max_depth) + " n_estimators=" + std::to_string(c.n_estimators) +
         " train_acc=" + text::format_double(c.train_accuracy) + " test_acc=" + text::format_double(c.test_accuracy);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Room-level WiFi fingerprinting with DataLoc+ beacon-stream augmentation", "dataloc"};
  app.set_version_flag("--version", std::string("dataloc ") + DATALOC_VERSION);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Seed for all randomness in this run")->capture_default_str();
    cmd->add_option("--jobs", jobs, "Worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
  };

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate beacon logs and system snapshots from a scenario");
  std::string scenario_path, out_dir;
  std::size_t snapshots_per_position = 5;
  simulate->add_option("--scenario", scenario_path, "Scenario JSON (default: built-in 8-room layout)");
  simulate->add_option("--out-dir", out_dir, "Output directory")->required();
  simulate->add_option("--snapshots-per-position", snapshots_per_position)->check(CLI::PositiveNumber)->capture_default_str();
  add_common(simulate);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a beacon log or system-snapshot file");
  std::string ingest_in, ingest_out;
  ingest->add_option("--in", ingest_in)->required();
  ingest->add_option("--out", ingest_out, "Write the canonical form here");

  // augment
  auto* augment = app.add_subcommand("augment", "Generate DataLoc+ snapshots from a beacon log");
  std::string augment_in, augment_out, range_text, only_position;
  augment->add_option("--in", augment_in, "Beacon log")->required();
  augment->add_option("--range", range_text, "start,end,step,reps, e.g. 0.4,1.0,0.2,5")->required();
  augment->add_option("--out", augment_out, "Snapshot file")->required();
  augment->add_option("--position", only_position, "Only this position");
  add_common(augment);

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Build a feature matrix from snapshot files");
  std::vector<std::string> featurize_in;
  std::string featurize_out, universe_from, hidden_from;
  bool featurize_subzones = false;
  featurize->add_option("--in", featurize_in, "Snapshot or system-snapshot files")->required();
  featurize->add_option("--out", featurize_out, "Matrix CSV")->required();
  featurize->add_option("--universe-from", universe_from, "Reuse the columns of this matrix");
  featurize->add_option("--hidden-from", hidden_from, "Exclude hidden networks seen in this beacon log");
  featurize->add_flag("--subzones", featurize_subzones, "Label rows by zone/position");

  // train
  auto* train = app.add_subcommand("train", "Train a random forest on a feature matrix");
  std::string train_in, train_out, train_max_features = "sqrt";
  int train_depth = 20, train_estimators = 30, train_min_split = 2;
  train->add_option("--in", train_in, "Matrix CSV")->required();
  train->add_option("--out", train_out, "Model file")->required();
  train->add_option("--max-depth", train_depth)->capture_default_str();
  train->add_option("--estimators", train_estimators)->capture_default_str();
  train->add_option("--max-features", train_max_features)->capture_default_str();
  train->add_option("--min-samples-split", train_min_split)->capture_default_str();
  add_common(train);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict zones with a trained model");
  std::string model_path, predict_snapshots, predict_log, predict_matrix, predict_out;
  std::int64_t window_us = kDefaultWindowUs;
  std::optional<std::int64_t> now_us;
  predict_cmd->add_option("--model", model_path)->required();
  auto* src_snap = predict_cmd->add_option("--snapshots", predict_snapshots, "Snapshot file, one prediction per snapshot");
  auto* src_log = predict_cmd->add_option("--beacon-log", predict_log, "Beacon log, one prediction per session window");
  auto* src_matrix = predict_cmd->add_option("--matrix", predict_matrix, "Matrix CSV, one prediction per row");
  src_snap->excludes(src_log)->excludes(src_matrix);
  src_log->excludes(src_matrix);
  predict_cmd->add_option("--window-us", window_us, "Online window length")->capture_default_str();
  predict_cmd->add_option("--now-us", now_us, "Window end (default: last beacon of each session)");
  predict_cmd->add_option("--out", predict_out, "Also write labels to this file");

  // grid
  auto* grid = app.add_subcommand("grid", "Hyper-parameter grid over one train/test split");
  std::string grid_in, grid_out;
  GridFlags grid_flags;
  grid->add_option("--in", grid_in, "Matrix CSV")->required();
  grid->add_option("--out", grid_out, "grid.csv")->required();
  grid_flags.add_to(grid);
  add_common(grid);

  // compare
  auto* compare = app.add_subcommand("compare", "Snapshot mode vs DataLoc+ at matched sample counts");
  std::string compare_stream, compare_snaps, compare_out, compare_summary;
  std::vector<std::string> compare_ranges;
  GridFlags compare_flags;
  compare->add_option("--stream", compare_stream, "Beacon log")->required();
  compare->add_option("--snapshots", compare_snaps, "System-snapshot file")->required();
  compare->add_option("--range", compare_ranges, "Portion range (repeatable; default: the three standard ranges)");
  compare->add_option("--out", compare_out, "compare.csv")->required();
  compare->add_option("--summary-out", compare_summary, "Best-cell summary (default: <out>_summary.csv)");
  compare_flags.add_to(compare);
  add_common(compare);

  // subzones
  auto* subzones = app.add_subcommand("subzones", "Sub-zone scaling experiment");
  std::string subzones_stream, subzones_out;
  std::vector<std::string> subzone_ranges;
  GridFlags subzone_flags;
  subzones->add_option("--stream", subzones_stream, "Beacon log")->required();
  subzones->add_option("--range", subzone_ranges, "Portion range (repeatable; default: the four standard settings)");
  subzones->add_option("--out", subzones_out, "subzones.csv")->required();
  subzone_flags.add_to(subzones);
  add_common(subzones);

  // curves
  auto* curves = app.add_subcommand("curves", "Per-portion signal variability and device coverage");
  std::string curves_in, curves_out, curves_coverage, curves_position;
  std::string portions_text = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";
  int curves_reps = 20;
  curves->add_option("--in", curves_in, "Beacon log")->required();
  curves->add_option("--position", curves_position, "Position (default: first in the log)");
  curves->add_option("--portions", portions_text)->capture_default_str();
  curves->add_option("--reps", curves_reps)->capture_default_str();
  curves->add_option("--out", curves_out, "curves.csv")->required();
  curves->add_option("--coverage-out", curves_coverage, "Coverage table (default: <out>_coverage.csv)");
  add_common(curves);

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and verify its output digests");
  std::string replay_manifest;
  replay->add_option("manifest", replay_manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, err, err);
    return 2;
  }

  const auto* cmd = app.get_subcommands().front();
  Outputs outputs(cmd->get_name(), args);

  try {
    if (cmd == simulate) {
      auto scenario = scenario_path.empty() ? sim::default_hospital_like_scenario(seed) : sim::load_scenario(scenario_path);
      scenario.seed = seed;
      fs::create_directories(out_dir);
      const auto sessions = sim::simulate_sessions(scenario, jobs);
      const auto snaps = sim::simulate_all_system_snapshots(scenario, snapshots_per_position);
      const auto dir = fs::path(out_dir);
      outputs.write((dir / "beacons.log").string(), format_beacon_log(sessions));
      outputs.write((dir / "system_snapshots.csv").string(), format_system_snapshots(snaps));
      outputs.write((dir / "scenario.json").string(), sim::scenario_to_json(scenario));
      outputs.finish((dir / "manifest.json").string());
      std::size_t frames = 0;
      for (const auto& s : sessions) frames += s.records.size();
      out << "simulated " << sessions.size() << " positions in " << scenario.rooms.size() << " zones, " << frames
          << " beacon frames, " << snaps.size() << " system snapshots\n";
    } else if (cmd == ingest) {
      const auto contents = text::read_file(ingest_in);
      const auto rows = text::data_lines(contents);
      if (!rows.empty() && rows.front().text == kSystemSnapshotHeader) {
        const auto snaps = parse_system_snapshots_text(contents);
        std::map<std::string, std::size_t> per_position;
        for (const auto& s : snaps) ++per_position[s.position_id];
        out << "system snapshots: " << snaps.size() << " over " << per_position.size() << " positions\n";
        if (!ingest_out.empty()) outputs.write(ingest_out, format_system_snapshots(snaps));
      } else {
        const auto sessions = parse_beacon_log_text(contents);
        out << "position,zone_label,records,devices,duration_us\n";
        for (const auto& s : sessions) {
          std::set<std::string> devices;
          for (const auto& r : s.records) devices.insert(r.bssid);
          out << s.position_id << ',' << s.zone_label << ',' << s.records.size() << ',' << devices.size() << ','
              << s.duration_us << '\n';
        }
        if (!ingest_out.empty()) outputs.write(ingest_out, format_beacon_log(sessions));
      }
      outputs.finish();
    } else if (cmd == augment) {
      const auto range = range_arg(range_text);
      auto sessions = parse_beacon_log(augment_in);
      if (!only_position.empty()) {
        std::erase_if(sessions, [&](const CaptureSession& s) { return s.position_id != only_position; });
        if (sessions.empty()) throw Error(Errc::UnknownPosition, only_position);
      }
      const auto snaps = augment_sessions(sessions, range, sub_seed(seed, "augment"), jobs);
      outputs.write(augment_out, format_snapshots(snaps));
      outputs.finish();
      out << "wrote " << snaps.size() << " snapshots from " << sessions.size() << " positions\n";
    } else if (cmd == featurize) {
      std::vector<Snapshot> snaps;
      for (const auto& path : featurize_in) {
        auto part = parse_snapshots(path);
        snaps.insert(snaps.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      if (featurize_subzones) snaps = subdivide_zones(snaps);
      FeatureOptions options;
      if (!universe_from.empty()) options.universe = parse_matrix(universe_from).device_universe;
      if (!hidden_from.empty()) options.excluded_devices = hidden_devices(parse_beacon_log(hidden_from));
      const auto matrix = build_feature_matrix(snaps, options);
      outputs.write(featurize_out, format_matrix(matrix));
      outputs.finish();
      out << "matrix: " << matrix.rows() << " rows x " << matrix.cols() << " devices\n";
    } else if (cmd == train) {
      const auto matrix = parse_matrix(train_in);
      ForestConfig config;
      config.max_depth = train_depth;
      config.n_estimators = train_estimators;
      config.max_features = max_features_arg(train_max_features);
      config.min_samples_split = train_min_split;
      config.seed = sub_seed(seed, "forest");
      const auto model = train_forest(matrix, config, jobs);
      outputs.write(train_out, serialize_model(model));
      outputs.finish();
      out << "trained " << model.trees.size() << " trees over " << model.device_universe.size() << " devices, "
          << model.classes.size() << " classes; training accuracy " << text::format_double(evaluate(model, matrix))
          << '\n';
    } else if (cmd == predict_cmd) {
      const auto model = load_model(model_path);
      std::vector<std::string> labels;
      if (!predict_matrix.empty()) {
        const auto matrix = project_matrix(parse_matrix(predict_matrix), model.device_universe);
        labels = predict_all(model, matrix);
      } else if (!predict_snapshots.empty()) {
        for (const auto& s : parse_snapshots(predict_snapshots)) {
          labels.push_back(predict(model, project_readings(s.readings, model.device_universe)));
        }
      } else if (!predict_log.empty()) {
        for (const auto& s : parse_beacon_log(predict_log)) {
          const auto end = now_us.value_or(s.records.back().timestamp_us);
          const auto window = select_window(s.records, end, window_us);
          const auto snap = online_snapshot(window);
          labels.push_back(predict(model, project_readings(snap.readings, model.device_universe)));
        }
      } else {
        throw UsageError("predict needs one of --snapshots, --beacon-log or --matrix");
      }
      std::string listing;
      for (const auto& l : labels) listing += l + '\n';
      out << listing;
      if (!predict_out.empty()) {
        outputs.write(predict_out, listing);
        outputs.finish();
      }
    } else if (cmd == grid) {
      const auto grid_spec = grid_flags.grid_spec(seed);
      const auto result = run_grid(parse_matrix(grid_in), grid_spec, jobs);
      outputs.write(grid_out, format_grid_csv(result));
      outputs.finish();
      out << "best cell: " << describe_cell(result.best_cell()) << '\n';
    } else if (cmd == compare) {
      std::vector<PortionRange> ranges;
      for (const auto& r : compare_ranges) ranges.push_back(range_arg(r));
      if (ranges.empty()) ranges = default_comparison_ranges();
      const auto grid_spec = compare_flags.grid_spec(seed);
      const auto sessions = parse_beacon_log(compare_stream);
      const auto system = parse_system_snapshots(compare_snaps);
      const auto result = compare_modes(sessions, system, ranges, grid_spec, sub_seed(seed, "augment"), jobs);
      outputs.write(compare_out, format_compare_csv(result));
      outputs.write(compare_summary.empty() ? with_suffix(compare_out, "_summary") : compare_summary,
                    format_compare_summary_csv(result));
      outputs.finish();
      out << "snapshot (" << result.snapshot.dataset.samples << " samples): best "
          << describe_cell(result.snapshot.best_cell()) << '\n';
      for (const auto& run : result.augmented) {
        out << "dataloc+ " << run.used.to_string() << " (" << run.grid.dataset.samples << " samples): best "
            << describe_cell(run.grid.best_cell()) << " best_delta=" << text::format_double(run.best_delta)
            << " mean_delta=" << text::format_double(run.mean_delta) << '\n';
      }
    } else if (cmd == subzones) {
      std::vector<PortionRange> ranges;
      for (const auto& r : subzone_ranges) ranges.push_back(range_arg(r));
      if (ranges.empty()) ranges = default_subzone_ranges();
      const auto grid_spec = subzone_flags.grid_spec(seed);
      const auto sessions = parse_beacon_log(subzones_stream);
      const auto runs = subzone_experiment(sessions, ranges, grid_spec, sub_seed(seed, "augment"), jobs);
      outputs.write(subzones_out, format_subzones_csv(runs));
      outputs.finish();
      for (const auto& run : runs) {
        out << run.range.to_string() << ": " << run.grid.dataset.samples << " samples, "
            << run.grid.dataset.classes << " classes, best " << describe_cell(run.grid.best_cell()) << '\n';
      }
    } else if (cmd == curves) {
      const auto portions = portion_list_arg(portions_text);
      const auto sessions = parse_beacon_log(curves_in);
      if (sessions.empty()) throw Error(Errc::EmptyInput, "beacon log has no sessions");
      const CaptureSession* session = &sessions.front();
      if (!curves_position.empty()) {
        auto it = std::find_if(sessions.begin(), sessions.end(),
                               [&](const CaptureSession& s) { return s.position_id == curves_position; });
        if (it == sessions.end()) throw Error(Errc::UnknownPosition, curves_position);
        session = &*it;
      }
      const auto result = variability_curves(*session, portions, curves_reps, sub_seed(seed, "augment"));
      outputs.write(curves_out, format_curves_csv(result));
      outputs.write(curves_coverage.empty() ? with_suffix(curves_out, "_coverage") : curves_coverage,
                    format_coverage_csv(result));
      outputs.finish();
      out << "portion_bp,included_fraction\n";
      for (const auto& p : result.portions) out << p.portion_bp << ',' << text::format_double(p.included_fraction) << '\n';
    } else if (cmd == replay) {
      const auto manifest = RunManifest::from_json(text::read_file(replay_manifest));
      if (manifest.subcommand == "replay") throw UsageError("cannot replay a replay");
      std::ostringstream sink;
      const int code = run(manifest.args, sink, err);
      if (code != 0) return code;
      bool all_match = true;
      for (const auto& [path, digest] : manifest.outputs) {
        const bool match = file_sha256(path) == digest;
        all_match = all_match && match;
        out << (match ? "match    " : "MISMATCH ") << path << '\n';
      }
      return all_match ? 0 : 1;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n' << cmd->help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dataloc::cli
