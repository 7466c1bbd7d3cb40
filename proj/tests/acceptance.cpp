// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and time budgets are fixed here and never tuned per run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dataloc/augment.hpp"
#include "dataloc/beacon_log.hpp"
#include "dataloc/features.hpp"
#include "dataloc/forest.hpp"
#include "dataloc/harness.hpp"
#include "dataloc/random.hpp"
#include "dataloc/sim.hpp"
#include "dataloc/text.hpp"
#include "support/generators.hpp"
#include "support/reference_dataloc.hpp"
#include "support/reference_tree.hpp"

namespace {

using namespace dataloc;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// 1. DataLoc+ against the straight-line reference.
Outcome oracle_equivalence() {
  constexpr int kSessions = 200;
  testing::Gen g(20240611);
  int snapshots = 0;
  for (int i = 0; i < kSessions; ++i) {
    const auto session = testing::random_session(g, 50, 5, "p" + std::to_string(i), "z");
    const auto range = testing::random_range(g, 4);
    const auto seed = static_cast<std::uint64_t>(g());
    const auto got = dataloc_plus(session, range, seed);
    const auto want =
        testing::reference_dataloc_plus(session, range.start_bp, range.end_bp, range.step_bp, range.reps, seed);
    if (got != want) return {false, "session " + std::to_string(i) + " range " + range.to_string() + " differs"};
    snapshots += static_cast<int>(got.size());
  }
  return {true, std::to_string(kSessions) + " sessions, " + std::to_string(snapshots) + " snapshots identical"};
}

// 2. Count law, plus the four sub-zone settings scaled over a position set.
Outcome count_law() {
  testing::Gen g(7);
  const auto tiny = testing::random_session(g, 3, 2, "p", "z");
  for (int i = 0; i < 1000; ++i) {
    const auto r = testing::random_range(g, 4);
    std::size_t loop_count = 0;
    for (auto p = r.start_bp; p <= r.end_bp; p += r.step_bp) ++loop_count;
    const auto law = static_cast<std::size_t>(r.reps) * static_cast<std::size_t>((r.end_bp - r.start_bp) / r.step_bp + 1);
    const auto produced = dataloc_plus(tiny, r, static_cast<std::uint64_t>(i)).size();
    if (produced != law || law != loop_count * static_cast<std::size_t>(r.reps) || r.snapshot_count() != law) {
      return {false, "range " + r.to_string() + ": produced " + std::to_string(produced) + ", law " +
                         std::to_string(law)};
    }
  }

  // 90 positions: 450 samples at the coarsest setting.
  std::vector<CaptureSession> positions;
  for (int i = 0; i < 90; ++i) positions.push_back(testing::random_session(g, 40, 5, "p" + std::to_string(i), "z"));
  const auto settings = default_subzone_ranges();
  const std::size_t per_position[] = {5, 9, 17, 34};
  std::vector<std::size_t> totals;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto total = augment_sessions(positions, settings[i], 1).size();
    if (total != 90 * per_position[i]) {
      return {false, settings[i].to_string() + " gave " + std::to_string(total) + " samples"};
    }
    totals.push_back(total);
  }
  std::string detail = "1000 ranges exact; 90 positions ->";
  for (auto t : totals) detail += " " + std::to_string(t);
  detail += " (x" + fmt(double(totals[1]) / totals[0]) + ", x" + fmt(double(totals[2]) / totals[0]) + ", x" +
            fmt(double(totals[3]) / totals[0]) + ")";
  return {true, detail};
}

// 3. Variance of one device's averaged reading against the finite-population formula.
Outcome variance_trend() {
  constexpr int kFrames = 1000;
  constexpr int kSeeds = 2000;
  constexpr double kSigma = 2.0;
  constexpr double kRelTol = 0.15;
  const std::string device = "02:00:00:00:00:01";

  CounterRng noise(derive_seed(99, {3}));
  CaptureSession session{"p", "z", {}, 0};
  for (int i = 0; i < kFrames; ++i) {
    const int rssi = static_cast<int>(std::lround(-60.0 + kSigma * noise.normal()));
    session.records.push_back({i * 1000, device, "net", 6, Band::Band2_4GHz, rssi});
  }
  session.duration_us = (kFrames - 1) * 1000;
  double mean = 0;
  for (const auto& r : session.records) mean += r.rssi_dbm;
  mean /= kFrames;
  double pop_var = 0;
  for (const auto& r : session.records) pop_var += (r.rssi_dbm - mean) * (r.rssi_dbm - mean);
  pop_var /= kFrames;

  const auto range = PortionRange::parse("0.2,1,0.1,1");
  const auto portions = range.portions();
  std::vector<double> sum(portions.size(), 0.0), sum2(portions.size(), 0.0);
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto snaps = dataloc_plus(session, range, static_cast<std::uint64_t>(seed));
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      const double v = snaps[i].readings.at(device) - mean;
      sum[i] += v;
      sum2[i] += v * v;
    }
  }

  std::string detail = "sigma^2=" + fmt(pop_var) + ";";
  bool pass = true;
  double previous = INFINITY;
  for (std::size_t i = 0; i < portions.size(); ++i) {
    const double m = sum[i] / kSeeds;
    const double empirical = sum2[i] / kSeeds - m * m;
    const auto k = static_cast<double>(chunk_size(portions[i], kFrames));
    const double expected = pop_var / k * (1.0 - (k - 1.0) / (kFrames - 1.0));
    if (portions[i] == kFullPortionBp) {
      // Every rep averages the whole session, so the spread is exactly zero.
      const bool exact = sum2[i] == 0.0;
      pass = pass && exact;
      detail += " p=1:" + std::string(exact ? "0" : fmt(empirical));
    } else {
      const double rel = std::abs(empirical - expected) / expected;
      pass = pass && rel <= kRelTol;
      detail += " p=" + text::format_basis_points(portions[i]) + ":" + fmt(empirical, 3) + "/" + fmt(expected, 3);
    }
    pass = pass && empirical < previous;
    previous = empirical;
  }
  return {pass, detail};
}

// 4. Device coverage grows with portion on a session with rare weak APs.
Outcome coverage_trend() {
  constexpr int kSeeds = 1000;
  constexpr double kInversionTol = 0.01;
  sim::SimScenario s;
  s.rooms = {{"hall", 0, 0, 100, 10}};
  s.positions = {{"p", "hall", {5, 5}}};
  s.pathloss = {3.0, 1.0, 40.0};
  s.shadowing_sigma_db = 4.0;
  s.detection_floor_dbm = -85.0;
  s.session_duration_s = 60.0;
  s.seed = 17;
  auto make_ap = [](int i, sim::Point at, double tx) {
    char bssid[18];
    std::snprintf(bssid, sizeof bssid, "02:00:00:00:01:%02x", i);
    return sim::AccessPoint{bssid, "net", at, tx, 6, Band::Band2_4GHz, 100.0};
  };
  for (int i = 0; i < 5; ++i) s.aps.push_back(make_ap(i, {8.0 + 3 * i, 5}, 15.0));
  // Weak APs sit 1.8-2.4 sigma below the floor: a few percent of their beacons survive.
  for (int i = 0; i < 3; ++i) {
    auto weak = make_ap(10 + i, {60.0 + 10 * i, 5}, 0.0);
    weak.tx_power_dbm = s.detection_floor_dbm - (1.8 + 0.3 * i) * s.shadowing_sigma_db - sim::rssi_at(s, weak, {5, 5});
    s.aps.push_back(weak);
  }
  const auto session = sim::simulate_session(s, "p");
  std::set<std::string> devices;
  std::map<std::string, int> frames;
  for (const auto& r : session.records) {
    devices.insert(r.bssid);
    ++frames[r.bssid];
  }
  if (devices.size() != s.aps.size()) return {false, "a weak AP produced no frames at all"};
  int rarest = static_cast<int>(session.records.size());
  for (const auto& [d, n] : frames) rarest = std::min(rarest, n);

  const auto range = PortionRange::parse("0.05,1,0.05,1");
  const auto portions = range.portions();
  std::vector<double> fraction(portions.size(), 0.0);
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto snaps = dataloc_plus(session, range, static_cast<std::uint64_t>(seed));
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      fraction[i] += static_cast<double>(snaps[i].readings.size()) / static_cast<double>(devices.size());
    }
  }
  for (auto& f : fraction) f /= kSeeds;

  int inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < fraction.size(); ++i) {
    if (fraction[i] < fraction[i - 1]) {
      ++inversions;
      small = small && fraction[i - 1] - fraction[i] < kInversionTol;
    }
  }
  const bool full = fraction.back() == 1.0;
  const bool pass = full && inversions <= 1 && small;
  return {pass, std::to_string(session.records.size()) + " frames, rarest AP " + std::to_string(rarest) +
                    " frames; coverage " + fmt(fraction.front()) + " -> " + fmt(fraction[fraction.size() / 2]) +
                    " -> " + fmt(fraction.back()) + ", inversions " + std::to_string(inversions)};
}

bool same_structure(const ForestModel& model, const DecisionTree& tree, std::size_t at,
                    const testing::ReferenceNode& ref) {
  const auto& node = tree.nodes[at];
  if (node.leaf() != ref.leaf) return false;
  if (node.leaf()) return model.classes[static_cast<std::size_t>(node.label)] == ref.label;
  return static_cast<std::size_t>(node.feature) == ref.feature && node.threshold == ref.threshold &&
         same_structure(model, tree, static_cast<std::size_t>(node.left), *ref.left) &&
         same_structure(model, tree, static_cast<std::size_t>(node.right), *ref.right);
}

// 5. Forest against the exhaustive tree, vote/depth laws, determinism.
Outcome forest_correctness() {
  testing::Gen g(5150);
  for (int i = 0; i < 200; ++i) {
    const auto m = testing::random_matrix(g, testing::uniform_int(g, 2, 20), testing::uniform_int(g, 1, 6),
                                          testing::uniform_int(g, 2, 4));
    ForestConfig c;
    c.n_estimators = 1;
    c.bootstrap = false;
    c.max_features = MaxFeatures::all();
    c.max_depth = testing::uniform_int(g, 1, 10);
    const auto model = train_forest(m, c);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
    const testing::ReferenceTree ref(rows, m.labels, c.max_depth);
    if (!same_structure(model, model.trees[0], 0, ref.root())) {
      return {false, "(a) tree " + std::to_string(i) + " differs from the exhaustive reference"};
    }
  }

  for (int i = 0; i < 100; ++i) {
    const auto m = testing::random_matrix(g, testing::uniform_int(g, 10, 60), testing::uniform_int(g, 2, 10),
                                          testing::uniform_int(g, 2, 5));
    ForestConfig c;
    c.n_estimators = testing::uniform_int(g, 1, 12);
    c.max_depth = testing::uniform_int(g, 1, 8);
    c.seed = static_cast<std::uint64_t>(g());
    const auto model = train_forest(m, c);
    if (model.trees.size() != static_cast<std::size_t>(c.n_estimators)) return {false, "(b) wrong tree count"};
    for (const auto& tree : model.trees) {
      if (tree.depth() > c.max_depth) return {false, "(b) depth law violated in forest " + std::to_string(i)};
      std::uint64_t leaf_rows = 0;
      for (const auto& node : tree.nodes) {
        if (node.leaf()) {
          for (auto n : node.class_counts) leaf_rows += n;
        }
      }
      if (leaf_rows != m.rows()) return {false, "(b) bootstrap sample size differs from N"};
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto votes = model.votes(m.row(r));
      std::uint32_t total = 0;
      for (auto v : votes) total += v;
      if (total != static_cast<std::uint32_t>(c.n_estimators)) return {false, "(b) vote law violated"};
      const auto winner = std::max_element(votes.begin(), votes.end()) - votes.begin();
      if (predict(model, m.row(r)) != model.classes[static_cast<std::size_t>(winner)]) {
        return {false, "(b) plurality/tie rule violated"};
      }
    }
    if (serialize_model(model) != serialize_model(train_forest(m, c))) {
      return {false, "(c) retraining changed the serialized model"};
    }
  }
  return {true, "(a) 200 trees structurally identical; (b) 100 forests obey vote/depth/bootstrap laws; "
                "(c) serialization bit-identical"};
}

struct ScenarioRun {
  double snapshot_best = 0;
  std::vector<double> augmented_best;  // per default comparison range
  std::vector<double> subzone_best;    // per default sub-zone setting
};

constexpr int kScenarioSeeds = 10;
constexpr std::size_t kSystemSnapshotsPerPosition = 5;

std::vector<ScenarioRun>& scenario_runs() {
  static std::vector<ScenarioRun> runs;
  return runs;
}

GridSpec scenario_grid(std::uint64_t seed) {
  GridSpec grid_spec;
  grid_spec.base_config.seed = derive_seed(seed, {fnv1a64("forest")});
  grid_spec.split_seed = derive_seed(seed, {fnv1a64("split")});
  return grid_spec;
}

// 6. Snapshot mode vs DataLoc+ at matched sample counts.
Outcome mode_comparison() {
  const auto ranges = default_comparison_ranges();
  std::vector<int> wins(ranges.size(), 0);
  std::vector<std::vector<double>> deltas(ranges.size());
  std::vector<double> snapshot_best;
  for (int s = 1; s <= kScenarioSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto scenario = sim::default_hospital_like_scenario(seed);
    const auto sessions = sim::simulate_sessions(scenario, worker_count());
    const auto system = sim::simulate_all_system_snapshots(scenario, kSystemSnapshotsPerPosition);
    const auto cmp = compare_modes(sessions, system, ranges, scenario_grid(seed), derive_seed(seed, {fnv1a64("augment")}),
                                   worker_count());
    ScenarioRun run;
    run.snapshot_best = cmp.snapshot.best_cell().test_accuracy;
    snapshot_best.push_back(run.snapshot_best);
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      const auto& aug = cmp.augmented[i];
      const double target = static_cast<double>(cmp.snapshot.dataset.samples);
      if (std::abs(static_cast<double>(aug.grid.dataset.samples) - target) > 0.05 * target) {
        return {false, "sample counts not matched for " + ranges[i].to_string()};
      }
      run.augmented_best.push_back(aug.grid.best_cell().test_accuracy);
      deltas[i].push_back(aug.best_delta);
      if (aug.best_delta >= 0) ++wins[i];
    }
    scenario_runs().push_back(run);
  }
  bool pass = true;
  std::string detail = "snapshot median best " + fmt(median(snapshot_best)) + ";";
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double med = median(deltas[i]);
    pass = pass && wins[i] >= 8 && med > 0;
    detail += " " + ranges[i].to_string() + ": " + std::to_string(wins[i]) + "/10 >=, median +" + fmt(med);
  }
  return {pass, detail};
}

// 7. Tighter portion ranges do at least as well.
Outcome portion_tightness() {
  const auto ranges = default_comparison_ranges();
  const auto wide = std::find(ranges.begin(), ranges.end(), PortionRange::parse("0.2,1,0.2,1")) - ranges.begin();
  const auto tight = std::find(ranges.begin(), ranges.end(), PortionRange::parse("0.8,1,0.05,1")) - ranges.begin();
  if (scenario_runs().size() != kScenarioSeeds) return {false, "mode comparison did not complete"};
  std::vector<double> wide_best, tight_best;
  for (const auto& run : scenario_runs()) {
    wide_best.push_back(run.augmented_best[static_cast<std::size_t>(wide)]);
    tight_best.push_back(run.augmented_best[static_cast<std::size_t>(tight)]);
  }
  const double w = median(wide_best), t = median(tight_best);
  return {t >= w, "median best (0.8,1,0.05,1) " + fmt(t) + " vs (0.2,1,0.2,1) " + fmt(w)};
}

// 8. Sub-zone accuracy as the sample count grows.
Outcome subzone_scaling() {
  constexpr double kInversionTol = 0.02;
  const auto ranges = default_subzone_ranges();
  std::vector<std::vector<double>> best(ranges.size());
  std::size_t classes = 0;
  for (int s = 1; s <= kScenarioSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto scenario = sim::default_hospital_like_scenario(seed);
    const auto sessions = sim::simulate_sessions(scenario, worker_count());
    const auto runs =
        subzone_experiment(sessions, ranges, scenario_grid(seed), derive_seed(seed, {fnv1a64("augment")}), worker_count());
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].grid.dataset.samples != runs[i].expected_samples) return {false, "sample count off"};
      best[i].push_back(runs[i].grid.best_cell().test_accuracy);
    }
    classes += runs.front().grid.dataset.classes;
  }
  std::vector<double> medians;
  for (const auto& b : best) medians.push_back(median(b));
  int inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < medians.size(); ++i) {
    if (medians[i] < medians[i - 1]) {
      ++inversions;
      small = small && medians[i - 1] - medians[i] < kInversionTol;
    }
  }
  std::string detail = "mean " + fmt(double(classes) / kScenarioSeeds, 3) + " sub-zones; medians";
  for (double m : medians) detail += " " + fmt(m);
  return {inversions <= 1 && small, detail};
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = text::read_file(e.path());
  }
  return files;
}

// 9. The CLI pipeline is byte-identical on repeated runs.
Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "dataloc_acceptance_pipeline";
  const std::string cli = DATALOC_CLI_PATH;
  const std::string d = dir.string();
  const std::vector<std::string> steps = {
      "simulate --seed 11 --snapshots-per-position 5 --out-dir '" + d + "/sim'",
      "augment --seed 11 --in '" + d + "/sim/beacons.log' --range 0.2,1,0.2,1 --out '" + d + "/aug.csv'",
      "featurize --in '" + d + "/aug.csv' --hidden-from '" + d + "/sim/beacons.log' --out '" + d + "/matrix.csv'",
      "train --seed 11 --in '" + d + "/matrix.csv' --out '" + d + "/model.txt'",
      "grid --seed 11 --jobs 2 --in '" + d + "/matrix.csv' --out '" + d + "/grid.csv'",
  };
  std::vector<std::map<std::string, std::string>> results;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& step : steps) {
      const std::string command = "'" + cli + "' " + step + " > /dev/null";
      if (std::system(command.c_str()) != 0) return {false, "command failed: " + step};
    }
    results.push_back(snapshot_dir(dir));
  }
  fs::remove_all(dir);
  if (results[0] != results[1]) {
    for (const auto& [name, bytes] : results[0]) {
      const auto it = results[1].find(name);
      if (it == results[1].end() || it->second != bytes) return {false, name + " differs between runs"};
    }
    return {false, "file sets differ"};
  }
  std::string detail = std::to_string(results[0].size()) + " files identical; grid.csv fnv1a64 ";
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(results[0].at("grid.csv"))));
  return {true, detail + hex};
}

// 10. parse(write(x)) == x for every file format.
Outcome format_round_trips() {
  constexpr int kInstances = 100;
  testing::Gen g(4242);
  for (int i = 0; i < kInstances; ++i) {
    const auto sessions = testing::random_sessions(g, testing::uniform_int(g, 0, 4), 30, 5);
    if (parse_beacon_log_text(format_beacon_log(sessions)) != sessions) return {false, "beacon log " + std::to_string(i)};

    const auto snaps = testing::random_snapshots(g, testing::uniform_int(g, 0, 10));
    if (parse_snapshots_text(format_snapshots(snaps)) != snaps) return {false, "snapshots " + std::to_string(i)};

    auto m = testing::random_matrix(g, testing::uniform_int(g, 2, 25), testing::uniform_int(g, 1, 8),
                                    testing::uniform_int(g, 2, 4));
    for (auto& v : m.values) {
      if (v != kFillDbm && v < 0) v += testing::uniform_int(g, 0, 12) / 13.0;
    }
    m.labels[0] = testing::random_name(g, "zone");
    if (parse_matrix_text(format_matrix(m)) != m) return {false, "matrix " + std::to_string(i)};

    ForestConfig c;
    c.n_estimators = testing::uniform_int(g, 1, 5);
    c.max_depth = testing::uniform_int(g, 1, 6);
    c.max_features = MaxFeatures::fixed(static_cast<std::size_t>(testing::uniform_int(g, 1, static_cast<int>(m.cols()))));
    c.bootstrap = testing::uniform_int(g, 0, 1) == 1;
    c.seed = static_cast<std::uint64_t>(g());
    const auto model = train_forest(m, c);
    if (deserialize_model(serialize_model(model)) != model) return {false, "model " + std::to_string(i)};
  }
  return {true, std::to_string(kInstances) + " instances each of beacon log, snapshots, matrix, model"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "dataloc+ oracle equivalence", 5, oracle_equivalence},
      {2, "snapshot count law", 1, count_law},
      {3, "variance shrinks with portion", 10, variance_trend},
      {4, "coverage grows with portion", 10, coverage_trend},
      {5, "forest correctness", 10, forest_correctness},
      {6, "dataloc+ vs snapshot mode", 60, mode_comparison},
      {7, "tighter portion ranges", 1, portion_tightness},
      {8, "sub-zone scaling", 90, subzone_scaling},
      {9, "cli pipeline determinism", 30, cli_determinism},
      {10, "format round trips", 5, format_round_trips},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = elapsed <= c.budget_s;
    const bool pass = outcome.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s %2d %-30s %6.2fs/%gs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, elapsed, c.budget_s,
                outcome.detail.c_str(), in_budget ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
