#include "dataloc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dataloc/error.hpp"
#include "dataloc/parallel.hpp"
#include "dataloc/random.hpp"
#include "dataloc/text.hpp"

namespace dataloc {

namespace {

constexpr double kSampleCountTolerance = 0.05;

void require_increasing(const std::vector<int>& v, const char* what) {
  if (v.empty()) throw Error(Errc::InvalidArgument, std::string(what) + " is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1 || (i > 0 && v[i] <= v[i - 1])) {
      throw Error(Errc::InvalidArgument, std::string(what) + " must be positive and strictly increasing");
    }
  }
}

std::size_t class_count(const FeatureMatrix& m) {
  return std::set<std::string>(m.labels.begin(), m.labels.end()).size();
}

std::string range_field(const std::optional<PortionRange>& r) {
  return r ? "\"" + r->to_string() + "\"" : "";
}

}  // namespace

void GridSpec::validate() const {
  require_increasing(max_depths, "max_depths");
  require_increasing(n_estimators_list, "n_estimators_list");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(Errc::InvalidArgument, "test_fraction outside (0, 1)");
}

const GridCell& GridResult::best_cell() const {
  if (cells.empty()) throw Error(Errc::InvalidArgument, "empty grid");
  const GridCell* best = &cells.front();
  for (const auto& c : cells) {
    if (c.test_accuracy > best->test_accuracy) best = &c;
  }
  return *best;
}

double GridResult::mean_test_accuracy() const {
  if (cells.empty()) throw Error(Errc::InvalidArgument, "empty grid");
  double sum = 0.0;
  for (const auto& c : cells) sum += c.test_accuracy;
  return sum / static_cast<double>(cells.size());
}

GridResult run_grid(const FeatureMatrix& matrix, const GridSpec& grid_spec, unsigned jobs, DatasetDescriptor dataset) {
  grid_spec.validate();
  matrix.validate();
  auto split = split_stratified(matrix, grid_spec.test_fraction, grid_spec.split_seed);
  auto train = drop_unobserved_columns(split.train);
  auto test = project_matrix(split.test, train.device_universe);

  dataset.samples = matrix.rows();
  dataset.classes = class_count(matrix);

  GridResult result;
  result.dataset = std::move(dataset);
  result.cells.resize(grid_spec.max_depths.size() * grid_spec.n_estimators_list.size());
  parallel_for(result.cells.size(), jobs, [&](std::size_t i) {
    auto config = grid_spec.base_config;
    config.max_depth = grid_spec.max_depths[i / grid_spec.n_estimators_list.size()];
    config.n_estimators = grid_spec.n_estimators_list[i % grid_spec.n_estimators_list.size()];
    const auto model = train_forest(train, config);
    result.cells[i] = {config.max_depth, config.n_estimators, evaluate(model, train), evaluate(model, test)};
  });
  return result;
}

std::vector<Snapshot> augment_sessions(std::span<const CaptureSession> sessions, const PortionRange& range,
                                       std::uint64_t seed, unsigned jobs) {
  std::vector<std::vector<Snapshot>> per_session(sessions.size());
  parallel_for(sessions.size(), jobs, [&](std::size_t i) {
    per_session[i] = dataloc_plus(sessions[i], range, derive_seed(seed, {fnv1a64(sessions[i].position_id)}));
  });
  std::vector<Snapshot> out;
  for (auto& snaps : per_session) {
    out.insert(out.end(), std::make_move_iterator(snaps.begin()), std::make_move_iterator(snaps.end()));
  }
  return out;
}

PortionRange match_sample_count(const PortionRange& requested, std::size_t positions, std::size_t target) {
  requested.validate();
  if (positions == 0 || target == 0) throw Error(Errc::SampleCountUnreachable, "no positions or no target samples");
  const auto t = static_cast<double>(target);
  auto error_of = [&](const PortionRange& r) {
    return std::abs(static_cast<double>(positions * r.snapshot_count()) - t) / t;
  };
  auto best_reps_for = [&](PortionRange r) {
    const double per_draw = static_cast<double>(positions * r.portion_count());
    r.reps = std::max<std::int64_t>(1, std::llround(t / per_draw));
    return r;
  };

  if (error_of(requested) <= kSampleCountTolerance) return requested;
  if (auto r = best_reps_for(requested); error_of(r) <= kSampleCountTolerance) return r;

  // Search over steps, preferring the smallest error, then the step closest
  // to the requested one, then the smaller step.
  std::optional<PortionRange> best;
  const std::int64_t span_bp = requested.end_bp - requested.start_bp;
  for (std::int64_t step = 1; step <= std::max<std::int64_t>(span_bp, 1); ++step) {
    PortionRange r = requested;
    r.step_bp = step;
    r = best_reps_for(r);
    if (!best) {
      best = r;
      continue;
    }
    const double e = error_of(r);
    const double eb = error_of(*best);
    const auto dist = std::abs(step - requested.step_bp);
    const auto dist_best = std::abs(best->step_bp - requested.step_bp);
    if (e < eb || (e == eb && dist < dist_best)) best = r;
  }
  if (!best || error_of(*best) > kSampleCountTolerance) {
    throw Error(Errc::SampleCountUnreachable, "no step/reps for range " + requested.to_string() + " yields " +
                                                  std::to_string(target) + " samples over " +
                                                  std::to_string(positions) + " positions within 5%");
  }
  return *best;
}

ModeComparison compare_modes(std::span<const CaptureSession> stream_sessions,
                             std::span<const SystemSnapshot> system_snapshots, std::span<const PortionRange> ranges,
                             const GridSpec& grid_spec, std::uint64_t seed, unsigned jobs) {
  if (stream_sessions.empty()) throw Error(Errc::EmptyInput, "no stream sessions");
  if (system_snapshots.empty()) throw Error(Errc::EmptyInput, "no system snapshots");
  if (ranges.empty()) throw Error(Errc::InvalidArgument, "no portion ranges");

  std::set<std::string> stream_zones;
  std::set<std::string> snapshot_zones;
  for (const auto& s : stream_sessions) stream_zones.insert(s.zone_label);
  for (const auto& s : system_snapshots) snapshot_zones.insert(s.zone_label);
  if (stream_zones != snapshot_zones) {
    throw Error(Errc::LabelSetMismatch, std::to_string(stream_zones.size()) + " stream zones vs " +
                                            std::to_string(snapshot_zones.size()) + " snapshot zones");
  }

  // System snapshots carry no SSID, so hidden devices are identified from the stream.
  FeatureOptions options;
  options.excluded_devices = hidden_devices(stream_sessions);

  ModeComparison out;
  const auto raw = system_snapshots_to_snapshots(system_snapshots);
  out.snapshot = run_grid(build_feature_matrix(raw, options), grid_spec, jobs, {"snapshot", std::nullopt, 0, 0});
  for (const auto& requested : ranges) {
    AugmentedRun run;
    run.requested = requested;
    run.used = match_sample_count(requested, stream_sessions.size(), system_snapshots.size());
    const auto snaps = augment_sessions(stream_sessions, run.used, seed, jobs);
    run.grid = run_grid(build_feature_matrix(snaps, options), grid_spec, jobs, {"dataloc+", run.used, 0, 0});
    for (std::size_t i = 0; i < run.grid.cells.size(); ++i) {
      run.cell_deltas.push_back(run.grid.cells[i].test_accuracy - out.snapshot.cells[i].test_accuracy);
    }
    run.best_delta = run.grid.best_cell().test_accuracy - out.snapshot.best_cell().test_accuracy;
    run.mean_delta = run.grid.mean_test_accuracy() - out.snapshot.mean_test_accuracy();
    out.augmented.push_back(std::move(run));
  }
  return out;
}

VariabilityCurves variability_curves(const CaptureSession& session, std::span<const std::int64_t> portions_bp,
                                     int reps, std::uint64_t seed) {
  if (session.records.empty()) throw Error(Errc::EmptySession, session.position_id);
  if (reps < 2) throw Error(Errc::InvalidArgument, "variability curves need at least 2 reps");
  std::set<std::string> devices;
  for (const auto& r : session.records) devices.insert(r.bssid);

  VariabilityCurves out;
  out.device_count = devices.size();
  for (const auto bp : portions_bp) {
    const PortionRange single{bp, bp, 1, reps};
    PortionCurve curve;
    curve.portion_bp = bp;
    double fraction_sum = 0.0;
    for (auto& snap : dataloc_plus(session, single, seed)) {
      fraction_sum += static_cast<double>(snap.readings.size()) / static_cast<double>(devices.size());
      curve.rep_readings.push_back(std::move(snap.readings));
    }
    curve.included_fraction = fraction_sum / reps;
    out.portions.push_back(std::move(curve));
  }
  return out;
}

std::vector<SubzoneRun> subzone_experiment(std::span<const CaptureSession> stream_sessions,
                                           std::span<const PortionRange> ranges, const GridSpec& grid_spec,
                                           std::uint64_t seed, unsigned jobs) {
  std::map<std::string, std::set<std::string>> positions_per_zone;
  for (const auto& s : stream_sessions) positions_per_zone[s.zone_label].insert(s.position_id);
  const bool any_multi = std::any_of(positions_per_zone.begin(), positions_per_zone.end(),
                                     [](const auto& kv) { return kv.second.size() >= 2; });
  if (!any_multi) throw Error(Errc::InvalidArgument, "sub-zones need a zone with at least two positions");

  const auto sessions = subdivide_zones(stream_sessions);
  FeatureOptions options;
  options.excluded_devices = hidden_devices(sessions);
  std::vector<SubzoneRun> out;
  for (const auto& range : ranges) {
    SubzoneRun run;
    run.range = range;
    run.positions = sessions.size();
    run.expected_samples = sessions.size() * range.snapshot_count();
    const auto snaps = augment_sessions(sessions, range, seed, jobs);
    run.grid = run_grid(build_feature_matrix(snaps, options), grid_spec, jobs, {"dataloc+ sub-zone", range, 0, 0});
    out.push_back(std::move(run));
  }
  return out;
}

std::vector<PortionRange> default_comparison_ranges() {
  return {{2000, 10000, 2000, 1}, {5000, 10000, 1250, 1}, {8000, 10000, 500, 1}};
}

std::vector<PortionRange> default_subzone_ranges() {
  return {{2000, 10000, 2000, 1}, {2000, 10000, 1000, 1}, {2000, 10000, 500, 1}, {2000, 10000, 500, 2}};
}

std::string format_grid_csv(const GridResult& grid) {
  std::string out = "max_depth,n_estimators,train_acc,test_acc\n";
  for (const auto& c : grid.cells) {
    out += std::to_string(c.max_depth) + ',' + std::to_string(c.n_estimators) + ',' +
           text::format_double(c.train_accuracy) + ',' + text::format_double(c.test_accuracy) + '\n';
  }
  return out;
}

std::string format_compare_csv(const ModeComparison& comparison) {
  std::string out = "mode,range,samples,max_depth,n_estimators,train_acc,test_acc,test_delta\n";
  auto emit = [&](const GridResult& g, const std::vector<double>* deltas) {
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      const auto& c = g.cells[i];
      out += g.dataset.mode + ',' + range_field(g.dataset.range) + ',' + std::to_string(g.dataset.samples) + ',' +
             std::to_string(c.max_depth) + ',' + std::to_string(c.n_estimators) + ',' +
             text::format_double(c.train_accuracy) + ',' + text::format_double(c.test_accuracy) + ',' +
             (deltas ? text::format_double((*deltas)[i]) : std::string{}) + '\n';
    }
  };
  emit(comparison.snapshot, nullptr);
  for (const auto& run : comparison.augmented) emit(run.grid, &run.cell_deltas);
  return out;
}

std::string format_compare_summary_csv(const ModeComparison& comparison) {
  std::string out =
      "mode,range,samples,classes,best_max_depth,best_n_estimators,best_train_acc,best_test_acc,mean_test_acc,"
      "best_delta,mean_delta\n";
  auto emit = [&](const GridResult& g, std::optional<std::pair<double, double>> deltas) {
    const auto& b = g.best_cell();
    out += g.dataset.mode + ',' + range_field(g.dataset.range) + ',' + std::to_string(g.dataset.samples) + ',' +
           std::to_string(g.dataset.classes) + ',' + std::to_string(b.max_depth) + ',' +
           std::to_string(b.n_estimators) + ',' + text::format_double(b.train_accuracy) + ',' +
           text::format_double(b.test_accuracy) + ',' + text::format_double(g.mean_test_accuracy()) + ',' +
           (deltas ? text::format_double(deltas->first) + ',' + text::format_double(deltas->second) : ",") + '\n';
  };
  emit(comparison.snapshot, std::nullopt);
  for (const auto& run : comparison.augmented) emit(run.grid, std::pair{run.best_delta, run.mean_delta});
  return out;
}

std::string format_curves_csv(const VariabilityCurves& curves) {
  std::string out = "portion_bp,bssid,rep,avg_rssi\n";
  for (const auto& p : curves.portions) {
    for (std::size_t rep = 0; rep < p.rep_readings.size(); ++rep) {
      for (const auto& [bssid, v] : p.rep_readings[rep]) {
        out += std::to_string(p.portion_bp) + ',' + bssid + ',' + std::to_string(rep + 1) + ',' +
               text::format_double(v) + '\n';
      }
    }
  }
  return out;
}

std::string format_coverage_csv(const VariabilityCurves& curves) {
  std::string out = "portion_bp,included_fraction\n";
  for (const auto& p : curves.portions) {
    out += std::to_string(p.portion_bp) + ',' + text::format_double(p.included_fraction) + '\n';
  }
  return out;
}

std::string format_subzones_csv(std::span<const SubzoneRun> runs) {
  std::string out = "range,positions,samples,classes,max_depth,n_estimators,train_acc,test_acc\n";
  for (const auto& run : runs) {
    for (const auto& c : run.grid.cells) {
      out += range_field(run.range) + ',' + std::to_string(run.positions) + ',' +
             std::to_string(run.grid.dataset.samples) + ',' + std::to_string(run.grid.dataset.classes) + ',' +
             std::to_string(c.max_depth) + ',' + std::to_string(c.n_estimators) + ',' +
             text::format_double(c.train_accuracy) + ',' + text::format_double(c.test_accuracy) + '\n';
    }
  }
  return out;
}

}  // namespace dataloc
