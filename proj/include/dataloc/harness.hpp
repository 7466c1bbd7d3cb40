#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataloc/augment.hpp"
#include "dataloc/beacon_log.hpp"
#include "dataloc/features.hpp"
#include "dataloc/forest.hpp"

namespace dataloc {

/// Exhaustive (max_depth x n_estimators) sweep over one fixed split.
struct GridSpec {
  std::vector<int> max_depths{10, 15, 20, 25, 30};
  std::vector<int> n_estimators_list{10, 15, 20, 25, 30};
  /// Everything except max_depth / n_estimators.
  ForestConfig base_config;
  double test_fraction = kDefaultTestFraction;
  std::uint64_t split_seed = 0;

  void validate() const;
};

struct GridCell {
  int max_depth = 0;
  int n_estimators = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  bool operator==(const GridCell&) const = default;
};

struct DatasetDescriptor {
  std::string mode;  // "snapshot", "dataloc+", "matrix", ...
  std::optional<PortionRange> range;
  std::size_t samples = 0;
  std::size_t classes = 0;

  bool operator==(const DatasetDescriptor&) const = default;
};

struct GridResult {
  DatasetDescriptor dataset;
  std::vector<GridCell> cells;  // depth-major, both axes ascending

  /// Highest test accuracy; the first such cell in grid order on ties.
  const GridCell& best_cell() const;
  double mean_test_accuracy() const;
  bool operator==(const GridResult&) const = default;
};

/// Splits once, restricts the columns to devices seen in the training half,
/// then trains and scores one forest per cell.
GridResult run_grid(const FeatureMatrix& matrix, const GridSpec& grid_spec, unsigned jobs = 1,
                    DatasetDescriptor dataset = {"matrix", std::nullopt, 0, 0});

/// DataLoc+ over every session; each session draws from its own sub-seed
/// derived from `seed` and its position_id.
std::vector<Snapshot> augment_sessions(std::span<const CaptureSession> sessions, const PortionRange& range,
                                       std::uint64_t seed, unsigned jobs = 1);

/// Keeps start/end of `requested` and picks reps (then step, if needed) so
/// that positions * snapshot_count() lies within +-5% of `target`.
/// Throws Error(SampleCountUnreachable) when no choice qualifies.
PortionRange match_sample_count(const PortionRange& requested, std::size_t positions, std::size_t target);

struct AugmentedRun {
  PortionRange requested;
  PortionRange used;
  GridResult grid;
  std::vector<double> cell_deltas;  // augmented - snapshot test accuracy, per cell
  double best_delta = 0.0;          // best-cell vs best-cell
  double mean_delta = 0.0;          // mean over cells

  bool operator==(const AugmentedRun&) const = default;
};

struct ModeComparison {
  GridResult snapshot;
  std::vector<AugmentedRun> augmented;

  bool operator==(const ModeComparison&) const = default;
};

/// Snapshot mode vs DataLoc+ on equal footing: same zone set, same GridSpec,
/// same split seed, and an augmented sample count matched to the snapshot
/// count within +-5%.
ModeComparison compare_modes(std::span<const CaptureSession> stream_sessions,
                             std::span<const SystemSnapshot> system_snapshots, std::span<const PortionRange> ranges,
                             const GridSpec& grid_spec, std::uint64_t seed, unsigned jobs = 1);

struct PortionCurve {
  std::int64_t portion_bp = 0;
  std::vector<std::map<std::string, double>> rep_readings;  // one per rep
  double included_fraction = 0.0;                           // mean over reps
};

struct VariabilityCurves {
  std::size_t device_count = 0;
  std::vector<PortionCurve> portions;
};

VariabilityCurves variability_curves(const CaptureSession& session, std::span<const std::int64_t> portions_bp,
                                     int reps, std::uint64_t seed);

struct SubzoneRun {
  PortionRange range;
  std::size_t positions = 0;
  std::size_t expected_samples = 0;  // positions * range.snapshot_count()
  GridResult grid;
};

/// Promotes every position to its own class, then runs one grid per range.
std::vector<SubzoneRun> subzone_experiment(std::span<const CaptureSession> stream_sessions,
                                           std::span<const PortionRange> ranges, const GridSpec& grid_spec,
                                           std::uint64_t seed, unsigned jobs = 1);

/// The three ranges compared against snapshot mode, and the four sub-zone settings.
std::vector<PortionRange> default_comparison_ranges();
std::vector<PortionRange> default_subzone_ranges();

std::string format_grid_csv(const GridResult& grid);
std::string format_compare_csv(const ModeComparison& comparison);
std::string format_compare_summary_csv(const ModeComparison& comparison);
std::string format_curves_csv(const VariabilityCurves& curves);
std::string format_coverage_csv(const VariabilityCurves& curves);
std::string format_subzones_csv(std::span<const SubzoneRun> runs);

}  // namespace dataloc
