#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataloc/augment.hpp"
#include "dataloc/beacon_log.hpp"

namespace dataloc {

/// Rows are snapshots, columns are devices (sorted bssids). Undetected
/// devices hold kFillDbm. Values are stored row-major.
struct FeatureMatrix {
  std::vector<std::string> device_universe;
  std::vector<double> values;
  std::vector<std::string> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t cols() const noexcept { return device_universe.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span(values).subspan(i * cols(), cols());
  }

  /// Throws Error(InvalidArgument) if any FeatureMatrix invariant is broken.
  void validate() const;
  bool operator==(const FeatureMatrix&) const = default;
};

struct FeatureOptions {
  /// Column set to project onto; must be sorted and duplicate-free. When
  /// absent the universe is the sorted union of the snapshots' devices.
  std::optional<std::vector<std::string>> universe;
  /// Devices never used as columns (hidden networks).
  std::set<std::string> excluded_devices;
};

FeatureMatrix build_feature_matrix(std::span<const Snapshot> snapshots, const FeatureOptions& options = {});

/// One feature row for `readings` over `universe`; unknown devices are dropped.
std::vector<double> project_readings(const std::map<std::string, double>& readings,
                                     std::span<const std::string> universe);

/// Re-expresses a matrix over another universe. Columns absent from the
/// source are filled with kFillDbm.
FeatureMatrix project_matrix(const FeatureMatrix& matrix, std::span<const std::string> universe);

FeatureMatrix select_rows(const FeatureMatrix& matrix, std::span<const std::size_t> rows);

/// Drops columns that hold kFillDbm in every row.
FeatureMatrix drop_unobserved_columns(const FeatureMatrix& matrix);

struct TrainTestSplit {
  FeatureMatrix train;
  FeatureMatrix test;
};

inline constexpr double kDefaultTestFraction = 0.25;

/// Per-class split: floor(n * test_fraction) test rows per class, clamped to
/// [1, n - 1]. Rows keep their original relative order in both halves.
TrainTestSplit split_stratified(const FeatureMatrix& matrix, double test_fraction, std::uint64_t seed);

/// zone_label + "/" + position_id. Applying it to an already-subdivided
/// label returns the label unchanged.
std::string subzone_label(std::string_view zone_label, std::string_view position_id);

std::vector<CaptureSession> subdivide_zones(std::span<const CaptureSession> sessions);
std::vector<Snapshot> subdivide_zones(std::span<const Snapshot> snapshots);
std::vector<SystemSnapshot> subdivide_zones(std::span<const SystemSnapshot> snapshots);

// Matrix file: header `label,<bssid...>`, then one row per snapshot.
std::string format_matrix(const FeatureMatrix& matrix);
FeatureMatrix parse_matrix_text(std::string_view contents);
FeatureMatrix parse_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix);

}  // namespace dataloc
