#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataloc/beacon_log.hpp"

namespace dataloc {

inline constexpr std::int64_t kFullPortionBp = 10000;
inline constexpr std::int64_t kDefaultWindowUs = 10'000'000;

/// Sweep of portions (in basis points, 1 bp = 0.01%) and repetitions per
/// portion. Written on the command line as "start,end,step,reps" with
/// decimal fractions, e.g. "0.4,1.0,0.2,5".
struct PortionRange {
  std::int64_t start_bp = kFullPortionBp;
  std::int64_t end_bp = kFullPortionBp;
  std::int64_t step_bp = kFullPortionBp;
  std::int64_t reps = 1;

  /// Throws Error(InvalidArgument) unless 0 < start <= end <= 10000, step > 0, reps >= 1.
  void validate() const;
  /// start, start+step, ... never exceeding end.
  std::vector<std::int64_t> portions() const;
  std::size_t portion_count() const;
  /// reps * portion_count()
  std::size_t snapshot_count() const;

  static PortionRange parse(std::string_view notation);
  std::string to_string() const;

  bool operator==(const PortionRange&) const = default;
};

struct Augmentation {
  std::int64_t portion_bp = 0;
  std::int64_t rep_index = 0;  // 1-based
  std::int64_t frames_used = 0;

  bool operator==(const Augmentation&) const = default;
};

/// A location signature: bssid -> averaged dBm. `provenance` is empty for
/// raw snapshots (system-tool snapshots and online snapshots).
struct Snapshot {
  std::string position_id;
  std::string zone_label;
  std::map<std::string, double> readings;
  std::optional<Augmentation> provenance;

  bool raw() const noexcept { return !provenance.has_value(); }
  bool operator==(const Snapshot&) const = default;
};

/// ceil(portion_bp * frame_count / 10000), at least 1.
std::size_t chunk_size(std::int64_t portion_bp, std::size_t frame_count);

/// Key of the shuffle stream used for one (portion, rep) draw.
std::uint64_t shuffle_key(std::uint64_t seed, std::int64_t portion_bp, std::int64_t rep_index);

/// Per-bssid arithmetic mean over the given records, exact for integer input.
std::map<std::string, double> average_by_device(std::span<const BeaconRecord> records);

/// DataLoc+ snapshot generation for one capture session.
///
/// For every portion p of `range` (ascending) and every rep 1..reps: the
/// session's records, in their original order, are shuffled by Fisher-Yates
/// driven by CounterRng(shuffle_key(seed, p, rep)); the first chunk_size(p, N)
/// records are averaged per device into one Snapshot. Each (p, rep) draw is
/// independent, so `jobs` > 1 changes nothing but wall time.
std::vector<Snapshot> dataloc_plus(const CaptureSession& session, const PortionRange& range,
                                   std::uint64_t seed, unsigned jobs = 1);

/// Online-phase snapshot: the full window, nothing dropped.
Snapshot online_snapshot(std::span<const BeaconRecord> window);

/// Records with timestamp in (now_us - window_us, now_us], order preserved.
std::vector<BeaconRecord> select_window(std::span<const BeaconRecord> records, std::int64_t now_us,
                                        std::int64_t window_us);

std::vector<Snapshot> system_snapshots_to_snapshots(std::span<const SystemSnapshot> snapshots);

// Snapshot file: the system-snapshot format with provenance columns appended
// (empty for raw snapshots). parse_snapshots also accepts a plain system
// snapshot file and returns raw snapshots.
inline constexpr std::string_view kSnapshotHeader =
    "position_id,zone_label,snapshot_index,bssid,rssi_dbm,portion_bp,rep_index,frames_used";

void validate_snapshot(const Snapshot& snapshot);
std::vector<Snapshot> parse_snapshots_text(std::string_view contents);
std::vector<Snapshot> parse_snapshots(const std::filesystem::path& path);
std::string format_snapshots(std::span<const Snapshot> snapshots);
void write_snapshots(const std::filesystem::path& path, std::span<const Snapshot> snapshots);

}  // namespace dataloc
