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

namespace dataloc {

/// Reserved value meaning "device not detected". Never valid as a reading.
inline constexpr int kFillDbm = -100;
inline constexpr int kMinRssiDbm = -99;
inline constexpr int kMaxRssiDbm = 0;

enum class Band { Band2_4GHz, Band5GHz };

std::string_view band_name(Band band) noexcept;
std::optional<Band> parse_band(std::string_view s) noexcept;
/// Band implied by a WiFi channel number: 1-14 -> 2.4 GHz, 32-177 -> 5 GHz.
std::optional<Band> band_for_channel(int channel) noexcept;

/// True for the 17-character lower-case colon-separated form "aa:bb:cc:dd:ee:ff".
bool is_canonical_bssid(std::string_view s) noexcept;
/// Accepts either hex case; returns the canonical lower-case form.
std::optional<std::string> canonicalize_bssid(std::string_view s);

/// One received beacon frame.
struct BeaconRecord {
  std::int64_t timestamp_us = 0;
  std::string bssid;
  std::string ssid;  // empty: hidden network
  int channel = 1;
  Band band = Band::Band2_4GHz;
  int rssi_dbm = kMinRssiDbm;

  bool hidden() const noexcept { return ssid.empty(); }
  bool operator==(const BeaconRecord&) const = default;
};

/// All beacons captured at one physical position.
struct CaptureSession {
  std::string position_id;
  std::string zone_label;
  std::vector<BeaconRecord> records;
  std::int64_t duration_us = 0;

  bool operator==(const CaptureSession&) const = default;
};

/// One system-tool snapshot: bssid -> integer dBm.
struct SystemSnapshot {
  std::string position_id;
  std::string zone_label;
  std::map<std::string, int> readings;

  bool operator==(const SystemSnapshot&) const = default;
};

/// Throws Error on any BeaconRecord / CaptureSession invariant violation.
void validate_record(const BeaconRecord& record);
void validate_session(const CaptureSession& session);
void validate_system_snapshot(const SystemSnapshot& snapshot);

/// Devices whose SSID is empty in every captured frame.
std::set<std::string> hidden_devices(std::span<const CaptureSession> sessions);

// Beacon log: header line
//   position_id,zone_label,timestamp_us,bssid,ssid,channel,band,rssi_dbm
// then one record per line. A line `@session,<position_id>,<zone_label>,<duration_us>`
// declares a session's duration; without it the duration is the last
// timestamp. `#` lines are comments; empty lines are skipped.
inline constexpr std::string_view kBeaconLogHeader =
    "position_id,zone_label,timestamp_us,bssid,ssid,channel,band,rssi_dbm";
inline constexpr std::string_view kSystemSnapshotHeader =
    "position_id,zone_label,snapshot_index,bssid,rssi_dbm";

std::vector<CaptureSession> parse_beacon_log_text(std::string_view contents);
std::vector<CaptureSession> parse_beacon_log(const std::filesystem::path& path);
std::string format_beacon_log(std::span<const CaptureSession> sessions);
void write_beacon_log(const std::filesystem::path& path, std::span<const CaptureSession> sessions);

std::vector<SystemSnapshot> parse_system_snapshots_text(std::string_view contents);
std::vector<SystemSnapshot> parse_system_snapshots(const std::filesystem::path& path);
std::string format_system_snapshots(std::span<const SystemSnapshot> snapshots);
void write_system_snapshots(const std::filesystem::path& path,
                            std::span<const SystemSnapshot> snapshots);

}  // namespace dataloc
