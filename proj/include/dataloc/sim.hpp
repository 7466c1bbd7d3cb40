#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataloc/beacon_log.hpp"

namespace dataloc::sim {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Axis-aligned room; its four edges are walls.
struct Room {
  std::string zone_label;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(Point p) const noexcept { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
  bool operator==(const Room&) const = default;
};

struct AccessPoint {
  std::string bssid;
  std::string ssid;  // empty: hidden network
  Point position;
  double tx_power_dbm = 20.0;
  int channel = 1;
  Band band = Band::Band2_4GHz;
  double beacon_interval_ms = 102.4;

  bool operator==(const AccessPoint&) const = default;
};

struct SimPosition {
  std::string position_id;
  std::string zone_label;
  Point at;

  bool operator==(const SimPosition&) const = default;
};

/// Log-distance path loss.
struct PathLoss {
  double exponent = 3.0;
  double reference_distance_m = 1.0;
  double reference_loss_db = 40.0;

  bool operator==(const PathLoss&) const = default;
};

struct SimScenario {
  std::vector<Room> rooms;
  std::vector<AccessPoint> aps;
  std::vector<SimPosition> positions;
  PathLoss pathloss;
  double shadowing_sigma_db = 4.0;
  double detection_floor_dbm = -88.0;
  double wall_loss_db = 5.0;
  double session_duration_s = 60.0;
  std::uint64_t seed = 0;

  /// Throws Error(InvalidArgument) when an invariant is broken.
  void validate() const;
  const SimPosition& position(std::string_view position_id) const;
  bool operator==(const SimScenario&) const = default;
};

struct Segment {
  Point a, b;
};

/// Distinct room edges (shared walls counted once).
std::vector<Segment> wall_segments(const SimScenario& scenario);
int walls_crossed(std::span<const Segment> walls, Point from, Point to);

/// tx - L0 - 10 n log10(max(d, d0) / d0) - wall_loss * walls crossed.
double rssi_at(const SimScenario& scenario, const AccessPoint& ap, Point point);

/// Beacon stream at one position: every AP emits at its interval (+-10%
/// jitter) from a random phase; each emission gets Gaussian shadowing, is
/// dropped below the detection floor, and is otherwise rounded to integer dBm
/// and clamped to [-99, 0].
CaptureSession simulate_session(const SimScenario& scenario, std::string_view position_id);
std::vector<CaptureSession> simulate_sessions(const SimScenario& scenario, unsigned jobs = 1);

/// `count` independent one-reading-per-AP snapshots at a position.
std::vector<SystemSnapshot> simulate_system_snapshots(const SimScenario& scenario, std::string_view position_id,
                                                      std::size_t count);
std::vector<SystemSnapshot> simulate_all_system_snapshots(const SimScenario& scenario,
                                                          std::size_t count_per_position);

/// Eight rooms along a corridor, twenty APs, two or three positions per room.
SimScenario default_hospital_like_scenario(std::uint64_t seed);

std::string scenario_to_json(const SimScenario& scenario);
SimScenario scenario_from_json(std::string_view json_text);
SimScenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const SimScenario& scenario);

}  // namespace dataloc::sim
