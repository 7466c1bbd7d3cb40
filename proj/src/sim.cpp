#include "dataloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

#include <json.hpp>

#include "dataloc/error.hpp"
#include "dataloc/parallel.hpp"
#include "dataloc/random.hpp"
#include "dataloc/text.hpp"

namespace dataloc::sim {

namespace {

constexpr std::uint64_t kSessionStream = 1;
constexpr std::uint64_t kSnapshotStream = 2;

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool segments_cross(const Segment& s, Point p, Point q) {
  const double d1 = cross(p, q, s.a);
  const double d2 = cross(p, q, s.b);
  const double d3 = cross(s.a, s.b, p);
  const double d4 = cross(s.a, s.b, q);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

int received_dbm(double expected, double sigma, CounterRng& rng, double floor, bool& detected) {
  const double received = expected + sigma * rng.normal();
  detected = received >= floor;
  return static_cast<int>(std::clamp(std::round(received), static_cast<double>(kMinRssiDbm),
                                     static_cast<double>(kMaxRssiDbm)));
}

}  // namespace

void SimScenario::validate() const {
  if (rooms.empty()) throw Error(Errc::InvalidArgument, "scenario has no rooms");
  for (const auto& r : rooms) {
    if (r.zone_label.empty() || !(r.x0 < r.x1) || !(r.y0 < r.y1)) {
      throw Error(Errc::InvalidArgument, "degenerate room '" + r.zone_label + "'");
    }
  }
  if (!(pathloss.exponent > 0)) throw Error(Errc::InvalidArgument, "path-loss exponent must be positive");
  if (!(pathloss.reference_distance_m > 0)) throw Error(Errc::InvalidArgument, "reference distance must be positive");
  if (!(shadowing_sigma_db >= 0)) throw Error(Errc::InvalidArgument, "shadowing sigma must be >= 0");
  if (!(detection_floor_dbm < 0)) throw Error(Errc::InvalidArgument, "detection floor must be negative");
  if (!(wall_loss_db >= 0)) throw Error(Errc::InvalidArgument, "wall loss must be >= 0");
  if (!(session_duration_s > 0)) throw Error(Errc::InvalidArgument, "session duration must be positive");

  std::set<std::string> bssids;
  for (const auto& ap : aps) {
    if (!is_canonical_bssid(ap.bssid)) throw Error(Errc::InvalidArgument, "bad AP bssid '" + ap.bssid + "'");
    if (!bssids.insert(ap.bssid).second) throw Error(Errc::InvalidArgument, "duplicate AP " + ap.bssid);
    if (!(ap.beacon_interval_ms > 0)) throw Error(Errc::InvalidArgument, "beacon interval must be positive");
    if (band_for_channel(ap.channel) != ap.band) {
      throw Error(Errc::BandChannelMismatch, "AP " + ap.bssid + " channel/band mismatch");
    }
  }
  std::set<std::string> ids;
  for (const auto& p : positions) {
    if (p.position_id.empty()) throw Error(Errc::MissingPosition, "position without id");
    if (!ids.insert(p.position_id).second) throw Error(Errc::InvalidArgument, "duplicate position " + p.position_id);
    const auto inside = std::count_if(rooms.begin(), rooms.end(), [&](const Room& r) { return r.contains(p.at); });
    if (inside != 1) throw Error(Errc::InvalidArgument, "position " + p.position_id + " is not inside exactly one room");
    const auto& room = *std::find_if(rooms.begin(), rooms.end(), [&](const Room& r) { return r.contains(p.at); });
    if (room.zone_label != p.zone_label) {
      throw Error(Errc::InvalidArgument, "position " + p.position_id + " lies in " + room.zone_label);
    }
  }
}

const SimPosition& SimScenario::position(std::string_view position_id) const {
  for (const auto& p : positions) {
    if (p.position_id == position_id) return p;
  }
  throw Error(Errc::UnknownPosition, std::string(position_id));
}

std::vector<Segment> wall_segments(const SimScenario& scenario) {
  std::set<std::tuple<double, double, double, double>> seen;
  std::vector<Segment> out;
  auto add = [&](Point a, Point b) {
    if (std::tie(b.x, b.y) < std::tie(a.x, a.y)) std::swap(a, b);
    if (seen.emplace(a.x, a.y, b.x, b.y).second) out.push_back({a, b});
  };
  for (const auto& r : scenario.rooms) {
    add({r.x0, r.y0}, {r.x1, r.y0});
    add({r.x0, r.y1}, {r.x1, r.y1});
    add({r.x0, r.y0}, {r.x0, r.y1});
    add({r.x1, r.y0}, {r.x1, r.y1});
  }
  return out;
}

int walls_crossed(std::span<const Segment> walls, Point from, Point to) {
  return static_cast<int>(std::count_if(walls.begin(), walls.end(),
                                        [&](const Segment& s) { return segments_cross(s, from, to); }));
}

namespace {

double expected_rssi(const SimScenario& s, const AccessPoint& ap, Point point, std::span<const Segment> walls) {
  const double d0 = s.pathloss.reference_distance_m;
  const double d = std::max(distance(ap.position, point), d0);
  return ap.tx_power_dbm - s.pathloss.reference_loss_db - 10.0 * s.pathloss.exponent * std::log10(d / d0) -
         s.wall_loss_db * walls_crossed(walls, ap.position, point);
}

}  // namespace

double rssi_at(const SimScenario& scenario, const AccessPoint& ap, Point point) {
  const auto walls = wall_segments(scenario);
  return expected_rssi(scenario, ap, point, walls);
}

CaptureSession simulate_session(const SimScenario& scenario, std::string_view position_id) {
  const auto& pos = scenario.position(position_id);
  const auto walls = wall_segments(scenario);
  const double duration_ms = scenario.session_duration_s * 1000.0;

  struct Frame {
    std::int64_t t_us;
    std::size_t ap;
    BeaconRecord record;
  };
  std::vector<Frame> frames;
  for (std::size_t j = 0; j < scenario.aps.size(); ++j) {
    const auto& ap = scenario.aps[j];
    const double expected = expected_rssi(scenario, ap, pos.at, walls);
    CounterRng rng(derive_seed(scenario.seed, {kSessionStream, fnv1a64(pos.position_id), j}));
    for (double t = rng.uniform(0.0, ap.beacon_interval_ms); t < duration_ms;
         t += ap.beacon_interval_ms * rng.uniform(0.9, 1.1)) {
      bool detected = false;
      const int rssi = received_dbm(expected, scenario.shadowing_sigma_db, rng, scenario.detection_floor_dbm, detected);
      if (!detected) continue;
      const auto t_us = std::llround(t * 1000.0);
      frames.push_back({t_us, j, BeaconRecord{t_us, ap.bssid, ap.ssid, ap.channel, ap.band, rssi}});
    }
  }
  std::sort(frames.begin(), frames.end(),
            [](const Frame& a, const Frame& b) { return std::tie(a.t_us, a.ap) < std::tie(b.t_us, b.ap); });

  CaptureSession session;
  session.position_id = pos.position_id;
  session.zone_label = pos.zone_label;
  session.duration_us = std::llround(scenario.session_duration_s * 1e6);
  session.records.reserve(frames.size());
  for (auto& f : frames) session.records.push_back(std::move(f.record));
  if (session.records.empty()) throw Error(Errc::EmptySession, pos.position_id + ": no AP above the detection floor");
  return session;
}

std::vector<CaptureSession> simulate_sessions(const SimScenario& scenario, unsigned jobs) {
  std::vector<CaptureSession> out(scenario.positions.size());
  parallel_for(out.size(), jobs,
               [&](std::size_t i) { out[i] = simulate_session(scenario, scenario.positions[i].position_id); });
  return out;
}

std::vector<SystemSnapshot> simulate_system_snapshots(const SimScenario& scenario, std::string_view position_id,
                                                      std::size_t count) {
  if (count < 1) throw Error(Errc::InvalidArgument, "snapshot count must be >= 1");
  const auto& pos = scenario.position(position_id);
  const auto walls = wall_segments(scenario);
  std::vector<double> expected;
  for (const auto& ap : scenario.aps) expected.push_back(expected_rssi(scenario, ap, pos.at, walls));

  std::vector<SystemSnapshot> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    CounterRng rng(derive_seed(scenario.seed, {kSnapshotStream, fnv1a64(pos.position_id), k}));
    SystemSnapshot snap{pos.position_id, pos.zone_label, {}};
    for (std::size_t j = 0; j < scenario.aps.size(); ++j) {
      bool detected = false;
      const int rssi =
          received_dbm(expected[j], scenario.shadowing_sigma_db, rng, scenario.detection_floor_dbm, detected);
      if (detected) snap.readings.emplace(scenario.aps[j].bssid, rssi);
    }
    if (snap.readings.empty()) {
      throw Error(Errc::EmptyReadings, pos.position_id + ": snapshot " + std::to_string(k) + " detected nothing");
    }
    out.push_back(std::move(snap));
  }
  return out;
}

std::vector<SystemSnapshot> simulate_all_system_snapshots(const SimScenario& scenario,
                                                          std::size_t count_per_position) {
  std::vector<SystemSnapshot> out;
  for (const auto& p : scenario.positions) {
    auto snaps = simulate_system_snapshots(scenario, p.position_id, count_per_position);
    out.insert(out.end(), std::make_move_iterator(snaps.begin()), std::make_move_iterator(snaps.end()));
  }
  return out;
}

SimScenario default_hospital_like_scenario(std::uint64_t seed) {
  constexpr int kRoomsPerSide = 4;
  constexpr double kRoomWidth = 6.0;
  constexpr double kRoomDepth = 6.0;
  constexpr double kCorridor = 2.0;
  constexpr int kApCount = 20;
  constexpr double kMargin = 0.8;
  constexpr double kMinPositionSpacing = 2.0;

  SimScenario s;
  s.seed = seed;
  s.pathloss = {3.0, 1.0, 50.0};
  s.shadowing_sigma_db = 9.0;
  s.detection_floor_dbm = -74.0;
  s.wall_loss_db = 4.0;
  s.session_duration_s = 40.0;
  CounterRng rng(derive_seed(seed, {0x5ce7a710ULL}));

  for (int side = 0; side < 2; ++side) {
    const double y0 = side == 0 ? 0.0 : kRoomDepth + kCorridor;
    for (int i = 0; i < kRoomsPerSide; ++i) {
      s.rooms.push_back({"room" + std::to_string(side * kRoomsPerSide + i + 1), i * kRoomWidth, y0,
                         (i + 1) * kRoomWidth, y0 + kRoomDepth});
    }
  }
  const double width = kRoomsPerSide * kRoomWidth;
  const double height = 2 * kRoomDepth + kCorridor;

  static constexpr int kChannels24[] = {1, 6, 11};
  static constexpr int kChannels5[] = {36, 40, 44, 48, 149, 153, 157, 161};
  std::set<std::string> used;
  for (int j = 0; j < kApCount; ++j) {
    AccessPoint ap;
    do {
      char buf[18];
      std::snprintf(buf, sizeof buf, "02:%02x:%02x:%02x:%02x:%02x", static_cast<unsigned>(rng.below(256)),
                    static_cast<unsigned>(rng.below(256)), static_cast<unsigned>(rng.below(256)),
                    static_cast<unsigned>(rng.below(256)), static_cast<unsigned>(rng.below(256)));
      ap.bssid = buf;
    } while (!used.insert(ap.bssid).second);
    // The last AP broadcasts a hidden SSID.
    ap.ssid = j == kApCount - 1 ? "" : "net-" + std::to_string(j / 4 + 1);
    ap.position = {rng.uniform(0.3, width - 0.3), rng.uniform(0.3, height - 0.3)};
    ap.tx_power_dbm = rng.uniform(15.0, 20.0);
    if (rng.below(2) == 0) {
      ap.channel = kChannels24[rng.below(std::size(kChannels24))];
      ap.band = Band::Band2_4GHz;
    } else {
      ap.channel = kChannels5[rng.below(std::size(kChannels5))];
      ap.band = Band::Band5GHz;
    }
    ap.beacon_interval_ms = 102.4;
    s.aps.push_back(std::move(ap));
  }

  for (std::size_t r = 0; r < s.rooms.size(); ++r) {
    const auto& room = s.rooms[r];
    const auto count = 2 + static_cast<int>(rng.below(2));
    std::vector<Point> placed;
    while (static_cast<int>(placed.size()) < count) {
      const Point p{rng.uniform(room.x0 + kMargin, room.x1 - kMargin), rng.uniform(room.y0 + kMargin, room.y1 - kMargin)};
      const bool spaced = std::all_of(placed.begin(), placed.end(),
                                      [&](Point q) { return distance(p, q) >= kMinPositionSpacing; });
      if (spaced) placed.push_back(p);
    }
    for (std::size_t k = 0; k < placed.size(); ++k) {
      s.positions.push_back({"r" + std::to_string(r + 1) + "p" + std::to_string(k + 1), room.zone_label, placed[k]});
    }
  }
  s.validate();
  return s;
}

namespace {

using nlohmann::json;

json point_json(Point p) { return json::array({p.x, p.y}); }

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(Errc::InvalidArgument, "point must be [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

std::string scenario_to_json(const SimScenario& s) {
  json j;
  j["seed"] = s.seed;
  j["pathloss"] = {{"exponent", s.pathloss.exponent},
                   {"reference_distance_m", s.pathloss.reference_distance_m},
                   {"reference_loss_db", s.pathloss.reference_loss_db}};
  j["shadowing_sigma_db"] = s.shadowing_sigma_db;
  j["detection_floor_dbm"] = s.detection_floor_dbm;
  j["wall_loss_db"] = s.wall_loss_db;
  j["session_duration_s"] = s.session_duration_s;
  j["rooms"] = json::array();
  for (const auto& r : s.rooms) {
    j["rooms"].push_back({{"zone_label", r.zone_label}, {"min", point_json({r.x0, r.y0})}, {"max", point_json({r.x1, r.y1})}});
  }
  j["aps"] = json::array();
  for (const auto& ap : s.aps) {
    j["aps"].push_back({{"bssid", ap.bssid},
                        {"ssid", ap.ssid},
                        {"position", point_json(ap.position)},
                        {"tx_power_dbm", ap.tx_power_dbm},
                        {"channel", ap.channel},
                        {"band", band_name(ap.band)},
                        {"beacon_interval_ms", ap.beacon_interval_ms}});
  }
  j["positions"] = json::array();
  for (const auto& p : s.positions) {
    j["positions"].push_back({{"position_id", p.position_id}, {"zone_label", p.zone_label}, {"at", point_json(p.at)}});
  }
  return j.dump(2) + "\n";
}

SimScenario scenario_from_json(std::string_view json_text) {
  SimScenario s;
  try {
    const auto j = json::parse(json_text);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("pathloss")) {
      const auto& pl = j.at("pathloss");
      s.pathloss.exponent = pl.value("exponent", s.pathloss.exponent);
      s.pathloss.reference_distance_m = pl.value("reference_distance_m", s.pathloss.reference_distance_m);
      s.pathloss.reference_loss_db = pl.value("reference_loss_db", s.pathloss.reference_loss_db);
    }
    s.shadowing_sigma_db = j.value("shadowing_sigma_db", s.shadowing_sigma_db);
    s.detection_floor_dbm = j.value("detection_floor_dbm", s.detection_floor_dbm);
    s.wall_loss_db = j.value("wall_loss_db", s.wall_loss_db);
    s.session_duration_s = j.value("session_duration_s", s.session_duration_s);
    for (const auto& r : j.at("rooms")) {
      const auto lo = point_from(r.at("min"));
      const auto hi = point_from(r.at("max"));
      s.rooms.push_back({r.at("zone_label").get<std::string>(), lo.x, lo.y, hi.x, hi.y});
    }
    for (const auto& a : j.at("aps")) {
      AccessPoint ap;
      ap.bssid = a.at("bssid").get<std::string>();
      ap.ssid = a.value("ssid", std::string{});
      ap.position = point_from(a.at("position"));
      ap.tx_power_dbm = a.value("tx_power_dbm", ap.tx_power_dbm);
      ap.channel = a.at("channel").get<int>();
      const auto band = band_for_channel(ap.channel);
      if (a.contains("band")) {
        const auto named = parse_band(a.at("band").get<std::string>());
        if (!named) throw Error(Errc::InvalidArgument, "unknown band for " + ap.bssid);
        ap.band = *named;
      } else if (band) {
        ap.band = *band;
      }
      ap.beacon_interval_ms = a.value("beacon_interval_ms", ap.beacon_interval_ms);
      s.aps.push_back(std::move(ap));
    }
    for (const auto& p : j.at("positions")) {
      s.positions.push_back(
          {p.at("position_id").get<std::string>(), p.at("zone_label").get<std::string>(), point_from(p.at("at"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("scenario file: ") + e.what());
  }
  s.validate();
  return s;
}

SimScenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(text::read_file(path)); }

void save_scenario(const std::filesystem::path& path, const SimScenario& scenario) {
  text::write_file(path, scenario_to_json(scenario));
}

}  // namespace dataloc::sim
