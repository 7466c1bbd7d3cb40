#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dataloc/augment.hpp"
#include "dataloc/beacon_log.hpp"
#include "dataloc/features.hpp"

namespace dataloc::testing {

using Gen = std::mt19937_64;

inline int uniform_int(Gen& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

inline std::string random_bssid(Gen& g) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", uniform_int(g, 0, 255), uniform_int(g, 0, 255),
                uniform_int(g, 0, 255), uniform_int(g, 0, 255), uniform_int(g, 0, 255), uniform_int(g, 0, 255));
  return buf;
}

inline std::vector<std::string> random_devices(Gen& g, int count) {
  std::set<std::string> out;
  while (static_cast<int>(out.size()) < count) out.insert(random_bssid(g));
  return {out.begin(), out.end()};
}

/// Awkward strings exercise field escaping.
inline std::string random_name(Gen& g, const std::string& stem) {
  static const char* kSpice[] = {"", ",x", "#1", "%", "@a", " b", "é", "\t"};
  return stem + std::to_string(uniform_int(g, 0, 999)) + kSpice[uniform_int(g, 0, 7)];
}

inline BeaconRecord random_record(Gen& g, const std::vector<std::string>& devices, std::int64_t t) {
  BeaconRecord r;
  r.timestamp_us = t;
  r.bssid = devices[static_cast<std::size_t>(uniform_int(g, 0, static_cast<int>(devices.size()) - 1))];
  r.ssid = uniform_int(g, 0, 4) == 0 ? "" : "net" + std::to_string(uniform_int(g, 0, 3));
  if (uniform_int(g, 0, 1) == 0) {
    r.channel = uniform_int(g, 1, 14);
    r.band = Band::Band2_4GHz;
  } else {
    r.channel = uniform_int(g, 32, 177);
    r.band = Band::Band5GHz;
  }
  r.rssi_dbm = uniform_int(g, kMinRssiDbm, kMaxRssiDbm);
  return r;
}

inline CaptureSession random_session(Gen& g, int max_frames, int max_devices, std::string position,
                                     std::string zone) {
  const auto devices = random_devices(g, uniform_int(g, 1, max_devices));
  CaptureSession s;
  s.position_id = std::move(position);
  s.zone_label = std::move(zone);
  const int n = uniform_int(g, 1, max_frames);
  std::int64_t t = 0;
  for (int i = 0; i < n; ++i) {
    t += uniform_int(g, 0, 200000);
    s.records.push_back(random_record(g, devices, t));
  }
  s.duration_us = t + uniform_int(g, 0, 1000);
  return s;
}

inline std::vector<CaptureSession> random_sessions(Gen& g, int count, int max_frames, int max_devices) {
  std::vector<CaptureSession> out;
  std::set<std::string> used;
  while (static_cast<int>(out.size()) < count) {
    auto position = random_name(g, "p");
    if (!used.insert(position).second) continue;
    out.push_back(random_session(g, max_frames, max_devices, position, random_name(g, "zone")));
  }
  return out;
}

inline PortionRange random_range(Gen& g, int max_reps = 4) {
  PortionRange r;
  r.start_bp = uniform_int(g, 1, 10000);
  r.end_bp = uniform_int(g, static_cast<int>(r.start_bp), 10000);
  r.step_bp = uniform_int(g, 1, 10000);
  if (uniform_int(g, 0, 1) == 0) r.step_bp = uniform_int(g, 100, 3000);
  r.reps = uniform_int(g, 1, max_reps);
  return r;
}

inline std::vector<SystemSnapshot> random_system_snapshots(Gen& g, int count) {
  const auto devices = random_devices(g, 8);
  std::vector<SystemSnapshot> out;
  std::vector<std::pair<std::string, std::string>> positions;
  for (int i = 0; i < 3; ++i) positions.emplace_back(random_name(g, "p") + std::to_string(i), random_name(g, "z"));
  for (int i = 0; i < count; ++i) {
    const auto& [pos, zone] = positions[static_cast<std::size_t>(uniform_int(g, 0, 2))];
    SystemSnapshot s{pos, zone, {}};
    const int k = uniform_int(g, 1, 8);
    for (int j = 0; j < k; ++j) {
      s.readings[devices[static_cast<std::size_t>(uniform_int(g, 0, 7))]] = uniform_int(g, kMinRssiDbm, kMaxRssiDbm);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Snapshot> random_snapshots(Gen& g, int count) {
  const auto devices = random_devices(g, 6);
  std::vector<Snapshot> out;
  for (int i = 0; i < count; ++i) {
    Snapshot s;
    s.position_id = "p" + std::to_string(uniform_int(g, 0, 3));
    s.zone_label = "zone-" + s.position_id;
    const int k = uniform_int(g, 1, 6);
    for (int j = 0; j < k; ++j) {
      const int total = uniform_int(g, kMinRssiDbm * 7, 0);
      s.readings[devices[static_cast<std::size_t>(uniform_int(g, 0, 5))]] = total / 7.0;
    }
    if (uniform_int(g, 0, 2) != 0) {
      s.provenance = Augmentation{uniform_int(g, 1, 10000), uniform_int(g, 1, 5), uniform_int(g, 1, 3000)};
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Labels are a noisy function of the features so trees have structure.
inline FeatureMatrix random_matrix(Gen& g, int rows, int features, int classes) {
  FeatureMatrix m;
  m.device_universe = random_devices(g, features);
  for (int r = 0; r < rows; ++r) {
    const int c = r < classes ? r : uniform_int(g, 0, classes - 1);
    m.labels.push_back("class" + std::to_string(c));
    for (int f = 0; f < features; ++f) {
      const int base = -40 - 8 * ((c + f) % classes);
      double v = std::clamp(base + uniform_int(g, -6, 6), kMinRssiDbm, kMaxRssiDbm);
      if (uniform_int(g, 0, 9) == 0) v = kFillDbm;
      m.values.push_back(v);
    }
  }
  return m;
}

}  // namespace dataloc::testing
