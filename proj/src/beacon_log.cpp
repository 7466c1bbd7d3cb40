#include "dataloc/beacon_log.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "dataloc/error.hpp"
#include "dataloc/text.hpp"

namespace dataloc {

std::string_view band_name(Band band) noexcept {
  return band == Band::Band2_4GHz ? "2.4GHz" : "5GHz";
}

std::optional<Band> parse_band(std::string_view s) noexcept {
  if (s == "2.4GHz") return Band::Band2_4GHz;
  if (s == "5GHz") return Band::Band5GHz;
  return std::nullopt;
}

std::optional<Band> band_for_channel(int channel) noexcept {
  if (channel >= 1 && channel <= 14) return Band::Band2_4GHz;
  if (channel >= 32 && channel <= 177) return Band::Band5GHz;
  return std::nullopt;
}

bool is_canonical_bssid(std::string_view s) noexcept {
  if (s.size() != 17) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (i % 3 == 2) {
      if (c != ':') return false;
    } else if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      return false;
    }
  }
  return true;
}

std::optional<std::string> canonicalize_bssid(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (!is_canonical_bssid(out)) return std::nullopt;
  return out;
}

void validate_record(const BeaconRecord& r) {
  if (r.timestamp_us < 0) throw Error(Errc::InvalidArgument, "negative timestamp");
  if (!is_canonical_bssid(r.bssid)) throw Error(Errc::InvalidArgument, "bad bssid '" + r.bssid + "'");
  if (r.rssi_dbm < kMinRssiDbm || r.rssi_dbm > kMaxRssiDbm) {
    throw Error(Errc::InvalidArgument, "rssi " + std::to_string(r.rssi_dbm) + " out of range");
  }
  const auto expected = band_for_channel(r.channel);
  if (!expected) throw Error(Errc::InvalidArgument, "unknown channel " + std::to_string(r.channel));
  if (*expected != r.band) {
    throw Error(Errc::BandChannelMismatch, "channel " + std::to_string(r.channel) + " is not in " +
                                               std::string(band_name(r.band)));
  }
}

void validate_session(const CaptureSession& s) {
  if (s.position_id.empty()) throw Error(Errc::MissingPosition, "session without position_id");
  if (s.zone_label.empty()) throw Error(Errc::InvalidArgument, "session without zone_label");
  if (s.records.empty()) throw Error(Errc::EmptySession, s.position_id);
  std::int64_t prev = 0;
  for (const auto& r : s.records) {
    validate_record(r);
    if (r.timestamp_us < prev) throw Error(Errc::InvalidArgument, "timestamps decrease in " + s.position_id);
    prev = r.timestamp_us;
  }
  if (prev > s.duration_us) {
    throw Error(Errc::InvalidArgument, "timestamp beyond duration in " + s.position_id);
  }
}

void validate_system_snapshot(const SystemSnapshot& s) {
  if (s.readings.empty()) throw Error(Errc::EmptyReadings, s.position_id);
  for (const auto& [bssid, rssi] : s.readings) {
    if (!is_canonical_bssid(bssid)) throw Error(Errc::InvalidArgument, "bad bssid '" + bssid + "'");
    if (rssi < kMinRssiDbm || rssi > kMaxRssiDbm) {
      throw Error(Errc::InvalidArgument, "rssi " + std::to_string(rssi) + " out of range");
    }
  }
}

std::set<std::string> hidden_devices(std::span<const CaptureSession> sessions) {
  std::map<std::string, bool> all_hidden;
  for (const auto& s : sessions) {
    for (const auto& r : s.records) {
      auto [it, inserted] = all_hidden.try_emplace(r.bssid, true);
      it->second = it->second && r.hidden();
    }
  }
  std::set<std::string> out;
  for (const auto& [bssid, hidden] : all_hidden) {
    if (hidden) out.insert(bssid);
  }
  return out;
}

namespace {

std::string decode_or_throw(std::string_view field, std::size_t line_no, const char* what) {
  auto v = text::decode_field(field);
  if (!v) throw Error(Errc::MalformedLine, line_no, std::string("bad escape in ") + what);
  return std::move(*v);
}

std::int64_t int_or_throw(std::string_view field, std::size_t line_no, const char* what) {
  auto v = text::parse_int(field);
  if (!v) throw Error(Errc::MalformedLine, line_no, std::string("bad integer for ") + what);
  return *v;
}

int rssi_or_throw(std::string_view field, std::size_t line_no) {
  const auto v = int_or_throw(field, line_no, "rssi_dbm");
  if (v == kFillDbm) throw Error(Errc::MalformedLine, line_no, "rssi -100 is the reserved fill value");
  if (v < kMinRssiDbm || v > kMaxRssiDbm) throw Error(Errc::MalformedLine, line_no, "rssi out of [-99, 0]");
  return static_cast<int>(v);
}

std::string bssid_or_throw(std::string_view field, std::size_t line_no) {
  auto v = canonicalize_bssid(field);
  if (!v) throw Error(Errc::MalformedLine, line_no, "bad bssid");
  return std::move(*v);
}

struct PendingSession {
  CaptureSession session;
  std::optional<std::int64_t> declared_duration;
  std::size_t declared_at = 0;
};

}  // namespace

std::vector<CaptureSession> parse_beacon_log_text(std::string_view contents) {
  const auto rows = text::data_lines(contents);
  if (rows.empty()) throw Error(Errc::MalformedLine, 1, "missing header");
  if (rows.front().text != kBeaconLogHeader) {
    throw Error(Errc::MalformedLine, rows.front().number, "unexpected header");
  }

  std::vector<PendingSession> pending;
  std::unordered_map<std::string, std::size_t> index_of;
  auto session_for = [&](const std::string& position, const std::string& zone, std::size_t line_no) -> PendingSession& {
    auto [it, inserted] = index_of.try_emplace(position, pending.size());
    if (inserted) {
      pending.push_back({});
      pending.back().session.position_id = position;
      pending.back().session.zone_label = zone;
    }
    auto& p = pending[it->second];
    if (p.session.zone_label != zone) {
      throw Error(Errc::DuplicatePosition, line_no,
                  "position '" + position + "' has zones '" + p.session.zone_label + "' and '" + zone + "'");
    }
    return p;
  };

  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [line_no, line] = rows[i];
    const auto fields = text::split(line, ',');
    if (!fields.empty() && fields[0] == "@session") {
      if (fields.size() != 4) throw Error(Errc::MalformedLine, line_no, "session directive needs 4 fields");
      const auto position = decode_or_throw(fields[1], line_no, "position_id");
      const auto zone = decode_or_throw(fields[2], line_no, "zone_label");
      if (position.empty()) throw Error(Errc::MalformedLine, line_no, "empty position_id");
      if (zone.empty()) throw Error(Errc::MalformedLine, line_no, "empty zone_label");
      const auto duration = int_or_throw(fields[3], line_no, "duration_us");
      if (duration < 0) throw Error(Errc::MalformedLine, line_no, "negative duration");
      auto& p = session_for(position, zone, line_no);
      if (p.declared_duration && *p.declared_duration != duration) {
        throw Error(Errc::DuplicatePosition, line_no, "conflicting durations for '" + position + "'");
      }
      p.declared_duration = duration;
      p.declared_at = line_no;
      continue;
    }
    if (fields.size() != 8) {
      throw Error(Errc::MalformedLine, line_no, "expected 8 fields, got " + std::to_string(fields.size()));
    }
    const auto position = decode_or_throw(fields[0], line_no, "position_id");
    const auto zone = decode_or_throw(fields[1], line_no, "zone_label");
    if (position.empty()) throw Error(Errc::MalformedLine, line_no, "empty position_id");
    if (zone.empty()) throw Error(Errc::MalformedLine, line_no, "empty zone_label");

    BeaconRecord r;
    r.timestamp_us = int_or_throw(fields[2], line_no, "timestamp_us");
    if (r.timestamp_us < 0) throw Error(Errc::MalformedLine, line_no, "negative timestamp");
    r.bssid = bssid_or_throw(fields[3], line_no);
    r.ssid = decode_or_throw(fields[4], line_no, "ssid");
    r.channel = static_cast<int>(int_or_throw(fields[5], line_no, "channel"));
    const auto band = parse_band(fields[6]);
    if (!band) throw Error(Errc::MalformedLine, line_no, "unknown band '" + std::string(fields[6]) + "'");
    r.band = *band;
    const auto implied = band_for_channel(r.channel);
    if (!implied) throw Error(Errc::MalformedLine, line_no, "unknown channel " + std::to_string(r.channel));
    if (*implied != r.band) throw Error(Errc::BandChannelMismatch, line_no, "channel/band mismatch");
    r.rssi_dbm = rssi_or_throw(fields[7], line_no);

    auto& p = session_for(position, zone, line_no);
    auto& records = p.session.records;
    if (!records.empty() && r.timestamp_us < records.back().timestamp_us) {
      throw Error(Errc::MalformedLine, line_no, "timestamp decreases within position '" + position + "'");
    }
    if (p.declared_duration && r.timestamp_us > *p.declared_duration) {
      throw Error(Errc::MalformedLine, line_no, "timestamp beyond declared duration");
    }
    records.push_back(std::move(r));
  }

  std::vector<CaptureSession> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    auto& s = p.session;
    if (s.records.empty()) throw Error(Errc::EmptySession, s.position_id);
    const auto last = s.records.back().timestamp_us;
    if (p.declared_duration) {
      if (last > *p.declared_duration) {
        throw Error(Errc::MalformedLine, p.declared_at, "timestamp beyond declared duration");
      }
      s.duration_us = *p.declared_duration;
    } else {
      s.duration_us = last;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaptureSession> parse_beacon_log(const std::filesystem::path& path) {
  return parse_beacon_log_text(text::read_file(path));
}

std::string format_beacon_log(std::span<const CaptureSession> sessions) {
  std::string out(kBeaconLogHeader);
  out += '\n';
  for (const auto& s : sessions) {
    validate_session(s);
    const auto position = text::encode_field(s.position_id);
    const auto zone = text::encode_field(s.zone_label);
    out += "@session," + position + ',' + zone + ',' + std::to_string(s.duration_us) + '\n';
    for (const auto& r : s.records) {
      out += position;
      out += ',';
      out += zone;
      out += ',';
      out += std::to_string(r.timestamp_us);
      out += ',';
      out += r.bssid;
      out += ',';
      out += text::encode_field(r.ssid);
      out += ',';
      out += std::to_string(r.channel);
      out += ',';
      out += band_name(r.band);
      out += ',';
      out += std::to_string(r.rssi_dbm);
      out += '\n';
    }
  }
  return out;
}

void write_beacon_log(const std::filesystem::path& path, std::span<const CaptureSession> sessions) {
  text::write_file(path, format_beacon_log(sessions));
}

std::vector<SystemSnapshot> parse_system_snapshots_text(std::string_view contents) {
  const auto rows = text::data_lines(contents);
  if (rows.empty()) throw Error(Errc::MalformedLine, 1, "missing header");
  if (rows.front().text != kSystemSnapshotHeader) {
    throw Error(Errc::MalformedLine, rows.front().number, "unexpected header");
  }

  std::vector<SystemSnapshot> out;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> index_of;
  std::unordered_map<std::string, std::string> zone_of;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [line_no, line] = rows[i];
    const auto fields = text::split(line, ',');
    if (fields.size() != 5) {
      throw Error(Errc::MalformedLine, line_no, "expected 5 fields, got " + std::to_string(fields.size()));
    }
    auto position = decode_or_throw(fields[0], line_no, "position_id");
    auto zone = decode_or_throw(fields[1], line_no, "zone_label");
    if (position.empty()) throw Error(Errc::MalformedLine, line_no, "empty position_id");
    if (zone.empty()) throw Error(Errc::MalformedLine, line_no, "empty zone_label");
    const auto snapshot_index = int_or_throw(fields[2], line_no, "snapshot_index");
    auto bssid = bssid_or_throw(fields[3], line_no);
    const int rssi = rssi_or_throw(fields[4], line_no);

    auto [zit, fresh_zone] = zone_of.try_emplace(position, zone);
    if (zit->second != zone) {
      throw Error(Errc::DuplicatePosition, line_no, "position '" + position + "' has two zones");
    }
    auto [it, inserted] = index_of.try_emplace({position, snapshot_index}, out.size());
    if (inserted) out.push_back({std::move(position), std::move(zone), {}});
    auto& snap = out[it->second];
    if (!snap.readings.emplace(std::move(bssid), rssi).second) {
      throw Error(Errc::MalformedLine, line_no, "bssid repeated within one snapshot");
    }
  }
  return out;
}

std::vector<SystemSnapshot> parse_system_snapshots(const std::filesystem::path& path) {
  return parse_system_snapshots_text(text::read_file(path));
}

std::string format_system_snapshots(std::span<const SystemSnapshot> snapshots) {
  std::string out(kSystemSnapshotHeader);
  out += '\n';
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& s = snapshots[i];
    if (s.position_id.empty()) throw Error(Errc::MissingPosition, "snapshot without position_id");
    validate_system_snapshot(s);
    const auto prefix = text::encode_field(s.position_id) + ',' + text::encode_field(s.zone_label) + ',' +
                        std::to_string(i) + ',';
    for (const auto& [bssid, rssi] : s.readings) {
      out += prefix + bssid + ',' + std::to_string(rssi) + '\n';
    }
  }
  return out;
}

void write_system_snapshots(const std::filesystem::path& path,
                            std::span<const SystemSnapshot> snapshots) {
  text::write_file(path, format_system_snapshots(snapshots));
}

}  // namespace dataloc
