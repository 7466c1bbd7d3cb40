#include "dataloc/augment.hpp"

#include <numeric>
#include <unordered_map>

#include "dataloc/error.hpp"
#include "dataloc/parallel.hpp"
#include "dataloc/random.hpp"
#include "dataloc/text.hpp"

namespace dataloc {

void PortionRange::validate() const {
  if (start_bp <= 0 || start_bp > end_bp || end_bp > kFullPortionBp) {
    throw Error(Errc::InvalidArgument, "portion range needs 0 < start <= end <= 1 (" + to_string() + ")");
  }
  if (step_bp <= 0) throw Error(Errc::InvalidArgument, "portion step must be positive");
  if (reps < 1) throw Error(Errc::InvalidArgument, "reps must be at least 1");
}

std::vector<std::int64_t> PortionRange::portions() const {
  validate();
  std::vector<std::int64_t> out;
  for (std::int64_t p = start_bp; p <= end_bp; p += step_bp) out.push_back(p);
  return out;
}

std::size_t PortionRange::portion_count() const {
  validate();
  return static_cast<std::size_t>((end_bp - start_bp) / step_bp + 1);
}

std::size_t PortionRange::snapshot_count() const {
  return portion_count() * static_cast<std::size_t>(reps);
}

PortionRange PortionRange::parse(std::string_view notation) {
  const auto parts = text::split(notation, ',');
  if (parts.size() != 4) {
    throw Error(Errc::InvalidArgument, "portion range must be start,end,step,reps: '" + std::string(notation) + "'");
  }
  PortionRange r;
  const auto start = text::parse_basis_points(parts[0]);
  const auto end = text::parse_basis_points(parts[1]);
  const auto step = text::parse_basis_points(parts[2]);
  const auto reps = text::parse_int(parts[3]);
  if (!start || !end || !step || !reps) {
    throw Error(Errc::InvalidArgument, "cannot parse portion range '" + std::string(notation) + "'");
  }
  r.start_bp = *start;
  r.end_bp = *end;
  r.step_bp = *step;
  r.reps = *reps;
  r.validate();
  return r;
}

std::string PortionRange::to_string() const {
  return text::format_basis_points(start_bp) + ',' + text::format_basis_points(end_bp) + ',' +
         text::format_basis_points(step_bp) + ',' + std::to_string(reps);
}

std::size_t chunk_size(std::int64_t portion_bp, std::size_t frame_count) {
  const auto n = static_cast<std::int64_t>(frame_count);
  const auto k = (portion_bp * n + kFullPortionBp - 1) / kFullPortionBp;
  return static_cast<std::size_t>(std::max<std::int64_t>(k, 1));
}

std::uint64_t shuffle_key(std::uint64_t seed, std::int64_t portion_bp, std::int64_t rep_index) {
  return derive_seed(seed, {static_cast<std::uint64_t>(portion_bp), static_cast<std::uint64_t>(rep_index)});
}

std::map<std::string, double> average_by_device(std::span<const BeaconRecord> records) {
  struct Sum {
    std::int64_t total = 0;
    std::int64_t count = 0;
  };
  std::map<std::string, Sum> sums;
  for (const auto& r : records) {
    auto& s = sums[r.bssid];
    s.total += r.rssi_dbm;
    ++s.count;
  }
  std::map<std::string, double> out;
  for (const auto& [bssid, s] : sums) {
    out.emplace_hint(out.end(), bssid, static_cast<double>(s.total) / static_cast<double>(s.count));
  }
  return out;
}

std::vector<Snapshot> dataloc_plus(const CaptureSession& session, const PortionRange& range,
                                   std::uint64_t seed, unsigned jobs) {
  if (session.records.empty()) throw Error(Errc::EmptySession, session.position_id);
  const auto portions = range.portions();
  const auto reps = static_cast<std::size_t>(range.reps);
  const auto n = session.records.size();

  std::vector<Snapshot> out(portions.size() * reps);
  parallel_for(out.size(), jobs, [&](std::size_t slot) {
    const auto portion_bp = portions[slot / reps];
    const auto rep_index = static_cast<std::int64_t>(slot % reps) + 1;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    CounterRng rng(shuffle_key(seed, portion_bp, rep_index));
    fisher_yates(std::span(order), rng);

    const auto k = chunk_size(portion_bp, n);
    std::vector<BeaconRecord> chunk;
    chunk.reserve(k);
    for (std::size_t i = 0; i < k; ++i) chunk.push_back(session.records[order[i]]);

    auto& snap = out[slot];
    snap.position_id = session.position_id;
    snap.zone_label = session.zone_label;
    snap.readings = average_by_device(chunk);
    snap.provenance = Augmentation{portion_bp, rep_index, static_cast<std::int64_t>(k)};
  });
  return out;
}

Snapshot online_snapshot(std::span<const BeaconRecord> window) {
  if (window.empty()) throw Error(Errc::EmptyWindow, "no beacons in window");
  Snapshot snap;
  snap.readings = average_by_device(window);
  return snap;
}

std::vector<BeaconRecord> select_window(std::span<const BeaconRecord> records, std::int64_t now_us,
                                        std::int64_t window_us) {
  if (window_us <= 0) throw Error(Errc::InvalidArgument, "window must be positive");
  std::vector<BeaconRecord> out;
  for (const auto& r : records) {
    if (r.timestamp_us > now_us - window_us && r.timestamp_us <= now_us) out.push_back(r);
  }
  return out;
}

std::vector<Snapshot> system_snapshots_to_snapshots(std::span<const SystemSnapshot> snapshots) {
  std::vector<Snapshot> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) {
    Snapshot snap;
    snap.position_id = s.position_id;
    snap.zone_label = s.zone_label;
    for (const auto& [bssid, rssi] : s.readings) snap.readings.emplace_hint(snap.readings.end(), bssid, rssi);
    out.push_back(std::move(snap));
  }
  return out;
}

void validate_snapshot(const Snapshot& s) {
  if (s.readings.empty()) throw Error(Errc::EmptyReadings, s.position_id);
  for (const auto& [bssid, v] : s.readings) {
    if (!is_canonical_bssid(bssid)) throw Error(Errc::InvalidArgument, "bad bssid '" + bssid + "'");
    if (!(v >= kMinRssiDbm && v <= kMaxRssiDbm)) {
      throw Error(Errc::InvalidArgument, "averaged rssi out of [-99, 0] for " + bssid);
    }
  }
  if (s.provenance) {
    const auto& p = *s.provenance;
    if (p.portion_bp <= 0 || p.portion_bp > kFullPortionBp || p.rep_index < 1 || p.frames_used < 1) {
      throw Error(Errc::InvalidArgument, "invalid provenance");
    }
  }
}

namespace {

Snapshot& snapshot_slot(std::vector<Snapshot>& out,
                        std::map<std::pair<std::string, std::int64_t>, std::size_t>& index_of,
                        std::string position, std::string zone, std::int64_t snapshot_index) {
  auto [it, inserted] = index_of.try_emplace({position, snapshot_index}, out.size());
  if (inserted) {
    Snapshot s;
    s.position_id = std::move(position);
    s.zone_label = std::move(zone);
    out.push_back(std::move(s));
  }
  return out[it->second];
}

}  // namespace

std::vector<Snapshot> parse_snapshots_text(std::string_view contents) {
  const auto rows = text::data_lines(contents);
  if (!rows.empty() && rows.front().text == kSystemSnapshotHeader) {
    return system_snapshots_to_snapshots(parse_system_snapshots_text(contents));
  }
  if (rows.empty()) throw Error(Errc::MalformedLine, 1, "missing header");
  if (rows.front().text != kSnapshotHeader) {
    throw Error(Errc::MalformedLine, rows.front().number, "unexpected header");
  }

  std::vector<Snapshot> out;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> index_of;
  std::unordered_map<std::string, std::string> zone_of;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [line_no, line] = rows[i];
    const auto f = text::split(line, ',');
    if (f.size() != 8) {
      throw Error(Errc::MalformedLine, line_no, "expected 8 fields, got " + std::to_string(f.size()));
    }
    auto position = text::decode_field(f[0]);
    auto zone = text::decode_field(f[1]);
    if (!position || !zone || position->empty() || zone->empty()) {
      throw Error(Errc::MalformedLine, line_no, "bad position_id or zone_label");
    }
    const auto snapshot_index = text::parse_int(f[2]);
    if (!snapshot_index) throw Error(Errc::MalformedLine, line_no, "bad snapshot_index");
    auto bssid = canonicalize_bssid(f[3]);
    if (!bssid) throw Error(Errc::MalformedLine, line_no, "bad bssid");
    const auto rssi = text::parse_double(f[4]);
    if (!rssi || *rssi < kMinRssiDbm || *rssi > kMaxRssiDbm) {
      throw Error(Errc::MalformedLine, line_no, "rssi missing or outside [-99, 0]");
    }

    std::optional<Augmentation> provenance;
    if (!(f[5].empty() && f[6].empty() && f[7].empty())) {
      const auto bp = text::parse_int(f[5]);
      const auto rep = text::parse_int(f[6]);
      const auto frames = text::parse_int(f[7]);
      if (!bp || !rep || !frames || *bp <= 0 || *bp > kFullPortionBp || *rep < 1 || *frames < 1) {
        throw Error(Errc::MalformedLine, line_no, "bad provenance columns");
      }
      provenance = Augmentation{*bp, *rep, *frames};
    }

    auto [zit, fresh] = zone_of.try_emplace(*position, *zone);
    if (zit->second != *zone) {
      throw Error(Errc::DuplicatePosition, line_no, "position '" + *position + "' has two zones");
    }
    const bool fresh_snapshot = !index_of.contains({*position, *snapshot_index});
    auto& snap = snapshot_slot(out, index_of, std::move(*position), std::move(*zone), *snapshot_index);
    if (fresh_snapshot) {
      snap.provenance = provenance;
    } else if (snap.provenance != provenance) {
      throw Error(Errc::MalformedLine, line_no, "provenance differs within one snapshot");
    }
    if (!snap.readings.emplace(std::move(*bssid), *rssi).second) {
      throw Error(Errc::MalformedLine, line_no, "bssid repeated within one snapshot");
    }
  }
  return out;
}

std::vector<Snapshot> parse_snapshots(const std::filesystem::path& path) {
  return parse_snapshots_text(text::read_file(path));
}

std::string format_snapshots(std::span<const Snapshot> snapshots) {
  std::string out(kSnapshotHeader);
  out += '\n';
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& s = snapshots[i];
    if (s.position_id.empty()) throw Error(Errc::MissingPosition, "snapshot without position_id");
    if (s.zone_label.empty()) throw Error(Errc::InvalidArgument, "snapshot without zone_label");
    validate_snapshot(s);
    const auto prefix = text::encode_field(s.position_id) + ',' + text::encode_field(s.zone_label) + ',' +
                        std::to_string(i) + ',';
    std::string suffix = ",,,";
    if (s.provenance) {
      suffix = ',' + std::to_string(s.provenance->portion_bp) + ',' + std::to_string(s.provenance->rep_index) +
               ',' + std::to_string(s.provenance->frames_used);
    }
    for (const auto& [bssid, v] : s.readings) {
      out += prefix + bssid + ',' + text::format_double(v) + suffix + '\n';
    }
  }
  return out;
}

void write_snapshots(const std::filesystem::path& path, std::span<const Snapshot> snapshots) {
  text::write_file(path, format_snapshots(snapshots));
}

}  // namespace dataloc
