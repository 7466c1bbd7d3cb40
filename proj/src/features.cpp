#include "dataloc/features.hpp"

#include <algorithm>
#include <cmath>

#include "dataloc/error.hpp"
#include "dataloc/random.hpp"
#include "dataloc/text.hpp"

namespace dataloc {

namespace {

bool valid_cell(double v) { return v == kFillDbm || (v >= kMinRssiDbm && v <= kMaxRssiDbm); }

void require_sorted_unique(std::span<const std::string> universe) {
  for (std::size_t i = 1; i < universe.size(); ++i) {
    if (!(universe[i - 1] < universe[i])) {
      throw Error(Errc::InvalidArgument, "device universe must be sorted and duplicate-free");
    }
  }
}

}  // namespace

void FeatureMatrix::validate() const {
  if (labels.empty()) throw Error(Errc::EmptyMatrix, "feature matrix has no rows");
  if (device_universe.empty()) throw Error(Errc::EmptyUniverse, "feature matrix has no columns");
  require_sorted_unique(device_universe);
  if (values.size() != rows() * cols()) throw Error(Errc::InvalidArgument, "value count does not match shape");
  for (const auto& label : labels) {
    if (label.empty()) throw Error(Errc::InvalidArgument, "empty class label");
  }
  for (double v : values) {
    if (!valid_cell(v)) throw Error(Errc::InvalidArgument, "cell value " + text::format_double(v));
  }
}

std::vector<double> project_readings(const std::map<std::string, double>& readings,
                                     std::span<const std::string> universe) {
  std::vector<double> row(universe.size(), kFillDbm);
  for (std::size_t c = 0; c < universe.size(); ++c) {
    if (auto it = readings.find(universe[c]); it != readings.end()) row[c] = it->second;
  }
  return row;
}

FeatureMatrix build_feature_matrix(std::span<const Snapshot> snapshots, const FeatureOptions& options) {
  if (snapshots.empty()) throw Error(Errc::EmptyInput, "no snapshots");
  FeatureMatrix m;
  if (options.universe) {
    require_sorted_unique(*options.universe);
    for (const auto& bssid : *options.universe) {
      if (!options.excluded_devices.contains(bssid)) m.device_universe.push_back(bssid);
    }
  } else {
    std::set<std::string> all;
    for (const auto& s : snapshots) {
      for (const auto& [bssid, v] : s.readings) {
        if (!options.excluded_devices.contains(bssid)) all.insert(bssid);
      }
    }
    m.device_universe.assign(all.begin(), all.end());
  }
  if (m.device_universe.empty()) throw Error(Errc::EmptyUniverse, "no feature columns");

  m.values.reserve(snapshots.size() * m.cols());
  for (const auto& s : snapshots) {
    if (s.zone_label.empty()) throw Error(Errc::InvalidArgument, "snapshot without zone_label");
    const auto row = project_readings(s.readings, m.device_universe);
    m.values.insert(m.values.end(), row.begin(), row.end());
    m.labels.push_back(s.zone_label);
  }
  m.validate();
  return m;
}

FeatureMatrix project_matrix(const FeatureMatrix& matrix, std::span<const std::string> universe) {
  require_sorted_unique(universe);
  if (universe.empty()) throw Error(Errc::EmptyUniverse, "projection onto an empty universe");
  std::vector<std::optional<std::size_t>> source(universe.size());
  for (std::size_t c = 0; c < universe.size(); ++c) {
    auto it = std::lower_bound(matrix.device_universe.begin(), matrix.device_universe.end(), universe[c]);
    if (it != matrix.device_universe.end() && *it == universe[c]) {
      source[c] = static_cast<std::size_t>(it - matrix.device_universe.begin());
    }
  }
  FeatureMatrix out;
  out.device_universe.assign(universe.begin(), universe.end());
  out.labels = matrix.labels;
  out.values.reserve(matrix.rows() * universe.size());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const auto row = matrix.row(r);
    for (const auto& src : source) out.values.push_back(src ? row[*src] : static_cast<double>(kFillDbm));
  }
  return out;
}

FeatureMatrix select_rows(const FeatureMatrix& matrix, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.device_universe = matrix.device_universe;
  out.values.reserve(rows.size() * matrix.cols());
  for (std::size_t r : rows) {
    if (r >= matrix.rows()) throw Error(Errc::InvalidArgument, "row index out of range");
    const auto row = matrix.row(r);
    out.values.insert(out.values.end(), row.begin(), row.end());
    out.labels.push_back(matrix.labels[r]);
  }
  return out;
}

FeatureMatrix drop_unobserved_columns(const FeatureMatrix& matrix) {
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      if (matrix.values[r * matrix.cols() + c] != kFillDbm) {
        kept.push_back(matrix.device_universe[c]);
        break;
      }
    }
  }
  return project_matrix(matrix, kept);
}

TrainTestSplit split_stratified(const FeatureMatrix& matrix, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "test_fraction must lie in (0, 1)");
  }
  if (matrix.rows() == 0) throw Error(Errc::EmptyMatrix, "nothing to split");

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < matrix.rows(); ++r) by_class[matrix.labels[r]].push_back(r);

  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (auto& [label, rows] : by_class) {
    const auto n = rows.size();
    if (n < 2) throw Error(Errc::ClassTooSmall, label);
    auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    CounterRng rng(derive_seed(seed, {fnv1a64(label)}));
    fisher_yates(std::span(rows), rng);
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {select_rows(matrix, train_rows), select_rows(matrix, test_rows)};
}

std::string subzone_label(std::string_view zone_label, std::string_view position_id) {
  if (position_id.empty()) throw Error(Errc::MissingPosition, "cannot subdivide without position_id");
  std::string suffix = "/" + std::string(position_id);
  if (zone_label.ends_with(suffix)) return std::string(zone_label);
  return std::string(zone_label) + suffix;
}

namespace {

template <typename T>
std::vector<T> relabel(std::span<const T> items) {
  std::vector<T> out(items.begin(), items.end());
  for (auto& item : out) item.zone_label = subzone_label(item.zone_label, item.position_id);
  return out;
}

}  // namespace

std::vector<CaptureSession> subdivide_zones(std::span<const CaptureSession> sessions) {
  return relabel(sessions);
}
std::vector<Snapshot> subdivide_zones(std::span<const Snapshot> snapshots) { return relabel(snapshots); }
std::vector<SystemSnapshot> subdivide_zones(std::span<const SystemSnapshot> snapshots) {
  return relabel(snapshots);
}

std::string format_matrix(const FeatureMatrix& matrix) {
  matrix.validate();
  std::string out = "label";
  for (const auto& bssid : matrix.device_universe) out += ',' + bssid;
  out += '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out += text::encode_field(matrix.labels[r]);
    for (double v : matrix.row(r)) out += ',' + text::format_double(v);
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_matrix_text(std::string_view contents) {
  const auto rows = text::data_lines(contents);
  if (rows.empty()) throw Error(Errc::MalformedLine, 1, "missing header");
  const auto header = text::split(rows.front().text, ',');
  if (header.front() != "label") throw Error(Errc::MalformedLine, rows.front().number, "header must start with 'label'");
  FeatureMatrix m;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (!is_canonical_bssid(header[c])) {
      throw Error(Errc::MalformedLine, rows.front().number, "bad bssid column '" + std::string(header[c]) + "'");
    }
    m.device_universe.emplace_back(header[c]);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto [line_no, line] = rows[i];
    const auto fields = text::split(line, ',');
    if (fields.size() != header.size()) throw Error(Errc::MalformedLine, line_no, "wrong number of columns");
    auto label = text::decode_field(fields[0]);
    if (!label || label->empty()) throw Error(Errc::MalformedLine, line_no, "bad label");
    m.labels.push_back(std::move(*label));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto v = text::parse_double(fields[c]);
      if (!v || !valid_cell(*v)) throw Error(Errc::MalformedLine, line_no, "bad cell value");
      m.values.push_back(*v);
    }
  }
  m.validate();
  return m;
}

FeatureMatrix parse_matrix(const std::filesystem::path& path) { return parse_matrix_text(text::read_file(path)); }

void write_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  text::write_file(path, format_matrix(matrix));
}

}  // namespace dataloc
