#include "dataloc/text.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dataloc/error.hpp"

namespace dataloc::text {

namespace {

bool needs_escape(unsigned char c) {
  return c == '%' || c == ',' || c == '#' || c == '@' || c < 0x20 || c == 0x7f;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;  // lower-case hex is not canonical
}

}  // namespace

std::string encode_field(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (needs_escape(c)) {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

std::optional<std::string> decode_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto c = static_cast<unsigned char>(field[i]);
    if (c == '%') {
      if (i + 2 >= field.size()) return std::nullopt;
      const int hi = hex_value(field[i + 1]);
      const int lo = hex_value(field[i + 2]);
      if (hi < 0 || lo < 0) return std::nullopt;
      const auto decoded = static_cast<unsigned char>(hi * 16 + lo);
      if (!needs_escape(decoded)) return std::nullopt;  // non-canonical escape
      out.push_back(static_cast<char>(decoded));
      i += 2;
    } else if (needs_escape(c)) {
      return std::nullopt;
    } else {
      out.push_back(field[i]);
    }
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // fold -0 into 0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_basis_points(std::string_view s) {
  const auto v = parse_double(s);
  if (!v) return std::nullopt;
  const double scaled = *v * 10000.0;
  const double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) > 1e-6) return std::nullopt;
  return static_cast<std::int64_t>(rounded);
}

std::string format_basis_points(std::int64_t bp) {
  std::string out = bp < 0 ? "-" : "";
  const std::int64_t mag = bp < 0 ? -bp : bp;
  out += std::to_string(mag / 10000);
  std::int64_t frac = mag % 10000;
  if (frac != 0) {
    std::string digits = std::to_string(frac);
    digits.insert(0, 4 - digits.size(), '0');
    while (digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::vector<std::string_view> lines(std::string_view contents) {
  std::vector<std::string_view> out;
  if (contents.empty()) return out;
  auto parts = split(contents, '\n');
  if (parts.back().empty()) parts.pop_back();
  return parts;
}

std::vector<NumberedLine> data_lines(std::string_view contents) {
  std::vector<NumberedLine> out;
  const auto all = lines(contents);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].empty() || all[i].front() == '#') continue;
    out.push_back({i + 1, all[i]});
  }
  return out;
}

}  // namespace dataloc::text
