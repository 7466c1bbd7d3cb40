#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dataloc::text {

/// Escapes `%`, `,`, `#`, `@`, CR, LF and other control bytes as %XX so that any
/// string survives a comma-separated, line-oriented field.
std::string encode_field(std::string_view raw);
/// Inverse of encode_field; nullopt on a malformed escape.
std::optional<std::string> decode_field(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

/// Parses a decimal fraction such as "0.125" into basis points (1250).
/// Rejects values that are not a whole number of basis points.
std::optional<std::int64_t> parse_basis_points(std::string_view s);
/// Formats basis points as a plain decimal ("0.125", "1").
std::string format_basis_points(std::int64_t bp);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Splits file contents into lines on LF; a trailing LF does not produce an
/// extra empty line.
std::vector<std::string_view> lines(std::string_view contents);

struct NumberedLine {
  std::size_t number;  // 1-based
  std::string_view text;
};

/// lines() minus `#` comments and empty lines, keeping original line numbers.
std::vector<NumberedLine> data_lines(std::string_view contents);

}  // namespace dataloc::text
