#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dataloc {

enum class Errc {
  MalformedLine,
  BandChannelMismatch,
  EmptySession,
  DuplicatePosition,
  EmptyReadings,
  EmptyWindow,
  EmptyInput,
  EmptyUniverse,
  ClassTooSmall,
  SingleClass,
  EmptyMatrix,
  DimensionMismatch,
  VersionMismatch,
  CorruptModel,
  LabelSetMismatch,
  SampleCountUnreachable,
  UnknownPosition,
  MissingPosition,
  InvalidArgument,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every domain failure in the library is reported as an Error carrying a
/// machine-checkable code. Parse failures also carry the 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);
  Error(Errc code, std::size_t line_no, const std::string& detail);

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace dataloc
