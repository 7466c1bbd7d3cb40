#include "dataloc/error.hpp"

namespace dataloc {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::BandChannelMismatch: return "BandChannelMismatch";
    case Errc::EmptySession: return "EmptySession";
    case Errc::DuplicatePosition: return "DuplicatePosition";
    case Errc::EmptyReadings: return "EmptyReadings";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyUniverse: return "EmptyUniverse";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::LabelSetMismatch: return "LabelSetMismatch";
    case Errc::SampleCountUnreachable: return "SampleCountUnreachable";
    case Errc::UnknownPosition: return "UnknownPosition";
    case Errc::MissingPosition: return "MissingPosition";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

Error::Error(Errc code, std::size_t line_no, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + " at line " + std::to_string(line_no) +
                         ": " + detail),
      code_(code),
      line_(line_no) {}

}  // namespace dataloc
