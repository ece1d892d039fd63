#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rfg {

enum class Errc {
  InvalidArgument,
  MissingFile,
  IoError,
  ParseError,
  DuplicateId,
  UnsupportedFormat,
  CorruptImage,
  TooFewSamples,
  WrongPointCount,
  DegenerateRegion,
  OutOfBounds,
  RegionTooSmall,
  ImageTooSmall,
  DegenerateData,
  SingularSystem,
  BadCount,
  ColumnMismatch,
  RowMismatch,
  LengthMismatch,
  SingleClass,
  DidNotConverge,
  AllZeroWeights,
  DegenerateFitnessSet,
  VersionMismatch,
  ChecksumMismatch,
  BundleIncomplete,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MissingFile: return "MissingFile";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptImage: return "CorruptImage";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::WrongPointCount: return "WrongPointCount";
    case Errc::DegenerateRegion: return "DegenerateRegion";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::RegionTooSmall: return "RegionTooSmall";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::BadCount: return "BadCount";
    case Errc::ColumnMismatch: return "ColumnMismatch";
    case Errc::RowMismatch: return "RowMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DidNotConverge: return "DidNotConverge";
    case Errc::AllZeroWeights: return "AllZeroWeights";
    case Errc::DegenerateFitnessSet: return "DegenerateFitnessSet";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::BundleIncomplete: return "BundleIncomplete";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an rfg::Error. `detail()`
/// carries the numeric payload of errors such as ParseError(line) or
/// WrongPointCount(found); it is -1 when not applicable.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::int64_t detail = -1)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  std::int64_t detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::int64_t detail_;
};

/// Process exit code for the command-line front end.
inline int exit_code_for(Errc c) {
  switch (c) {
    case Errc::InvalidArgument:
      return 2;
    case Errc::SingularSystem:
    case Errc::DidNotConverge:
    case Errc::DegenerateData:
    case Errc::DegenerateFitnessSet:
    case Errc::AllZeroWeights:
      return 4;
    default:
      return 3;
  }
}

}  // namespace rfg
