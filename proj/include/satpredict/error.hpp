#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace satpredict {

enum class Errc {
  MalformedLine,
  MissingField,
  NonConsecutiveIteration,
  UnknownAdapter,
  HeaderMismatch,
  RowArity,
  InconsistentRun,
  NoHeader,
  LiteralOutOfRange,
  ClauseCountMismatch,
  EmptyClause,
  EmptyInput,
  LengthMismatch,
  InsufficientIterations,
  RunStillInProgress,
  OneClassOnly,
  DegenerateSplit,
  EmptyDataset,
  BadConfig,
  BadDropout,
  DimensionMismatch,
  SpecMismatch,
  SchemaVersionMismatch,
  CorruptModel,
  BadParams,
  UnknownParameter,
  IterationOutOfRange,
  Io,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MissingField: return "MissingField";
    case Errc::NonConsecutiveIteration: return "NonConsecutiveIteration";
    case Errc::UnknownAdapter: return "UnknownAdapter";
    case Errc::HeaderMismatch: return "HeaderMismatch";
    case Errc::RowArity: return "RowArity";
    case Errc::InconsistentRun: return "InconsistentRun";
    case Errc::NoHeader: return "NoHeader";
    case Errc::LiteralOutOfRange: return "LiteralOutOfRange";
    case Errc::ClauseCountMismatch: return "ClauseCountMismatch";
    case Errc::EmptyClause: return "EmptyClause";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InsufficientIterations: return "InsufficientIterations";
    case Errc::RunStillInProgress: return "RunStillInProgress";
    case Errc::OneClassOnly: return "OneClassOnly";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadConfig: return "BadConfig";
    case Errc::BadDropout: return "BadDropout";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::BadParams: return "BadParams";
    case Errc::UnknownParameter: return "UnknownParameter";
    case Errc::IterationOutOfRange: return "IterationOutOfRange";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a category
/// code. Parse errors additionally carry the 1-based input line.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> line = {})
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace satpredict
