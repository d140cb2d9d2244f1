#pragma once

#include <stdexcept>
#include <string>

namespace schemasift {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorCode {
    Parse,
    DanglingReference,
    InvalidArgument,
    UnsupportedSyntax,
    AmbiguousColumn,
    UnknownColumn,
    UnknownTable,
    EmptyPositives,
    KeyConflict,
    Corruption,
    VersionMismatch,
    ShapeMismatch,
    DimensionMismatch,
    NumericFailure,
    Divergence,
    ProviderUnavailable,
    MalformedResponse,
    OverCapacity,
    MissingArtifact,
    Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

}  // namespace schemasift
