#pragma once

#include <stdexcept>
#include <string>

namespace lesionquant {

enum class ErrorCode {
    InvalidArgument,
    Io,
    Format,
    Config,
    DegenerateHistogram,
    NoNucleusFound,
    ContourExtractionFailed,
    RegistrationDiverged,
    NoPeakFound,
    StackRejected,
    EmptyInput,
};

const char* error_code_name(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code; the
/// C API maps it onto its status enum.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lesionquant
