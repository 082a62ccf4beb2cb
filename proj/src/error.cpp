#include "error.hpp"

namespace lesionquant {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Io: return "io";
        case ErrorCode::Format: return "format";
        case ErrorCode::Config: return "config";
        case ErrorCode::DegenerateHistogram: return "degenerate_histogram";
        case ErrorCode::NoNucleusFound: return "no_nucleus_found";
        case ErrorCode::ContourExtractionFailed: return "contour_extraction_failed";
        case ErrorCode::RegistrationDiverged: return "registration_diverged";
        case ErrorCode::NoPeakFound: return "no_peak_found";
        case ErrorCode::StackRejected: return "stack_rejected";
        case ErrorCode::EmptyInput: return "empty_input";
    }
    return "unknown";
}

}  // namespace lesionquant
