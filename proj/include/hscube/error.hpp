#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hscube {

enum class ErrorCode {
    DimensionMismatch,
    BadMagic,
    UnsupportedVersion,
    TruncatedPayload,
    NonMonotoneWavelengths,
    NonFiniteSample,
    IoFailure,
    NonPositiveWavelength,
    OutOfBounds,
    TooFewBands,
    TooFewPixels,
    SingularRegression,
    DecompositionFailed,
    ZeroReference,
    DispersionRequired,
    InvalidConfig,
    SchemaViolation,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonMonotoneWavelengths: return "NonMonotoneWavelengths";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NonPositiveWavelength: return "NonPositiveWavelength";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::TooFewBands: return "TooFewBands";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::SingularRegression: return "SingularRegression";
    case ErrorCode::DecompositionFailed: return "DecompositionFailed";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::DispersionRequired: return "DispersionRequired";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    }
    return "Unknown";
}

/// Every library failure is reported through this exception; `code()` is
/// stable and is what callers and tests should branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace hscube
