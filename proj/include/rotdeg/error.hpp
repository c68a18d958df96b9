#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rotdeg {

enum class ErrorCode {
    OriginSample,
    UnderSampled,
    MissingHamiltonian,
    StepUnderflow,
    MaxStepsExceeded,
    OriginHitTrajectory,
    OutOfRange,
    BackwardBlowUp,
    OriginOnBoundary,
    ZeroOnLoop,
    NotAdmissible,
    LevelNotBracketed,
    ContourBroken,
    NoConvergence,
    InvalidParams,
    OutOfTimeDomain,
    InvalidConfig,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::OriginSample: return "OriginSample";
    case ErrorCode::UnderSampled: return "UnderSampled";
    case ErrorCode::MissingHamiltonian: return "MissingHamiltonian";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::OriginHitTrajectory: return "OriginHitTrajectory";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BackwardBlowUp: return "BackwardBlowUp";
    case ErrorCode::OriginOnBoundary: return "OriginOnBoundary";
    case ErrorCode::ZeroOnLoop: return "ZeroOnLoop";
    case ErrorCode::NotAdmissible: return "NotAdmissible";
    case ErrorCode::LevelNotBracketed: return "LevelNotBracketed";
    case ErrorCode::ContourBroken: return "ContourBroken";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::OutOfTimeDomain: return "OutOfTimeDomain";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

/// Exception type for every failure raised by the library. The code is
/// stable and machine-checkable; the message carries diagnostics.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace rotdeg
