#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kawasaki {

// Numerical failures carry a stable name so the CLI can report them.
enum class ErrorCode {
    TailNotNegligible,
    NewtonDiverged,
    GridTooCoarse,
    NotMeanZero,
    SolverSingular,
    MeanMismatch,
    OutOfTableRange,
    UnstableStep,
    CFLViolation,
    CrossCheckFailed,
    MCVarianceTooHigh,
    EmptyField,
    ZeroHits,
    WeightDegeneracy,
    InvalidArgument,
};

inline std::string_view error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::TailNotNegligible: return "TailNotNegligible";
        case ErrorCode::NewtonDiverged: return "NewtonDiverged";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::NotMeanZero: return "NotMeanZero";
        case ErrorCode::SolverSingular: return "SolverSingular";
        case ErrorCode::MeanMismatch: return "MeanMismatch";
        case ErrorCode::OutOfTableRange: return "OutOfTableRange";
        case ErrorCode::UnstableStep: return "UnstableStep";
        case ErrorCode::CFLViolation: return "CFLViolation";
        case ErrorCode::CrossCheckFailed: return "CrossCheckFailed";
        case ErrorCode::MCVarianceTooHigh: return "MCVarianceTooHigh";
        case ErrorCode::EmptyField: return "EmptyField";
        case ErrorCode::ZeroHits: return "ZeroHits";
        case ErrorCode::WeightDegeneracy: return "WeightDegeneracy";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const noexcept { return error_name(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace kawasaki
