#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tactile {

enum class ErrorKind {
    MissingFile,
    MalformedRow,
    DuplicateObjectId,
    MissingFrameFile,
    TrajectoryLengthMismatch,
    UnknownObjectId,
    EmptyAfterCleaning,
    OutOfRangeHardness,
    InsufficientIndentation,
    NonPositiveModulus,
    TooFewObjects,
    ShapeMismatch,
    HeadDivisibility,
    LengthMismatch,
    UninitializedGradients,
    StrategyMismatch,
    DivergedTraining,
    NonPositiveValue,
    ConstantTruths,
    EmptyWindow,
    UnknownKey,
    DegenerateGeometry,
    ConfigParseError,
    InvalidArgument,
    IoError,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::MalformedRow: return "MalformedRow";
        case ErrorKind::DuplicateObjectId: return "DuplicateObjectId";
        case ErrorKind::MissingFrameFile: return "MissingFrameFile";
        case ErrorKind::TrajectoryLengthMismatch: return "TrajectoryLengthMismatch";
        case ErrorKind::UnknownObjectId: return "UnknownObjectId";
        case ErrorKind::EmptyAfterCleaning: return "EmptyAfterCleaning";
        case ErrorKind::OutOfRangeHardness: return "OutOfRangeHardness";
        case ErrorKind::InsufficientIndentation: return "InsufficientIndentation";
        case ErrorKind::NonPositiveModulus: return "NonPositiveModulus";
        case ErrorKind::TooFewObjects: return "TooFewObjects";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::HeadDivisibility: return "HeadDivisibility";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::UninitializedGradients: return "UninitializedGradients";
        case ErrorKind::StrategyMismatch: return "StrategyMismatch";
        case ErrorKind::DivergedTraining: return "DivergedTraining";
        case ErrorKind::NonPositiveValue: return "NonPositiveValue";
        case ErrorKind::ConstantTruths: return "ConstantTruths";
        case ErrorKind::EmptyWindow: return "EmptyWindow";
        case ErrorKind::UnknownKey: return "UnknownKey";
        case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorKind::ConfigParseError: return "ConfigParseError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` distinguishes failure modes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace tactile
