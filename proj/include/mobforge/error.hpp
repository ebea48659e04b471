#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mobforge {

enum class ErrorCode {
    IoError,
    ConfigError,
    // survey ingest
    MalformedRow,
    UnknownPersonId,
    DuplicateProfile,
    DuplicateDiary,
    EmptySource,
    OverlappingTrips,
    InvalidSpec,
    // cohorts
    UnknownDimension,
    EmptyCohort,
    UnparseableScore,
    // language-model gateway
    BackendError,
    BackendUnreachable,
    FixtureMiss,
    MissingContext,
    SlotArityMismatch,
    // patterns and reasoning
    HoldoutViolation,
    PlanUnparseable,
    DecisionUnparseable,
    AnchorFailure,
    // road network
    DanglingEdge,
    NonPositiveLength,
    PoiUnsnappable,
    Unsnappable,
    UnknownNode,
    NoPoiOfCategory,
    NoReachablePoi,
    // evaluation
    BinningMismatch,
    EmptyDistribution,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Row-level loader failure carrying the 1-based source line.
class RowError : public Error {
public:
    RowError(ErrorCode code, std::size_t line, const std::string& reason)
        : Error(code, "line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace mobforge
