#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdms {

enum class ErrorCode {
    MalformedFrame,
    InvalidField,
    InvalidRating,
    OverlapError,
    IndexOutOfRange,
    ValidationError,
    EmptySeries,
    NegativeEnergy,
    OutOfSchedule,
    EmptyHistory,
    InvalidCalendar,
    InvalidId,
    DuplicateMeter,
    DuplicateName,
    UnknownMeter,
    DependentsExist,
    EmptyDay,
    InfeasibleScenario,
    MismatchedAppliances,
    InvalidConfig,
    StoreFailure,
};

/// Machine-readable name, e.g. "OverlapError". Used verbatim in API bodies.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mdms
