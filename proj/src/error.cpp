#include "mdms/error.hpp"

namespace mdms {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedFrame: return "MalformedFrame";
        case ErrorCode::InvalidField: return "InvalidField";
        case ErrorCode::InvalidRating: return "InvalidRating";
        case ErrorCode::OverlapError: return "OverlapError";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::NegativeEnergy: return "NegativeEnergy";
        case ErrorCode::OutOfSchedule: return "OutOfSchedule";
        case ErrorCode::EmptyHistory: return "EmptyHistory";
        case ErrorCode::InvalidCalendar: return "InvalidCalendar";
        case ErrorCode::InvalidId: return "InvalidId";
        case ErrorCode::DuplicateMeter: return "DuplicateMeter";
        case ErrorCode::DuplicateName: return "DuplicateName";
        case ErrorCode::UnknownMeter: return "UnknownMeter";
        case ErrorCode::DependentsExist: return "DependentsExist";
        case ErrorCode::EmptyDay: return "EmptyDay";
        case ErrorCode::InfeasibleScenario: return "InfeasibleScenario";
        case ErrorCode::MismatchedAppliances: return "MismatchedAppliances";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::StoreFailure: return "StoreFailure";
    }
    return "Unknown";
}

}  // namespace mdms
