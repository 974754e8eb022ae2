#pragma once

// Hash-separated meter frames: <meter_id>#<timestamp>#<voltage>#<power>

#include <string>
#include <string_view>

#include "mdms/time.hpp"

namespace mdms {

inline constexpr char kFrameDelimiter = '#';

struct MeterFrame {
    std::string meter_id;
    Timestamp timestamp{};
    double voltage_v = 0.0;
    double power_w = 0.0;

    friend bool operator==(const MeterFrame&, const MeterFrame&) = default;
};

/// Throws Error{MalformedFrame}. Never crashes on arbitrary input.
MeterFrame parse_frame(std::string_view line);

/// Canonical line without trailing newline. Throws Error{InvalidField}.
std::string serialize_frame(const MeterFrame& frame);

/// Shortest decimal that parses back to `value`, always with a '.' (250 -> "250.0").
std::string format_decimal(double value);

/// Meter ids are non-empty printable ASCII without '#'.
bool is_valid_meter_id(std::string_view id);

}  // namespace mdms
