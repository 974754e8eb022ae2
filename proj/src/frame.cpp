#include "mdms/frame.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <optional>

#include "mdms/error.hpp"

namespace mdms {

namespace {

[[noreturn]] void malformed(const std::string& why) {
    throw Error(ErrorCode::MalformedFrame, "malformed frame: " + why);
}

// Accepts digits with an optional single fractional part, e.g. "230" or "230.10".
std::optional<double> parse_decimal(std::string_view token) {
    if (token.empty()) {
        return std::nullopt;
    }
    std::size_t dots = 0;
    for (const char c : token) {
        if (c == '.') {
            ++dots;
        } else if (c < '0' || c > '9') {
            return std::nullopt;
        }
    }
    if (dots > 1 || token.front() == '.' || token.back() == '.') {
        return std::nullopt;
    }
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

bool is_valid_measurement(double v) {
    return std::isfinite(v) && v >= 0.0 && !std::signbit(v);
}

}  // namespace

bool is_valid_meter_id(std::string_view id) {
    if (id.empty()) {
        return false;
    }
    for (const char c : id) {
        if (c < 0x21 || c > 0x7e || c == kFrameDelimiter) {
            return false;
        }
    }
    return true;
}

std::string format_decimal(double value) {
    std::array<char, 400> buf{};
    const auto [ptr, ec] =
        std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
    if (ec != std::errc{}) {
        throw Error(ErrorCode::InvalidField, "cannot format decimal");
    }
    std::string out(buf.data(), ptr);
    if (out.find('.') == std::string::npos) {
        out += ".0";
    }
    return out;
}

MeterFrame parse_frame(std::string_view line) {
    std::array<std::string_view, 4> tokens;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
        const auto hash = line.find(kFrameDelimiter, start);
        const auto token = line.substr(start, hash == std::string_view::npos ? std::string_view::npos
                                                                             : hash - start);
        if (count == tokens.size()) {
            malformed("more than 4 fields");
        }
        tokens[count++] = token;
        if (hash == std::string_view::npos) {
            break;
        }
        start = hash + 1;
    }
    if (count != tokens.size()) {
        malformed("expected 4 fields, got " + std::to_string(count));
    }

    MeterFrame frame;
    if (!is_valid_meter_id(tokens[0])) {
        malformed("bad meter id");
    }
    frame.meter_id = std::string(tokens[0]);

    const auto ts = parse_timestamp(tokens[1]);
    if (!ts) {
        malformed("bad timestamp");
    }
    frame.timestamp = *ts;

    const auto voltage = parse_decimal(tokens[2]);
    const auto power = parse_decimal(tokens[3]);
    if (!voltage || !power) {
        malformed("bad decimal field");
    }
    frame.voltage_v = *voltage;
    frame.power_w = *power;
    return frame;
}

std::string serialize_frame(const MeterFrame& frame) {
    if (!is_valid_meter_id(frame.meter_id)) {
        throw Error(ErrorCode::InvalidField, "invalid meter id '" + frame.meter_id + "'");
    }
    if (!is_valid_measurement(frame.voltage_v) || !is_valid_measurement(frame.power_w)) {
        throw Error(ErrorCode::InvalidField, "voltage and power must be finite and non-negative");
    }
    const int year = static_cast<int>(local_date(frame.timestamp, std::chrono::seconds{0}).year());
    if (year < 0 || year > 9999) {
        throw Error(ErrorCode::InvalidField, "timestamp outside years 0000-9999");
    }
    std::string out = frame.meter_id;
    out += kFrameDelimiter;
    out += format_timestamp(frame.timestamp);
    out += kFrameDelimiter;
    out += format_decimal(frame.voltage_v);
    out += kFrameDelimiter;
    out += format_decimal(frame.power_w);
    return out;
}

}  // namespace mdms
