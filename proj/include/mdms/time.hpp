#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace mdms {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DDTHH:MM:SSZ". Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

/// Parses "YYYY-MM-DD".
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);

/// Start of `date` in UTC for a local day that is `utc_offset` ahead of UTC.
Timestamp day_start(Date date, std::chrono::seconds utc_offset);

/// Local calendar date containing `ts`.
Date local_date(Timestamp ts, std::chrono::seconds utc_offset);

unsigned days_in_month(Date date);

}  // namespace mdms
