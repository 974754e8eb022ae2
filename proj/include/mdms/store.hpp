#pragma once

// Relational persistence for meters, registered loads, raw readings and NILM results.
// Backed by a single SQLite file; ":memory:" gives a private in-memory database.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdms/frame.hpp"
#include "mdms/nilm.hpp"
#include "mdms/time.hpp"

struct sqlite3;

namespace mdms::store {

struct LoadRecord {
    std::string meter_id;
    std::string name;
    double rated_voltage_v = 230.0;
    double rated_power_w = 0.0;
    double rated_power_factor = 1.0;
};

struct NilmRecord {
    std::string meter_id;
    std::string appliance;
    Date date{};
    double duration_s = 0.0;
    double energy_wh = 0.0;
    double share = 0.0;
    std::int64_t sessions = 0;
};

/// Per-day totals written alongside the NILM rows; feeds billing.
struct DailySummary {
    std::string meter_id;
    Date date{};
    double energy_kwh = 0.0;
    double unattributed_share = 0.0;
    std::int64_t sample_count = 0;
    bool partial = false;
};

enum class InsertStatus { Inserted, Duplicate, UnknownMeter };

struct InsertCounts {
    std::size_t inserted = 0;
    std::size_t duplicate = 0;
    std::size_t unknown_meter = 0;
};

class Store {
public:
    /// `day_offset` shifts analysis days from UTC midnight to local midnight.
    explicit Store(const std::string& path, std::chrono::seconds day_offset = std::chrono::seconds{0});
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    std::chrono::seconds day_offset() const noexcept { return day_offset_; }

    void register_meter(std::string_view meter_id);
    bool has_meter(std::string_view meter_id) const;
    std::vector<std::string> list_meters() const;
    /// Refused with DependentsExist while loads, readings or results reference the meter.
    void remove_meter(std::string_view meter_id);

    /// Validated against the meter's existing loads with the same band rule as the detector.
    void register_appliance(const LoadRecord& load, double pwr_tol);
    std::vector<LoadRecord> list_appliances(std::string_view meter_id) const;
    std::vector<nilm::Appliance> appliances_for_scan(std::string_view meter_id) const;

    InsertStatus insert_reading(const MeterFrame& frame);
    /// One transaction for the whole batch.
    InsertCounts insert_readings(std::span<const MeterFrame> frames);

    std::vector<MeterFrame> readings_for_day(std::string_view meter_id, Date date) const;
    /// Samples in [local midnight, next local midnight), ascending.
    nilm::PowerSeries query_day(std::string_view meter_id, Date date) const;
    std::size_t reading_count(std::string_view meter_id) const;
    std::size_t reading_count() const;

    /// Local dates holding readings in [from, until).
    std::vector<Date> days_with_readings(std::string_view meter_id, Timestamp from, Timestamp until) const;
    std::optional<Timestamp> first_reading_time(std::string_view meter_id) const;
    std::optional<Timestamp> last_reading_time(std::string_view meter_id) const;

    /// Replaces every NILM row and the summary for (meter, date).
    void save_nilm_result(std::string_view meter_id, Date date, const nilm::NilmResult& result,
                          std::size_t sample_count, bool partial);
    /// Ordered by (date, name). Both ends inclusive.
    std::vector<NilmRecord> fetch_nilm_results(std::string_view meter_id, Date from, Date to) const;

    std::optional<DailySummary> daily_summary(std::string_view meter_id, Date date) const;
    std::vector<DailySummary> daily_summaries(std::string_view meter_id, Date from, Date to) const;
    std::optional<Date> latest_complete_day(std::string_view meter_id) const;
    /// Latest analysed day, partial or not.
    std::optional<Date> latest_summary_day(std::string_view meter_id) const;

private:
    void exec(const char* sql);
    void require_meter(std::string_view meter_id) const;
    bool has_meter_locked(std::string_view meter_id) const;
    InsertStatus insert_locked(const MeterFrame& frame);

    sqlite3* db_ = nullptr;
    std::chrono::seconds day_offset_;
    mutable std::mutex mutex_;
};

}  // namespace mdms::store
