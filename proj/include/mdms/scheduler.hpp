#pragma once

// Daily NILM analysis and billing, plus the end-of-day trigger that runs it.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "mdms/nilm.hpp"
#include "mdms/store.hpp"
#include "mdms/tariff.hpp"

namespace mdms::service {

struct DailyJobResult {
    std::string meter_id;
    Date date{};
    bool partial = false;    // day not over yet when analysed
    bool empty_day = false;  // no readings; recorded as zero consumption
    std::size_t sample_count = 0;
    nilm::NilmResult nilm;
    std::optional<tariff::BillEstimate> bill;  // absent without a tariff
};

class Analytics {
public:
    Analytics(store::Store& store, nilm::NilmConfig cfg, std::optional<tariff::TariffSchedule> tariff);

    /// query_day -> detect_events -> save_nilm_result -> bill prediction.
    DailyJobResult run_daily_job(const std::string& meter_id, Date date, bool partial = false);

    /// Month-to-date and predicted bill for the billing period containing `as_of`.
    /// Throws InvalidConfig without a tariff, EmptyHistory without analysed days.
    tariff::BillEstimate bill(const std::string& meter_id, Date as_of) const;

    const nilm::NilmConfig& config() const noexcept { return cfg_; }
    bool has_tariff() const noexcept { return tariff_.has_value(); }

private:
    store::Store& store_;
    nilm::NilmConfig cfg_;
    std::optional<tariff::TariffSchedule> tariff_;
    std::mutex job_mutex_;
};

/// First and last day of the billing period holding `date`.
std::pair<Date, Date> billing_period(Date date, unsigned billing_period_days);

using Clock = std::function<Timestamp()>;

Timestamp system_now();

class DailyScheduler {
public:
    /// `trigger_time`: local time of day at which the previous day becomes due.
    DailyScheduler(Analytics& analytics, store::Store& store, std::chrono::seconds trigger_time,
                   Clock clock = system_now);
    ~DailyScheduler();

    /// Runs every due (meter, day) between the meter's first and last reading that lacks a
    /// complete result, oldest first. Days without readings in that span record zero consumption.
    /// Returns the number of jobs run. Called at startup to catch up missed triggers.
    std::size_t catch_up();

    void start(std::chrono::milliseconds poll_interval);
    void stop();

private:
    Analytics& analytics_;
    store::Store& store_;
    std::chrono::seconds trigger_time_;
    Clock clock_;
    std::thread thread_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool running_ = false;
};

}  // namespace mdms::service
