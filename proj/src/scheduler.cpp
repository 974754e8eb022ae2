#include "mdms/scheduler.hpp"

#include <algorithm>

#include "mdms/error.hpp"
#include "mdms/log.hpp"

namespace mdms::service {

using namespace std::chrono;

Analytics::Analytics(store::Store& store, nilm::NilmConfig cfg, std::optional<tariff::TariffSchedule> tariff)
    : store_(store), cfg_(cfg), tariff_(std::move(tariff)) {
    cfg_.validate();
    if (tariff_) {
        tariff_->validate();
    }
}

DailyJobResult Analytics::run_daily_job(const std::string& meter_id, Date date, bool partial) {
    std::lock_guard lock(job_mutex_);
    DailyJobResult out;
    out.meter_id = meter_id;
    out.date = date;
    out.partial = partial;

    const auto appliances = store_.appliances_for_scan(meter_id);
    const auto series = store_.query_day(meter_id, date);
    out.sample_count = series.size();
    if (series.empty()) {
        out.empty_day = true;
        for (const auto& a : appliances) {
            out.nilm.appliances.push_back({a.name, a.rated_power_w, 0.0, 0.0, 0});
            out.nilm.shares.appliances.push_back({a.name, 0.0});
        }
    } else {
        out.nilm = nilm::detect_events(series, appliances, cfg_);
    }
    store_.save_nilm_result(meter_id, date, out.nilm, out.sample_count, partial);
    log::info("nilm run", {{"meter_id", meter_id},
                           {"date", format_date(date)},
                           {"samples", std::to_string(out.sample_count)},
                           {"sessions", std::to_string(out.nilm.sessions.size())},
                           {"partial", partial ? "true" : "false"}});
    if (tariff_) {
        out.bill = bill(meter_id, date);
    }
    return out;
}

std::pair<Date, Date> billing_period(Date date, unsigned billing_period_days) {
    if (billing_period_days == 0) {
        const Date first{date.year(), date.month(), day{1}};
        const Date last{date.year(), date.month(), day{days_in_month(date)}};
        return {first, last};
    }
    // Fixed-length periods counted from 1970-01-01.
    const auto n = sys_days{date}.time_since_epoch().count();
    const auto len = static_cast<long>(billing_period_days);
    const auto start = n - (((n % len) + len) % len);
    return {Date{sys_days{days{start}}}, Date{sys_days{days{start + len - 1}}}};
}

tariff::BillEstimate Analytics::bill(const std::string& meter_id, Date as_of) const {
    if (!tariff_) {
        throw Error(ErrorCode::InvalidConfig, "no tariff configured");
    }
    const auto [first, last] = billing_period(as_of, tariff_->billing_period_days);
    const auto summaries = store_.daily_summaries(meter_id, first, as_of);
    std::vector<double> daily;
    daily.reserve(summaries.size());
    for (const auto& s : summaries) {
        daily.push_back(s.energy_kwh);
    }
    const auto days_in_period =
        static_cast<unsigned>((sys_days{last} - sys_days{first}).count() + 1);
    return tariff::predict_month(daily, days_in_period, *tariff_);
}

Timestamp system_now() { return floor<seconds>(system_clock::now()); }

DailyScheduler::DailyScheduler(Analytics& analytics, store::Store& store, seconds trigger_time, Clock clock)
    : analytics_(analytics), store_(store), trigger_time_(trigger_time), clock_(std::move(clock)) {
    if (trigger_time_ < seconds{0} || trigger_time_ >= days{1}) {
        throw Error(ErrorCode::InvalidConfig, "trigger time must be within one day");
    }
}

DailyScheduler::~DailyScheduler() { stop(); }

std::size_t DailyScheduler::catch_up() {
    const Timestamp now = clock_();
    const seconds offset = store_.day_offset();
    // Day D is due once local time passes D+1 at the trigger time.
    const Date today_for_trigger = local_date(now - trigger_time_, offset);
    const Timestamp due_until = day_start(today_for_trigger, offset);

    std::size_t runs = 0;
    for (const auto& meter : store_.list_meters()) {
        const auto first = store_.first_reading_time(meter);
        const auto latest = store_.last_reading_time(meter);
        if (!first || !latest || *first >= due_until) {
            continue;
        }
        // Gaps between the first and last reading are recorded as zero-consumption days.
        const sys_days last{local_date(std::min(*latest, due_until - seconds{1}), offset)};
        for (sys_days d{local_date(*first, offset)}; d <= last; d += days{1}) {
            const Date day{d};
            const auto summary = store_.daily_summary(meter, day);
            if (summary && !summary->partial) {
                continue;
            }
            try {
                analytics_.run_daily_job(meter, day, false);
                ++runs;
            } catch (const Error& e) {
                log::error("daily job failed", {{"meter_id", meter}, {"date", format_date(day)}, {"reason", e.what()}});
            }
        }
    }
    return runs;
}

void DailyScheduler::start(std::chrono::milliseconds poll_interval) {
    {
        std::lock_guard lock(mutex_);
        if (running_) {
            return;
        }
        running_ = true;
    }
    thread_ = std::thread([this, poll_interval] {
        std::unique_lock lock(mutex_);
        while (running_) {
            lock.unlock();
            try {
                catch_up();
            } catch (const std::exception& e) {
                log::error("scheduler pass failed", {{"reason", e.what()}});
            }
            lock.lock();
            cv_.wait_for(lock, poll_interval, [&] { return !running_; });
        }
    });
}

void DailyScheduler::stop() {
    {
        std::lock_guard lock(mutex_);
        running_ = false;
    }
    cv_.notify_all();
    if (thread_.joinable()) {
        thread_.join();
    }
}

}  // namespace mdms::service
