#pragma once

// The long-running MDMS process: frame listener, ingest writer, end-of-day scheduler
// and HTTP API around one store.

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "mdms/ingest.hpp"
#include "mdms/nilm.hpp"
#include "mdms/scheduler.hpp"
#include "mdms/store.hpp"
#include "mdms/tariff.hpp"

namespace httplib {
class Server;
}

namespace mdms::service {

struct ServiceConfig {
    std::string frame_host = "0.0.0.0";
    int frame_port = 7070;  // 0 picks a free port
    std::string http_host = "0.0.0.0";
    int http_port = 8080;
    std::string store_path = "mdms.db";
    std::string tariff_path;  // empty: billing endpoints answer 503
    nilm::NilmConfig nilm;
    std::chrono::seconds trigger_time{0};  // local time of day for the end-of-day run
    std::chrono::seconds day_offset{0};    // local time minus UTC
    std::chrono::milliseconds scheduler_poll{30000};
    std::size_t queue_capacity = 4096;
    bool auto_register = false;

    /// Throws InvalidConfig.
    void validate() const;
};

/// Parses "HH:MM" into seconds after midnight.
std::optional<std::chrono::seconds> parse_time_of_day(std::string_view text);
/// Parses "+05:30", "-08:00" or "Z" into an offset.
std::optional<std::chrono::seconds> parse_utc_offset(std::string_view text);

class Service {
public:
    explicit Service(ServiceConfig config, Clock clock = system_now);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Catches up missed daily runs, then starts every component.
    void start();
    void stop();

    int frame_port() const noexcept;
    int http_port() const noexcept { return http_port_; }

    store::Store& store() noexcept { return *store_; }
    Analytics& analytics() noexcept { return *analytics_; }
    ingest::IngestPipeline& pipeline() noexcept { return *pipeline_; }
    DailyScheduler& scheduler() noexcept { return *scheduler_; }

private:
    ServiceConfig config_;
    Clock clock_;
    std::unique_ptr<store::Store> store_;
    std::unique_ptr<Analytics> analytics_;
    std::unique_ptr<ingest::IngestPipeline> pipeline_;
    std::unique_ptr<DailyScheduler> scheduler_;
    std::unique_ptr<ingest::FrameListener> listener_;
    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
    int http_port_ = 0;
    bool started_ = false;
};

}  // namespace mdms::service
