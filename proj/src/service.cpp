#include "mdms/service.hpp"

#include <httplib.h>

#include "mdms/error.hpp"
#include "mdms/http_api.hpp"
#include "mdms/log.hpp"

namespace mdms::service {

using namespace std::chrono;

void ServiceConfig::validate() const {
    nilm.validate();
    if (frame_port < 0 || frame_port > 65535 || http_port < 0 || http_port > 65535) {
        throw Error(ErrorCode::InvalidConfig, "ports must lie in [0, 65535]");
    }
    if (frame_port != 0 && frame_port == http_port) {
        throw Error(ErrorCode::InvalidConfig, "frame and HTTP listeners need distinct addresses");
    }
    if (trigger_time < seconds{0} || trigger_time >= days{1}) {
        throw Error(ErrorCode::InvalidConfig, "trigger time must be a valid time of day");
    }
    if (day_offset <= -hours{24} || day_offset >= hours{24}) {
        throw Error(ErrorCode::InvalidConfig, "day offset must be within +/-24h");
    }
    if (store_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "store path must not be empty");
    }
    if (scheduler_poll <= milliseconds{0}) {
        throw Error(ErrorCode::InvalidConfig, "scheduler poll interval must be positive");
    }
}

std::optional<seconds> parse_time_of_day(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') {
        return std::nullopt;
    }
    auto two = [&](std::size_t pos) -> int {
        const char a = text[pos];
        const char b = text[pos + 1];
        if (a < '0' || a > '9' || b < '0' || b > '9') {
            return -1;
        }
        return (a - '0') * 10 + (b - '0');
    };
    const int h = two(0);
    const int m = two(3);
    if (h < 0 || h > 23 || m < 0 || m > 59) {
        return std::nullopt;
    }
    return hours{h} + minutes{m};
}

std::optional<seconds> parse_utc_offset(std::string_view text) {
    if (text == "Z" || text == "UTC") {
        return seconds{0};
    }
    if (text.size() != 6 || (text[0] != '+' && text[0] != '-')) {
        return std::nullopt;
    }
    const auto hm = parse_time_of_day(text.substr(1));
    if (!hm) {
        return std::nullopt;
    }
    return text[0] == '-' ? -*hm : *hm;
}

Service::Service(ServiceConfig config, Clock clock) : config_(std::move(config)), clock_(std::move(clock)) {
    config_.validate();
    std::optional<tariff::TariffSchedule> schedule;
    if (!config_.tariff_path.empty()) {
        schedule = tariff::load_schedule(config_.tariff_path);
    }
    store_ = std::make_unique<store::Store>(config_.store_path, config_.day_offset);
    analytics_ = std::make_unique<Analytics>(*store_, config_.nilm, std::move(schedule));
    ingest::PipelineOptions opts;
    opts.queue_capacity = config_.queue_capacity;
    opts.auto_register = config_.auto_register;
    pipeline_ = std::make_unique<ingest::IngestPipeline>(*store_, opts);
    scheduler_ = std::make_unique<DailyScheduler>(*analytics_, *store_, config_.trigger_time, clock_);
}

Service::~Service() { stop(); }

int Service::frame_port() const noexcept { return listener_ ? listener_->port() : 0; }

void Service::start() {
    if (started_) {
        return;
    }
    const auto caught_up = scheduler_->catch_up();
    if (caught_up > 0) {
        log::info("caught up missed daily runs", {{"jobs", std::to_string(caught_up)}});
    }

    listener_ = std::make_unique<ingest::FrameListener>(*pipeline_, config_.frame_host, config_.frame_port);

    http_ = std::make_unique<httplib::Server>();
    mount_api(*http_, ApiContext{*store_, *analytics_, pipeline_.get(), clock_});
    if (config_.http_port == 0) {
        http_port_ = http_->bind_to_any_port(config_.http_host);
    } else if (http_->bind_to_port(config_.http_host, config_.http_port)) {
        http_port_ = config_.http_port;
    } else {
        http_port_ = -1;
    }
    if (http_port_ <= 0) {
        listener_->stop();
        throw Error(ErrorCode::InvalidConfig, "cannot bind HTTP API on " + config_.http_host + ":" +
                                                  std::to_string(config_.http_port));
    }
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    scheduler_->start(config_.scheduler_poll);
    started_ = true;
    log::info("mdms started", {{"frame_port", std::to_string(frame_port())},
                               {"http_port", std::to_string(http_port_)},
                               {"store", config_.store_path}});
}

void Service::stop() {
    if (!started_) {
        return;
    }
    started_ = false;
    scheduler_->stop();
    listener_->stop();
    pipeline_->flush();
    http_->stop();
    if (http_thread_.joinable()) {
        http_thread_.join();
    }
    log::info("mdms stopped");
}

}  // namespace mdms::service
