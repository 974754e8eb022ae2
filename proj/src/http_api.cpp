#include "mdms/http_api.hpp"

#include <httplib.h>

#include "mdms/error.hpp"
#include "mdms/json_io.hpp"
#include "mdms/log.hpp"

namespace mdms::service {

using json_io::json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownMeter: return 404;
        case ErrorCode::DuplicateMeter:
        case ErrorCode::DuplicateName:
        case ErrorCode::OverlapError:
        case ErrorCode::DependentsExist: return 409;
        case ErrorCode::EmptyDay:
        case ErrorCode::EmptyHistory:
        case ErrorCode::EmptySeries:
        case ErrorCode::OutOfSchedule: return 422;
        case ErrorCode::StoreFailure: return 500;
        default: return 400;
    }
}

namespace {

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, ErrorCode code, const std::string& message) {
    send(res, status, json_io::error_body(code, message));
}

// Runs a handler, turning domain and JSON errors into structured responses.
template <typename F>
auto guarded(F handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), e.code(), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, ErrorCode::ValidationError, std::string("bad JSON: ") + e.what());
        } catch (const std::exception& e) {
            log::error("api handler failed", {{"path", req.path}, {"reason", e.what()}});
            send_error(res, 500, ErrorCode::StoreFailure, e.what());
        }
    };
}

Date require_date(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) {
        throw Error(ErrorCode::ValidationError, std::string("missing query parameter '") + key + "'");
    }
    const auto d = parse_date(req.get_param_value(key));
    if (!d) {
        throw Error(ErrorCode::ValidationError, std::string("'") + key + "' must be YYYY-MM-DD");
    }
    return *d;
}

std::optional<Date> optional_date(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) {
        return std::nullopt;
    }
    return require_date(req, key);
}

json job_to_json(const DailyJobResult& job) {
    return {{"meter_id", job.meter_id},
            {"date", format_date(job.date)},
            {"partial", job.partial},
            {"empty_day", job.empty_day},
            {"sample_count", job.sample_count},
            {"result", json_io::to_json(job.nilm)},
            {"bill", job.bill ? json_io::to_json(*job.bill) : json(nullptr)}};
}

}  // namespace

void mount_api(httplib::Server& server, ApiContext ctx) {
    server.Get("/health", guarded([ctx](const httplib::Request&, httplib::Response& res) {
        send(res, 200, {{"status", "ok"}});
    }));

    server.Get("/stats", guarded([ctx](const httplib::Request&, httplib::Response& res) {
        json body = {{"readings_stored", ctx.store.reading_count()}};
        if (ctx.pipeline) {
            const auto s = ctx.pipeline->stats();
            body["ingest"] = {{"lines", s.lines},
                              {"stored", s.stored},
                              {"malformed", s.malformed},
                              {"duplicate", s.duplicate},
                              {"unknown_meter", s.unknown_meter}};
        }
        send(res, 200, body);
    }));

    server.Get("/meters", guarded([ctx](const httplib::Request&, httplib::Response& res) {
        send(res, 200, {{"meters", ctx.store.list_meters()}});
    }));

    server.Post("/meters", guarded([ctx](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const auto id = body.at("meter_id").get<std::string>();
        ctx.store.register_meter(id);
        send(res, 201, {{"meter_id", id}});
    }));

    server.Get(R"(/meters/([^/]+)/appliances)", guarded([ctx](const httplib::Request& req, httplib::Response& res) {
        json list = json::array();
        for (const auto& load : ctx.store.list_appliances(req.matches[1].str())) {
            list.push_back(json_io::to_json(load));
        }
        send(res, 200, {{"appliances", list}});
    }));

    server.Post(R"(/meters/([^/]+)/appliances)",
                guarded([ctx](const httplib::Request& req, httplib::Response& res) {
                    const auto body = json::parse(req.body);
                    store::LoadRecord load;
                    load.meter_id = req.matches[1].str();
                    load.name = body.at("name").get<std::string>();
                    load.rated_power_w = body.at("rated_power_w").get<double>();
                    load.rated_voltage_v = body.value("rated_voltage_v", 230.0);
                    load.rated_power_factor = body.value("rated_power_factor", 1.0);
                    ctx.store.register_appliance(load, ctx.analytics.config().pwr_tol);
                    send(res, 201, json_io::to_json(load));
                }));

    server.Get(R"(/meters/([^/]+)/readings)", guarded([ctx](const httplib::Request& req, httplib::Response& res) {
        const auto meter = req.matches[1].str();
        const Date date = require_date(req, "date");
        json readings = json::array();
        for (const auto& r : ctx.store.readings_for_day(meter, date)) {
            readings.push_back(json_io::to_json(r));
        }
        send(res, 200, {{"meter_id", meter}, {"date", format_date(date)}, {"readings", readings}});
    }));

    server.Get(R"(/meters/([^/]+)/nilm)", guarded([ctx](const httplib::Request& req, httplib::Response& res) {
        const auto meter = req.matches[1].str();
        const Date from = require_date(req, "from");
        const Date to = optional_date(req, "to").value_or(from);
        json records = json::array();
        for (const auto& r : ctx.store.fetch_nilm_results(meter, from, to)) {
            records.push_back(json_io::to_json(r));
        }
        json days = json::array();
        for (const auto& d : ctx.store.daily_summaries(meter, from, to)) {
            days.push_back(json_io::to_json(d));
        }
        send(res, 200, {{"meter_id", meter}, {"records", records}, {"days", days}});
    }));

    server.Post(R"(/meters/([^/]+)/nilm/run)",
                guarded([ctx](const httplib::Request& req, httplib::Response& res) {
                    const auto meter = req.matches[1].str();
                    const Timestamp now = ctx.clock();
                    const auto offset = ctx.store.day_offset();
                    const Date date = optional_date(req, "date").value_or(local_date(now, offset));
                    const Timestamp begin = day_start(date, offset);
                    if (begin > now) {
                        throw Error(ErrorCode::ValidationError, "cannot analyse a future day");
                    }
                    const bool partial = now < begin + std::chrono::days{1};
                    const auto job = ctx.analytics.run_daily_job(meter, date, partial);
                    if (job.empty_day) {
                        json body = json_io::error_body(ErrorCode::EmptyDay,
                                                        "no readings for " + format_date(date) +
                                                            "; recorded as a zero-consumption day");
                        body["job"] = job_to_json(job);
                        send(res, 422, body);
                        return;
                    }
                    send(res, 200, job_to_json(job));
                }));

    server.Get(R"(/meters/([^/]+)/bill)",
               guarded([ctx](const httplib::Request& req, httplib::Response& res) {
                   const auto meter = req.matches[1].str();
                   if (!ctx.analytics.has_tariff()) {
                       send_error(res, 503, ErrorCode::InvalidConfig, "no tariff configured");
                       return;
                   }
                   std::optional<Date> as_of = optional_date(req, "date");
                   if (!as_of) {
                       if (!ctx.store.has_meter(meter)) {
                           throw Error(ErrorCode::UnknownMeter, "unknown meter '" + meter + "'");
                       }
                       as_of = ctx.store.latest_summary_day(meter).value_or(
                           local_date(ctx.clock(), ctx.store.day_offset()));
                   }
                   json body = json_io::to_json(ctx.analytics.bill(meter, *as_of));
                   body["meter_id"] = meter;
                   body["as_of"] = format_date(*as_of);
                   send(res, 200, body);
               }));
}

}  // namespace mdms::service
