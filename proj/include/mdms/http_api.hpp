#pragma once

// JSON endpoints consumed by the dashboard:
//
//   GET  /health
//   GET  /stats
//   GET  /meters                         POST /meters {"meter_id"}
//   GET  /meters/{id}/appliances         POST /meters/{id}/appliances {"name","rated_power_w",...}
//   GET  /meters/{id}/readings?date=YYYY-MM-DD
//   GET  /meters/{id}/nilm?from=&to=
//   POST /meters/{id}/nilm/run?date=
//   GET  /meters/{id}/bill?date=
//
// Errors: {"error": {"code": "<ErrorCode>", "message": "..."}} with 400/404/409/422/503.

#include "mdms/error.hpp"
#include "mdms/ingest.hpp"
#include "mdms/scheduler.hpp"
#include "mdms/store.hpp"

namespace httplib {
class Server;
}

namespace mdms::service {

struct ApiContext {
    store::Store& store;
    Analytics& analytics;
    const ingest::IngestPipeline* pipeline = nullptr;
    Clock clock = system_now;
};

int http_status(ErrorCode code);

void mount_api(httplib::Server& server, ApiContext ctx);

}  // namespace mdms::service
