#include <doctest.h>
#include <httplib.h>

#include "mdms/json_io.hpp"
#include "mdms/service.hpp"
#include "mdms/sim.hpp"
#include "test_support.hpp"

using namespace mdms;
using namespace std::chrono;
using json_io::json;

namespace {

const Date kDay = year{2024} / 1 / 1;

struct Fixture {
    testing::TempDir dir;
    Timestamp now = sys_days{kDay} + days{1} + hours{3};
    std::unique_ptr<service::Service> svc;
    std::unique_ptr<httplib::Client> cli;

    explicit Fixture(bool with_tariff = true) {
        service::ServiceConfig cfg;
        cfg.frame_host = "127.0.0.1";
        cfg.frame_port = 0;
        cfg.http_host = "127.0.0.1";
        cfg.http_port = 0;
        cfg.store_path = dir.file("mdms.db");
        if (with_tariff) {
            cfg.tariff_path = testing::write_file(dir.file("tariff.conf"), testing::kExampleTariff);
        }
        cfg.scheduler_poll = hours{1};
        svc = std::make_unique<service::Service>(cfg, [this] { return now; });
        svc->start();
        cli = std::make_unique<httplib::Client>("127.0.0.1", svc->http_port());
    }

    httplib::Result post(const std::string& path, const json& body) {
        return cli->Post(path, body.dump(), "application/json");
    }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

std::string error_code(const httplib::Result& r) { return body_of(r).at("error").at("code"); }

void register_reference_loads(Fixture& f, const std::string& meter) {
    REQUIRE(f.post("/meters", {{"meter_id", meter}})->status == 201);
    for (const auto& a : sim::reference_appliances()) {
        REQUIRE(f.post("/meters/" + meter + "/appliances", {{"name", a.name}, {"rated_power_w", a.rated_power_w}})
                    ->status == 201);
    }
}

}  // namespace

TEST_CASE("health, meters and CORS") {
    Fixture f;
    auto r = f.cli->Get("/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(f.post("/meters", {{"meter_id", "MTR001"}})->status == 201);
    r = f.post("/meters", {{"meter_id", "MTR001"}});
    CHECK(r->status == 409);
    CHECK(error_code(r) == "DuplicateMeter");
    r = f.post("/meters", {{"meter_id", ""}});
    CHECK(r->status == 400);
    CHECK(error_code(r) == "InvalidId");
    r = f.cli->Post("/meters", "{not json", "application/json");
    CHECK(r->status == 400);
    CHECK(error_code(r) == "ValidationError");
    CHECK(body_of(f.cli->Get("/meters"))["meters"] == json::array({"MTR001"}));
}

TEST_CASE("appliance registration maps engine errors") {
    Fixture f;
    register_reference_loads(f, "M");
    auto r = f.post("/meters/M/appliances", {{"name", "Second pump"}, {"rated_power_w", 260}});
    CHECK(r->status == 409);
    CHECK(error_code(r) == "OverlapError");
    r = f.post("/meters/M/appliances", {{"name", "Pump"}, {"rated_power_w", 2000}});
    CHECK(r->status == 409);
    CHECK(error_code(r) == "DuplicateName");
    r = f.post("/meters/NOPE/appliances", {{"name", "Kettle"}, {"rated_power_w", 2000}});
    CHECK(r->status == 404);
    CHECK(error_code(r) == "UnknownMeter");
    r = f.post("/meters/M/appliances", {{"name", "Kettle"}});
    CHECK(r->status == 400);
    r = f.post("/meters/M/appliances", {{"name", "Kettle"}, {"rated_power_w", -3}});
    CHECK(r->status == 400);
    CHECK(error_code(r) == "InvalidRating");
    const auto list = body_of(f.cli->Get("/meters/M/appliances"))["appliances"];
    REQUIRE(list.size() == 4);
    CHECK(list[0]["name"] == "Pump");
}

TEST_CASE("readings, run and results") {
    Fixture f;
    register_reference_loads(f, "M");
    auto r = f.cli->Get("/meters/M/readings?date=2024-01-01");
    CHECK(r->status == 200);
    CHECK(body_of(r)["readings"].empty());
    CHECK(f.cli->Get("/meters/M/readings?date=2024-1-1")->status == 400);
    CHECK(f.cli->Get("/meters/M/readings")->status == 400);
    CHECK(f.cli->Get("/meters/X/readings?date=2024-01-01")->status == 404);

    sim::SimScenario sc;
    sc.seed = 5;
    sc.duration_s = 1200;
    const auto truth = sim::generate_schedule(sc);
    const auto frames = sim::to_frames(sim::synthesize_series(truth, sc), "M", sc);
    for (const auto& fr : frames) {
        f.svc->pipeline().submit_line(serialize_frame(fr));
    }
    f.svc->pipeline().flush();
    r = f.cli->Get("/meters/M/readings?date=2024-01-01");
    CHECK(body_of(r)["readings"].size() == frames.size());

    r = f.cli->Post("/meters/M/nilm/run?date=2024-01-01");
    REQUIRE(r->status == 200);
    const auto job = body_of(r);
    CHECK(job["partial"] == false);
    CHECK(job["sample_count"] == frames.size());
    CHECK(job["bill"]["days_elapsed"] == 1);

    r = f.cli->Get("/meters/M/nilm?from=2024-01-01&to=2024-01-01");
    REQUIRE(r->status == 200);
    const auto records = body_of(r)["records"];
    REQUIRE(records.size() == 4);
    for (const auto& rec : records) {
        const auto* t = truth.find(rec["appliance"].get<std::string>());
        REQUIRE(t);
        CHECK(rec["duration_s"].get<double>() == t->duration_s);
    }
    CHECK(body_of(r)["days"].size() == 1);

    r = f.cli->Get("/meters/M/bill?date=2024-01-01");
    REQUIRE(r->status == 200);
    const auto bill = body_of(r);
    CHECK(bill["days_in_period"] == 31);
    CHECK(bill["predicted_month_kwh"].get<double>() ==
          doctest::Approx(bill["energy_kwh"].get<double>() * 31));
    r = f.cli->Get("/meters/M/bill");
    CHECK(r->status == 200);
    CHECK(body_of(r)["as_of"] == "2024-01-01");

    CHECK(body_of(f.cli->Get("/stats"))["readings_stored"] == frames.size());
}

TEST_CASE("empty and future days") {
    Fixture f;
    register_reference_loads(f, "M");
    auto r = f.cli->Post("/meters/M/nilm/run?date=2023-12-30");
    CHECK(r->status == 422);
    const auto body = body_of(r);
    CHECK(body["error"]["code"] == "EmptyDay");
    CHECK(body["job"]["empty_day"] == true);
    CHECK(body["job"]["result"]["empty_pie"] == true);
    r = f.cli->Get("/meters/M/nilm?from=2023-12-30");
    CHECK(body_of(r)["days"][0]["energy_kwh"] == 0.0);

    CHECK(f.cli->Post("/meters/M/nilm/run?date=2024-01-05")->status == 400);
    CHECK(f.cli->Post("/meters/X/nilm/run?date=2024-01-01")->status == 404);
    CHECK(f.cli->Get("/meters/M/bill?date=2024-02-01")->status == 422);
}

TEST_CASE("a run on the current day is partial") {
    Fixture f;
    register_reference_loads(f, "M");
    f.svc->pipeline().submit_line("M#2024-01-02T00:00:00Z#230.0#0.0");
    f.svc->pipeline().submit_line("M#2024-01-02T00:00:01Z#230.0#0.0");
    f.svc->pipeline().flush();
    auto r = f.cli->Post("/meters/M/nilm/run");
    REQUIRE(r->status == 200);
    CHECK(body_of(r)["partial"] == true);
    CHECK(body_of(r)["date"] == "2024-01-02");
}

TEST_CASE("billing without a tariff is unavailable") {
    Fixture f(false);
    register_reference_loads(f, "M");
    const auto r = f.cli->Get("/meters/M/bill?date=2024-01-01");
    CHECK(r->status == 503);
    CHECK(body_of(r)["error"].contains("code"));
}
