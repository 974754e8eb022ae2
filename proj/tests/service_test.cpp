#include <doctest.h>

#include "mdms/error.hpp"
#include "mdms/service.hpp"
#include "mdms/sim.hpp"
#include "test_support.hpp"

using namespace mdms;
using namespace std::chrono;

namespace {

const Date kDay = year{2024} / 1 / 1;

service::ServiceConfig local_config(const testing::TempDir& dir) {
    service::ServiceConfig cfg;
    cfg.frame_host = "127.0.0.1";
    cfg.frame_port = 0;
    cfg.http_host = "127.0.0.1";
    cfg.http_port = 0;
    cfg.store_path = dir.file("mdms.db");
    cfg.scheduler_poll = hours{1};
    return cfg;
}

void register_reference_loads(store::Store& s, const std::string& meter) {
    s.register_meter(meter);
    for (const auto& a : sim::reference_appliances()) {
        store::LoadRecord r;
        r.meter_id = meter;
        r.name = a.name;
        r.rated_power_w = a.rated_power_w;
        s.register_appliance(r, 0.10);
    }
}

std::string frame_text(const sim::SimScenario& sc, const std::string& meter) {
    const auto truth = sim::generate_schedule(sc);
    std::string text;
    for (const auto& f : sim::to_frames(sim::synthesize_series(truth, sc), meter, sc)) {
        text += serialize_frame(f) + "\n";
    }
    return text;
}

void wait_for_lines(service::Service& svc, std::uint64_t n) {
    for (int spin = 0; spin < 1000 && svc.pipeline().stats().lines < n; ++spin) {
        std::this_thread::sleep_for(milliseconds(10));
    }
    svc.pipeline().flush();
}

}  // namespace

TEST_CASE("config validation") {
    service::ServiceConfig cfg;
    cfg.http_port = cfg.frame_port;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(service::parse_time_of_day("23:59") == hours{23} + minutes{59});
    CHECK_FALSE(service::parse_time_of_day("24:00"));
    CHECK(service::parse_utc_offset("+05:30") == hours{5} + minutes{30});
    CHECK(service::parse_utc_offset("-08:00") == -hours{8});
    CHECK(service::parse_utc_offset("Z") == seconds{0});
    CHECK_FALSE(service::parse_utc_offset("0530"));
}

TEST_CASE("results survive a restart") {
    testing::TempDir dir;
    const auto cfg = local_config(dir);
    Timestamp now = sys_days{kDay} + hours{20};
    sim::SimScenario sc;
    sc.seed = 9;
    sc.duration_s = 1800;
    const auto text = frame_text(sc, "M");

    std::vector<store::NilmRecord> before;
    {
        service::Service svc(cfg, [&] { return now; });
        register_reference_loads(svc.store(), "M");
        svc.start();
        testing::send_to_port(svc.frame_port(), text);
        wait_for_lines(svc, 1800);
        CHECK(svc.store().reading_count("M") == 1800);
        svc.analytics().run_daily_job("M", kDay, true);
        before = svc.store().fetch_nilm_results("M", kDay, kDay);
    }
    {
        service::Service svc(cfg, [&] { return now; });
        svc.start();
        CHECK(svc.store().reading_count("M") == 1800);
        const auto after = svc.store().fetch_nilm_results("M", kDay, kDay);
        REQUIRE(after.size() == before.size());
        for (std::size_t k = 0; k < after.size(); ++k) {
            CHECK(after[k].appliance == before[k].appliance);
            CHECK(after[k].duration_s == before[k].duration_s);
        }
        // Replaying the same stream after the restart changes nothing.
        testing::send_to_port(svc.frame_port(), text);
        wait_for_lines(svc, 1800);
        CHECK(svc.pipeline().stats().duplicate == 1800);
        CHECK(svc.store().reading_count("M") == 1800);
    }
}

TEST_CASE("missed end-of-day runs are caught up at startup") {
    testing::TempDir dir;
    const auto cfg = local_config(dir);
    Timestamp now = sys_days{kDay} + hours{12};
    {
        service::Service svc(cfg, [&] { return now; });
        register_reference_loads(svc.store(), "M");
        svc.start();
        sim::SimScenario sc;
        sc.duration_s = 1200;
        testing::send_to_port(svc.frame_port(), frame_text(sc, "M"));
        wait_for_lines(svc, 1200);
        CHECK_FALSE(svc.store().daily_summary("M", kDay));
    }
    now = sys_days{kDay} + days{3};  // down for two days
    {
        service::Service svc(cfg, [&] { return now; });
        svc.start();
        const auto first = svc.store().daily_summary("M", kDay);
        REQUIRE(first);
        CHECK_FALSE(first->partial);
        CHECK(first->sample_count == 1200);
        // No readings after the 1st: trailing silence is not turned into zero days.
        CHECK_FALSE(svc.store().daily_summary("M", year{2024} / 1 / 2));
        CHECK(svc.scheduler().catch_up() == 0);
    }
}
