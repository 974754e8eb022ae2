#include <doctest.h>

#include <numeric>

#include "mdms/error.hpp"
#include "mdms/nilm.hpp"

using namespace mdms;
using namespace mdms::nilm;

namespace {

const Timestamp kT0 = Timestamp{std::chrono::sys_days{std::chrono::year{2024} / 1 / 1}};

PowerSeries series_of(std::initializer_list<double> watts) {
    PowerSeries s;
    std::int64_t k = 0;
    for (const double w : watts) {
        s.samples.push_back({kT0 + std::chrono::seconds{k++}, w});
    }
    return s;
}

Appliance load(std::string name, double watts, bool flag = false) {
    Appliance a;
    a.name = std::move(name);
    a.rated_power_w = watts;
    a.flag = flag;
    return a;
}

std::vector<Appliance> reference_loads() {
    return {load("Pump", 250), load("Mini Fridge", 70), load("Iron", 400), load("Water Heater", 700)};
}

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ValidationError;
}

}  // namespace

TEST_CASE("aggregate_power sums the ratings of ON loads") {
    CHECK(aggregate_power({}) == 0.0);
    std::vector<std::pair<bool, double>> off = {{false, 250}, {false, 70}, {false, 400}, {false, 700}};
    CHECK(aggregate_power(off) == 0.0);
    std::vector<std::pair<bool, double>> some = {{true, 250}, {false, 70}, {true, 400}, {false, 700}};
    CHECK(aggregate_power(some) == 650.0);
    std::vector<std::pair<bool, double>> all = {{true, 250}, {true, 70}, {true, 400}, {true, 700}};
    CHECK(aggregate_power(all) == 1420.0);
}

TEST_CASE("tolerance_band") {
    const auto pump = tolerance_band(250, 0.10);
    CHECK(pump.lval_w == doctest::Approx(225.0));
    CHECK(pump.rval_w == doctest::Approx(275.0));
    const auto heater = tolerance_band(700, 0.10);
    CHECK(heater.lval_w == doctest::Approx(630.0));
    CHECK(heater.rval_w == doctest::Approx(770.0));
    const auto degenerate = tolerance_band(300, 0.0);
    CHECK(degenerate.lval_w == 300.0);
    CHECK(degenerate.rval_w == 300.0);
    CHECK_FALSE(degenerate.contains(300.0));
    CHECK(code_of([] { tolerance_band(0, 0.1); }) == ErrorCode::InvalidRating);
    CHECK(code_of([] { tolerance_band(-5, 0.1); }) == ErrorCode::InvalidRating);
}

TEST_CASE("aggregate_band brackets the active sum") {
    const std::vector<double> active = {250, 400};
    const auto b = aggregate_band(active, 0.10);
    CHECK(b.lval_w == doctest::Approx(585.0));
    CHECK(b.rval_w == doctest::Approx(715.0));
    CHECK(b.contains(650.0));
}

TEST_CASE("validate_appliance_set") {
    CHECK_NOTHROW(validate_appliance_set(reference_loads(), 0.10));
    const std::vector<Appliance> similar = {load("Pump", 250), load("Other pump", 260)};
    CHECK(code_of([&] { validate_appliance_set(similar, 0.10); }) == ErrorCode::OverlapError);
    const auto pair = find_overlap(similar, 0.10);
    REQUIRE(pair);
    CHECK(pair->first == 0);
    CHECK(pair->second == 1);
    const std::vector<Appliance> apart = {load("A", 100), load("B", 150)};
    CHECK_NOTHROW(validate_appliance_set(apart, 0.10));
    // Closed bands that only touch still overlap: 100*1.2 == 150*0.8.
    const std::vector<Appliance> touching = {load("A", 100), load("B", 150)};
    CHECK(code_of([&] { validate_appliance_set(touching, 0.20); }) == ErrorCode::OverlapError);
    const std::vector<Appliance> dup = {load("A", 100), load("A", 500)};
    CHECK(code_of([&] { validate_appliance_set(dup, 0.10); }) == ErrorCode::DuplicateName);
}

TEST_CASE("classify_step follows the state rules") {
    NilmConfig cfg;
    CHECK(classify_step(series_of({0, 0, 250, 250}), 0, 2, load("Pump", 250), cfg) == StepState::LoadOn);
    CHECK(classify_step(series_of({250, 250, 0, 0}), 0, 2, load("Pump", 250, true), cfg) == StepState::LoadOff);
    CHECK(classify_step(series_of({0, 0, 250, 260, 260}), 0, 2, load("Pump", 250), cfg) ==
          StepState::Transition);
    CHECK(classify_step(series_of({0, 0, 0, 0}), 0, 2, load("Pump", 250), cfg) == StepState::NoMatch);
    // Already ON: a further rise of the same size is not a new switch-on.
    CHECK(classify_step(series_of({0, 0, 250, 250}), 0, 2, load("Pump", 250, true), cfg) ==
          StepState::SteadyState);
    CHECK(classify_step(series_of({250, 250, 0, 0}), 0, 2, load("Pump", 250), cfg) == StepState::SteadyState);
    // Settle delta of exactly trans_tol counts as settled.
    CHECK(classify_step(series_of({0, 0, 250, 255}), 0, 2, load("Pump", 250), cfg) == StepState::LoadOn);
    // Mid-ramp window end with the step not yet in band is still a transition.
    CHECK(classify_step(series_of({0, 0, 100, 250, 250}), 0, 2, load("Pump", 250), cfg) ==
          StepState::Transition);
}

TEST_CASE("classify_step bounds") {
    NilmConfig cfg;
    const auto s = series_of({0, 0, 250, 250});
    CHECK(code_of([&] { classify_step(s, 1, 2, load("Pump", 250), cfg); }) == ErrorCode::IndexOutOfRange);
    CHECK(code_of([&] { classify_step(s, 0, 0, load("Pump", 250), cfg); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("detect_events on a single pump pulse") {
    const auto s = series_of({0, 0, 250, 250, 250, 0, 0});
    const std::vector<Appliance> pump = {load("Pump", 250)};
    const auto r = detect_events(s, pump, {});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].t_on == s.samples[0].time);
    CHECK(r.sessions[0].t_off == s.samples[3].time);
    CHECK_FALSE(r.sessions[0].truncated);
    REQUIRE(r.appliances.size() == 1);
    CHECK(r.appliances[0].duration_s == 3.0);
    CHECK(r.appliances[0].session_count == 1);
    CHECK(r.appliances[0].energy_wh == doctest::Approx(250.0 * 3 / 3600));
}

TEST_CASE("detect_events on silence finds nothing") {
    const auto s = series_of({0, 0, 0, 0, 0, 0, 0, 0});
    const auto r = detect_events(s, reference_loads(), {});
    CHECK(r.sessions.empty());
    for (const auto& a : r.appliances) {
        CHECK(a.duration_s == 0.0);
    }
    CHECK(r.shares.empty());
    CHECK(r.shares.unattributed == 0.0);
}

TEST_CASE("detect_events absorbs a multi-sample ramp") {
    // Ramps of 3 intermediate samples on both edges; anchors sit two samples before each ramp.
    const auto s = series_of({0, 0, 0, 60, 130, 190, 250, 250, 250, 250, 180, 120, 60, 0, 0, 0});
    const std::vector<Appliance> pump = {load("Pump", 250)};
    const auto r = detect_events(s, pump, {});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].t_on == s.samples[1].time);
    CHECK(r.sessions[0].t_off == s.samples[8].time);
    CHECK(r.appliances[0].duration_s == 7.0);
}

TEST_CASE("detect_events separates stacked loads") {
    // Pump on at 2, heater on at 8, pump off at 14, heater off at 20.
    std::vector<double> w(26, 0.0);
    for (std::size_t k = 2; k < 14; ++k) w[k] += 250;
    for (std::size_t k = 8; k < 20; ++k) w[k] += 700;
    PowerSeries s;
    for (std::size_t k = 0; k < w.size(); ++k) {
        s.samples.push_back({kT0 + std::chrono::seconds{k}, w[k]});
    }
    const auto r = detect_events(s, reference_loads(), {});
    const auto* pump = r.find("Pump");
    const auto* heater = r.find("Water Heater");
    REQUIRE(pump);
    REQUIRE(heater);
    CHECK(pump->duration_s == 12.0);
    CHECK(heater->duration_s == 12.0);
    CHECK(r.find("Iron")->duration_s == 0.0);
    REQUIRE(r.sessions.size() == 2);
    CHECK(r.sessions[0].appliance_name == "Pump");
    CHECK(r.sessions[1].appliance_name == "Water Heater");
}

TEST_CASE("detect_events closes a load still ON at the end") {
    const auto s = series_of({0, 0, 250, 250, 250, 250});
    const std::vector<Appliance> pump = {load("Pump", 250)};
    const auto r = detect_events(s, pump, {});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].truncated);
    CHECK(r.sessions[0].t_off == s.samples.back().time);
    CHECK(r.appliances[0].duration_s == 5.0);
}

TEST_CASE("detect_events preconditions") {
    const std::vector<Appliance> pump = {load("Pump", 250)};
    CHECK(code_of([&] { detect_events(PowerSeries{}, pump, {}); }) == ErrorCode::EmptySeries);
    const std::vector<Appliance> similar = {load("Pump", 250), load("Other pump", 260)};
    CHECK(code_of([&] { detect_events(series_of({0, 0, 0}), similar, {}); }) == ErrorCode::OverlapError);
    const std::vector<Appliance> dirty = {load("Pump", 250, true)};
    CHECK(code_of([&] { detect_events(series_of({0, 0, 0}), dirty, {}); }) == ErrorCode::ValidationError);
    auto backwards = series_of({0, 0, 0});
    std::swap(backwards.samples[0].time, backwards.samples[1].time);
    CHECK(code_of([&] { detect_events(backwards, pump, {}); }) == ErrorCode::ValidationError);
    // Too short for one window: no events, no error.
    CHECK(detect_events(series_of({0, 250}), pump, {}).sessions.empty());
}

TEST_CASE("energy_shares close the pie") {
    SUBCASE("single load for the whole series") {
        std::vector<double> w(20, 250.0);
        w[0] = w[1] = 0.0;
        PowerSeries s;
        for (std::size_t k = 0; k < w.size(); ++k) {
            s.samples.push_back({kT0 + std::chrono::seconds{k}, w[k]});
        }
        const std::vector<Appliance> pump = {load("Pump", 250)};
        const auto r = detect_events(s, pump, {});
        const double total = std::accumulate(w.begin(), w.end(), 0.0) / 3600.0;
        CHECK(r.shares.total_energy_wh == doctest::Approx(total));
        CHECK(r.shares.appliances[0].share + r.shares.unattributed == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.shares.appliances[0].share <= 1.0);
    }
    SUBCASE("attribution above the measured energy is rescaled") {
        NilmResult r;
        r.appliances = {{"A", 100, 3600, 100, 1}, {"B", 100, 3600, 100, 1}};
        PowerSeries s;
        for (std::int64_t k = 0; k < 3600; ++k) {
            s.samples.push_back({kT0 + std::chrono::seconds{k}, 150.0});
        }
        const auto sh = energy_shares(r, s);
        CHECK(sh.appliances[0].share == doctest::Approx(0.5));
        CHECK(sh.appliances[1].share == doctest::Approx(0.5));
        CHECK(sh.unattributed == 0.0);
    }
    SUBCASE("zero energy gives an empty pie") {
        NilmResult r;
        r.appliances = {{"A", 100, 0, 0, 0}};
        const auto sh = energy_shares(r, series_of({0, 0, 0}));
        CHECK(sh.empty());
        CHECK(sh.appliances[0].share == 0.0);
        CHECK(sh.unattributed == 0.0);
    }
}
