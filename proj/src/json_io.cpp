#include "mdms/json_io.hpp"

#include <cmath>

namespace mdms::json_io {

namespace {

Timestamp require_timestamp(const json& j, const char* key) {
    const auto ts = parse_timestamp(j.at(key).get<std::string>());
    if (!ts) {
        throw Error(ErrorCode::ValidationError, std::string("bad timestamp in field ") + key);
    }
    return *ts;
}

template <typename F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ValidationError, std::string("bad JSON document: ") + e.what());
    }
}

}  // namespace

json to_json(const MeterFrame& reading) {
    return {{"timestamp", format_timestamp(reading.timestamp)},
            {"voltage_v", reading.voltage_v},
            {"power_w", reading.power_w}};
}

json to_json(const nilm::NilmResult& result) {
    json appliances = json::array();
    for (std::size_t k = 0; k < result.appliances.size(); ++k) {
        const auto& a = result.appliances[k];
        appliances.push_back({{"name", a.name},
                              {"rated_power_w", a.rated_power_w},
                              {"duration_s", a.duration_s},
                              {"energy_wh", a.energy_wh},
                              {"sessions", a.session_count},
                              {"share", k < result.shares.appliances.size() ? result.shares.appliances[k].share : 0.0}});
    }
    json sessions = json::array();
    for (const auto& s : result.sessions) {
        sessions.push_back({{"appliance", s.appliance_name},
                            {"t_on", format_timestamp(s.t_on)},
                            {"t_off", format_timestamp(s.t_off)},
                            {"duration_s", s.duration_s()},
                            {"truncated", s.truncated}});
    }
    return {{"appliances", appliances},
            {"sessions", sessions},
            {"unattributed_share", result.shares.unattributed},
            {"total_energy_wh", result.shares.total_energy_wh},
            {"empty_pie", result.shares.empty()}};
}

json to_json(const tariff::BillEstimate& bill) {
    return {{"energy_kwh", bill.energy_kwh},
            {"amount", bill.amount},
            {"amount_display", tariff::round_currency(bill.amount)},
            {"predicted_month_kwh", bill.predicted_month_kwh},
            {"predicted_month_amount", bill.predicted_month_amount},
            {"predicted_month_amount_display", tariff::round_currency(bill.predicted_month_amount)},
            {"days_elapsed", bill.days_elapsed},
            {"days_in_period", bill.days_in_period}};
}

json to_json(const store::LoadRecord& load) {
    return {{"meter_id", load.meter_id},
            {"name", load.name},
            {"rated_voltage_v", load.rated_voltage_v},
            {"rated_power_w", load.rated_power_w},
            {"rated_power_factor", load.rated_power_factor}};
}

json to_json(const store::NilmRecord& record) {
    return {{"meter_id", record.meter_id},
            {"appliance", record.appliance},
            {"date", format_date(record.date)},
            {"duration_s", record.duration_s},
            {"energy_wh", record.energy_wh},
            {"share", record.share},
            {"sessions", record.sessions}};
}

json to_json(const store::DailySummary& summary) {
    return {{"date", format_date(summary.date)},
            {"energy_kwh", summary.energy_kwh},
            {"unattributed_share", summary.unattributed_share},
            {"sample_count", summary.sample_count},
            {"partial", summary.partial}};
}

json to_json(const sim::GroundTruth& truth) {
    json sessions = json::array();
    for (const auto& s : truth.sessions) {
        sessions.push_back({{"appliance", s.appliance},
                            {"t_on", format_timestamp(s.t_on)},
                            {"t_off", format_timestamp(s.t_off)},
                            {"on_index", s.on_index},
                            {"off_index", s.off_index},
                            {"ramp_on", s.ramp_on},
                            {"ramp_off", s.ramp_off}});
    }
    json appliances = json::array();
    for (const auto& a : truth.appliances) {
        appliances.push_back({{"name", a.name}, {"rated_power_w", a.rated_power_w}, {"duration_s", a.duration_s}});
    }
    return {{"sample_count", truth.sample_count}, {"sessions", sessions}, {"appliances", appliances}};
}

json to_json(const std::vector<sim::ApplianceScore>& scores) {
    json out = json::array();
    for (const auto& s : scores) {
        out.push_back({{"name", s.name},
                       {"d_act_s", s.d_act_s},
                       {"d_detected_s", s.d_detected_s},
                       {"error_pct", std::isinf(s.error_pct) ? json(nullptr) : json(s.error_pct)},
                       {"error_display", sim::format_error_pct(s.error_pct)}});
    }
    return out;
}

json error_body(ErrorCode code, const std::string& message) {
    return {{"error", {{"code", to_string(code)}, {"message", message}}}};
}

sim::GroundTruth ground_truth_from_json(const json& j) {
    return guarded([&] {
        sim::GroundTruth truth;
        truth.sample_count = j.at("sample_count").get<std::size_t>();
        for (const auto& s : j.at("sessions")) {
            sim::TrueSession t;
            t.appliance = s.at("appliance").get<std::string>();
            t.t_on = require_timestamp(s, "t_on");
            t.t_off = require_timestamp(s, "t_off");
            t.on_index = s.value("on_index", std::size_t{0});
            t.off_index = s.value("off_index", std::size_t{0});
            t.ramp_on = s.value("ramp_on", std::size_t{0});
            t.ramp_off = s.value("ramp_off", std::size_t{0});
            truth.sessions.push_back(std::move(t));
        }
        for (const auto& a : j.at("appliances")) {
            truth.appliances.push_back({a.at("name").get<std::string>(), a.value("rated_power_w", 0.0),
                                        a.at("duration_s").get<double>()});
        }
        return truth;
    });
}

nilm::NilmResult nilm_result_from_json(const json& j) {
    return guarded([&] {
        nilm::NilmResult result;
        for (const auto& a : j.at("appliances")) {
            nilm::ApplianceSummary s;
            s.name = a.at("name").get<std::string>();
            s.duration_s = a.at("duration_s").get<double>();
            s.rated_power_w = a.value("rated_power_w", 0.0);
            s.energy_wh = a.value("energy_wh", 0.0);
            s.session_count = a.value("sessions", std::size_t{0});
            result.shares.appliances.push_back({s.name, a.value("share", 0.0)});
            result.appliances.push_back(std::move(s));
        }
        return result;
    });
}

}  // namespace mdms::json_io
