#pragma once

#include <json.hpp>

#include "mdms/error.hpp"
#include "mdms/frame.hpp"
#include "mdms/nilm.hpp"
#include "mdms/sim.hpp"
#include "mdms/store.hpp"
#include "mdms/tariff.hpp"

namespace mdms::json_io {

using nlohmann::json;

json to_json(const MeterFrame& reading);
json to_json(const nilm::NilmResult& result);
json to_json(const tariff::BillEstimate& bill);
json to_json(const store::LoadRecord& load);
json to_json(const store::NilmRecord& record);
json to_json(const store::DailySummary& summary);
json to_json(const sim::GroundTruth& truth);
json to_json(const std::vector<sim::ApplianceScore>& scores);
json error_body(ErrorCode code, const std::string& message);

/// Throws ValidationError on missing or mistyped fields.
sim::GroundTruth ground_truth_from_json(const json& j);
/// Accepts either a full result object or {"appliances": [{"name", "duration_s"}...]}.
nilm::NilmResult nilm_result_from_json(const json& j);

}  // namespace mdms::json_io
