#pragma once

// Seeded household simulator producing aggregate power traces with known appliance sessions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mdms/frame.hpp"
#include "mdms/nilm.hpp"
#include "mdms/time.hpp"

namespace mdms::sim {

struct SimAppliance {
    std::string name;
    double rated_power_w = 0.0;
};

/// Pump 250 W, Mini Fridge 70 W, Iron 400 W, Water Heater 700 W (all 230 V).
std::vector<SimAppliance> reference_appliances();

struct SimScenario {
    std::vector<SimAppliance> appliances = reference_appliances();
    std::int64_t duration_s = 3600;
    std::int64_t sample_interval_s = 1;
    std::uint64_t seed = 1;
    double noise_w = 0.0;                 // uniform in [-noise_w, +noise_w] per sample
    std::size_t ramp_samples = 0;         // max intermediate samples per switching event
    std::size_t min_gap_samples = 10;     // between any two switching events
    std::size_t min_session_samples = 60; // shortest ON period
    Timestamp start = Timestamp{std::chrono::sys_days{std::chrono::year{2024} / 1 / 1}};
    double voltage_v = 230.0;
    double voltage_jitter_v = 0.0;

    std::size_t sample_count() const {
        return static_cast<std::size_t>(duration_s / std::max<std::int64_t>(sample_interval_s, 1));
    }

    /// Throws InfeasibleScenario / InvalidConfig. Noise must stay below the detector's settle
    /// threshold and events must be separable by its default window.
    void validate(const nilm::NilmConfig& detector = {}) const;
};

struct TrueSession {
    std::string appliance;
    std::size_t on_index = 0;   // first sample of the switch-on ramp (or full level)
    std::size_t off_index = 0;  // first sample of the switch-off ramp (or zero level)
    std::size_t ramp_on = 0;
    std::size_t ramp_off = 0;
    Timestamp t_on{};
    Timestamp t_off{};

    double duration_s() const { return static_cast<double>((t_off - t_on).count()); }
};

struct ApplianceTruth {
    std::string name;
    double rated_power_w = 0.0;
    double duration_s = 0.0;  // D_act
};

struct GroundTruth {
    std::vector<TrueSession> sessions;  // ordered by on_index
    std::vector<ApplianceTruth> appliances;
    std::size_t sample_count = 0;

    const ApplianceTruth* find(std::string_view name) const;
};

GroundTruth generate_schedule(const SimScenario& scenario);

/// Sum of active ratings per sample, with linear ramps and uniform noise, clamped at 0.
nilm::PowerSeries synthesize_series(const GroundTruth& truth, const SimScenario& scenario);

/// Active ratings at sample k, excluding appliances inside a ramp.
/// Empty optional when some appliance is mid-ramp (sample not settled).
std::optional<std::vector<double>> settled_active_ratings(const GroundTruth& truth, std::size_t k);

std::vector<MeterFrame> to_frames(const nilm::PowerSeries& series, const std::string& meter_id,
                                  const SimScenario& scenario);
/// One serialized frame per line.
void emit_frames(const std::vector<MeterFrame>& frames, std::ostream& out);

struct ApplianceScore {
    std::string name;
    double d_act_s = 0.0;
    double d_detected_s = 0.0;
    double error_pct = 0.0;  // +inf when d_act = 0 but something was detected
};

/// Throws MismatchedAppliances unless both sides list the same names.
std::vector<ApplianceScore> score_run(const GroundTruth& truth, const nilm::NilmResult& result);

/// Two-decimal display that drops, rather than rounds, further digits (1.3793 -> "1.37").
std::string format_error_pct(double pct);

/// Detector appliance list matching the scenario's loads.
std::vector<nilm::Appliance> detector_appliances(const SimScenario& scenario);

}  // namespace mdms::sim
