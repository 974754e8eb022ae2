#pragma once

// Sliding-window load disaggregation.
//
// The aggregate power series is scanned with a window [i, i + win_len]. A switching
// event of appliance j is accepted when the step PWR[i + win_len] - PWR[i] falls in
// j's tolerance band and the window end has settled (next-sample delta within
// trans_tol_w). While the window end is still moving the window grows by one
// sample, so ramps spanning several samples are absorbed into one event.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdms/time.hpp"

namespace mdms::nilm {

struct Sample {
    Timestamp time{};
    double power_w = 0.0;
};

struct PowerSeries {
    std::vector<Sample> samples;
    double sample_interval_s = 1.0;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }

    /// Throws ValidationError unless timestamps strictly increase and powers are >= 0.
    void validate() const;
};

struct NilmConfig {
    double pwr_tol = 0.10;
    double trans_tol_w = 5.0;
    std::size_t win_len_default = 2;  // index offset; the default window spans 3 samples

    void validate() const;
};

/// A registered load plus the scan state the detector keeps for it.
struct Appliance {
    std::string name;
    double rated_voltage_v = 230.0;
    double rated_power_w = 0.0;

    bool flag = false;
    Timestamp t_start{};
    double duration_s = 0.0;
};

struct Band {
    double lval_w = 0.0;
    double rval_w = 0.0;

    /// Open interval test, lval < x < rval.
    bool contains(double x) const noexcept { return lval_w < x && x < rval_w; }
};

enum class StepState { SteadyState, LoadOn, LoadOff, Transition, NoMatch };

const char* to_string(StepState state);

struct ApplianceSession {
    std::string appliance_name;
    Timestamp t_on{};
    Timestamp t_off{};
    bool truncated = false;  // still ON at series end, closed at the last sample

    double duration_s() const { return static_cast<double>((t_off - t_on).count()); }
};

struct ApplianceShare {
    std::string name;
    double share = 0.0;
};

struct EnergyShares {
    std::vector<ApplianceShare> appliances;
    double unattributed = 0.0;
    double total_energy_wh = 0.0;

    /// Zero measured energy: every share is 0 and nothing is drawn.
    bool empty() const noexcept { return total_energy_wh <= 0.0; }
};

struct ApplianceSummary {
    std::string name;
    double rated_power_w = 0.0;
    double duration_s = 0.0;
    double energy_wh = 0.0;
    std::size_t session_count = 0;
};

struct NilmResult {
    std::vector<ApplianceSummary> appliances;  // registration order
    std::vector<ApplianceSession> sessions;    // ordered by t_on
    EnergyShares shares;

    const ApplianceSummary* find(std::string_view name) const;
};

/// Sum of flag_i * P_i.
double aggregate_power(std::span<const std::pair<bool, double>> appliances);

/// (rated * (1 - tol), rated * (1 + tol)). Throws InvalidRating for rated <= 0.
Band tolerance_band(double rated_power_w, double pwr_tol);

/// Bounds on the aggregate when exactly `active_ratings` are ON.
Band aggregate_band(std::span<const double> active_ratings, double pwr_tol);

/// First pair (i, j), i < j, whose closed bands intersect.
std::optional<std::pair<std::size_t, std::size_t>> find_overlap(std::span<const Appliance> appliances,
                                                                double pwr_tol);

/// Throws OverlapError naming the first offending pair, InvalidRating or DuplicateName.
void validate_appliance_set(std::span<const Appliance> appliances, double pwr_tol);

/// Classifies the window [i, i + win_len] for one appliance. Requires i + win_len + 1 < size.
StepState classify_step(const PowerSeries& series, std::size_t i, std::size_t win_len,
                        const Appliance& appliance, const NilmConfig& cfg);

/// Full scan. `appliances` must be in their initial state (flag 0, duration 0).
NilmResult detect_events(const PowerSeries& series, std::span<const Appliance> appliances,
                         const NilmConfig& cfg);

/// Rectangular integration of the series against the detected appliance energies.
EnergyShares energy_shares(const NilmResult& result, const PowerSeries& series);

}  // namespace mdms::nilm
