#include "mdms/nilm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mdms/error.hpp"

namespace mdms::nilm {

const char* to_string(StepState state) {
    switch (state) {
        case StepState::SteadyState: return "SteadyState";
        case StepState::LoadOn: return "LoadOn";
        case StepState::LoadOff: return "LoadOff";
        case StepState::Transition: return "Transition";
        case StepState::NoMatch: return "NoMatch";
    }
    return "?";
}

void PowerSeries::validate() const {
    if (!(sample_interval_s > 0.0)) {
        throw Error(ErrorCode::ValidationError, "sample interval must be positive");
    }
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!std::isfinite(samples[k].power_w) || samples[k].power_w < 0.0) {
            throw Error(ErrorCode::ValidationError,
                        "negative or non-finite power at sample " + std::to_string(k));
        }
        if (k > 0 && samples[k].time <= samples[k - 1].time) {
            throw Error(ErrorCode::ValidationError,
                        "timestamps not strictly increasing at sample " + std::to_string(k));
        }
    }
}

void NilmConfig::validate() const {
    if (!(pwr_tol > 0.0 && pwr_tol < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "pwr_tol must lie in (0, 1)");
    }
    if (!(trans_tol_w > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "trans_tol_w must be positive");
    }
    if (win_len_default < 2) {
        throw Error(ErrorCode::InvalidConfig, "win_len_default must be at least 2");
    }
}

const ApplianceSummary* NilmResult::find(std::string_view name) const {
    const auto it = std::find_if(appliances.begin(), appliances.end(),
                                 [&](const ApplianceSummary& a) { return a.name == name; });
    return it == appliances.end() ? nullptr : &*it;
}

double aggregate_power(std::span<const std::pair<bool, double>> appliances) {
    double total = 0.0;
    for (const auto& [flag, power] : appliances) {
        if (flag) {
            total += power;
        }
    }
    return total;
}

Band tolerance_band(double rated_power_w, double pwr_tol) {
    if (!(rated_power_w > 0.0) || !std::isfinite(rated_power_w)) {
        throw Error(ErrorCode::InvalidRating, "rated power must be positive");
    }
    return {rated_power_w * (1.0 - pwr_tol), rated_power_w * (1.0 + pwr_tol)};
}

Band aggregate_band(std::span<const double> active_ratings, double pwr_tol) {
    Band band;
    for (const double p : active_ratings) {
        band.lval_w += p * (1.0 - pwr_tol);
        band.rval_w += p * (1.0 + pwr_tol);
    }
    return band;
}

std::optional<std::pair<std::size_t, std::size_t>> find_overlap(std::span<const Appliance> appliances,
                                                                double pwr_tol) {
    for (std::size_t a = 0; a < appliances.size(); ++a) {
        const Band ba = tolerance_band(appliances[a].rated_power_w, pwr_tol);
        for (std::size_t b = a + 1; b < appliances.size(); ++b) {
            const Band bb = tolerance_band(appliances[b].rated_power_w, pwr_tol);
            if (std::max(ba.lval_w, bb.lval_w) <= std::min(ba.rval_w, bb.rval_w)) {
                return std::pair{a, b};
            }
        }
    }
    return std::nullopt;
}

void validate_appliance_set(std::span<const Appliance> appliances, double pwr_tol) {
    std::set<std::string_view> names;
    for (const auto& a : appliances) {
        tolerance_band(a.rated_power_w, pwr_tol);
        if (a.name.empty()) {
            throw Error(ErrorCode::ValidationError, "appliance name must not be empty");
        }
        if (!names.insert(a.name).second) {
            throw Error(ErrorCode::DuplicateName, "duplicate appliance name '" + a.name + "'");
        }
    }
    if (const auto pair = find_overlap(appliances, pwr_tol)) {
        const auto& a = appliances[pair->first];
        const auto& b = appliances[pair->second];
        throw Error(ErrorCode::OverlapError,
                    "appliances '" + a.name + "' (" + std::to_string(a.rated_power_w) + " W) and '" +
                        b.name + "' (" + std::to_string(b.rated_power_w) +
                        " W) have overlapping tolerance bands; loads of similar rating cannot be "
                        "told apart");
    }
}

StepState classify_step(const PowerSeries& series, std::size_t i, std::size_t win_len,
                        const Appliance& appliance, const NilmConfig& cfg) {
    if (win_len == 0 || i + win_len + 1 >= series.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "window does not fit in series");
    }
    const auto& pwr = series.samples;
    const std::size_t x = i + win_len;
    const double change = pwr[x].power_w - pwr[i].power_w;
    const double settle_delta = std::abs(pwr[x + 1].power_w - pwr[x].power_w);
    const Band band = tolerance_band(appliance.rated_power_w, cfg.pwr_tol);
    const bool in_band = band.contains(std::abs(change));

    // The window end is still moving and the window has left its starting level:
    // keep expanding, even if the partial step is not yet inside the band.
    if (settle_delta > cfg.trans_tol_w && (in_band || std::abs(change) > cfg.trans_tol_w)) {
        return StepState::Transition;
    }
    if (!in_band) {
        return StepState::NoMatch;
    }
    if (change > 0.0 && !appliance.flag) {
        return StepState::LoadOn;
    }
    if (change < 0.0 && appliance.flag) {
        return StepState::LoadOff;
    }
    return StepState::SteadyState;
}

NilmResult detect_events(const PowerSeries& series, std::span<const Appliance> appliances,
                         const NilmConfig& cfg) {
    cfg.validate();
    validate_appliance_set(appliances, cfg.pwr_tol);
    if (series.empty()) {
        throw Error(ErrorCode::EmptySeries, "power series is empty");
    }
    series.validate();

    std::vector<Appliance> loads(appliances.begin(), appliances.end());
    for (const auto& load : loads) {
        if (load.flag || load.duration_s != 0.0) {
            throw Error(ErrorCode::ValidationError,
                        "appliance '" + load.name + "' not in initial state");
        }
    }

    NilmResult result;
    std::vector<std::size_t> session_counts(loads.size(), 0);
    const auto& pwr = series.samples;
    const std::size_t n = pwr.size();

    std::size_t i = 0;
    while (i + cfg.win_len_default + 1 < n) {
        bool event = false;
        std::size_t win_len = cfg.win_len_default;
        for (std::size_t j = 0; j < loads.size() && !event; ++j) {
            auto& load = loads[j];
            win_len = cfg.win_len_default;
            // An unsettled tail that runs off the series abandons the candidate.
            while (i + win_len + 1 < n) {
                const StepState state = classify_step(series, i, win_len, load, cfg);
                if (state == StepState::Transition) {
                    ++win_len;
                    continue;
                }
                if (state == StepState::LoadOn) {
                    load.t_start = pwr[i].time;
                    load.flag = true;
                    event = true;
                } else if (state == StepState::LoadOff) {
                    const Timestamp t_stop = pwr[i].time;
                    load.flag = false;
                    load.duration_s += static_cast<double>((t_stop - load.t_start).count());
                    result.sessions.push_back({load.name, load.t_start, t_stop, false});
                    ++session_counts[j];
                    event = true;
                }
                break;
            }
        }
        i += event ? win_len : 1;
    }

    const Timestamp last = pwr.back().time;
    for (std::size_t j = 0; j < loads.size(); ++j) {
        auto& load = loads[j];
        if (load.flag) {
            load.flag = false;
            load.duration_s += static_cast<double>((last - load.t_start).count());
            result.sessions.push_back({load.name, load.t_start, last, true});
            ++session_counts[j];
        }
    }
    std::stable_sort(result.sessions.begin(), result.sessions.end(),
                     [](const ApplianceSession& a, const ApplianceSession& b) { return a.t_on < b.t_on; });

    result.appliances.reserve(loads.size());
    for (std::size_t j = 0; j < loads.size(); ++j) {
        const auto& load = loads[j];
        result.appliances.push_back({load.name, load.rated_power_w, load.duration_s,
                                     load.rated_power_w * load.duration_s / 3600.0,
                                     session_counts[j]});
    }
    result.shares = energy_shares(result, series);
    return result;
}

EnergyShares energy_shares(const NilmResult& result, const PowerSeries& series) {
    EnergyShares out;
    for (const auto& s : series.samples) {
        out.total_energy_wh += s.power_w * series.sample_interval_s / 3600.0;
    }
    out.appliances.reserve(result.appliances.size());
    if (out.total_energy_wh <= 0.0) {
        out.total_energy_wh = 0.0;
        for (const auto& a : result.appliances) {
            out.appliances.push_back({a.name, 0.0});
        }
        return out;
    }

    double attributed = 0.0;
    for (const auto& a : result.appliances) {
        const double share = a.energy_wh / out.total_energy_wh;
        out.appliances.push_back({a.name, share});
        attributed += share;
    }
    // Rated-power attribution can exceed the measured energy (loads drawing under rating);
    // rescale so the pie still closes.
    if (attributed > 1.0) {
        for (auto& s : out.appliances) {
            s.share /= attributed;
        }
        attributed = 1.0;
    }
    out.unattributed = std::clamp(1.0 - attributed, 0.0, 1.0);
    return out;
}

}  // namespace mdms::nilm
