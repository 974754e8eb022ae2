#include "mdms/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>

#include "mdms/error.hpp"

namespace mdms::sim {

namespace {

// Independent streams so noise settings never perturb the schedule.
constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kVoltageStream = 0xc2b2ae3d27d4eb4fULL;
constexpr int kMaxAttempts = 20000;

[[noreturn]] void infeasible(const std::string& why) {
    throw Error(ErrorCode::InfeasibleScenario, "infeasible scenario: " + why);
}

struct Event {
    std::size_t index;
    std::size_t appliance;
};

}  // namespace

std::vector<SimAppliance> reference_appliances() {
    return {{"Pump", 250.0}, {"Mini Fridge", 70.0}, {"Iron", 400.0}, {"Water Heater", 700.0}};
}

void SimScenario::validate(const nilm::NilmConfig& detector) const {
    if (appliances.empty()) {
        throw Error(ErrorCode::InvalidConfig, "scenario needs at least one appliance");
    }
    std::set<std::string_view> names;
    for (const auto& a : appliances) {
        if (!(a.rated_power_w > 0.0) || a.name.empty() || !names.insert(a.name).second) {
            throw Error(ErrorCode::InvalidConfig, "appliances need unique names and positive ratings");
        }
    }
    if (sample_interval_s <= 0 || duration_s <= 0) {
        throw Error(ErrorCode::InvalidConfig, "duration and sample interval must be positive");
    }
    if (!(noise_w >= 0.0) || !(voltage_jitter_v >= 0.0) || !(voltage_v >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "noise, voltage and jitter must be non-negative");
    }
    if (noise_w >= detector.trans_tol_w) {
        throw Error(ErrorCode::InvalidConfig, "noise amplitude must stay below the transition tolerance");
    }
    if (voltage_jitter_v >= voltage_v && voltage_v > 0.0) {
        throw Error(ErrorCode::InvalidConfig, "voltage jitter must be smaller than the nominal voltage");
    }
    if (min_gap_samples < detector.win_len_default + 2 + ramp_samples) {
        throw Error(ErrorCode::InvalidConfig,
                    "min gap must be at least win_len_default + 2 + ramp samples for events to separate");
    }
    if (min_session_samples < min_gap_samples) {
        throw Error(ErrorCode::InvalidConfig, "min session must be at least the min gap");
    }
    // Room for one session per appliance, each edge min_gap apart, plus margins at both ends.
    const std::size_t n = sample_count();
    const std::size_t events = 2 * appliances.size();
    const std::size_t needed = 2 * min_gap_samples + (events - 1) * min_gap_samples + 1;
    if (n < needed || n < 2 * min_gap_samples + min_session_samples + 1) {
        infeasible(std::to_string(n) + " samples cannot hold " + std::to_string(events) +
                   " separable switching events");
    }
}

const ApplianceTruth* GroundTruth::find(std::string_view name) const {
    const auto it = std::find_if(appliances.begin(), appliances.end(),
                                 [&](const ApplianceTruth& a) { return a.name == name; });
    return it == appliances.end() ? nullptr : &*it;
}

GroundTruth generate_schedule(const SimScenario& scenario) {
    scenario.validate();
    std::mt19937_64 rng(scenario.seed);
    const std::size_t n = scenario.sample_count();
    const std::size_t gap = scenario.min_gap_samples;
    const std::size_t margin = gap;
    const std::size_t alpha = scenario.appliances.size();

    // Up to one session per ten minutes of scenario, at least one per appliance.
    const std::size_t max_sessions =
        std::clamp<std::size_t>(static_cast<std::size_t>(scenario.duration_s / 600), 1, 6);

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<std::size_t> labels;
        for (std::size_t a = 0; a < alpha; ++a) {
            std::uniform_int_distribution<std::size_t> pick(1, max_sessions);
            const std::size_t sessions = pick(rng);
            labels.insert(labels.end(), 2 * sessions, a);
        }
        const std::size_t events = labels.size();
        const std::size_t span = n - 1 - 2 * margin;
        if ((events - 1) * gap > span) {
            continue;
        }
        const std::size_t free = span - (events - 1) * gap;
        std::uniform_int_distribution<std::size_t> slot(0, free);
        std::vector<std::size_t> offsets(events);
        for (auto& o : offsets) {
            o = slot(rng);
        }
        std::sort(offsets.begin(), offsets.end());
        std::shuffle(labels.begin(), labels.end(), rng);

        std::vector<Event> timeline(events);
        for (std::size_t k = 0; k < events; ++k) {
            timeline[k] = {margin + offsets[k] + k * gap, labels[k]};
        }

        // Each appliance's events alternate ON, OFF in time order.
        std::vector<std::optional<std::size_t>> open(alpha);
        std::vector<TrueSession> sessions;
        bool ok = true;
        for (const auto& ev : timeline) {
            auto& on = open[ev.appliance];
            if (!on) {
                on = ev.index;
                continue;
            }
            if (ev.index - *on < scenario.min_session_samples) {
                ok = false;
                break;
            }
            TrueSession s;
            s.appliance = scenario.appliances[ev.appliance].name;
            s.on_index = *on;
            s.off_index = ev.index;
            sessions.push_back(std::move(s));
            on.reset();
        }
        if (!ok) {
            continue;
        }

        GroundTruth truth;
        truth.sample_count = n;
        std::uniform_int_distribution<std::size_t> ramp(0, scenario.ramp_samples);
        std::sort(sessions.begin(), sessions.end(),
                  [](const TrueSession& a, const TrueSession& b) { return a.on_index < b.on_index; });
        for (auto& s : sessions) {
            s.ramp_on = ramp(rng);
            s.ramp_off = ramp(rng);
            s.t_on = scenario.start + std::chrono::seconds{static_cast<std::int64_t>(s.on_index) * scenario.sample_interval_s};
            s.t_off = scenario.start + std::chrono::seconds{static_cast<std::int64_t>(s.off_index) * scenario.sample_interval_s};
        }
        truth.sessions = std::move(sessions);
        for (const auto& a : scenario.appliances) {
            ApplianceTruth t{a.name, a.rated_power_w, 0.0};
            for (const auto& s : truth.sessions) {
                if (s.appliance == a.name) {
                    t.duration_s += s.duration_s();
                }
            }
            truth.appliances.push_back(std::move(t));
        }
        return truth;
    }
    infeasible("no schedule satisfied the gap and session constraints after " +
               std::to_string(kMaxAttempts) + " draws");
}

namespace {

// Contribution of one session at sample k, with linear ramps of ramp+1 steps.
double session_level(const TrueSession& s, double rated, std::size_t k) {
    if (k < s.on_index) {
        return 0.0;
    }
    if (k < s.on_index + s.ramp_on) {
        return rated * static_cast<double>(k - s.on_index + 1) / static_cast<double>(s.ramp_on + 1);
    }
    if (k < s.off_index) {
        return rated;
    }
    if (k < s.off_index + s.ramp_off) {
        return rated * (1.0 - static_cast<double>(k - s.off_index + 1) / static_cast<double>(s.ramp_off + 1));
    }
    return 0.0;
}

}  // namespace

nilm::PowerSeries synthesize_series(const GroundTruth& truth, const SimScenario& scenario) {
    nilm::PowerSeries series;
    series.sample_interval_s = static_cast<double>(scenario.sample_interval_s);
    series.samples.resize(truth.sample_count);
    for (std::size_t k = 0; k < truth.sample_count; ++k) {
        series.samples[k].time =
            scenario.start + std::chrono::seconds{static_cast<std::int64_t>(k) * scenario.sample_interval_s};
    }
    for (const auto& s : truth.sessions) {
        const auto* a = truth.find(s.appliance);
        const std::size_t end = std::min(truth.sample_count, s.off_index + s.ramp_off);
        for (std::size_t k = s.on_index; k < end; ++k) {
            series.samples[k].power_w += session_level(s, a->rated_power_w, k);
        }
    }
    if (scenario.noise_w > 0.0) {
        std::mt19937_64 rng(scenario.seed ^ kNoiseStream);
        std::uniform_real_distribution<double> noise(-scenario.noise_w, scenario.noise_w);
        for (auto& sample : series.samples) {
            sample.power_w = std::max(0.0, sample.power_w + noise(rng));
        }
    }
    return series;
}

std::optional<std::vector<double>> settled_active_ratings(const GroundTruth& truth, std::size_t k) {
    std::vector<double> active;
    for (const auto& s : truth.sessions) {
        const double rated = truth.find(s.appliance)->rated_power_w;
        const bool ramping_on = k >= s.on_index && k < s.on_index + s.ramp_on;
        const bool ramping_off = k >= s.off_index && k < s.off_index + s.ramp_off;
        if (ramping_on || ramping_off) {
            return std::nullopt;
        }
        if (k >= s.on_index && k < s.off_index) {
            active.push_back(rated);
        }
    }
    return active;
}

std::vector<MeterFrame> to_frames(const nilm::PowerSeries& series, const std::string& meter_id,
                                  const SimScenario& scenario) {
    std::vector<MeterFrame> frames;
    frames.reserve(series.size());
    std::mt19937_64 rng(scenario.seed ^ kVoltageStream);
    std::uniform_real_distribution<double> jitter(-scenario.voltage_jitter_v, scenario.voltage_jitter_v);
    for (const auto& s : series.samples) {
        double v = scenario.voltage_v;
        if (scenario.voltage_jitter_v > 0.0) {
            // Decivolt resolution, as a meter display would report.
            v = std::round((v + jitter(rng)) * 10.0) / 10.0;
        }
        frames.push_back({meter_id, s.time, v, s.power_w});
    }
    return frames;
}

void emit_frames(const std::vector<MeterFrame>& frames, std::ostream& out) {
    for (const auto& f : frames) {
        out << serialize_frame(f) << '\n';
    }
}

std::vector<ApplianceScore> score_run(const GroundTruth& truth, const nilm::NilmResult& result) {
    std::set<std::string_view> truth_names;
    std::set<std::string_view> result_names;
    for (const auto& a : truth.appliances) {
        truth_names.insert(a.name);
    }
    for (const auto& a : result.appliances) {
        result_names.insert(a.name);
    }
    if (truth_names != result_names) {
        throw Error(ErrorCode::MismatchedAppliances, "ground truth and result list different appliances");
    }
    std::vector<ApplianceScore> scores;
    for (const auto& t : truth.appliances) {
        const auto* r = result.find(t.name);
        ApplianceScore s{t.name, t.duration_s, r->duration_s, 0.0};
        if (t.duration_s > 0.0) {
            s.error_pct = std::abs(t.duration_s - r->duration_s) / t.duration_s * 100.0;
        } else if (r->duration_s > 0.0) {
            s.error_pct = std::numeric_limits<double>::infinity();
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

std::string format_error_pct(double pct) {
    if (std::isinf(pct)) {
        return "inf";
    }
    // Nudge by a tiny epsilon so values such as 0.73 stored as 0.72999.. stay 0.73.
    const double truncated = std::floor(pct * 100.0 + 1e-9) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", truncated);
    return buf;
}

std::vector<nilm::Appliance> detector_appliances(const SimScenario& scenario) {
    std::vector<nilm::Appliance> out;
    for (const auto& a : scenario.appliances) {
        nilm::Appliance d;
        d.name = a.name;
        d.rated_power_w = a.rated_power_w;
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace mdms::sim
