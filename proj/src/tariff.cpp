#include "mdms/tariff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mdms/error.hpp"

namespace mdms::tariff {

void TariffSchedule::validate() const {
    if (slabs.empty()) {
        throw Error(ErrorCode::InvalidConfig, "tariff needs at least one slab");
    }
    for (std::size_t k = 0; k < slabs.size(); ++k) {
        const auto& s = slabs[k];
        const bool last = k + 1 == slabs.size();
        const bool width_ok =
            (s.block_kwh > 0.0 && std::isfinite(s.block_kwh)) || (last && s.block_kwh == kUnbounded);
        if (!width_ok) {
            throw Error(ErrorCode::InvalidConfig,
                        "slab " + std::to_string(k + 1) + ": width must be positive (only the last slab may be unbounded)");
        }
        if (!(s.price_per_kwh >= 0.0) || !std::isfinite(s.price_per_kwh)) {
            throw Error(ErrorCode::InvalidConfig,
                        "slab " + std::to_string(k + 1) + ": price must be non-negative");
        }
    }
}

double compute_bill(double energy_kwh, const TariffSchedule& schedule) {
    schedule.validate();
    if (!(energy_kwh >= 0.0) || !std::isfinite(energy_kwh)) {
        throw Error(ErrorCode::NegativeEnergy, "energy must be a non-negative number");
    }
    double remaining = energy_kwh;
    double charge = 0.0;
    for (const auto& slab : schedule.slabs) {
        if (remaining <= 0.0) {
            break;
        }
        const double used = std::min(remaining, slab.block_kwh);
        charge += slab.price_per_kwh * used;
        remaining -= used;
    }
    if (remaining > 0.0) {
        throw Error(ErrorCode::OutOfSchedule, "energy exceeds the last bounded slab");
    }
    return charge;
}

BillEstimate predict_month(std::span<const double> daily_energies_kwh, unsigned days_in_month,
                           const TariffSchedule& schedule) {
    if (daily_energies_kwh.empty()) {
        throw Error(ErrorCode::EmptyHistory, "no daily consumption recorded");
    }
    if (days_in_month < daily_energies_kwh.size()) {
        throw Error(ErrorCode::InvalidCalendar, "more days recorded than the period holds");
    }
    for (const double e : daily_energies_kwh) {
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw Error(ErrorCode::NegativeEnergy, "daily energy must be non-negative");
        }
    }
    const auto elapsed = static_cast<unsigned>(daily_energies_kwh.size());
    const double mtd = std::accumulate(daily_energies_kwh.begin(), daily_energies_kwh.end(), 0.0);
    const double mean = mtd / elapsed;

    BillEstimate est;
    est.energy_kwh = mtd;
    est.predicted_month_kwh = mtd + mean * static_cast<double>(days_in_month - elapsed);
    est.amount = compute_bill(est.energy_kwh, schedule);
    est.predicted_month_amount = compute_bill(est.predicted_month_kwh, schedule);
    est.days_elapsed = elapsed;
    est.days_in_period = days_in_month;
    return est;
}

double round_currency(double amount) {
    return std::round(amount * 100.0) / 100.0;
}

TariffSchedule parse_schedule(std::istream& in) {
    TariffSchedule schedule;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvalidConfig, "tariff line " + std::to_string(line_no) + ": " + why);
    };
    auto number = [&](const std::string& token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            fail("not a number: '" + token + "'");
        }
        if (used != token.size()) {
            fail("not a number: '" + token + "'");
        }
        return v;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::string key;
        if (!(fields >> key)) {
            continue;
        }
        std::vector<std::string> args;
        for (std::string a; fields >> a;) {
            args.push_back(a);
        }
        if (key == "billing_period_days") {
            if (args.size() != 1) {
                fail("billing_period_days takes one value");
            }
            const double days = number(args[0]);
            if (days < 0 || days != std::floor(days) || days > 366) {
                fail("billing_period_days must be an integer in [0, 366]");
            }
            schedule.billing_period_days = static_cast<unsigned>(days);
        } else if (key == "slab") {
            if (args.size() != 2) {
                fail("slab takes <width_kwh|rest> <price>");
            }
            if (schedule.open_ended()) {
                fail("no slab may follow an open-ended slab");
            }
            const double width = args[0] == "rest" ? kUnbounded : number(args[0]);
            schedule.slabs.push_back({width, number(args[1])});
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    schedule.validate();
    return schedule;
}

TariffSchedule load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidConfig, "cannot open tariff file " + path);
    }
    return parse_schedule(in);
}

}  // namespace mdms::tariff
