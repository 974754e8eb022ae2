#pragma once

// Incremental block-rate tariff: each block of consumption is priced at its own rate.

#include <istream>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mdms::tariff {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct Slab {
    double block_kwh = 0.0;  // kUnbounded for an open-ended final slab
    double price_per_kwh = 0.0;
};

struct TariffSchedule {
    std::vector<Slab> slabs;
    /// Length of a billing period in days. 0 means calendar months.
    unsigned billing_period_days = 0;

    /// Throws InvalidConfig.
    void validate() const;
    bool open_ended() const { return !slabs.empty() && slabs.back().block_kwh == kUnbounded; }
};

struct BillEstimate {
    double energy_kwh = 0.0;
    double amount = 0.0;
    double predicted_month_kwh = 0.0;
    double predicted_month_amount = 0.0;
    unsigned days_elapsed = 0;
    unsigned days_in_period = 0;
};

/// Throws NegativeEnergy, or OutOfSchedule past the end of a bounded schedule.
double compute_bill(double energy_kwh, const TariffSchedule& schedule);

/// Mean daily rate extrapolated over the remaining days of the period.
BillEstimate predict_month(std::span<const double> daily_energies_kwh, unsigned days_in_month,
                           const TariffSchedule& schedule);

/// Rounds to 2 decimals for display. Internal arithmetic stays unrounded.
double round_currency(double amount);

/// Line-oriented config:
///
///     # comment
///     billing_period_days 30
///     slab 100 0.00
///     slab 100 2.00
///     slab rest 4.00
///
/// Throws InvalidConfig with the offending line number.
TariffSchedule parse_schedule(std::istream& in);
TariffSchedule load_schedule(const std::string& path);

}  // namespace mdms::tariff
