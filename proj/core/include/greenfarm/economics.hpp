#pragma once

// Money side of the model: power draw of the running servers, revenue rate
// r(n), the amortized cost of switching servers on or off, and the expected
// change in revenue of a reallocation.
//
// Internally everything is in watts, joules, seconds and dollars per second.
// kWh and $/hour only appear through the conversion helpers below.

#include <vector>

#include "greenfarm/queueing.hpp"

namespace greenfarm {

inline constexpr double kJoulesPerKwh = 3.6e6;
inline constexpr double kSecondsPerHour = 3600.0;

[[nodiscard]] constexpr double joules_to_kwh(double joules) noexcept { return joules / kJoulesPerKwh; }
[[nodiscard]] constexpr double kwh_to_joules(double kwh) noexcept { return kwh * kJoulesPerKwh; }
[[nodiscard]] constexpr double per_second_to_per_hour(double rate) noexcept { return rate * kSecondsPerHour; }
[[nodiscard]] constexpr double per_hour_to_per_second(double rate) noexcept { return rate / kSecondsPerHour; }

/// Per-server power levels, facility overhead (PUE) already included.
struct PowerProfile {
    double idle_watts = 59.0;       ///< e1
    double busy_watts = 94.0;       ///< e2
    double switching_watts = 94.0;  ///< e_max, drawn while booting or shutting down

    /// Scales raw per-core measurements by the facility PUE.
    [[nodiscard]] static PowerProfile from_hardware(double idle_core_watts, double busy_core_watts,
                                                    double pue, double switching_core_watts);
    /// Requires 0 <= idle <= busy <= switching.
    void validate() const;
};

/// How the busy-server count entering the power model is derived from throughput.
enum class OccupancyMode {
    Fractional,  ///< tau = T / mu, keeps r(n) unimodal
    Ceiling,     ///< tau = ceil(T / mu), integer busy servers
};

struct EconomicModel {
    double income_per_job = 6.2e-6;  ///< c, dollars per completed job
    double tariff_per_kwh = 0.1;     ///< r, dollars per kWh
    double cost_multiplier = 3.0;    ///< direct + indirect electricity cost factor (>= 1)
    PowerProfile power{};
    OccupancyMode occupancy_mode = OccupancyMode::Fractional;

    /// Electricity price actually charged, in dollars per joule (= $/W/s).
    [[nodiscard]] double price_per_joule() const noexcept {
        return tariff_per_kwh * cost_multiplier / kJoulesPerKwh;
    }
    void validate() const;
};

/// Constants of the per-state-change cost.
struct ReconfigCost {
    double boot_seconds = 120.0;                  ///< k, time to switch a server on or off
    std::vector<double> component_costs{0.002};   ///< d_i, wear cost per state change (dollars)
    double window_seconds = 3600.0;               ///< t, observation window length

    [[nodiscard]] double wear_cost_per_change() const noexcept;
    void validate() const;
};

/// tau = ceil(T / mu); the caller clamps to n.
[[nodiscard]] int occupancy(double throughput, double mu);

/// P = n e1 + tau (e2 - e1). Throws DomainError when tau > n or either is negative.
[[nodiscard]] double power_draw(int n, int tau, const PowerProfile& profile);

/// Same with a fractional busy-server count.
[[nodiscard]] double power_draw(int n, double busy_servers, const PowerProfile& profile);

/// Busy servers charged at e2 for a given throughput, clamped to n.
[[nodiscard]] double charged_occupancy(double throughput, int n, double mu, OccupancyMode mode);

/// r(n) = c T - price * P for the tuple in `params` (dollars per second).
[[nodiscard]] double revenue_rate(const SystemParams& params, const EconomicModel& econ);

/// Q = |delta_n| / t * (sum d_i + k * price * e_max), dollars per second.
[[nodiscard]] double switch_cost(int delta_n, const ReconfigCost& cfg, const EconomicModel& econ);

/// Delta r(n_new, n_old) = r(n_new) - r(n_old) - Q(|n_new - n_old|).
/// `params.n` is ignored; lambda, mu and theta describe the forecast load.
[[nodiscard]] double delta_revenue(int n_new, int n_old, const SystemParams& params,
                                   const EconomicModel& econ, const ReconfigCost& cfg);

}  // namespace greenfarm
