#include "greenfarm/economics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "greenfarm/errors.hpp"

namespace greenfarm {

PowerProfile PowerProfile::from_hardware(double idle_core_watts, double busy_core_watts, double pue,
                                         double switching_core_watts) {
    if (!(pue >= 1.0)) throw DomainError("PUE must be >= 1");
    PowerProfile p{idle_core_watts * pue, busy_core_watts * pue, switching_core_watts * pue};
    p.validate();
    return p;
}

void PowerProfile::validate() const {
    if (!(idle_watts >= 0.0 && idle_watts <= busy_watts && busy_watts <= switching_watts) ||
        !std::isfinite(switching_watts)) {
        throw DomainError("power profile requires 0 <= idle <= busy <= switching watts");
    }
}

void EconomicModel::validate() const {
    if (!(income_per_job >= 0.0) || !std::isfinite(income_per_job)) {
        throw DomainError("income_per_job must be >= 0");
    }
    if (!(tariff_per_kwh >= 0.0) || !std::isfinite(tariff_per_kwh)) {
        throw DomainError("tariff_per_kwh must be >= 0");
    }
    if (!(cost_multiplier >= 1.0) || !std::isfinite(cost_multiplier)) {
        throw DomainError("cost_multiplier must be >= 1");
    }
    power.validate();
}

double ReconfigCost::wear_cost_per_change() const noexcept {
    return std::accumulate(component_costs.begin(), component_costs.end(), 0.0);
}

void ReconfigCost::validate() const {
    if (!(boot_seconds >= 0.0) || !std::isfinite(boot_seconds)) {
        throw DomainError("boot_seconds must be >= 0");
    }
    if (!(window_seconds > 0.0) || !std::isfinite(window_seconds)) {
        throw DomainError("window_seconds must be > 0");
    }
    for (double d : component_costs) {
        if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("component costs must be >= 0");
    }
}

int occupancy(double throughput, double mu) {
    if (!(throughput >= 0.0) || !std::isfinite(throughput)) {
        throw DomainError("occupancy: throughput must be finite and >= 0");
    }
    if (!(mu > 0.0)) throw DomainError("occupancy: mu must be > 0");
    const double busy = throughput / mu;
    // Absorb rounding noise so that an exact multiple does not round up.
    return static_cast<int>(std::ceil(busy - 1e-9 * std::max(1.0, busy)));
}

double power_draw(int n, int tau, const PowerProfile& profile) {
    if (n < 0 || tau < 0 || tau > n) throw DomainError("power_draw: requires 0 <= tau <= n");
    return n * profile.idle_watts + tau * (profile.busy_watts - profile.idle_watts);
}

double power_draw(int n, double busy_servers, const PowerProfile& profile) {
    if (n < 0 || !(busy_servers >= 0.0) || busy_servers > n) {
        throw DomainError("power_draw: requires 0 <= busy servers <= n");
    }
    return n * profile.idle_watts + busy_servers * (profile.busy_watts - profile.idle_watts);
}

double charged_occupancy(double throughput, int n, double mu, OccupancyMode mode) {
    if (mode == OccupancyMode::Ceiling) {
        return static_cast<double>(std::min(occupancy(throughput, mu), n));
    }
    if (!(mu > 0.0)) throw DomainError("occupancy: mu must be > 0");
    return std::min(throughput / mu, static_cast<double>(n));
}

double revenue_rate(const SystemParams& params, const EconomicModel& econ) {
    if (params.n == 0) {
        params.validate();
        return 0.0;
    }
    const SteadyState s = steady_state(params);
    const double tau = charged_occupancy(s.throughput, params.n, params.mu, econ.occupancy_mode);
    const double watts = power_draw(params.n, tau, econ.power);
    return econ.income_per_job * s.throughput - econ.price_per_joule() * watts;
}

double switch_cost(int delta_n, const ReconfigCost& cfg, const EconomicModel& econ) {
    if (!(cfg.window_seconds > 0.0)) throw DomainError("switch_cost: window length must be > 0");
    const double per_change =
        cfg.wear_cost_per_change() + cfg.boot_seconds * econ.price_per_joule() * econ.power.switching_watts;
    return std::abs(delta_n) / cfg.window_seconds * per_change;
}

double delta_revenue(int n_new, int n_old, const SystemParams& params, const EconomicModel& econ,
                     const ReconfigCost& cfg) {
    SystemParams p = params;
    p.n = n_new;
    const double r_new = revenue_rate(p, econ);
    p.n = n_old;
    const double r_old = revenue_rate(p, econ);
    return r_new - r_old - switch_cost(n_new - n_old, cfg, econ);
}

}  // namespace greenfarm
