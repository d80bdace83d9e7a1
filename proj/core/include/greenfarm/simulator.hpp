#pragma once

// Discrete-event simulation of one service subsystem of the server farm.
//
// Jobs arrive, seize the lowest-numbered idle server or wait in a FIFO queue,
// and abandon if their patience runs out before service starts. A job in
// service always completes. At the end of every observation window the
// policy may switch servers on or off; switching takes `boot_seconds` at
// `switching_watts` and costs the wear term per state change.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "greenfarm/allocator.hpp"
#include "greenfarm/economics.hpp"
#include "greenfarm/stats.hpp"
#include "greenfarm/workload.hpp"

namespace greenfarm {

struct Job {
    std::uint64_t id = 0;
    double arrival_time = 0.0;
    double patience_deadline = 0.0;  ///< arrival_time + patience
    double service_demand = 0.0;
};

enum class ServerPhase : std::uint8_t { Off, Booting, Idle, Busy, ShuttingDown };

struct ServerState {
    ServerPhase phase = ServerPhase::Off;
    double ready_at = 0.0;      ///< end of the current boot or shutdown
    std::uint64_t job = 0;      ///< job in service when Busy
    bool draining = false;      ///< Busy and scheduled to shut down after this job
};

struct StaticPolicy {
    int n = 0;
};
struct AdaptivePolicy {
    AllocatorOptions options{};
};
using PolicySpec = std::variant<StaticPolicy, AdaptivePolicy>;

struct SimConfig {
    int capacity = 10;                   ///< S
    int initial_n = 0;                   ///< servers on at t = 0 (Adaptive only)
    WorkloadSpec workload{};
    EconomicModel econ{};
    ReconfigCost reconfig{};             ///< window_seconds is the observation window t
    PolicySpec policy = AdaptivePolicy{};
    double duration = 3600.0;            ///< seconds
    double warmup = 0.0;                 ///< statistics start here
    double sample_interval = 5400.0;     ///< revenue batch length
    std::uint64_t seed = 1;

    [[nodiscard]] double window_length() const noexcept { return reconfig.window_seconds; }
    /// Throws ConfigError on any inconsistency.
    void validate() const;
};

/// One row of the per-window time series. A row runs from its start to the
/// start of the next row; boot time after a decision belongs to the row
/// that made the decision.
struct WindowRecord {
    double start = 0.0;
    int n = 0;                   ///< active servers targeted during the window
    double lambda_observed = 0.0;
    double lambda_forecast = 0.0;  ///< forecast behind this window's n (NaN if none)
    std::uint64_t completions = 0;
    std::uint64_t abandonments = 0;  ///< by patience deadline
    double energy_kwh = 0.0;
    double revenue_usd = 0.0;
};

struct SimReport {
    Estimate revenue_per_hour;           ///< over complete revenue batches
    std::vector<double> revenue_samples; ///< $/h per batch
    double revenue_usd = 0.0;            ///< cumulative over the measured period
    double energy_kwh = 0.0;
    double lost_fraction = 0.0;          ///< abandoned / (abandoned + completed), measured jobs
    double throughput = 0.0;             ///< completions per second, measured period
    double mean_queue_len = 0.0;         ///< time-average number waiting
    double mean_in_system = 0.0;         ///< waiting + in service
    double mean_active_servers = 0.0;    ///< time-average powered-on servers (idle or busy)
    double measured_seconds = 0.0;
    std::uint64_t arrivals = 0;          ///< whole run
    std::uint64_t completions = 0;
    std::uint64_t abandonments = 0;
    std::uint64_t in_flight = 0;         ///< waiting or in service at the end
    std::uint64_t state_changes = 0;
    std::uint64_t policy_invocations = 0;
    std::uint64_t seed = 0;
    std::vector<WindowRecord> windows;
};

enum class SimEventKind : std::uint8_t {
    Arrival,
    ServiceStart,
    Completion,
    Abandonment,
    Decision,
    BootComplete,
    ShutdownComplete,
};

/// Trace hook for tests and diagnostics. `clock` is the simulation time at
/// which the event is processed; `effective` is when it takes effect (they
/// differ only for abandonments, which are detected lazily at the queue head).
struct SimEvent {
    SimEventKind kind{};
    double clock = 0.0;
    double effective = 0.0;
    std::uint64_t job = 0;
    int server = -1;
    int n_target = 0;
};
using SimObserver = std::function<void(const SimEvent&)>;

/// Runs one simulation. Deterministic given the config (including its seed).
[[nodiscard]] SimReport run(const SimConfig& config, const SimObserver& observer = {});

struct ReplicatedReport {
    std::vector<SimReport> runs;
    Estimate revenue_per_hour;
    Estimate lost_fraction;
    Estimate throughput;
    Estimate energy_kwh;
    Estimate mean_queue_len;
};

/// Seed of replication `index`, derived from the base seed.
[[nodiscard]] std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t index);

/// Independent replications with Student-t intervals across them. With a
/// single replication, revenue uses the run's batch samples and the other
/// intervals stay undefined.
[[nodiscard]] ReplicatedReport run_replications(const SimConfig& config, std::size_t replications);

/// Full-precision JSON rendering of a report (windows excluded).
[[nodiscard]] std::string to_json(const SimReport& report);
[[nodiscard]] std::string to_json(const ReplicatedReport& report);

/// Column header of the window time series.
inline constexpr const char* kWindowCsvHeader =
    "window_start_s,n,lambda_observed,lambda_forecast,completions,abandonments,energy_kwh,revenue_usd";

/// Writes the header and one row per window (6 significant digits).
void write_window_csv(std::ostream& out, const std::vector<WindowRecord>& windows);

}  // namespace greenfarm
