#pragma once

// Arrival, service and patience generators plus the forecasters that hand
// the allocation policy its next-window arrival rate.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace greenfarm {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream) pair; streams keep arrivals,
/// service demands, patience and forecast noise decoupled.
[[nodiscard]] Rng make_rng(std::uint64_t seed, std::uint64_t stream);

struct LogNormalParams {
    double mu_log = 0.0;
    double sigma_log = 0.0;
};

/// Location/scale of the log-normal with the given mean and squared coefficient of variation.
[[nodiscard]] LogNormalParams lognormal_from_mean_scv(double mean, double scv);

/// true_rate + Laplace(0, b) with b = error_fraction * true_rate, clamped at 0.
/// b is also the mean absolute error of the forecast.
[[nodiscard]] double laplace_perturb(double true_rate, double error_fraction, Rng& rng);

/// Piecewise-constant arrival rate: segment i holds from its start until the next start.
class RateTrace {
public:
    struct Segment {
        double start = 0.0;  ///< seconds
        double rate = 0.0;   ///< jobs/s
    };

    /// Requires a non-empty list, strictly increasing starts and non-negative rates.
    explicit RateTrace(std::vector<Segment> segments);

    [[nodiscard]] double rate_at(double t) const;
    /// Time-average rate over [t0, t1); rate_at(t0) when the interval is empty.
    [[nodiscard]] double mean_rate(double t0, double t1) const;
    /// Start of the first segment after t, or +inf.
    [[nodiscard]] double next_change(double t) const;
    [[nodiscard]] double min_rate() const;
    [[nodiscard]] double max_rate() const;
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }

private:
    [[nodiscard]] std::size_t index_at(double t) const;
    std::vector<Segment> segments_;
};

/// Parses "time_s,rate_jobs_per_s" rows. A leading header row and lines starting
/// with '#' are skipped. Rates are multiplied by `scale`. Throws ParseError with
/// the line number on malformed rows or non-increasing times.
[[nodiscard]] RateTrace parse_trace(std::istream& in, double scale = 1.0);
[[nodiscard]] RateTrace load_trace(const std::filesystem::path& path, double scale = 1.0);

struct PoissonArrivals {
    double rate = 1.0;
};
struct LogNormalRenewal {
    double mean_interval = 1.0;
    double scv = 1.0;
};
struct TraceArrivals {
    std::shared_ptr<const RateTrace> trace;  ///< already scaled
    std::string source;                      ///< path, for reporting
    double scale = 1.0;
};
using ArrivalSpec = std::variant<PoissonArrivals, LogNormalRenewal, TraceArrivals>;

struct ExponentialService {
    double mu = 1.0;
};

struct ExponentialPatience {
    double theta = 1.0;
};
struct LogNormalPatience {
    double mean = 1.0;
    double scv = 1.0;
};
struct InfinitePatience {};
using PatienceSpec = std::variant<ExponentialPatience, LogNormalPatience, InfinitePatience>;

struct OracleForecaster {};
struct OracleWithLaplaceError {
    double mean_abs_error_fraction = 0.0;
};
struct LastWindowForecaster {};
using ForecasterSpec = std::variant<OracleForecaster, OracleWithLaplaceError, LastWindowForecaster>;

struct WorkloadSpec {
    ArrivalSpec arrivals = PoissonArrivals{};
    ExponentialService service{};
    PatienceSpec patience = ExponentialPatience{};
    ForecasterSpec forecaster = OracleForecaster{};

    void validate() const;
    /// Abandonment rate the analytic model assumes: 1 / mean patience, 0 when infinite.
    [[nodiscard]] double abandonment_rate() const;
    /// True mean arrival rate over [t0, t1).
    [[nodiscard]] double mean_arrival_rate(double t0, double t1) const;
};

/// Successive arrival epochs of one arrival process.
class ArrivalStream {
public:
    ArrivalStream(ArrivalSpec spec, Rng rng);
    /// Next arrival strictly after `now`; +inf if the process has stopped.
    double next(double now);

private:
    ArrivalSpec spec_;
    Rng rng_;
    std::exponential_distribution<double> unit_exp_{1.0};
    std::lognormal_distribution<double> lognormal_;
};

/// Draws patience times; +inf for infinitely patient jobs.
class PatienceSampler {
public:
    PatienceSampler(PatienceSpec spec, Rng rng);
    double next();

private:
    PatienceSpec spec_;
    Rng rng_;
    std::exponential_distribution<double> exp_;
    std::lognormal_distribution<double> lognormal_;
};

class ServiceSampler {
public:
    ServiceSampler(ExponentialService spec, Rng rng);
    double next() { return dist_(rng_); }

private:
    Rng rng_;
    std::exponential_distribution<double> dist_;
};

/// Next-window arrival-rate prediction handed to the allocation policy.
class Forecaster {
public:
    Forecaster(const WorkloadSpec& workload, Rng rng);

    /// Whether a forecast can be made before any window has been observed.
    [[nodiscard]] bool needs_history() const noexcept;
    /// Forecast for [now, now + horizon); `observed_rate` is the rate measured
    /// over the window that just ended (used by the last-window forecaster).
    double forecast(double now, double horizon, double observed_rate);

private:
    WorkloadSpec workload_;
    Rng rng_;
};

}  // namespace greenfarm
