#include "greenfarm/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "greenfarm/errors.hpp"

namespace greenfarm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Outward summation stops once a term is this small relative to the sum.
constexpr double kScaledRelTol = 1e-17;
constexpr long kScaledMaxTerms = 50'000'000;

constexpr std::size_t kOracleMaxStates = std::size_t{1} << 26;

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
        throw DomainError(std::string(name) + " must be finite and >= 0");
    }
}

// log(n! / rho^n), the factor linking p0 and pn.
double log_factorial_over_power(int n, double rho) {
    return std::lgamma(static_cast<double>(n) + 1.0) - n * std::log(rho);
}

}  // namespace

void SystemParams::validate() const {
    require_finite_nonneg(lambda, "lambda");
    require_finite_nonneg(theta, "theta");
    if (!std::isfinite(mu) || mu <= 0.0) throw DomainError("mu must be finite and > 0");
    if (n < 0) throw DomainError("n must be >= 0");
}

double erlang_b(int n, double rho) {
    if (n < 0) throw DomainError("erlang_b: n must be >= 0");
    require_finite_nonneg(rho, "erlang_b: rho");
    double b = 1.0;
    for (int k = 1; k <= n; ++k) {
        b = rho * b / (k + rho * b);
    }
    return b;
}

double erlang_c(int n, double rho) {
    if (n <= 0 || !(rho < n)) throw DomainError("erlang_c: requires 0 <= rho < n");
    const double b = erlang_b(n, rho);
    return n * b / (n - rho * (1.0 - b));
}

double palm_g(double x, double y) {
    require_finite_nonneg(x, "palm_g: x");
    require_finite_nonneg(y, "palm_g: y");
    double sum = 1.0;
    double term = 1.0;
    for (long j = 1; j <= kPalmMaxTerms; ++j) {
        term *= y / (x + static_cast<double>(j));
        sum += term;
        if (!std::isfinite(sum)) {
            throw NumericalError("palm_g: series overflowed", sum);
        }
        if (term < kPalmRelTol * sum) return sum;
    }
    throw NumericalError("palm_g: series did not converge within the term limit", sum);
}

double log_palm_g(double x, double y) {
    require_finite_nonneg(x, "log_palm_g: x");
    require_finite_nonneg(y, "log_palm_g: y");
    if (y == 0.0) return 0.0;

    // Successive term ratio is y / (x + j), so terms grow while j <= y - x.
    const double peak_real = std::floor(y - x);
    const long peak = peak_real > 0.0 ? static_cast<long>(peak_real) : 0;
    const double log_peak =
        peak == 0 ? 0.0
                  : peak * std::log(y) - (std::lgamma(x + peak + 1.0) - std::lgamma(x + 1.0));

    double sum = 1.0;
    long count = 0;
    double term = 1.0;
    for (long j = peak + 1;; ++j) {
        term *= y / (x + static_cast<double>(j));
        sum += term;
        if (term < kScaledRelTol * sum) break;
        if (++count > kScaledMaxTerms) {
            throw NumericalError("log_palm_g: forward sum did not converge", log_peak + std::log(sum));
        }
    }
    term = 1.0;
    for (long j = peak; j >= 1; --j) {
        term *= (x + static_cast<double>(j)) / y;
        sum += term;
        if (term < kScaledRelTol * sum) break;
    }
    return log_peak + std::log(sum);
}

SteadyState steady_state(const SystemParams& params) {
    params.validate();
    const double lambda = params.lambda;
    const double mu = params.mu;
    const double theta = params.theta;
    const int n = params.n;

    SteadyState s;
    if (n == 0) {
        // Nobody is ever served: waiting jobs form an M/M/inf queue drained by abandonment.
        s.p0 = theta > 0.0 ? std::exp(-lambda / theta) : (lambda == 0.0 ? 1.0 : 0.0);
        s.pn = s.p0;
        s.delay_prob = 1.0;
        s.cond_abandon = 1.0;
        s.abandon_prob = 1.0;
        s.throughput = 0.0;
        s.mean_waiting = theta > 0.0 ? lambda / theta : (lambda == 0.0 ? 0.0 : kInf);
        s.mean_in_system = s.mean_waiting;
        return s;
    }
    if (lambda == 0.0) {
        return s;  // p0 = 1, everything else zero
    }

    const double rho = lambda / mu;
    const double capacity = n * mu;
    if (!std::isfinite(rho) || !std::isfinite(capacity)) {
        throw NumericalError("steady_state: offered load overflows", rho);
    }
    const double b = erlang_b(n, rho);

    if (theta == 0.0) {
        if (rho < n) {
            const double c = n * b / (n - rho * (1.0 - b));
            s.delay_prob = c;
            s.pn = c * (1.0 - rho / n);
            s.p0 = std::exp(log_factorial_over_power(n, rho) + std::log(s.pn));
            s.throughput = lambda;
            s.mean_waiting = c * rho / (n - rho);
            s.mean_in_system = rho + s.mean_waiting;
        } else {
            // Saturated delay system: the queue grows without bound and the excess is lost.
            s.p0 = 0.0;
            s.pn = 0.0;
            s.delay_prob = 1.0;
            s.abandon_prob = 1.0 - capacity / lambda;
            s.cond_abandon = s.abandon_prob;
            s.throughput = capacity;
            s.mean_waiting = kInf;
            s.mean_in_system = kInf;
        }
        return s;
    }

    const double x = capacity / theta;
    const double y = lambda / theta;
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw NumericalError("steady_state: Palm arguments overflow", y);
    }
    const double log_g = log_palm_g(x, y);
    const double inv_g = std::exp(-log_g);
    const double one_minus_inv_g = -std::expm1(-log_g);

    const double denom = inv_g + b * one_minus_inv_g;  // (1 + B(g - 1)) / g
    s.delay_prob = std::min(1.0, b / denom);
    s.pn = b * inv_g / denom;
    s.p0 = s.pn > 0.0 ? std::exp(log_factorial_over_power(n, rho) + std::log(s.pn)) : 0.0;

    // P(Ab | W > 0) = 1/(u g) + 1 - 1/u with u = lambda / (n mu) the per-server utilization.
    const double utilization = lambda / capacity;
    s.cond_abandon = std::clamp(1.0 - one_minus_inv_g / utilization, 0.0, 1.0);
    s.abandon_prob = s.delay_prob * s.cond_abandon;
    s.throughput = std::min(capacity, lambda * (1.0 - s.abandon_prob));

    // Flow balance: theta * E[waiting] = lambda * P(Ab), mu * E[busy] = throughput.
    s.mean_waiting = y * s.abandon_prob;
    s.mean_in_system = s.throughput / mu + s.mean_waiting;
    return s;
}

StationaryDistribution::StationaryDistribution(SystemParams params, std::vector<double> probs,
                                               double tail_bound)
    : params_(params), probs_(std::move(probs)), tail_bound_(tail_bound) {}

double StationaryDistribution::p0() const { return probs_.front(); }

double StationaryDistribution::pn() const {
    const auto n = static_cast<std::size_t>(params_.n);
    return n < probs_.size() ? probs_[n] : 0.0;
}

double StationaryDistribution::delay_prob() const {
    double sum = 0.0;
    for (std::size_t j = static_cast<std::size_t>(params_.n); j < probs_.size(); ++j) sum += probs_[j];
    return sum;
}

double StationaryDistribution::abandon_prob() const {
    // A job finding j >= n others waits behind (j - n) and abandons before
    // service with probability (j+1-n) theta / (n mu + (j+1-n) theta).
    const int n = params_.n;
    const double capacity = n * params_.mu;
    double sum = 0.0;
    for (std::size_t j = static_cast<std::size_t>(n); j < probs_.size(); ++j) {
        const double ahead = static_cast<double>(j) + 1.0 - n;
        sum += probs_[j] * (ahead * params_.theta) / (capacity + ahead * params_.theta);
    }
    return sum;
}

double StationaryDistribution::throughput() const {
    double sum = 0.0;
    for (std::size_t j = 0; j < probs_.size(); ++j) {
        sum += std::min<double>(static_cast<double>(j), params_.n) * params_.mu * probs_[j];
    }
    return sum;
}

double StationaryDistribution::mean_in_system() const {
    double sum = 0.0;
    for (std::size_t j = 0; j < probs_.size(); ++j) sum += static_cast<double>(j) * probs_[j];
    return sum;
}

StationaryDistribution stationary_dist_oracle(const SystemParams& params, std::size_t truncation) {
    params.validate();
    if (!(params.theta > 0.0)) {
        throw DomainError("stationary_dist_oracle: theta must be > 0");
    }
    const auto n = static_cast<std::size_t>(params.n);
    const double y = params.lambda / params.theta;
    std::size_t states = std::max({truncation, n + 2,
                                   static_cast<std::size_t>(n + y + 12.0 * std::sqrt(y) + 64.0)});

    // Death rate out of state j.
    auto death_rate = [&](std::size_t j) {
        if (j <= n) return static_cast<double>(j) * params.mu;
        return static_cast<double>(n) * params.mu + params.theta * static_cast<double>(j - n);
    };

    while (states <= kOracleMaxStates) {
        std::vector<double> logq(states);
        logq[0] = 0.0;
        for (std::size_t j = 1; j < states; ++j) {
            logq[j] = params.lambda == 0.0 ? -kInf
                                           : logq[j - 1] + std::log(params.lambda / death_rate(j));
        }
        const double top = *std::max_element(logq.begin(), logq.end());
        std::vector<double> probs(states);
        double total = 0.0;
        for (std::size_t j = 0; j < states; ++j) {
            probs[j] = std::exp(logq[j] - top);
            total += probs[j];
        }
        for (double& p : probs) p /= total;

        // Beyond the last state every ratio is at most r < 1, so the tail is geometric-bounded.
        const double r = params.lambda / death_rate(states);
        const double tail = r < 1.0 ? probs.back() * r / (1.0 - r) : kInf;
        if (tail < kOracleTailMass) {
            return StationaryDistribution(params, std::move(probs), tail);
        }
        states *= 2;
    }
    throw NumericalError("stationary_dist_oracle: tail mass criterion unreachable", 0.0);
}

}  // namespace greenfarm
