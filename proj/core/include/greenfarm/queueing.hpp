#pragma once

// Steady-state analysis of the M/M/n+M (Erlang-A) queue.
//
// All rates are per second. The closed forms go through the Erlang-B
// blocking probability and Palm's series g(x, y); a brute-force evaluation
// of the truncated birth-death chain is provided as an independent check.

#include <cstddef>
#include <vector>

namespace greenfarm {

/// Queueing tuple consumed by every analytic formula.
struct SystemParams {
    double lambda = 0.0;  ///< arrival rate (jobs/s)
    double mu = 1.0;      ///< service rate per server (jobs/s)
    double theta = 0.0;   ///< abandonment rate of a waiting job (1/s)
    int n = 0;            ///< running servers

    [[nodiscard]] double offered_load() const noexcept { return lambda / mu; }

    /// Throws DomainError unless lambda >= 0, mu > 0, theta >= 0, n >= 0 and all finite.
    void validate() const;
};

struct SteadyState {
    double p0 = 1.0;              ///< P(system empty)
    double pn = 0.0;              ///< P(exactly n jobs: all busy, nobody waiting)
    double delay_prob = 0.0;      ///< P(W > 0)
    double cond_abandon = 0.0;    ///< P(Ab | W > 0)
    double abandon_prob = 0.0;    ///< P(Ab) = delay_prob * cond_abandon
    double throughput = 0.0;      ///< completed jobs per second
    double mean_waiting = 0.0;    ///< E[number of waiting jobs]
    double mean_in_system = 0.0;  ///< E[waiting + in service]
};

/// Erlang-B blocking probability B(n, rho) via the stable recurrence.
[[nodiscard]] double erlang_b(int n, double rho);

/// Erlang-C delay probability C(n, rho); requires rho < n.
[[nodiscard]] double erlang_c(int n, double rho);

/// Relative truncation threshold and term cap used by palm_g.
inline constexpr double kPalmRelTol = 1e-13;
inline constexpr long kPalmMaxTerms = 1'000'000;

/// g(x, y) = 1 + sum_{j>=1} y^j / prod_{k=1..j} (x + k), summed forward until
/// the added term drops below kPalmRelTol times the partial sum.
/// Throws NumericalError (with the partial sum) after kPalmMaxTerms terms or on overflow.
[[nodiscard]] double palm_g(double x, double y);

/// log g(x, y), summed outward from the largest term in scaled arithmetic.
/// Does not overflow and costs O(sqrt(y)) terms even when y >> x.
[[nodiscard]] double log_palm_g(double x, double y);

/// Closed-form steady state. theta == 0 falls back to Erlang-C (rho < n) or the
/// saturated limit (rho >= n); n == 0 is total loss.
[[nodiscard]] SteadyState steady_state(const SystemParams& params);

/// Stationary distribution of the truncated birth-death chain, built directly
/// from the product form of the balance equations.
class StationaryDistribution {
public:
    StationaryDistribution(SystemParams params, std::vector<double> probs, double tail_bound);

    [[nodiscard]] const std::vector<double>& probabilities() const noexcept { return probs_; }
    [[nodiscard]] const SystemParams& params() const noexcept { return params_; }
    /// Upper bound on the probability mass beyond the last state.
    [[nodiscard]] double tail_bound() const noexcept { return tail_bound_; }

    [[nodiscard]] double p0() const;
    [[nodiscard]] double pn() const;
    [[nodiscard]] double delay_prob() const;
    /// Sum over states of p_j times the abandonment probability of a job finding j others.
    [[nodiscard]] double abandon_prob() const;
    /// Sum over states of min(j, n) * mu * p_j.
    [[nodiscard]] double throughput() const;
    [[nodiscard]] double mean_in_system() const;

private:
    SystemParams params_;
    std::vector<double> probs_;
    double tail_bound_;
};

inline constexpr double kOracleTailMass = 1e-12;

/// Truncated-chain oracle. Requires theta > 0. Starts with `truncation` states
/// (at least n + 1) and doubles until the tail mass is below kOracleTailMass.
[[nodiscard]] StationaryDistribution stationary_dist_oracle(const SystemParams& params,
                                                            std::size_t truncation = 0);

}  // namespace greenfarm
