#pragma once

#include <utility>

#include "greenfarm/economics.hpp"
#include "greenfarm/queueing.hpp"

namespace greenfarm {

struct AllocationDecision {
    int n_new = 0;
    double predicted_delta = 0.0;  ///< Delta r(best candidate, n_current), $/s
    bool changed = false;
    int evaluations = 0;           ///< distinct r(n) evaluations
};

struct AllocatorOptions {
    /// A reallocation is taken only if the predicted gain exceeds this ($/s).
    double epsilon = 0.0;
    /// Servers are switched in multiples of this many (threads per machine).
    int granularity = 1;
};

/// Binary search for the revenue-maximizing server count.
///
/// Probes Delta r(n'-1, n), Delta r(n', n), Delta r(n'+1, n) around a midpoint,
/// starting from n' = ceil(lambda / mu), and narrows [n_l, n_u] towards the
/// side that increases. A plateau of three equal values counts as a local
/// maximum. If the interval is exhausted without hitting a local maximum,
/// the best probe seen so far is used. The candidate is adopted only when its
/// predicted change exceeds `options.epsilon`.
///
/// `load.n` is ignored. Uses at most 3 (ceil(log2(S + 1)) + 2) evaluations of r.
[[nodiscard]] AllocationDecision optimize_allocation(int n_current, int capacity,
                                                     const SystemParams& load,
                                                     const EconomicModel& econ,
                                                     const ReconfigCost& reconfig,
                                                     const AllocatorOptions& options = {});

/// Evaluates r(n) for every n in 0..capacity and returns the argmax (smallest on ties).
[[nodiscard]] std::pair<int, double> exhaustive_optimal(int capacity, const SystemParams& load,
                                                        const EconomicModel& econ);

}  // namespace greenfarm
