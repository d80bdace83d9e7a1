#include "greenfarm/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "greenfarm/errors.hpp"

namespace greenfarm {

namespace {

// Memoized Delta r(candidate, n_current) over the grid n = base + step * h.
class DeltaEvaluator {
public:
    DeltaEvaluator(int n_current, int base, int step, const SystemParams& load,
                   const EconomicModel& econ, const ReconfigCost& reconfig)
        : n_current_(n_current), base_(base), step_(step), load_(load), econ_(econ), reconfig_(reconfig) {
        r_current_ = revenue(n_current);
    }

    [[nodiscard]] int servers(int h) const { return base_ + step_ * h; }

    double operator()(int h) {
        if (auto it = delta_.find(h); it != delta_.end()) return it->second;
        const int n = servers(h);
        const double d = revenue(n) - r_current_ - switch_cost(n - n_current_, reconfig_, econ_);
        delta_.emplace(h, d);
        return d;
    }

    [[nodiscard]] int evaluations() const { return static_cast<int>(revenue_.size()); }

    /// Best probed index (largest delta, smallest index on ties).
    [[nodiscard]] int best_probe() const {
        auto best = delta_.begin();
        for (auto it = delta_.begin(); it != delta_.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        return best->first;
    }

private:
    double revenue(int n) {
        if (auto it = revenue_.find(n); it != revenue_.end()) return it->second;
        SystemParams p = load_;
        p.n = n;
        const double r = revenue_rate(p, econ_);
        revenue_.emplace(n, r);
        return r;
    }

    int n_current_;
    int base_;
    int step_;
    SystemParams load_;
    const EconomicModel& econ_;
    const ReconfigCost& reconfig_;
    double r_current_ = 0.0;
    std::map<int, double> revenue_;
    std::map<int, double> delta_;
};

}  // namespace

AllocationDecision optimize_allocation(int n_current, int capacity, const SystemParams& load,
                                       const EconomicModel& econ, const ReconfigCost& reconfig,
                                       const AllocatorOptions& options) {
    if (capacity < 1) throw DomainError("optimize_allocation: capacity must be >= 1");
    if (n_current < 0 || n_current > capacity) {
        throw DomainError("optimize_allocation: n_current must lie in [0, capacity]");
    }
    if (options.granularity < 1) throw DomainError("optimize_allocation: granularity must be >= 1");
    SystemParams forecast = load;
    forecast.n = 0;
    forecast.validate();

    const int step = options.granularity;
    const int base = n_current % step;
    const int top = (capacity - base) / step;  // candidates h = 0..top
    DeltaEvaluator delta(n_current, base, step, forecast, econ, reconfig);

    int chosen = (n_current - base) / step;
    if (top == 1) {
        chosen = delta(1) > delta(0) ? 1 : 0;
    } else if (top >= 2) {
        const auto offered = static_cast<int>(std::ceil(forecast.lambda / forecast.mu));
        auto clamp_probe = [top](int h) { return std::clamp(h, 1, top - 1); };
        int h = clamp_probe((std::max(offered - base, 0) + step - 1) / step);
        int lo = 0;
        int hi = top;
        bool local_max = false;
        while (lo < hi) {
            const double below = delta(h - 1);
            const double here = delta(h);
            const double above = delta(h + 1);
            if (below <= here && here >= above) {
                local_max = true;
                break;
            }
            if (below <= here) {
                lo = h + 1;  // still climbing
            } else if (here >= above) {
                hi = h - 1;  // descending
            } else {
                // Local dip: follow the larger neighbour.
                if (above >= below) lo = h + 1; else hi = h - 1;
            }
            h = clamp_probe(lo + (hi - lo + 1) / 2);
        }
        chosen = local_max ? h : delta.best_probe();
    }

    AllocationDecision out;
    out.predicted_delta = delta(chosen);
    const int candidate = delta.servers(chosen);
    out.changed = candidate != n_current && out.predicted_delta > options.epsilon;
    out.n_new = out.changed ? candidate : n_current;
    out.evaluations = delta.evaluations();
    return out;
}

std::pair<int, double> exhaustive_optimal(int capacity, const SystemParams& load, const EconomicModel& econ) {
    if (capacity < 0) throw DomainError("exhaustive_optimal: capacity must be >= 0");
    SystemParams p = load;
    int best_n = 0;
    double best_r = 0.0;
    for (int n = 0; n <= capacity; ++n) {
        p.n = n;
        const double r = revenue_rate(p, econ);
        if (n == 0 || r > best_r) {
            best_n = n;
            best_r = r;
        }
    }
    return {best_n, best_r};
}

}  // namespace greenfarm
