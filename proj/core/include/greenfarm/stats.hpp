#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace greenfarm {

/// Sample mean with a Student-t confidence half-width.
struct Estimate {
    double mean = 0.0;
    std::optional<double> half_width;  ///< empty with fewer than two samples
    std::size_t samples = 0;

    [[nodiscard]] bool contains(double value) const noexcept {
        return half_width && value >= mean - *half_width && value <= mean + *half_width;
    }
};

/// Quantile of Student's t distribution with `dof` degrees of freedom.
[[nodiscard]] double t_quantile(double p, double dof);

/// Mean and two-sided confidence half-width t_{(1+level)/2, k-1} * s / sqrt(k).
[[nodiscard]] Estimate summarize(std::span<const double> samples, double level = 0.95);

}  // namespace greenfarm
