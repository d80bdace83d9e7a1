#include "greenfarm/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "greenfarm/errors.hpp"

namespace greenfarm {

double t_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("t_quantile: p must lie in (0, 1)");
    if (!(dof > 0.0)) throw DomainError("t_quantile: degrees of freedom must be > 0");
    const boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

Estimate summarize(std::span<const double> samples, double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("summarize: level must lie in (0, 1)");
    Estimate e;
    e.samples = samples.size();
    if (samples.empty()) return e;
    const double k = static_cast<double>(samples.size());
    e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / k;
    if (samples.size() < 2) return e;
    double ss = 0.0;
    for (double x : samples) ss += (x - e.mean) * (x - e.mean);
    const double sd = std::sqrt(ss / (k - 1.0));
    e.half_width = t_quantile(0.5 + level / 2.0, k - 1.0) * sd / std::sqrt(k);
    return e;
}

}  // namespace greenfarm
