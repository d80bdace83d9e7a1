#include "greenfarm/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "greenfarm/errors.hpp"

namespace greenfarm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

std::lognormal_distribution<double> lognormal_for(double mean, double scv) {
    const auto p = lognormal_from_mean_scv(mean, scv);
    return std::lognormal_distribution<double>(p.mu_log, p.sigma_log);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
    const std::string f = trim(field);
    if (f.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(f, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == f.size() && std::isfinite(out);
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return Rng(seq);
}

LogNormalParams lognormal_from_mean_scv(double mean, double scv) {
    if (!positive_finite(mean) || !positive_finite(scv)) {
        throw DomainError("lognormal_from_mean_scv: mean and scv must be > 0");
    }
    const double var_log = std::log1p(scv);
    return {std::log(mean) - var_log / 2.0, std::sqrt(var_log)};
}

double laplace_perturb(double true_rate, double error_fraction, Rng& rng) {
    if (!(error_fraction >= 0.0)) throw DomainError("laplace_perturb: error fraction must be >= 0");
    const double scale = error_fraction * true_rate;
    if (scale == 0.0) return true_rate;
    // Inverse CDF: u uniform on (-1/2, 1/2).
    std::uniform_real_distribution<double> uniform(-0.5, 0.5);
    double u = uniform(rng);
    while (u == -0.5) u = uniform(rng);
    const double noise = -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
    return std::max(0.0, true_rate + noise);
}

RateTrace::RateTrace(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw DomainError("rate trace needs at least one segment");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (!(segments_[i].rate >= 0.0) || !std::isfinite(segments_[i].rate)) {
            throw DomainError("rate trace rates must be finite and >= 0");
        }
        if (i > 0 && !(segments_[i].start > segments_[i - 1].start)) {
            throw DomainError("rate trace times must be strictly increasing");
        }
    }
}

std::size_t RateTrace::index_at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.start; });
    return it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
}

double RateTrace::rate_at(double t) const { return segments_[index_at(t)].rate; }

double RateTrace::next_change(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.start; });
    return it == segments_.end() ? kInf : it->start;
}

double RateTrace::mean_rate(double t0, double t1) const {
    if (!(t1 > t0)) return rate_at(t0);
    double area = 0.0;
    double t = t0;
    while (t < t1) {
        const double until = std::min(next_change(t), t1);
        area += rate_at(t) * (until - t);
        t = until;
    }
    return area / (t1 - t0);
}

double RateTrace::min_rate() const {
    return std::min_element(segments_.begin(), segments_.end(),
                            [](const Segment& a, const Segment& b) { return a.rate < b.rate; })
        ->rate;
}

double RateTrace::max_rate() const {
    return std::max_element(segments_.begin(), segments_.end(),
                            [](const Segment& a, const Segment& b) { return a.rate < b.rate; })
        ->rate;
}

RateTrace parse_trace(std::istream& in, double scale) {
    if (!positive_finite(scale)) throw DomainError("trace scale must be > 0");
    std::vector<RateTrace::Segment> segments;
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto comma = text.find(',');
        if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
            throw ParseError("trace row must have exactly two fields", line_no);
        }
        double t = 0.0;
        double rate = 0.0;
        const bool ok = parse_number(text.substr(0, comma), t) && parse_number(text.substr(comma + 1), rate);
        if (!ok) {
            if (!seen_content) {  // header row
                seen_content = true;
                continue;
            }
            throw ParseError("trace row is not numeric", line_no);
        }
        seen_content = true;
        if (rate < 0.0) throw ParseError("trace rate must be >= 0", line_no);
        if (!segments.empty() && !(t > segments.back().start)) {
            throw ParseError("trace times must be strictly increasing", line_no);
        }
        segments.push_back({t, rate * scale});
    }
    if (segments.empty()) throw ParseError("trace has no data rows", line_no);
    return RateTrace(std::move(segments));
}

RateTrace load_trace(const std::filesystem::path& path, double scale) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file: " + path.string());
    return parse_trace(in, scale);
}

void WorkloadSpec::validate() const {
    std::visit(overloaded{
                   [](const PoissonArrivals& a) {
                       if (!(a.rate >= 0.0) || !std::isfinite(a.rate)) throw ConfigError("arrival rate must be >= 0");
                   },
                   [](const LogNormalRenewal& a) {
                       if (!positive_finite(a.mean_interval) || !positive_finite(a.scv)) {
                           throw ConfigError("log-normal arrivals need mean_interval > 0 and scv > 0");
                       }
                   },
                   [](const TraceArrivals& a) {
                       if (!a.trace) throw ConfigError("trace arrivals have no trace loaded");
                       if (!positive_finite(a.scale)) throw ConfigError("trace scale must be > 0");
                   },
               },
               arrivals);
    if (!positive_finite(service.mu)) throw ConfigError("service rate mu must be > 0");
    std::visit(overloaded{
                   [](const ExponentialPatience& p) {
                       if (!positive_finite(p.theta)) throw ConfigError("patience theta must be > 0");
                   },
                   [](const LogNormalPatience& p) {
                       if (!positive_finite(p.mean) || !positive_finite(p.scv)) {
                           throw ConfigError("log-normal patience needs mean > 0 and scv > 0");
                       }
                   },
                   [](const InfinitePatience&) {},
               },
               patience);
    if (const auto* f = std::get_if<OracleWithLaplaceError>(&forecaster)) {
        if (!(f->mean_abs_error_fraction >= 0.0) || !std::isfinite(f->mean_abs_error_fraction)) {
            throw ConfigError("forecast error fraction must be >= 0");
        }
    }
}

double WorkloadSpec::abandonment_rate() const {
    return std::visit(overloaded{
                          [](const ExponentialPatience& p) { return p.theta; },
                          [](const LogNormalPatience& p) { return 1.0 / p.mean; },
                          [](const InfinitePatience&) { return 0.0; },
                      },
                      patience);
}

double WorkloadSpec::mean_arrival_rate(double t0, double t1) const {
    return std::visit(overloaded{
                          [](const PoissonArrivals& a) { return a.rate; },
                          [](const LogNormalRenewal& a) { return 1.0 / a.mean_interval; },
                          [&](const TraceArrivals& a) { return a.trace->mean_rate(t0, t1); },
                      },
                      arrivals);
}

ArrivalStream::ArrivalStream(ArrivalSpec spec, Rng rng) : spec_(std::move(spec)), rng_(std::move(rng)) {
    if (const auto* a = std::get_if<LogNormalRenewal>(&spec_)) {
        lognormal_ = lognormal_for(a->mean_interval, a->scv);
    }
}

double ArrivalStream::next(double now) {
    return std::visit(overloaded{
                          [&](const PoissonArrivals& a) {
                              return a.rate > 0.0 ? now + unit_exp_(rng_) / a.rate : kInf;
                          },
                          [&](const LogNormalRenewal&) { return now + lognormal_(rng_); },
                          [&](const TraceArrivals& a) {
                              // Exact per segment: memorylessness lets us restart at each boundary.
                              double t = now;
                              while (true) {
                                  const double rate = a.trace->rate_at(t);
                                  const double boundary = a.trace->next_change(t);
                                  if (rate > 0.0) {
                                      const double candidate = t + unit_exp_(rng_) / rate;
                                      if (candidate < boundary) return candidate;
                                  }
                                  if (!std::isfinite(boundary)) return kInf;
                                  t = boundary;
                              }
                          },
                      },
                      spec_);
}

PatienceSampler::PatienceSampler(PatienceSpec spec, Rng rng) : spec_(std::move(spec)), rng_(std::move(rng)) {
    if (const auto* p = std::get_if<ExponentialPatience>(&spec_)) {
        exp_ = std::exponential_distribution<double>(p->theta);
    } else if (const auto* p = std::get_if<LogNormalPatience>(&spec_)) {
        lognormal_ = lognormal_for(p->mean, p->scv);
    }
}

double PatienceSampler::next() {
    return std::visit(overloaded{
                          [&](const ExponentialPatience&) { return exp_(rng_); },
                          [&](const LogNormalPatience&) { return lognormal_(rng_); },
                          [](const InfinitePatience&) { return kInf; },
                      },
                      spec_);
}

ServiceSampler::ServiceSampler(ExponentialService spec, Rng rng) : rng_(std::move(rng)), dist_(spec.mu) {}

Forecaster::Forecaster(const WorkloadSpec& workload, Rng rng) : workload_(workload), rng_(std::move(rng)) {}

bool Forecaster::needs_history() const noexcept {
    return std::holds_alternative<LastWindowForecaster>(workload_.forecaster);
}

double Forecaster::forecast(double now, double horizon, double observed_rate) {
    return std::visit(overloaded{
                          [&](const OracleForecaster&) { return workload_.mean_arrival_rate(now, now + horizon); },
                          [&](const OracleWithLaplaceError& f) {
                              return laplace_perturb(workload_.mean_arrival_rate(now, now + horizon),
                                                     f.mean_abs_error_fraction, rng_);
                          },
                          [&](const LastWindowForecaster&) { return observed_rate; },
                      },
                      workload_.forecaster);
}

}  // namespace greenfarm
