#include <cmath>
#include <iomanip>
#include <ostream>

#include "greenfarm/simulator.hpp"
#include "json.hpp"

namespace greenfarm {

namespace {

using nlohmann::json;

json estimate_json(const Estimate& e) {
    json j;
    j["mean"] = e.mean;
    j["ci95_half_width"] = e.half_width ? json(*e.half_width) : json(nullptr);
    j["samples"] = e.samples;
    return j;
}

json report_json(const SimReport& r) {
    json j;
    j["seed"] = r.seed;
    j["revenue_per_hour"] = estimate_json(r.revenue_per_hour);
    j["revenue_samples_per_hour"] = r.revenue_samples;
    j["revenue_usd"] = r.revenue_usd;
    j["energy_kwh"] = r.energy_kwh;
    j["lost_fraction"] = r.lost_fraction;
    j["throughput"] = r.throughput;
    j["mean_queue_len"] = r.mean_queue_len;
    j["mean_in_system"] = r.mean_in_system;
    j["mean_active_servers"] = r.mean_active_servers;
    j["measured_seconds"] = r.measured_seconds;
    j["arrivals"] = r.arrivals;
    j["completions"] = r.completions;
    j["abandonments"] = r.abandonments;
    j["in_flight"] = r.in_flight;
    j["state_changes"] = r.state_changes;
    j["policy_invocations"] = r.policy_invocations;
    j["windows"] = r.windows.size();
    return j;
}

}  // namespace

std::string to_json(const SimReport& report) { return report_json(report).dump(2); }

std::string to_json(const ReplicatedReport& report) {
    json j;
    j["replications"] = report.runs.size();
    j["revenue_per_hour"] = estimate_json(report.revenue_per_hour);
    j["lost_fraction"] = estimate_json(report.lost_fraction);
    j["throughput"] = estimate_json(report.throughput);
    j["energy_kwh"] = estimate_json(report.energy_kwh);
    j["mean_queue_len"] = estimate_json(report.mean_queue_len);
    j["runs"] = json::array();
    for (const auto& r : report.runs) j["runs"].push_back(report_json(r));
    return j.dump(2);
}

void write_window_csv(std::ostream& out, const std::vector<WindowRecord>& windows) {
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << kWindowCsvHeader << '\n' << std::setprecision(6);
    for (const auto& w : windows) {
        out << w.start << ',' << w.n << ',' << w.lambda_observed << ',';
        if (std::isnan(w.lambda_forecast)) out << "nan"; else out << w.lambda_forecast;
        out << ',' << w.completions << ',' << w.abandonments << ',' << w.energy_kwh << ',' << w.revenue_usd
            << '\n';
    }
    out.flags(flags);
    out.precision(precision);
}

}  // namespace greenfarm
