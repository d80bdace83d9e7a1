#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "greenfarm/errors.hpp"
#include "greenfarm/queueing.hpp"
#include "greenfarm/simulator.hpp"
#include "json.hpp"

using namespace greenfarm;

namespace {

SimConfig static_farm(double lambda, int n, double theta, double duration) {
    SimConfig c;
    c.capacity = n;
    c.policy = StaticPolicy{n};
    c.workload.arrivals = PoissonArrivals{lambda};
    c.workload.service = {10.0};
    c.workload.patience = ExponentialPatience{theta};
    c.duration = duration;
    c.sample_interval = duration / 10.0;
    return c;
}

// Rate steps up and down every 20 minutes so the adaptive policy keeps moving.
SimConfig adaptive_steps() {
    std::istringstream in("0,40\n1200,120\n2400,20\n3600,150\n4800,60\n6000,90\n");
    SimConfig c;
    c.capacity = 30;
    c.workload.arrivals = TraceArrivals{std::make_shared<const RateTrace>(parse_trace(in)), "steps", 1.0};
    c.workload.service = {10.0};
    c.workload.patience = ExponentialPatience{0.5};
    c.reconfig.window_seconds = 600.0;
    c.reconfig.boot_seconds = 120.0;
    c.duration = 7200.0;
    c.sample_interval = 1800.0;
    c.seed = 17;
    return c;
}

struct Trace {
    std::vector<SimEvent> events;
    SimObserver observer() {
        return [this](const SimEvent& e) { events.push_back(e); };
    }
};

}  // namespace

TEST_CASE("idle farm pays for idle power") {
    auto c = static_farm(0.0, 10, 1.0, 3600.0);
    const auto r = run(c);
    CHECK(r.completions == 0);
    CHECK(r.arrivals == 0);
    CHECK(r.energy_kwh == doctest::Approx(10 * 59.0 * 3600.0 / 3.6e6).epsilon(1e-12));
    CHECK(r.revenue_usd < 0.0);
    REQUIRE(r.revenue_per_hour.half_width);
    CHECK(*r.revenue_per_hour.half_width == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("event stream invariants") {
    for (const SimConfig& c : {static_farm(80.0, 8, 2.0, 2000.0), adaptive_steps()}) {
        Trace t;
        const auto r = run(c, t.observer());
        CHECK(r.arrivals == r.completions + r.abandonments + r.in_flight);

        double clock = 0.0;
        bool causal = true;
        std::uint64_t last_started = 0;
        bool fifo = true;
        bool first_start = true;
        std::set<std::uint64_t> in_service;
        std::set<std::uint64_t> started;
        bool abandoned_in_service = false;
        bool early_abandon = false;
        std::uint64_t completions = 0;
        for (const auto& e : t.events) {
            causal &= e.clock >= clock;
            clock = e.clock;
            switch (e.kind) {
                case SimEventKind::ServiceStart:
                    fifo &= first_start || e.job > last_started;
                    first_start = false;
                    last_started = e.job;
                    in_service.insert(e.job);
                    started.insert(e.job);
                    break;
                case SimEventKind::Completion:
                    in_service.erase(e.job);
                    ++completions;
                    break;
                case SimEventKind::Abandonment:
                    abandoned_in_service |= started.count(e.job) > 0;
                    early_abandon |= e.effective > e.clock;
                    break;
                default:
                    break;
            }
        }
        CHECK(causal);
        CHECK(fifo);
        CHECK_FALSE(abandoned_in_service);
        CHECK_FALSE(early_abandon);
        CHECK(completions == r.completions);
        CHECK(r.lost_fraction >= 0.0);
        CHECK(r.lost_fraction <= 1.0);
    }
}

TEST_CASE("deterministic given the seed") {
    const auto c = adaptive_steps();
    const auto a = run(c);
    const auto b = run(c);
    CHECK(a.arrivals == b.arrivals);
    CHECK(a.completions == b.completions);
    CHECK(a.abandonments == b.abandonments);
    CHECK(a.state_changes == b.state_changes);
    CHECK(a.revenue_usd == b.revenue_usd);
    CHECK(a.energy_kwh == b.energy_kwh);
    auto other = c;
    other.seed = c.seed + 1;
    CHECK(run(other).arrivals != a.arrivals);
}

TEST_CASE("static energy matches the power model") {
    const auto c = static_farm(80.0, 10, 0.1, 200000.0);
    const auto r = run(c);
    const auto s = steady_state({80.0, 10.0, 0.1, 10});
    const double watts = power_draw(10, s.throughput / 10.0, EconomicModel{}.power);
    const double analytic_kwh = watts * c.duration / 3.6e6;
    CHECK(std::abs(r.energy_kwh - analytic_kwh) < 0.02 * analytic_kwh);
    CHECK(r.state_changes == 0);
}

TEST_CASE("static farm agrees with the analytic queue") {
    const auto c = static_farm(80.0, 8, 2.0, 50000.0);
    const auto r = run(c);
    const auto s = steady_state({80.0, 10.0, 2.0, 8});
    CHECK(r.lost_fraction == doctest::Approx(s.abandon_prob).epsilon(0.05));
    CHECK(r.throughput == doctest::Approx(s.throughput).epsilon(0.01));
    CHECK(r.mean_queue_len == doctest::Approx(s.mean_waiting).epsilon(0.05));
    CHECK(r.mean_in_system == doctest::Approx(s.mean_in_system).epsilon(0.03));
}

TEST_CASE("window rule") {
    const auto c = adaptive_steps();
    Trace t;
    const auto r = run(c, t.observer());
    const double k = c.reconfig.boot_seconds;
    const double w = c.window_length();

    std::vector<double> decisions;
    std::vector<double> boots;
    for (const auto& e : t.events) {
        if (e.kind == SimEventKind::Decision) decisions.push_back(e.clock);
        if (e.kind == SimEventKind::BootComplete) boots.push_back(e.clock);
    }
    REQUIRE(decisions.size() > 4);
    REQUIRE_FALSE(boots.empty());
    CHECK(r.policy_invocations == decisions.size());

    auto boots_at = [&](double when) {
        return std::any_of(boots.begin(), boots.end(), [&](double b) { return std::abs(b - when) < 1e-9; });
    };
    // Every boot started at a decision, and no decision happens while it is booting.
    for (double b : boots) {
        const double started = b - k;
        CHECK(std::any_of(decisions.begin(), decisions.end(),
                          [&](double d) { return std::abs(d - started) < 1e-9; }));
        CHECK_FALSE(std::any_of(decisions.begin(), decisions.end(),
                                [&](double d) { return d > started + 1e-9 && d < b - 1e-9; }));
    }
    // After a scale-up the next window starts once the boots finish; otherwise right away.
    bool saw_up = false;
    bool saw_other = false;
    for (std::size_t i = 0; i + 1 < decisions.size(); ++i) {
        const double gap = decisions[i + 1] - decisions[i];
        if (boots_at(decisions[i] + k)) {
            saw_up = true;
            CHECK(gap == doctest::Approx(k + w));
        } else {
            saw_other = true;
            CHECK(gap == doctest::Approx(w));
        }
    }
    CHECK(saw_up);
    CHECK(saw_other);

    // Window records tile the run.
    for (std::size_t i = 0; i + 1 < r.windows.size(); ++i) CHECK(r.windows[i].start < r.windows[i + 1].start);
    std::uint64_t completions = 0;
    std::uint64_t abandonments = 0;
    double kwh = 0.0;
    for (const auto& rec : r.windows) {
        completions += rec.completions;
        abandonments += rec.abandonments;
        kwh += rec.energy_kwh;
    }
    CHECK(completions == r.completions);
    CHECK(abandonments == r.abandonments);
    CHECK(kwh == doctest::Approx(r.energy_kwh).epsilon(1e-9));
}

TEST_CASE("scale-down drains busy servers instead of dropping jobs") {
    auto c = adaptive_steps();
    c.initial_n = 30;
    Trace t;
    const auto r = run(c, t.observer());
    CHECK(r.arrivals == r.completions + r.abandonments + r.in_flight);
    // every shutdown happens on a server that is not serving anything
    std::vector<bool> busy(static_cast<std::size_t>(c.capacity), false);
    bool shut_busy = false;
    for (const auto& e : t.events) {
        if (e.server < 0) continue;
        const auto s = static_cast<std::size_t>(e.server);
        if (e.kind == SimEventKind::ServiceStart) busy[s] = true;
        if (e.kind == SimEventKind::Completion) busy[s] = false;
        if (e.kind == SimEventKind::ShutdownComplete) shut_busy |= busy[s];
    }
    CHECK_FALSE(shut_busy);
    CHECK(r.state_changes > 0);
}

TEST_CASE("last-window forecaster waits for a window of history") {
    auto c = adaptive_steps();
    c.workload.forecaster = LastWindowForecaster{};
    c.initial_n = 5;
    const auto r = run(c);
    REQUIRE_FALSE(r.windows.empty());
    CHECK(std::isnan(r.windows.front().lambda_forecast));
    CHECK(r.windows.front().n == 5);
    CHECK(r.policy_invocations > 0);
}

TEST_CASE("warmup excludes the start of the run") {
    auto c = static_farm(80.0, 8, 2.0, 4000.0);
    c.warmup = 1000.0;
    c.sample_interval = 500.0;
    const auto r = run(c);
    CHECK(r.measured_seconds == 3000.0);
    CHECK(r.revenue_samples.size() == 6);
    CHECK(r.throughput == doctest::Approx(steady_state({80.0, 10.0, 2.0, 8}).throughput).epsilon(0.03));
}

TEST_CASE("non-markovian workloads run") {
    auto c = static_farm(80.0, 10, 0.1, 5000.0);
    c.workload.arrivals = LogNormalRenewal{1.0 / 80.0, 2.0};
    c.workload.patience = LogNormalPatience{10.0, 5.0};
    const auto r = run(c);
    CHECK(r.arrivals == r.completions + r.abandonments + r.in_flight);
    CHECK(static_cast<double>(r.arrivals) == doctest::Approx(80.0 * 5000.0).epsilon(0.02));

    c.workload.patience = InfinitePatience{};
    CHECK(run(c).abandonments == 0);
}

TEST_CASE("config validation") {
    SimConfig c;
    c.capacity = 0;
    CHECK_THROWS_AS((void)run(c), ConfigError);
    c = SimConfig{};
    c.policy = StaticPolicy{11};
    CHECK_THROWS_AS((void)run(c), ConfigError);
    c = SimConfig{};
    c.warmup = c.duration;
    CHECK_THROWS_AS((void)run(c), ConfigError);
    c = SimConfig{};
    c.sample_interval = 0.0;
    CHECK_THROWS_AS((void)run(c), ConfigError);
    c = SimConfig{};
    c.initial_n = 12;
    CHECK_THROWS_AS((void)run(c), ConfigError);
}

TEST_CASE("replications") {
    const auto c = static_farm(80.0, 8, 2.0, 3000.0);
    const auto rep = run_replications(c, 4);
    REQUIRE(rep.runs.size() == 4);
    std::set<std::uint64_t> seeds;
    for (const auto& r : rep.runs) seeds.insert(r.seed);
    CHECK(seeds.size() == 4);
    CHECK(rep.lost_fraction.samples == 4);
    CHECK(rep.lost_fraction.half_width);
    CHECK(replication_seed(1, 0) != replication_seed(1, 1));
    CHECK(replication_seed(1, 2) == replication_seed(1, 2));

    const auto single = run_replications(c, 1);
    CHECK(single.revenue_per_hour.samples == single.runs.front().revenue_samples.size());
    CHECK_FALSE(single.lost_fraction.half_width);

    const auto idle = run_replications(static_farm(0.0, 4, 1.0, 3600.0), 3);
    REQUIRE(idle.revenue_per_hour.half_width);
    CHECK(*idle.revenue_per_hour.half_width == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("report serialization") {
    const auto c = adaptive_steps();
    const auto r = run(c);
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j.at("arrivals").get<std::uint64_t>() == r.arrivals);
    CHECK(j.at("revenue_per_hour").at("mean").get<double>() == r.revenue_per_hour.mean);
    CHECK(j.at("energy_kwh").get<double>() == r.energy_kwh);

    const auto rep = nlohmann::json::parse(to_json(run_replications(c, 2)));
    CHECK(rep.at("replications") == 2);
    CHECK(rep.at("runs").size() == 2);

    std::ostringstream csv;
    write_window_csv(csv, r.windows);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == kWindowCsvHeader);
    std::size_t rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == r.windows.size());
}
