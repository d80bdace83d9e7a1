#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "greenfarm/errors.hpp"
#include "greenfarm/workload.hpp"

using namespace greenfarm;

namespace {

const char* kFixture = GREENFARM_FIXTURE_DIR "/diurnal_240h.csv";

struct Moments {
    double mean = 0.0;
    double scv = 0.0;
};

template <class Draw>
Moments moments(int count, Draw draw) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < count; ++i) {
        const double x = draw();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / count;
    const double var = sum_sq / count - mean * mean;
    return {mean, var / (mean * mean)};
}

// Counts of arrivals per hour over [0, hours).
std::vector<long> hourly_counts(ArrivalStream& stream, int hours) {
    std::vector<long> counts(static_cast<std::size_t>(hours), 0);
    for (double t = stream.next(0.0); t < hours * 3600.0; t = stream.next(t)) {
        ++counts[static_cast<std::size_t>(t / 3600.0)];
    }
    return counts;
}

}  // namespace

TEST_CASE("lognormal parameters") {
    const auto p = lognormal_from_mean_scv(1.0, 2.0);
    CHECK(p.sigma_log * p.sigma_log == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(p.mu_log == doctest::Approx(-std::log(3.0) / 2.0).epsilon(1e-14));
    const auto tight = lognormal_from_mean_scv(4.0, 1e-10);
    CHECK(tight.sigma_log < 1e-4);
    CHECK(std::exp(tight.mu_log) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK_THROWS_AS((void)lognormal_from_mean_scv(0.0, 1.0), DomainError);
    CHECK_THROWS_AS((void)lognormal_from_mean_scv(1.0, -1.0), DomainError);
}

TEST_CASE("lognormal renewal: sample mean and scv") {
    for (double scv : {1.0, 2.0, 5.0}) {
        ArrivalStream s(LogNormalRenewal{1.0, scv}, make_rng(11, 0));
        double t = 0.0;
        const auto m = moments(1'000'000, [&] {
            const double next = s.next(t);
            const double gap = next - t;
            t = next;
            return gap;
        });
        CAPTURE(scv);
        CHECK(m.mean == doctest::Approx(1.0).epsilon(0.01));
        CHECK(m.scv == doctest::Approx(scv).epsilon(0.05));
    }
}

TEST_CASE("lognormal patience mean") {
    PatienceSampler p(LogNormalPatience{10.0, 5.0}, make_rng(3, 2));
    const auto m = moments(1'000'000, [&] { return p.next(); });
    CHECK(m.mean == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("infinite patience") {
    PatienceSampler p(InfinitePatience{}, make_rng(3, 2));
    CHECK(std::isinf(p.next()));
}

TEST_CASE("laplace_perturb") {
    Rng rng = make_rng(5, 3);
    CHECK(laplace_perturb(123.0, 0.0, rng) == 123.0);
    CHECK_THROWS_AS((void)laplace_perturb(1.0, -0.1, rng), DomainError);

    const double rate = 4000.0;
    double abs_sum = 0.0;
    double signed_sum = 0.0;
    const int draws = 1'000'000;
    for (int i = 0; i < draws; ++i) {
        const double f = laplace_perturb(rate, 0.05, rng);
        abs_sum += std::abs(f - rate) / rate;
        signed_sum += f - rate;
    }
    CHECK(std::abs(abs_sum / draws - 0.05) < 0.001);
    CHECK(std::abs(signed_sum / draws) < 0.002 * rate);

    bool negative = false;
    for (int i = 0; i < draws; ++i) negative |= laplace_perturb(1.0, 20.0, rng) < 0.0;
    CHECK_FALSE(negative);
}

TEST_CASE("generators are reproducible and streams are independent") {
    ArrivalStream a(PoissonArrivals{50.0}, make_rng(9, 0));
    ArrivalStream b(PoissonArrivals{50.0}, make_rng(9, 0));
    ArrivalStream c(PoissonArrivals{50.0}, make_rng(9, 1));
    double ta = 0.0, tb = 0.0, tc = 0.0;
    bool all_same = true;
    bool other_differs = false;
    for (int i = 0; i < 1000; ++i) {
        ta = a.next(ta);
        tb = b.next(tb);
        tc = c.next(tc);
        all_same &= ta == tb;
        other_differs |= ta != tc;
    }
    CHECK(all_same);
    CHECK(other_differs);
}

TEST_CASE("poisson counts stay in the sanity band") {
    const double rate = 40.0;
    const double horizon = 500.0;
    int outside = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        ArrivalStream s(PoissonArrivals{rate}, make_rng(seed, 0));
        long count = 0;
        for (double t = s.next(0.0); t < horizon; t = s.next(t)) ++count;
        outside += std::abs(count - rate * horizon) > 4.0 * std::sqrt(rate * horizon);
    }
    CHECK(outside == 0);
}

TEST_CASE("zero-rate poisson stops") {
    ArrivalStream s(PoissonArrivals{0.0}, make_rng(1, 0));
    CHECK(std::isinf(s.next(0.0)));
}

TEST_CASE("trace parsing") {
    SUBCASE("header, comments and scale") {
        std::istringstream in("# synthetic\ntime_s,rate_jobs_per_s\n0,10\n\n60, 20.5\n120,0\n");
        const auto t = parse_trace(in, 2.0);
        REQUIRE(t.segments().size() == 3);
        CHECK(t.rate_at(0.0) == 20.0);
        CHECK(t.rate_at(59.9) == 20.0);
        CHECK(t.rate_at(60.0) == 41.0);
        CHECK(t.rate_at(1e9) == 0.0);
        CHECK(t.next_change(10.0) == 60.0);
        CHECK(std::isinf(t.next_change(120.0)));
        CHECK(t.mean_rate(30.0, 90.0) == doctest::Approx((30 * 20.0 + 30 * 41.0) / 60.0));
        CHECK(t.min_rate() == 0.0);
        CHECK(t.max_rate() == 41.0);
    }
    SUBCASE("header-less file") {
        std::istringstream in("0,100\n");
        CHECK(parse_trace(in).rate_at(5.0) == 100.0);
    }
    auto line_of = [](const char* text) -> std::size_t {
        std::istringstream in(text);
        try {
            (void)parse_trace(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("t,r\n0,1\n10,2\n10,3\n") == 4);   // repeated time
    CHECK(line_of("t,r\n0,1\n10,2\n5,3\n") == 4);    // going back
    CHECK(line_of("t,r\n0,1\n10,abc\n") == 3);       // not numeric
    CHECK(line_of("t,r\n0,1\n10\n") == 3);           // one field
    CHECK(line_of("t,r\n0,1\n10,2,3\n") == 3);       // three fields
    CHECK(line_of("t,r\n0,-1\n") == 2);              // negative rate
    CHECK(line_of("# only a comment\n") == 1);       // no data
    std::istringstream ok("0,1\n");
    CHECK_THROWS_AS((void)parse_trace(ok, 0.0), DomainError);
    CHECK_THROWS_AS((void)load_trace("/nonexistent/trace.csv"), ConfigError);
}

TEST_CASE("diurnal fixture") {
    const auto trace = load_trace(kFixture);
    CHECK(trace.segments().size() == 240);
    CHECK(trace.min_rate() == 2688.0);
    CHECK(trace.max_rate() == 5729.0);
}

TEST_CASE("single-row trace is homogeneous poisson") {
    std::istringstream in("0,100\n");
    auto trace = std::make_shared<const RateTrace>(parse_trace(in));
    ArrivalStream s(TraceArrivals{trace, "inline", 1.0}, make_rng(4, 0));
    const auto counts = hourly_counts(s, 3);
    for (long c : counts) CHECK(std::abs(c - 360000.0) < 4.0 * std::sqrt(360000.0));
}

TEST_CASE("trace arrivals follow the per-hour rates") {
    // Whole trace at 1/100 scale (~1.5e5 arrivals per hour).
    const double scale = 0.01;
    auto trace = std::make_shared<const RateTrace>(load_trace(kFixture, scale));
    ArrivalStream s(TraceArrivals{trace, kFixture, scale}, make_rng(8, 0));
    const auto counts = hourly_counts(s, 240);
    int off = 0;
    for (int h = 0; h < 240; ++h) {
        const double expected = trace->rate_at(h * 3600.0) * 3600.0;
        off += std::abs(counts[static_cast<std::size_t>(h)] - expected) > 0.03 * expected;
    }
    CHECK(off == 0);

    // Full scale for the first hours, and scale 2 doubles them.
    auto full = std::make_shared<const RateTrace>(load_trace(kFixture, 1.0));
    auto twice = std::make_shared<const RateTrace>(load_trace(kFixture, 2.0));
    ArrivalStream s1(TraceArrivals{full, kFixture, 1.0}, make_rng(8, 0));
    ArrivalStream s2(TraceArrivals{twice, kFixture, 2.0}, make_rng(8, 0));
    const auto c1 = hourly_counts(s1, 3);
    const auto c2 = hourly_counts(s2, 3);
    for (int h = 0; h < 3; ++h) {
        const double expected = full->rate_at(h * 3600.0) * 3600.0;
        CHECK(std::abs(c1[static_cast<std::size_t>(h)] - expected) < 0.03 * expected);
        CHECK(static_cast<double>(c2[static_cast<std::size_t>(h)]) / c1[static_cast<std::size_t>(h)] ==
              doctest::Approx(2.0).epsilon(0.01));
    }
}

TEST_CASE("forecasters") {
    std::istringstream in("0,100\n3600,300\n");
    WorkloadSpec w;
    w.arrivals = TraceArrivals{std::make_shared<const RateTrace>(parse_trace(in)), "inline", 1.0};

    w.forecaster = OracleForecaster{};
    Forecaster oracle(w, make_rng(1, 3));
    CHECK_FALSE(oracle.needs_history());
    CHECK(oracle.forecast(1800.0, 3600.0, 0.0) == doctest::Approx(200.0));
    CHECK(oracle.forecast(0.0, 3600.0, 999.0) == doctest::Approx(100.0));

    w.forecaster = LastWindowForecaster{};
    Forecaster last(w, make_rng(1, 3));
    CHECK(last.needs_history());
    CHECK(last.forecast(1800.0, 3600.0, 123.0) == 123.0);

    w.forecaster = OracleWithLaplaceError{0.0};
    Forecaster exact(w, make_rng(1, 3));
    CHECK(exact.forecast(3600.0, 3600.0, 0.0) == doctest::Approx(300.0));
}

TEST_CASE("workload validation") {
    WorkloadSpec w;
    CHECK_NOTHROW(w.validate());
    w.arrivals = LogNormalRenewal{1.0, 0.0};
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = WorkloadSpec{};
    w.service.mu = 0.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = WorkloadSpec{};
    w.patience = ExponentialPatience{-1.0};
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = WorkloadSpec{};
    w.arrivals = TraceArrivals{};
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w = WorkloadSpec{};
    w.patience = LogNormalPatience{10.0, 5.0};
    CHECK(w.abandonment_rate() == doctest::Approx(0.1));
    w.patience = InfinitePatience{};
    CHECK(w.abandonment_rate() == 0.0);
}
