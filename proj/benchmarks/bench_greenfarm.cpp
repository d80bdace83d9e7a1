#include <benchmark/benchmark.h>

#include "greenfarm/allocator.hpp"
#include "greenfarm/economics.hpp"
#include "greenfarm/queueing.hpp"
#include "greenfarm/simulator.hpp"

using namespace greenfarm;

static void BM_SteadyState(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SystemParams p{0.8 * n * 10.0, 10.0, 0.1, n};
    for (auto _ : state) benchmark::DoNotOptimize(steady_state(p));
}
BENCHMARK(BM_SteadyState)->Arg(10)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_OptimizeAllocation(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0));
    const SystemParams load{0.7 * s * 10.0, 10.0, 0.1, 0};
    const EconomicModel econ;
    const ReconfigCost reconfig;
    int evaluations = 0;
    for (auto _ : state) {
        const auto d = optimize_allocation(s, s, load, econ, reconfig);
        evaluations = d.evaluations;
        benchmark::DoNotOptimize(d);
    }
    state.counters["evaluations"] = evaluations;
}
BENCHMARK(BM_OptimizeAllocation)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_ExhaustiveOptimal(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0));
    const SystemParams load{0.7 * s * 10.0, 10.0, 0.1, 0};
    for (auto _ : state) benchmark::DoNotOptimize(exhaustive_optimal(s, load, EconomicModel{}));
}
BENCHMARK(BM_ExhaustiveOptimal)->Arg(100)->Arg(1000);

// Events per second of the simulator, one simulated hour per iteration.
static void BM_SimulatorHour(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0));
    SimConfig cfg;
    cfg.capacity = s;
    cfg.workload.arrivals = PoissonArrivals{0.8 * s * 10.0};
    cfg.workload.service = ExponentialService{10.0};
    cfg.workload.patience = ExponentialPatience{0.1};
    cfg.duration = 3600.0;
    cfg.sample_interval = 1800.0;
    std::uint64_t arrivals = 0;
    for (auto _ : state) {
        const auto rep = run(cfg);
        arrivals += rep.arrivals;
        ++cfg.seed;
    }
    state.counters["arrivals_per_s"] = benchmark::Counter(static_cast<double>(arrivals), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SimulatorHour)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
