// Serial vs parallel sweep throughput on a bounded workload: eight operating
// points, loose tolerance, capped cycles, so one iteration stays around a
// second. Falls back to a plain timing loop when Google Benchmark is absent.
#include <cstdio>
#include <vector>

#include "acfc/converter.hpp"
#include "acfc/sweep.hpp"

namespace {

acfc::SweepRequest workload() {
    acfc::SweepRequest req;
    req.param = "fs";
    for (int i = 0; i < 8; ++i) req.values.push_back(1.2e6 + 0.2e6 * i);
    req.control.tolerance = 1e-4;
    req.control.max_cycles = 60;
    return req;
}

double run_once(acfc::ExecutionPolicy policy) {
    const auto rows = acfc::run_sweep(acfc::prototype_preset(), workload(), policy);
    double sum = 0.0;
    for (const auto& r : rows) sum += r.report.v_cc_mean;
    return sum;
}

}  // namespace

#ifdef ACFC_HAVE_GBENCH

#include <benchmark/benchmark.h>

static void BM_SweepSerial(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(run_once(acfc::ExecutionPolicy::Serial));
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

static void BM_SweepParallel(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(run_once(acfc::ExecutionPolicy::Parallel));
}
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#else

#include <chrono>

int main() {
    using clock = std::chrono::steady_clock;
    const auto time_policy = [](acfc::ExecutionPolicy policy) {
        const auto t0 = clock::now();
        const double sum = run_once(policy);
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        return std::pair<double, double>(dt, sum);
    };
    // one warm-up apiece, then the timed pass
    time_policy(acfc::ExecutionPolicy::Serial);
    const auto [ts, sum_s] = time_policy(acfc::ExecutionPolicy::Serial);
    time_policy(acfc::ExecutionPolicy::Parallel);
    const auto [tp, sum_p] = time_policy(acfc::ExecutionPolicy::Parallel);
    std::printf("serial   %.3f s\n", ts);
    std::printf("parallel %.3f s  (speedup %.2fx)\n", tp, ts / tp);
    std::printf("checksums %.9g / %.9g %s\n", sum_s, sum_p,
                sum_s == sum_p ? "(identical)" : "(MISMATCH)");
    return sum_s == sum_p ? 0 : 1;
}

#endif
