// Serial reference loop against the OpenMP loop for the replication-level
// kernels. Results are identical; only wall time differs.

#include <benchmark/benchmark.h>

#include "abandonq/des.hpp"
#include "abandonq/fclt.hpp"

using namespace abandonq;

namespace {

QueueModel bench_model() {
    QueueModel m;
    m.servers = 100;
    m.arrival = exponential(1.0 / 120.0);
    m.service = erlang2(1.0);
    m.patience = exponential(10.0);
    return m;
}

void BM_Replications(benchmark::State& state, Exec exec) {
    const QueueModel model = bench_model();
    SimConfig c;
    c.horizon = 2000.0;
    c.warmup = 200.0;
    c.replications = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto reps = run_replications(model, c, exec);
        benchmark::DoNotOptimize(reps.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Superposition(benchmark::State& state, Exec exec) {
    SuperpositionConfig c;
    c.n = 200;
    c.gamma = 50.0;
    c.interrenewal = erlang2(1.0);
    c.replications = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto s = simulate_superposition(c, exec);
        benchmark::DoNotOptimize(s.paths.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Replications, serial, Exec::Serial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Replications, openmp, Exec::Parallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Superposition, serial, Exec::Serial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Superposition, openmp, Exec::Parallel)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
