// Serial reference vs OpenMP kernels. Thread count follows BUBBLE_THREADS / OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "bubble/bsde.hpp"
#include "bubble/kernels.hpp"
#include "bubble/regression.hpp"
#include "bubble/simulate.hpp"
#include "bubble/stochastics.hpp"

using namespace bubble;

namespace {

Scenario bench_scenario(int paths) {
    Scenario s = preset("Default");
    s.numerics.n_paths = paths;
    s.numerics.n_steps = 100;
    return s;
}

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

void BM_NormalEquationsReference(benchmark::State& st) {
    const std::size_t n = st.range(0), cols = 9;
    const auto design = random_vector(n * cols, 1);
    const auto y = random_vector(n, 2);
    for (auto _ : st) benchmark::DoNotOptimize(accumulate_normal_equations_reference(design, cols, y));
}

void BM_NormalEquations(benchmark::State& st, Exec exec) {
    const std::size_t n = st.range(0), cols = 9;
    const auto design = random_vector(n * cols, 1);
    const auto y = random_vector(n, 2);
    for (auto _ : st) benchmark::DoNotOptimize(accumulate_normal_equations(design, cols, y, exec));
}

void BM_MartingaleRegression(benchmark::State& st, Exec exec) {
    const std::size_t n = st.range(0);
    const auto x = random_vector(n, 3);
    const auto dw = random_vector(n, 4);
    const auto y = random_vector(n, 5);
    for (auto _ : st) benchmark::DoNotOptimize(martingale_regression(y, x, dw, 0.01, 2, nullptr, exec));
}

void BM_SampleBundle(benchmark::State& st, Exec exec) {
    const Scenario s = bench_scenario(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(sample_bundle(s, Seed{7}, exec));
}

struct SimulationFixture {
    Scenario s;
    PathBundle bundle;
    MeanFlows flows;
    PolicyField policy;

    explicit SimulationFixture(int paths) : s(bench_scenario(paths)) {
        bundle = sample_bundle(s, Seed{7});
        const TimeGrid grid = TimeGrid::from(s);
        flows = MeanFlows::initial(s, grid);
        policy = PolicyField::from_family(solve_family(flows, NoiseCube::from(bundle), 0, s));
    }
};

void BM_SimulateReference(benchmark::State& st) {
    SimulationFixture f(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(simulate_paths_reference(f.policy, f.flows, f.bundle, f.s));
}

void BM_Simulate(benchmark::State& st, Exec exec) {
    SimulationFixture f(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(simulate_paths(f.policy, f.flows, f.bundle, f.s, exec));
}

}  // namespace

BENCHMARK(BM_NormalEquationsReference)->Arg(20000)->Arg(100000);
BENCHMARK_CAPTURE(BM_NormalEquations, serial, Exec::serial)->Arg(20000)->Arg(100000);
BENCHMARK_CAPTURE(BM_NormalEquations, parallel, Exec::parallel)->Arg(20000)->Arg(100000);
BENCHMARK_CAPTURE(BM_MartingaleRegression, serial, Exec::serial)->Arg(20000);
BENCHMARK_CAPTURE(BM_MartingaleRegression, parallel, Exec::parallel)->Arg(20000);
BENCHMARK_CAPTURE(BM_SampleBundle, serial, Exec::serial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SampleBundle, parallel, Exec::parallel)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateReference)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Simulate, serial, Exec::serial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Simulate, parallel, Exec::parallel)->Arg(20000)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
    apply_thread_env();
    benchmark::Initialize(&argc, argv);
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
