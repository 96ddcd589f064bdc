#include "microlocal/analytic_wf.hpp"
#include "microlocal/spacetime.hpp"
#include "microlocal/transforms.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace microlocal;

static void BM_FbiPoint(benchmark::State& state) {
    const SampledFamily g = gaussian_function();
    const double h = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fbi_point(g, h, {{0.3, 0.0}, {0.7, 0.0}}));
}
BENCHMARK(BM_FbiPoint)->Arg(10)->Arg(100);

static void BM_FbiXiLine(benchmark::State& state) {
    const SampledFamily g = gaussian_function();
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fbi_xi_line(g, 0.05, 0.3, -2.0, 4.0 / n, n));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FbiXiLine)->Arg(32)->Arg(256);

static void BM_FitDecay(benchmark::State& state) {
    const HLadder l = make_h_ladder();
    std::vector<double> m;
    for (double h : l.rungs) m.push_back(std::sqrt(h) * std::exp(-0.25 / h));
    for (auto _ : state) benchmark::DoNotOptimize(fit_decay(l.rungs, m));
}
BENCHMARK(BM_FitDecay);

static void BM_ChronologicalSet(benchmark::State& state) {
    const SpacetimeModel m = minkowski();
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(chronological_set(m, Vec{0.0, 0.0}, TimeDirection::FUTURE, n, n));
}
BENCHMARK(BM_ChronologicalSet)->Arg(64)->Arg(256);
BENCHMARK_MAIN();
