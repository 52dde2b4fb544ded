#include <benchmark/benchmark.h>

#include "icins/bsde_solver.hpp"
#include "support/scenarios.hpp"

namespace {

void BM_SolveOdePower(benchmark::State& state) {
    const auto m = icins::testing::constant_power_model();
    const auto boxes = icins::testing::constant_power_boxes();
    const icins::TimeGrid grid(10.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(icins::solve_ode_power(m, 0.5, boxes, grid));
}
BENCHMARK(BM_SolveOdePower)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SolveFbsdeExponential(benchmark::State& state) {
    const auto m = icins::testing::benign_exponential_model();
    const auto boxes = icins::testing::benign_exponential_boxes();
    const icins::TimeGrid grid(1.0, 20);
    for (auto _ : state)
        benchmark::DoNotOptimize(icins::solve_fbsde_exponential(
            m, 1.0, boxes, grid, 1.0, static_cast<std::size_t>(state.range(0)), icins::RegressionSpec{},
            icins::PicardSettings{}, 1));
}
BENCHMARK(BM_SolveFbsdeExponential)->Arg(500)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
