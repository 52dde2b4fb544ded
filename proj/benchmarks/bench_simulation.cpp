#include <benchmark/benchmark.h>

#include "icins/path_engine.hpp"
#include "support/scenarios.hpp"

namespace {

void BM_DriverFill(benchmark::State& state) {
    const icins::DriverPaths d(icins::TimeGrid(10.0, 100), icins::JumpMeasure{{icins::JumpAtom{1.0, 0.5}}}, 1, 1);
    icins::PathIncrements inc;
    for (auto _ : state) {
        d.fill(0, inc);
        benchmark::DoNotOptimize(inc.dw.data());
    }
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_DriverFill);

void BM_SimulateMarket(benchmark::State& state) {
    const auto m = icins::testing::constant_power_model();
    const icins::DriverPaths d(icins::TimeGrid(10.0, 100), m.market.jumps, 1,
                               static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(icins::simulate_market(m.market, d));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateMarket)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SimulateWealthConstant(benchmark::State& state) {
    const auto m = icins::testing::constant_power_model();
    const auto boxes = icins::testing::constant_power_boxes();
    icins::Controls c;
    c.consumption = 0.05;
    c.portfolio = {0.5, 0.2, 1.0};
    const auto rule = icins::StrategyRule::constant(icins::ControlMode::fractional, boxes, c);
    const icins::DriverPaths d(icins::TimeGrid(10.0, 100), icins::JumpMeasure{}, 1, 10000);
    for (auto _ : state) benchmark::DoNotOptimize(icins::simulate_wealth_power_logform(m, rule, d, 1.0));
}
BENCHMARK(BM_SimulateWealthConstant)->Unit(benchmark::kMillisecond);

}  // namespace
