#include <benchmark/benchmark.h>

#include "icins/generator.hpp"
#include "support/generators.hpp"

namespace {

using icins::testing::Gen;

void BM_ArgminThetaExponential(benchmark::State& state) {
    Gen g(1);
    const auto lc = g.coefficients(static_cast<std::size_t>(state.range(0)));
    const auto in = g.inputs(lc.atoms());
    const auto boxes = g.boxes();
    for (auto _ : state)
        benchmark::DoNotOptimize(icins::argmin_theta_exponential(in.in, lc, 1.0, boxes.portfolio));
}
BENCHMARK(BM_ArgminThetaExponential)->Arg(0)->Arg(1)->Arg(4);

void BM_ArgminThetaPower(benchmark::State& state) {
    Gen g(2);
    const auto lc = g.coefficients(static_cast<std::size_t>(state.range(0)));
    const auto in = g.inputs(lc.atoms());
    const auto boxes = g.boxes();
    for (auto _ : state) benchmark::DoNotOptimize(icins::argmin_theta_power(in.in, lc, 0.5, boxes.portfolio));
}
BENCHMARK(BM_ArgminThetaPower)->Arg(0)->Arg(1)->Arg(4);

void BM_GeneratorExponential(benchmark::State& state) {
    Gen g(3);
    const auto lc = g.coefficients(1);
    const auto in = g.inputs(1);
    const auto boxes = g.boxes();
    for (auto _ : state) benchmark::DoNotOptimize(icins::generator_exponential(in.in, lc, 1.0, boxes));
}
BENCHMARK(BM_GeneratorExponential);

}  // namespace
