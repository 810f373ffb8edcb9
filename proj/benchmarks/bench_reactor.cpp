#include <benchmark/benchmark.h>

#include "fdest/reactor.hpp"

using namespace fdest;
using namespace fdest::reactor;

namespace {

void BM_SteadyState(benchmark::State& state) {
    const ReactorParams p;
    for (auto _ : state) benchmark::DoNotOptimize(find_steady_state(p));
}
BENCHMARK(BM_SteadyState);

void BM_PaperScenario(benchmark::State& state) {
    ScenarioOptions o;
    o.t_end = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_paper_scenario(o));
}
BENCHMARK(BM_PaperScenario)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace
