#include <benchmark/benchmark.h>

#include "fdest/condition_checker.hpp"
#include "fdest/reactor.hpp"

using namespace fdest;
using namespace fdest::reactor;

namespace {

void BM_CheckReactorObserver(benchmark::State& state) {
    const ReactorParams p;
    const ReactorState steady = paper_steady_state();
    const ExtendedSystem ext = reactor_extended(p, steady, 0);
    const ParitySolution sol = parity_observer1(p);
    const bool analytic = state.range(0) != 0;
    const LieEngine lie = analytic ? LieEngine(2, reactor_analytic_lie(p, steady, 0)) : LieEngine(2);
    CheckOptions opt;
    for (auto _ : state) {
        benchmark::DoNotOptimize(check_existence(ext, sol, lie, opt));
        benchmark::DoNotOptimize(check_decoupling(ext, sol, lie, opt));
    }
    state.SetLabel(analytic ? "analytic" : "numeric");
}
BENCHMARK(BM_CheckReactorObserver)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
