#include <random>

#include <benchmark/benchmark.h>

#include "fdest/synthesis.hpp"

using namespace fdest;

namespace {

LinearPlant random_full_output(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    auto rand = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
        return m;
    };
    LinearPlant p;
    p.F = rand(n, n) - 1.5 * Matrix::Identity(n, n);
    p.G = rand(n, 1);
    p.E = rand(n, 1);
    p.H = Matrix::Identity(n, n);
    p.J = Matrix::Zero(n, 1);
    p.K = Matrix::Zero(n, 1);
    return p;
}

void BM_SolveParityStep(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const LinearPlant p = random_full_output(rng, static_cast<int>(state.range(0)));
    const std::vector<double> alpha{2.0, 3.0};
    for (auto _ : state) benchmark::DoNotOptimize(solve_parity_linear(p, ExoSystem::make_step(), 2, alpha));
}
BENCHMARK(BM_SolveParityStep)->Arg(2)->Arg(4)->Arg(8);

void BM_SolveParityRampFreeAlpha(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const LinearPlant p = random_full_output(rng, 4);
    for (auto _ : state) benchmark::DoNotOptimize(solve_parity_linear(p, ExoSystem::make_ramp(), 2, std::nullopt));
}
BENCHMARK(BM_SolveParityRampFreeAlpha);

}  // namespace
