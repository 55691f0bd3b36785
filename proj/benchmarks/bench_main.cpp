#include <benchmark/benchmark.h>

#include "scm/burgers.hpp"
#include "scm/lyapunov_perron.hpp"
#include "scm/met.hpp"

using namespace scm;

static void BM_SpectrumBurgers(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    BurgersConfig b;
    b.n_modes = n;
    b.dt = 1e-3;
    const PropagatorSource c = propagator_source(burgers_field(b), make_path(0, 1e-3, 0, 21, n));
    for (auto _ : state) benchmark::DoNotOptimize(lyapunov_spectrum(c, n, 1.0, 20, 4));
}
BENCHMARK(BM_SpectrumBurgers)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_CenterGraphSolve(benchmark::State& state) {
    BurgersConfig b;
    b.n_modes = static_cast<int>(state.range(0));
    const LPProblem p =
        burgers_lp_problem(b, GapParameters{2.5, 2.5, 0.1}, 0.012, NoisePath::silent(1e-2, -40, 40, b.n_modes));
    LPSettings s;
    s.scheme = state.range(1) == 0 ? LPScheme::continuous : LPScheme::discrete;
    s.tol = 1e-12;
    Vector v = Vector::Zero(b.n_modes);
    v(0) = 0.006;
    for (auto _ : state) benchmark::DoNotOptimize(solve_center_graph(p, s, v));
}
BENCHMARK(BM_CenterGraphSolve)->Args({6, 0})->Args({6, 1})->Unit(benchmark::kMillisecond);

static void BM_BurgersSimulate(benchmark::State& state) {
    BurgersConfig b;
    b.n_modes = static_cast<int>(state.range(0));
    b.sigma = 1e-3;
    b.horizon = 5.0;
    const NoisePath path = burgers_path(b);
    Vector u0 = Vector::Zero(b.n_modes);
    u0(0) = 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(simulate(b, u0, path, 100));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(b.horizon / b.dt));
}
BENCHMARK(BM_BurgersSimulate)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
