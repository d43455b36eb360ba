// SPDX-License-Identifier: MIT
#include <benchmark/benchmark.h>

#include "ddeps/cheb_mesh.hpp"
#include "ddeps/discretize.hpp"
#include "ddeps/hopf.hpp"
#include "ddeps/simulate.hpp"

using namespace ddeps;

namespace {

DdeModel blowflies(double mu, double beta) {
    return builtin_model("blowflies")->with_params({{"mu", mu}, {"beta", beta}});
}

void BM_DiffMatrix(benchmark::State& state) {
    const Mesh m = make_mesh(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(diff_matrix(m));
}
BENCHMARK(BM_DiffMatrix)->RangeMultiplier(2)->Range(4, 64);

void BM_Spectrum(benchmark::State& state) {
    const PsSystem ps = PsSystem::build(blowflies(3.0, 40.0), static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(eigenvalues(assemble_An(ps)));
}
BENCHMARK(BM_Spectrum)->RangeMultiplier(2)->Range(4, 64);

void BM_CharFnEval(benchmark::State& state) {
    const PsSystem ps = PsSystem::build(*builtin_model("fluidflow"), static_cast<int>(state.range(0)));
    const CharFnN cf(ps.linear, ps.n);
    double w = 1.0;
    for (auto _ : state) {
        // A fresh lambda each time defeats the factorization cache.
        w += 1e-7;
        benchmark::DoNotOptimize(cf.eval(cd(0.0, w)));
    }
}
BENCHMARK(BM_CharFnEval)->RangeMultiplier(2)->Range(4, 64);

void BM_FindHopf(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const CharFamily fam(blowflies(3.0, 29.0), n > 0 ? std::optional<int>(n) : std::nullopt);
    for (auto _ : state) benchmark::DoNotOptimize(find_hopf(fam, "beta", 2.4, 29.0));
}
BENCHMARK(BM_FindHopf)->Arg(0)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_TraceCurve(benchmark::State& state) {
    const CharFamily fam(blowflies(3.0, 29.0), 10);
    const HopfPoint start = find_hopf(fam, "beta", 2.4, 29.0);
    TraceOptions opt;
    opt.step = 0.25;
    opt.max_points = 1000;
    opt.p1_range = {1.0, 10.0};
    for (auto _ : state) benchmark::DoNotOptimize(trace_hopf_curve(fam, "mu", "beta", start, opt));
}
BENCHMARK(BM_TraceCurve)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
    const PsSystem ps = PsSystem::build(blowflies(7.0, 105.0), static_cast<int>(state.range(0)));
    const Eigen::VectorXd y0 = sample_history(ps, [&](double) { return Eigen::VectorXd(ps.equilibrium.array() + 0.5); });
    for (auto _ : state) benchmark::DoNotOptimize(integrate(ps, y0, 50.0));
}
BENCHMARK(BM_Simulate)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
