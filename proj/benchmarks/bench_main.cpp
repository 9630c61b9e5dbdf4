#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/mollify.hpp"
#include "zvlab/rng.hpp"
#include "zvlab/sde.hpp"
#include "zvlab/sensitivity.hpp"
#include "zvlab/zvonkin.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace zvlab;

static void BM_Philox(benchmark::State& state) {
    Philox4x32::Counter ctr{0, 0, 0, 0};
    const Philox4x32::Key key{0x12345678, 0x9abcdef0};
    for (auto _ : state) {
        ctr[0]++;
        benchmark::DoNotOptimize(Philox4x32::generate(ctr, key));
    }
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Philox);

static void BM_FillNormals(benchmark::State& state) {
    std::vector<double> out(static_cast<std::size_t>(state.range(0)));
    std::uint64_t first = 0;
    for (auto _ : state) {
        fill_normals(42, 0, first, out);
        first += out.size();
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillNormals)->Arg(1024);

static void BM_EulerMaruyamaSign(benchmark::State& state) {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const auto paths = static_cast<std::size_t>(state.range(0));
    const BrownianEnsemble ens(paths, 1000, 1e-3, 1, 42);
    const std::vector<std::size_t> last = {1000};
    for (auto _ : state) benchmark::DoNotOptimize(em_samples(b, scalar_vec(0.0), ens, last));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_EulerMaruyamaSign)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_BackwardPde(benchmark::State& state) {
    const DriftField b = mollify(sign_drift(1), 0.1);
    SpaceTimeGrid g;
    g.T = 1.0;
    g.L = 6.0;
    g.n_t = 1000;
    g.n_x = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_backward_pde(b, b, 1.0, g));
}
BENCHMARK(BM_BackwardPde)->Arg(601)->Arg(1201)->Unit(benchmark::kMillisecond);

static void BM_BelGradient(benchmark::State& state) {
    const Payoff phi = make_payoff("identity");
    const auto paths = static_cast<std::size_t>(state.range(0));
    const BrownianEnsemble ens(paths, 1000, 1e-3, 1, 42);
    const WeightFunction w = make_weight("constant", 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(bel_gradient(phi, ou_drift(1), scalar_vec(0.5), 1.0, w, ens));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BelGradient)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
