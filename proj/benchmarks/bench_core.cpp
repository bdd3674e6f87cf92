#include <benchmark/benchmark.h>

#include <random>

#include "qlab/diagnostics.hpp"
#include "qlab/minimizer.hpp"

using namespace qlab;

namespace {

const MaterialParams kUnit = MaterialParams::make(1.0, 1.0, 1.0);

QField perturbed_hedgehog(int n) {
    const Grid g(n);
    QField f = hedgehog_reference(g, kUnit, 3.0 * g.h(), 0.2);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0.0, 0.05);
    for (std::size_t node = 0; node < g.node_count(); ++node)
        if (!f.masked(node)) f.set(node, f.at(node) + QTensor{N(rng), N(rng), N(rng), N(rng), N(rng)});
    return f;
}

}  // namespace

static void BM_EigenDecompose(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    std::vector<QTensor> qs(1024);
    for (auto& q : qs) q = {N(rng), N(rng), N(rng), N(rng), N(rng)};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eigen_decompose(qs[i++ & 1023]));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EigenDecompose);

static void BM_DistToVacuum(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    std::vector<QTensor> qs(1024);
    for (auto& q : qs) q = {N(rng), N(rng), N(rng), N(rng), N(rng)};
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(dist_to_vacuum(qs[i++ & 1023], kUnit));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DistToVacuum);

static void BM_EnergyAndGradient(benchmark::State& state) {
    const QField f = perturbed_hedgehog(static_cast<int>(state.range(0)));
    std::vector<double> grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(energy_and_gradient(f, grad));
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.grid.node_count()));
}
BENCHMARK(BM_EnergyAndGradient)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_ThetaField(benchmark::State& state) {
    const QField f = perturbed_hedgehog(static_cast<int>(state.range(0)));
    const FieldDiagnostics d(f);
    for (auto _ : state) benchmark::DoNotOptimize(theta_field(d, 0.2));
}
BENCHMARK(BM_ThetaField)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_RegularScaleNodes(benchmark::State& state) {
    const QField f = perturbed_hedgehog(48);
    const FieldDiagnostics d(f);
    for (auto _ : state) benchmark::DoNotOptimize(regular_scale_nodes(d, Ball({0, 0, 0}, 0.5)));
}
BENCHMARK(BM_RegularScaleNodes)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
