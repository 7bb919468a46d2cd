// Parallel kernels against their serial references.
#include "flowae/flow_data.hpp"
#include "flowae/kernels.hpp"
#include "flowae/random_forest.hpp"
#include "flowae/rng.hpp"

#include <benchmark/benchmark.h>

using namespace flowae;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

template <bool Parallel>
void BM_AffineForward(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix in = random_matrix(rows, 128, 1);
    const Matrix w = random_matrix(64, 128, 2);
    const std::vector<double> b(64, 0.1);
    Matrix out(rows, 64);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::affine_forward(in, w, b, out);
        else kernels::reference::affine_forward(in, w, b, out);
        benchmark::DoNotOptimize(out.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_AffineForward<true>)->Arg(256)->Arg(4096);
BENCHMARK(BM_AffineForward<false>)->Arg(256)->Arg(4096);

template <bool Parallel>
void BM_ForestPredict(benchmark::State& state) {
    static const Dataset data = generate_synthetic(500, default_synthetic_spec(5), 3);
    static const ForestModel forest = fit_forest(data.feature_matrix(), data.labels(), data.class_names(), {}, 42);
    const Matrix x = data.feature_matrix();
    for (auto _ : state) {
        auto p = Parallel ? predict(forest, x) : reference::predict(forest, x);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_ForestPredict<true>);
BENCHMARK(BM_ForestPredict<false>);

}  // namespace

BENCHMARK_MAIN();
