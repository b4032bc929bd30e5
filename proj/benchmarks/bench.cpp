#include <benchmark/benchmark.h>

#include <random>

#include "tsadapt/adapter.hpp"
#include "tsadapt/backbone.hpp"
#include "tsadapt/tensor.hpp"

using namespace tsadapt;

static void BM_Matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Tensor a = Tensor::gaussian(n, n, 1.0, rng);
    Tensor b = Tensor::gaussian(n, n, 1.0, rng);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

static void BM_AdapterForward(benchmark::State& state) {
    const std::size_t d = 768;
    const std::size_t rank = static_cast<std::size_t>(state.range(0));
    AdaptedLinear layer = AdaptedLinear::make(d, d, rank, 1.0, 0.02, 1, 2);
    std::mt19937_64 rng(3);
    Tensor z = Tensor::gaussian(d, 1, 1.0, rng);
    z.shape = {d};
    for (auto _ : state) {
        Tensor out = layer.forward(z);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_AdapterForward)->Arg(4)->Arg(16)->Arg(64)->Arg(256);

static void BM_BackboneForward(benchmark::State& state) {
    ModelConfig c;
    c.layers = static_cast<std::size_t>(state.range(0));
    c.hidden_dim = 64;
    c.heads = 4;
    c.patch_size = 8;
    c.input_length = 96;
    c.horizon = 96;
    c.n_vars = 3;
    FrozenTransformer model(c, 1);
    std::mt19937_64 rng(2);
    Tensor w = Tensor::gaussian(96, 3, 1.0, rng);
    for (auto _ : state) {
        Tensor out = model.forward(w);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_BackboneForward)->Arg(2)->Arg(6);

BENCHMARK_MAIN();
