#include <benchmark/benchmark.h>

#include "stylemod/critic.hpp"
#include "stylemod/hypermod.hpp"
#include "stylemod/stylegen.hpp"

using namespace stylemod;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& x : t.v) x = rng.normal();
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int C = static_cast<int>(state.range(0));
    const int S = static_cast<int>(state.range(1));
    Rng rng(1);
    Var x = constant(randn({C, S, S}, rng));
    Var w = constant(randn({C, C, 3, 3}, rng));
    Var b = constant(Tensor::zeros({C}));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b).val());
}

void BM_Demodulate(benchmark::State& state) {
    const int C = static_cast<int>(state.range(0));
    Rng rng(2);
    Var phi = constant(randn({C, C, 3, 3}, rng));
    Var s = constant(randn({C}, rng));
    for (auto _ : state) benchmark::DoNotOptimize(modulate_demodulate(phi, s).val());
}

void BM_FrozenSynthesis(benchmark::State& state) {
    StyleGenerator gen((GeneratorConfig{}), 5);
    Rng rng(3);
    Tensor z = gen.sample_z(rng);
    for (auto _ : state) benchmark::DoNotOptimize(gen.synthesize(z));
}

void BM_InjectedSynthesis(benchmark::State& state) {
    GeneratorConfig gc;
    StyleGenerator gen(gc, 5);
    HyperConfig hc;
    HyperNetworkBank bank(gc, hc, 7);
    Rng rng(4);
    LatentVars lat{constant(gen.map_latent(gen.sample_z(rng)).w), {}};
    lat.styles = gen.styles_from_w(lat.w);
    Var dc = constant(randn({hc.embed_dim}, rng));
    InjectionOptions opts;
    for (auto _ : state)
        benchmark::DoNotOptimize(forward_injected(gen, bank, lat, dc, opts).image.val());
}

void BM_BankPredict(benchmark::State& state) {
    GeneratorConfig gc;
    HyperConfig hc;
    HyperNetworkBank bank(gc, hc, 7);
    Rng rng(5);
    Var dc = constant(randn({hc.embed_dim}, rng));
    for (auto _ : state) {
        ModulationParams mp = bank.predict(dc);
        benchmark::DoNotOptimize(mp.delta_phi.back().val());
    }
}

void BM_DiffAugment(benchmark::State& state) {
    Rng rng(6);
    Var img = constant(randn({3, 32, 32}, rng));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(diff_augment(img, ++seed).val());
}

}  // namespace

BENCHMARK(BM_Conv2dForward)->Args({16, 16})->Args({32, 32})->Args({64, 32});
BENCHMARK(BM_Demodulate)->Arg(16)->Arg(64);
BENCHMARK(BM_FrozenSynthesis);
BENCHMARK(BM_InjectedSynthesis);
BENCHMARK(BM_BankPredict);
BENCHMARK(BM_DiffAugment);

BENCHMARK_MAIN();
