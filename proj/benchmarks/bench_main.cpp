// Microbenchmarks for the hot paths: block forward, whole-model forward, a
// training step's forward+backward, the metric bundle, and the degradation
// stack. Wall-clock context for the smoke-test budgets rather than a gate.

#include <benchmark/benchmark.h>

#include "dreamif/backbone.hpp"
#include "dreamif/degrade.hpp"
#include "dreamif/losses.hpp"
#include "dreamif/metrics.hpp"
#include "dreamif/model.hpp"

using namespace dreamif;

namespace {

Tensor<float> random_tensor(int c, int h, int w, std::uint64_t seed) {
    RandomSource rng(seed);
    Tensor<float> t(c, h, w);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform());
    return t;
}

Image random_image(int h, int w, std::uint64_t seed) {
    RandomSource rng(seed);
    Image img(h, w, 3);
    for (std::size_t k = 0; k < img.size(); ++k) img.data()[k] = rng.uniform();
    return img;
}

void bm_transformer_block(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    ParameterStore<float> ps(1);
    auto x = ad::Var<float>::constant(random_tensor(c, 32, 32, 2));
    ad::NoGradGuard ng;
    transformer_block(ps, "b", x, 2, 2.66);  // materialize once
    for (auto _ : state) {
        auto y = transformer_block(ps, "b", x, 2, 2.66);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(bm_transformer_block)->Arg(16)->Arg(32);

void bm_model_forward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Model<float> model(ModelConfig::toy());
    auto vis = ad::Var<float>::constant(random_tensor(3, size, size, 3));
    auto ir = ad::Var<float>::constant(random_tensor(3, size, size, 4));
    ad::NoGradGuard ng;
    for (auto _ : state) {
        auto out = model.forward(vis, ir);
        benchmark::DoNotOptimize(out.fused.value().data());
    }
}
BENCHMARK(bm_model_forward)->Arg(64)->Unit(benchmark::kMillisecond);

void bm_forward_backward(benchmark::State& state) {
    Model<float> model(ModelConfig::toy());
    auto vis = ad::Var<float>::constant(random_tensor(3, 64, 64, 5));
    auto ir = ad::Var<float>::constant(random_tensor(3, 64, 64, 6));
    for (auto _ : state) {
        model.params().clear_grads();
        auto out = model.forward(vis, ir);
        auto terms = fusion_loss(out.fused, vis, ir);
        terms.total.backward();
        benchmark::DoNotOptimize(terms.total.scalar());
    }
}
BENCHMARK(bm_forward_backward)->Unit(benchmark::kMillisecond);

void bm_metrics(benchmark::State& state) {
    const Image vis = random_image(128, 128, 7);
    const Image ir = random_image(128, 128, 8);
    const Image fused = elementwise_max(vis, ir);
    for (auto _ : state) {
        auto r = evaluate_pair(fused, vis, ir);
        benchmark::DoNotOptimize(r.viff);
    }
}
BENCHMARK(bm_metrics)->Unit(benchmark::kMillisecond);

void bm_degrade_triplet(benchmark::State& state) {
    const Image img = random_image(256, 256, 9);
    DegradationSpec spec;
    spec.kind = DegradationKind::triplet;
    spec.seed = 11;
    for (auto _ : state) {
        auto out = apply(img, spec);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(bm_degrade_triplet)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
