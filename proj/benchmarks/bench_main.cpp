#include <benchmark/benchmark.h>

#include "gendd/augment.hpp"
#include "gendd/evaluator.hpp"
#include "gendd/generation.hpp"
#include "gendd/nn.hpp"
#include "gendd/synthetic.hpp"

using namespace gendd;

static void BM_ConvForward(benchmark::State& state) {
    std::size_t width = state.range(0);
    Rng rng(1);
    nn::Conv2d conv(width, width, 3, 1, rng);
    Tensor x({8, width, 16, 16});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        Tensor y = conv.apply(x);
        benchmark::DoNotOptimize(y.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(64)->Arg(128);

static void BM_AugmentOne(benchmark::State& state) {
    AugmentationSpec spec;
    spec.crop_size = 32;
    Rng img_rng(2);
    Tensor img = procedural_texture(42, 3, 40, img_rng);
    std::uint64_t stream = 0;
    for (auto _ : state) {
        Rng rng(stream++);
        Tensor out = augment_one(img, spec, rng);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AugmentOne);

static void BM_StubGeneration(benchmark::State& state) {
    StubBackend backend;
    GenerationConfig cfg;
    cfg.native_resolution = 32;
    std::vector<std::string> prompts{"a photo of a castle"};
    std::uint64_t stream = 0;
    for (auto _ : state) {
        Rng rng(stream++);
        ImageBatch b = backend.generate(prompts, cfg, rng);
        benchmark::DoNotOptimize(b.data.data.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StubGeneration);

static void BM_ClassifierEpoch(benchmark::State& state) {
    auto ds = solid_color_dataset(4, 8, 3, 16);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 3;
    for (auto _ : state) {
        ConvNetClassifier net = build_convnet(ConvNetSpec{2, 16}, 3, 4, 16, 3);
        auto curve = train_classifier(net, ds, cfg);
        benchmark::DoNotOptimize(curve.data());
    }
    state.SetItemsProcessed(state.iterations() * ds.count());
}
BENCHMARK(BM_ClassifierEpoch);

BENCHMARK_MAIN();
