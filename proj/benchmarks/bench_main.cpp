#include "floodlens/classifier.hpp"
#include "floodlens/kmeans.hpp"
#include "floodlens/random.hpp"
#include "floodlens/segmentation.hpp"
#include "floodlens/texture.hpp"

#include <benchmark/benchmark.h>

using namespace floodlens;

namespace {

GrayImage noise_gray(int side, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> d(static_cast<std::size_t>(side) * side);
    for (auto& v : d) v = static_cast<std::uint8_t>(rng.below(256));
    return GrayImage(side, side, std::move(d));
}

RgbImage noise_rgb(int side, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> d(static_cast<std::size_t>(side) * side * 3);
    for (auto& v : d) v = static_cast<std::uint8_t>(rng.below(256));
    return RgbImage(side, side, std::move(d));
}

void BM_LbpMap(benchmark::State& state) {
    const GrayImage img = noise_gray(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(lbp_map(img, 1));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_LbpMap)->Arg(128)->Arg(512);

void BM_Feature512(benchmark::State& state) {
    const GrayImage img = noise_gray(256, 2);
    for (auto _ : state) benchmark::DoNotOptimize(lbp_feature_512(img));
}
BENCHMARK(BM_Feature512);

void BM_KMeans(benchmark::State& state) {
    Rng rng(3);
    PixelFeatureMatrix m;
    m.dim = 4;
    m.n = static_cast<std::size_t>(state.range(0));
    m.rows.resize(m.n * 4);
    for (auto& v : m.rows) v = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(m, {3, 0}));
}
BENCHMARK(BM_KMeans)->Arg(10000)->Arg(100000);

void BM_SegmentImage(benchmark::State& state) {
    const RgbImage img = noise_rgb(256, 4);
    LbpHistogram h;
    h.bins.assign(256, 1.0 / 256);
    h.normalized = true;
    const ReferenceSignature ref{{h}, "uniform"};
    for (auto _ : state) benchmark::DoNotOptimize(segment_and_classify(img, ref));
}
BENCHMARK(BM_SegmentImage);

void BM_MlpForward(benchmark::State& state) {
    const MlpModel model = mlp_init(5);
    const std::vector<double> x(512, 1.0 / 512);
    Rng rng(0);
    for (auto _ : state) benchmark::DoNotOptimize(forward(model, x, false, rng));
}
BENCHMARK(BM_MlpForward);

void BM_TrainEpoch(benchmark::State& state) {
    Rng rng(6);
    std::vector<LabeledFeature> data(64);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i].feature.values.resize(512);
        for (auto& v : data[i].feature.values) v = rng.uniform() / 256;
        data[i].label = static_cast<int>(i % 2);
    }
    TrainConfig cfg;
    cfg.epochs = 1;
    const MlpModel model = mlp_init(7);
    for (auto _ : state) benchmark::DoNotOptimize(train(model, data, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(data.size()));
}
BENCHMARK(BM_TrainEpoch);

}  // namespace

BENCHMARK_MAIN();
