#include <random>

#include <benchmark/benchmark.h>

#include "shiftlens/alignment.hpp"
#include "shiftlens/domain_gap.hpp"
#include "shiftlens/phantom.hpp"
#include "shiftlens/saliency.hpp"

using namespace shiftlens;

namespace {

Mask random_mask(std::size_t n, std::size_t depth, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bit(p);
    ByteGrid g(depth ? Shape{n, n, depth} : Shape{n, n}, 0);
    for (auto& v : g.values()) v = bit(rng);
    return Mask(std::move(g), MaskRole::GroundTruth);
}

Heatmap random_heatmap(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    FloatGrid g({n, n});
    for (auto& v : g.values()) v = u(rng);
    return Heatmap(std::move(g));
}

void BM_DistanceTransform(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mask = random_mask(n, n / 2, 0.7, 1);
    const std::array<double, 3> spacing{0.45, 0.45, 0.7};
    for (auto _ : state) benchmark::DoNotOptimize(gap::squared_distance_transform(mask.data(), spacing));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mask.data().size()));
}
BENCHMARK(BM_DistanceTransform)->Arg(32)->Arg(64)->Arg(128);

void BM_VesselDiameters(benchmark::State& state) {
    phantom::PhantomSpec s;
    s.shape = {96, 96, 48};
    s.tissue_radius_mm = 0.0;
    s.vessels = {{2, {12.0, 12.0, 11.75}, 2.0, 23.5}, {2, {30.0, 30.0, 11.75}, 1.0, 23.5}};
    const auto mask = phantom::generate_phantom(s).second;
    for (auto _ : state) benchmark::DoNotOptimize(gap::vessel_diameters(mask, s.spacing_mm));
}
BENCHMARK(BM_VesselDiameters);

void BM_BackgroundNoise(benchmark::State& state) {
    phantom::PhantomSpec s;
    s.shape = {128, 128, 64};
    s.noise_std = 7.96;
    const auto volume = phantom::generate_phantom(s).first;
    for (auto _ : state) benchmark::DoNotOptimize(gap::estimate_background_noise(volume, 20));
}
BENCHMARK(BM_BackgroundNoise);

void BM_SaliencySlice(benchmark::State& state) {
    const auto window = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::normal_distribution<float> n;
    const Shape shapes[] = {{64, 16, 16}, {128, 8, 8}, {128, 8, 8}, {64, 16, 16},
                            {32, 32, 32}, {32, 32, 32}, {16, 64, 64}};
    std::vector<LayerDump> dumps;
    const auto& layers = saliency::default_layer_set();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        FloatGrid a(shapes[l]), g(shapes[l]);
        for (auto& v : a.values()) v = n(rng);
        for (auto& v : g.values()) v = n(rng);
        dumps.emplace_back(layers.names()[l], std::move(a), std::move(g));
    }
    saliency::MethodSpec spec;
    spec.pool.window = window;
    for (auto _ : state) {
        benchmark::DoNotOptimize(saliency::compute_slice(dumps, {128, 128}, spec, layers, "s"));
    }
}
BENCHMARK(BM_SaliencySlice)->Arg(1)->Arg(2);

void BM_ScoreSlice(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto h = random_heatmap(n, 4);
    const auto gt = random_mask(n, 0, 0.2, 5);
    const Mask pm(random_mask(n, 0, 0.2, 6).data(), MaskRole::Prediction);
    const align::ThresholdSpec taus;
    for (auto _ : state) benchmark::DoNotOptimize(align::score_slice(h, &gt, pm, taus));
}
BENCHMARK(BM_ScoreSlice)->Arg(128)->Arg(512);

} // namespace
BENCHMARK_MAIN();
