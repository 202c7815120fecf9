#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "shiftlens/io.hpp"
#include "shiftlens/npy.hpp"
#include "shiftlens/saliency.hpp"
#include "support.hpp"

namespace shiftlens::saliency {
namespace {

using testing::TempDir;
using testing::fixture_dir;

LayerDump dump_of(std::size_t c, std::size_t h, std::size_t w, std::vector<float> a,
                  std::vector<float> g, std::string name = "encoder.4") {
    return LayerDump(std::move(name), FloatGrid({c, h, w}, std::move(a)), FloatGrid({c, h, w}, std::move(g)));
}

LayerDump random_dump(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w,
                      bool nonnegative_features = false, std::string name = "encoder.4") {
    std::normal_distribution<float> n;
    FloatGrid a({c, h, w}), g({c, h, w});
    for (auto& v : a.values()) v = nonnegative_features ? std::abs(n(rng)) : n(rng);
    for (auto& v : g.values()) v = n(rng);
    return LayerDump(std::move(name), std::move(a), std::move(g));
}

// ReLU(sum_c max over window(G_c) * A_c), written point by point.
double xres_oracle(const LayerDump& d, std::size_t k, std::size_t i, std::size_t j) {
    const long h = static_cast<long>(d.height()), w = static_cast<long>(d.width());
    const long lo = -static_cast<long>((k - 1) / 2), hi = static_cast<long>(k / 2);
    double total = 0.0;
    for (std::size_t c = 0; c < d.channels(); ++c) {
        double m = -INFINITY;
        for (long di = lo; di <= hi; ++di)
            for (long dj = lo; dj <= hi; ++dj) {
                const long r = std::min(std::max(static_cast<long>(i) + di, 0L), h - 1);
                const long s = std::min(std::max(static_cast<long>(j) + dj, 0L), w - 1);
                m = std::max(m, static_cast<double>(d.grads().at(c, r, s)));
            }
        total += m * d.features().at(c, i, j);
    }
    return std::max(total, 0.0);
}

double gradcam_oracle(const LayerDump& d, std::size_t i, std::size_t j) {
    double total = 0.0;
    for (std::size_t c = 0; c < d.channels(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < d.height(); ++r)
            for (std::size_t s = 0; s < d.width(); ++s) mean += d.grads().at(c, r, s);
        mean /= static_cast<double>(d.height() * d.width());
        total += mean * d.features().at(c, i, j);
    }
    return std::max(total, 0.0);
}

void expect_map(const RawMap& m, std::vector<double> expected) {
    ASSERT_EQ(m.size(), expected.size());
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], expected[i], 1e-12) << i;
}

TEST(SegXResCam, HandExampleWindowOne) {
    const auto d = dump_of(1, 2, 2, {1, 2, 3, 4}, {1, 0, 0, 1});
    expect_map(segxrescam_layer(d, {1}), {1, 0, 0, 4});
}

TEST(SegXResCam, NonPositiveGradientsGiveZero) {
    std::mt19937_64 rng(5);
    auto d = random_dump(rng, 3, 4, 4, true);
    FloatGrid g = d.grads();
    for (auto& v : g.values()) v = -std::abs(v);
    const LayerDump neg("x", d.features(), g);
    const auto map = segxrescam_layer(neg, {1});
    for (double v : map.values()) EXPECT_EQ(v, 0.0);
}

TEST(SegXResCam, WindowTwoSpreadsGradient) {
    const auto d = dump_of(1, 2, 2, {1, 1, 1, 1}, {1, 0, 0, 1});
    expect_map(segxrescam_layer(d, {2}), {1, 1, 1, 1});
}

TEST(SegXResCam, ShapeMismatch) {
    EXPECT_THROW(LayerDump("x", FloatGrid({1, 2, 2}, 0.0f), FloatGrid({1, 2, 3}, 0.0f)), Error);
}

TEST(SegXResCam, MaxPoolWindowPlacement) {
    const RawMap plane({1, 4}, std::vector<double>{0, 5, 1, 2});
    // Window 2 covers {j, j+1}; window 3 covers {j-1, j, j+1}.
    expect_map(max_pool(plane, 2), {5, 5, 2, 2});
    expect_map(max_pool(plane, 3), {5, 5, 5, 2});
}

TEST(SegGradCam, HandExample) {
    const auto d = dump_of(1, 2, 2, {1, 2, 3, 4}, {1, 0, 0, 0});
    expect_map(seg_gradcam_layer(d), {0.25, 0.5, 0.75, 1.0});
}

TEST(SegGradCam, ZeroMeanGradientGivesZero) {
    const auto d = dump_of(1, 2, 2, {1, 2, 3, 4}, {1, -1, 2, -2});
    expect_map(seg_gradcam_layer(d), {0, 0, 0, 0});
}

TEST(SegGradCam, EqualsWindowOneOnConstantGradients) {
    std::mt19937_64 rng(9);
    std::normal_distribution<float> n;
    for (int t = 0; t < 20; ++t) {
        const std::size_t c = 1 + t % 5, h = 2 + t % 6, w = 3 + t % 4;
        FloatGrid a({c, h, w}), g({c, h, w});
        for (auto& v : a.values()) v = n(rng);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float gc = n(rng);
            for (std::size_t i = 0; i < h * w; ++i) g[ch * h * w + i] = gc;
        }
        const LayerDump d("x", a, g);
        const auto x = segxrescam_layer(d, {1}), y = seg_gradcam_layer(d);
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-6);
    }
}

TEST(Saliency, BruteForceOracleOnSmallDumps) {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> c_dist(1, 8), s_dist(1, 8);
    for (int t = 0; t < 100; ++t) {
        const auto d = random_dump(rng, c_dist(rng), s_dist(rng), s_dist(rng));
        for (std::size_t k : {1u, 2u, 3u}) {
            const auto m = segxrescam_layer(d, {k});
            for (std::size_t i = 0; i < d.height(); ++i)
                for (std::size_t j = 0; j < d.width(); ++j)
                    ASSERT_NEAR(m.at(i, j), xres_oracle(d, k, i, j), 1e-6);
        }
        const auto gc = seg_gradcam_layer(d);
        for (std::size_t i = 0; i < d.height(); ++i)
            for (std::size_t j = 0; j < d.width(); ++j)
                ASSERT_NEAR(gc.at(i, j), gradcam_oracle(d, i, j), 1e-6);
    }
}

TEST(Saliency, RawMapsAreNonNegative) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 30; ++t) {
        const auto d = random_dump(rng, 4, 5, 6);
        const auto xres = segxrescam_layer(d, {2});
        const auto gc = seg_gradcam_layer(d);
        for (double v : xres.values()) EXPECT_GE(v, 0.0);
        for (double v : gc.values()) EXPECT_GE(v, 0.0);
    }
}

TEST(Saliency, PoolingIsMonotoneForNonNegativeFeatures) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 50; ++t) {
        const auto d = random_dump(rng, 3, 6, 5, true);
        const auto k1 = segxrescam_layer(d, {1}), k2 = segxrescam_layer(d, {2});
        for (std::size_t i = 0; i < k1.size(); ++i) EXPECT_GE(k2[i], k1[i]);
    }
}

TEST(Saliency, ChannelAdditivityOfAccumulator) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        const auto d = random_dump(rng, 5, 4, 7);
        const auto whole = segxrescam_accumulator(d, {1});
        std::vector<double> sum(whole.size(), 0.0);
        for (std::size_t c = 0; c < d.channels(); ++c) {
            const std::size_t hw = d.height() * d.width();
            std::vector<float> a(d.features().values().begin() + c * hw,
                                 d.features().values().begin() + (c + 1) * hw);
            std::vector<float> g(d.grads().values().begin() + c * hw,
                                 d.grads().values().begin() + (c + 1) * hw);
            const auto part = segxrescam_accumulator(dump_of(1, d.height(), d.width(), a, g), {1});
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += part[i];
        }
        for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(whole[i], sum[i], 1e-9);
    }
}

TEST(Saliency, PositiveGradientScaling) {
    std::mt19937_64 rng(14);
    const auto d = random_dump(rng, 4, 6, 6);
    FloatGrid g = d.grads();
    for (auto& v : g.values()) v *= 4.0f;  // power of two keeps the float scaling exact
    const LayerDump scaled("x", d.features(), g);
    const auto a = segxrescam_layer(d, {2}), b = segxrescam_layer(scaled, {2});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 4.0 * a[i], 1e-9);
    EXPECT_EQ(normalize_minmax(a).data(), normalize_minmax(b).data());
}

TEST(Upsample, SinglePixelFillsTarget) {
    const RawMap m({1, 1}, std::vector<double>{0.7});
    const auto up = upsample_bilinear(m, 5, 3);
    for (double v : up.values()) EXPECT_EQ(v, 0.7);
}

TEST(Upsample, ColumnsInterpolateLinearly) {
    const RawMap m({2, 2}, std::vector<double>{0, 1, 0, 1});
    const auto up = upsample_bilinear(m, 2, 4);
    expect_map(up, {0, 1.0 / 3, 2.0 / 3, 1, 0, 1.0 / 3, 2.0 / 3, 1});
}

TEST(Upsample, IdentityAndShrinkRejected) {
    const RawMap m({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(upsample_bilinear(m, 2, 3), m);
    try {
        upsample_bilinear(m, 1, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
    }
}

TEST(Upsample, CornersArePreserved) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u;
    RawMap m({3, 4});
    for (auto& v : m.values()) v = u(rng);
    const auto up = upsample_bilinear(m, 9, 10);
    EXPECT_DOUBLE_EQ(up.at(0, 0), m.at(0, 0));
    EXPECT_DOUBLE_EQ(up.at(8, 9), m.at(2, 3));
    EXPECT_DOUBLE_EQ(up.at(0, 9), m.at(0, 3));
    EXPECT_DOUBLE_EQ(up.at(4, 0), m.at(1, 0));
}

TEST(Normalize, HandExample) {
    const auto h = normalize_minmax(RawMap({2, 2}, std::vector<double>{1, 0, 0, 4}));
    EXPECT_EQ(h.data().storage(), (std::vector<float>{0.25f, 0.0f, 0.0f, 1.0f}));
}

TEST(Normalize, ConstantMapIsZero) {
    const auto h = normalize_minmax(RawMap({3, 3}, 2.5));
    for (float v : h.data().values()) EXPECT_EQ(v, 0.0f);
}

TEST(Normalize, UnitRangeUnchanged) {
    const std::vector<double> vals{0, 0.25, 0.5, 1};
    const auto h = normalize_minmax(RawMap({2, 2}, vals));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(h.data()[i], static_cast<float>(vals[i]));
}

TEST(Normalize, NanIsValidationError) {
    try {
        normalize_minmax(RawMap({1, 2}, std::vector<double>{0, NAN}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
    }
}

Heatmap heat(std::vector<float> v, Shape s = {2, 2}) { return Heatmap(FloatGrid(std::move(s), std::move(v))); }

TEST(Aggregate, IdenticalMapsReturnTheMap) {
    const auto m = heat({0.1f, 0.2f, 0.9f, 0.0f});
    const std::vector<Heatmap> maps(7, m);
    EXPECT_EQ(aggregate_layers(maps, default_layer_set()).data(), m.data());
}

TEST(Aggregate, ZeroAndOneGiveHalf) {
    const std::vector<Heatmap> maps{heat({0, 0, 0, 0}), heat({1, 1, 1, 1})};
    const LayerSet layers({"a", "b"});
    const auto agg = aggregate_layers(maps, layers);
    for (float v : agg.data().values()) EXPECT_EQ(v, 0.5f);
}

TEST(Aggregate, LoopOracleAndPermutationInvariance) {
    std::mt19937_64 rng(16);
    const LayerSet layers({"a", "b", "c"});
    for (int t = 0; t < 20; ++t) {
        std::vector<Heatmap> maps;
        for (int l = 0; l < 3; ++l) maps.push_back(testing::random_heatmap(rng, {5, 6}));
        const auto agg = aggregate_layers(maps, layers);
        for (std::size_t i = 0; i < 30; ++i) {
            double s = 0.0;
            for (const auto& m : maps) s += m.data()[i];
            EXPECT_NEAR(agg.data()[i], s / 3.0, 1e-7);
        }
        std::swap(maps[0], maps[2]);
        EXPECT_EQ(aggregate_layers(maps, layers).data(), agg.data());
    }
}

TEST(Aggregate, CountAndShapeMismatch) {
    const LayerSet layers({"a", "b"});
    std::vector<Heatmap> one{heat({0, 0, 0, 0})};
    EXPECT_THROW(aggregate_layers(one, layers), Error);
    std::vector<Heatmap> mixed{heat({0, 0, 0, 0}), heat({0, 0, 0}, {1, 3})};
    try {
        aggregate_layers(mixed, layers);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
    }
}

TEST(LayerSetTest, DefaultIsSevenNamedLayers) {
    const auto& names = default_layer_set().names();
    EXPECT_EQ(names, (std::vector<std::string>{"encoder.4", "encoder.5", "decoder.0", "decoder.1",
                                               "decoder.2", "decoder.3", "decoder.4"}));
    EXPECT_THROW(LayerSet({}), Error);
    EXPECT_THROW(LayerSet({"a", "a"}), Error);
}

TEST(Method, ParseNames) {
    EXPECT_EQ(parse_method("segxrescam"), Method::SegXResCam);
    EXPECT_EQ(parse_method("seg-gradcam"), Method::SegGradCam);
    EXPECT_THROW(parse_method("gradcam++"), Error);
}

TEST(Pipeline, IdenticalOnesDumpsGiveZeroMap) {
    std::vector<LayerDump> dumps;
    for (const auto& name : default_layer_set().names()) {
        dumps.push_back(dump_of(1, 4, 4, std::vector<float>(16, 1.0f), std::vector<float>(16, 1.0f), name));
    }
    const auto r = compute_slice(dumps, {16, 16}, {}, default_layer_set(), "ones");
    for (float v : r.aggregated.data().values()) EXPECT_EQ(v, 0.0f);
}

struct FixtureCase {
    MethodSpec spec;
    const char* tag;
};

TEST(Pipeline, FixtureManifestsMatchNumpyOracle) {
    const FixtureCase cases[] = {{{Method::SegXResCam, {1}}, "xres_k1"},
                                 {{Method::SegXResCam, {2}}, "xres_k2"},
                                 {{Method::SegGradCam, {1}}, "gradcam"}};
    for (const char* id : {"slice00", "slice01", "slice02", "constgrad"}) {
        const auto manifest = load_manifest(fixture_dir() / "saliency" / (std::string(id) + ".manifest.json"));
        for (const auto& c : cases) {
            SCOPED_TRACE(std::string(id) + " " + c.tag);
            const auto result = compute_pipeline(manifest, c.spec, default_layer_set());
            const auto expected = npy::to_float_grid(npy::load_array(
                fixture_dir() / "saliency" / "expected" / (std::string(id) + "." + c.tag + ".npy")));
            ASSERT_EQ(result.aggregated.shape(), expected.shape());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                ASSERT_NEAR(result.aggregated.data()[i], expected[i], 1e-5);
            }
        }
    }
}

TEST(Pipeline, WindowTwoDiffersFromWindowOne) {
    const auto manifest = load_manifest(fixture_dir() / "saliency" / "slice00.manifest.json");
    const auto a = compute_pipeline(manifest, {Method::SegXResCam, {1}}, default_layer_set());
    const auto b = compute_pipeline(manifest, {Method::SegXResCam, {2}}, default_layer_set());
    EXPECT_NE(a.aggregated.data(), b.aggregated.data());
}

TEST(Pipeline, ConstantGradientFixtureMethodsAgree) {
    const auto manifest = load_manifest(fixture_dir() / "saliency" / "constgrad.manifest.json");
    const auto a = compute_pipeline(manifest, {Method::SegXResCam, {1}}, default_layer_set());
    const auto b = compute_pipeline(manifest, {Method::SegGradCam, {1}}, default_layer_set());
    for (std::size_t i = 0; i < a.aggregated.data().size(); ++i) {
        EXPECT_NEAR(a.aggregated.data()[i], b.aggregated.data()[i], 1e-6);
    }
}

TEST(Pipeline, MissingLayerIsManifestError) {
    auto manifest = load_manifest(fixture_dir() / "saliency" / "slice00.manifest.json");
    manifest.layers.erase(std::remove_if(manifest.layers.begin(), manifest.layers.end(),
                                         [](const ManifestLayer& l) { return l.name == "decoder.3"; }),
                          manifest.layers.end());
    try {
        compute_pipeline(manifest, {}, default_layer_set());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Manifest);
        EXPECT_NE(std::string(e.what()).find("decoder.3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("slice00"), std::string::npos);
    }
}

TEST(Pipeline, WrongGradientTargetIsRejected) {
    auto manifest = load_manifest(fixture_dir() / "saliency" / "slice00.manifest.json");
    manifest.gradient_target = "ground_truth";
    EXPECT_THROW(compute_pipeline(manifest, {}, default_layer_set()), Error);
}

TEST(Pipeline, WriteSliceProducesHeatmapSidecarAndLayers) {
    TempDir dir;
    const auto manifest = load_manifest(fixture_dir() / "saliency" / "slice01.manifest.json");
    const auto r = compute_pipeline(manifest, {}, default_layer_set(), true);
    ASSERT_EQ(r.per_layer.size(), 7u);
    write_slice(dir.path(), r, {}, default_layer_set());
    EXPECT_EQ(load_heatmap(dir / "slice01.heatmap.npy").data(), r.aggregated.data());
    EXPECT_TRUE(std::filesystem::exists(dir / "slice01.heatmap.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "slice01.decoder.4.npy"));
    for (const auto& [name, map] : r.per_layer) {
        for (float v : map.data().values()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

} // namespace
} // namespace shiftlens::saliency
