#include <cmath>

#include <gtest/gtest.h>

#include "shiftlens/alignment.hpp"
#include "shiftlens/domain_gap.hpp"
#include "shiftlens/phantom.hpp"
#include "support.hpp"

namespace shiftlens::phantom {
namespace {

TEST(Rng, SplitMixReferenceStream) {
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(splitmix64(state), 0x06c45d188009454fULL);
}

TEST(Rng, XoshiroStreamFromSeed) {
    // Computed with a standalone reimplementation in Python.
    Rng rng(42);
    EXPECT_EQ(rng.next(), 0x15780b2e0c2ec716ULL);
    EXPECT_EQ(rng.next(), 0x6104d9866d113a7eULL);
    EXPECT_EQ(rng.next(), 0xae17533239e499a1ULL);
}

TEST(Rng, UniformRangeAndNormalMoments) {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(99), b(99), c(100);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs |= x != c.next();
    }
    EXPECT_TRUE(differs);
}

PhantomSpec vessel_spec() {
    PhantomSpec s;
    s.shape = {24, 24, 10};
    s.spacing_mm = {0.5, 0.5, 0.5};
    s.vessels.push_back({2, {6.0, 6.0, 2.25}, 1.5, 4.5});
    s.vessels.push_back({0, {5.75, 3.0, 2.0}, 1.0, 11.0});
    return s;
}

TEST(Phantom, MaskMatchesIndependentVoxelCount) {
    PhantomSpec s;
    s.shape = {24, 24, 10};
    s.vessels.push_back({2, {6.0, 6.0, 2.25}, 1.5, 4.5});
    const auto [vol, mask] = generate_phantom(s);
    EXPECT_EQ(mask.count(), count_cylinder_voxels(s.vessels[0], s.shape, s.spacing_mm));

    PhantomSpec t = s;
    t.vessels = {{1, {4.0, 5.75, 2.0}, 1.2, 11.0}};
    EXPECT_EQ(generate_phantom(t).second.count(),
              count_cylinder_voxels(t.vessels[0], t.shape, t.spacing_mm));
}

TEST(Phantom, IntensitiesWithoutNoise) {
    auto s = vessel_spec();
    s.tissue_radius_mm = 0.0;
    const auto [vol, mask] = generate_phantom(s);
    for (std::size_t p = 0; p < mask.data().size(); ++p) {
        EXPECT_EQ(vol.data()[p], mask.data()[p] ? 300.0f : -1000.0f);
    }
    EXPECT_EQ(vol.spacing_mm(), s.spacing_mm);
    EXPECT_EQ(vol.id(), "phantom");
}

TEST(Phantom, SeedChangesNoiseNotMask) {
    auto s = vessel_spec();
    s.noise_std = 5.0;
    const auto a = generate_phantom(s);
    s.seed = 1;
    const auto b = generate_phantom(s);
    EXPECT_EQ(a.second.data(), b.second.data());
    EXPECT_NE(a.first.data(), b.first.data());
    s.seed = 0;
    EXPECT_EQ(generate_phantom(s).first.data(), a.first.data());
}

TEST(Phantom, MeasuredNoiseMatchesRequested) {
    PhantomSpec s;
    s.shape = {64, 64, 16};
    s.noise_std = 7.96;
    s.seed = 11;
    const auto [vol, mask] = generate_phantom(s);
    const double measured = gap::estimate_background_noise(vol, 20).noise_std;
    EXPECT_NEAR(measured, 7.96, 0.796);
}

TEST(Phantom, Validation) {
    auto s = vessel_spec();
    s.vessels.push_back({2, {0.5, 6.0, 2.25}, 1.5, 4.5});
    try {
        generate_phantom(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("vessel 2"), std::string::npos);
    }
    PhantomSpec bad;
    bad.shape = {4, 4};
    EXPECT_THROW(generate_phantom(bad), Error);
    bad.shape = {4, 4, 4};
    bad.spacing_mm = {0.5, 0.0, 0.5};
    EXPECT_THROW(generate_phantom(bad), Error);
    bad.spacing_mm = {0.5, 0.5, 0.5};
    bad.noise_std = -1.0;
    EXPECT_THROW(generate_phantom(bad), Error);
}

Mask square(std::size_t n, std::size_t lo, std::size_t hi) {
    ByteGrid g({n, n}, 0);
    for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t j = lo; j < hi; ++j) g.at(i, j) = 1;
    return Mask(std::move(g), MaskRole::GroundTruth);
}

double achieved(const Heatmap& h, const Mask& base, double tau) {
    return align::iou(align::binarize(h, tau), base);
}

TEST(Attention, ExtremeTargets) {
    const auto base = square(16, 4, 10);
    EXPECT_EQ(achieved(generate_attention({base, 1.0, 0.3, 0}), base, 0.3), 1.0);
    EXPECT_LE(achieved(generate_attention({base, 0.0, 0.3, 0}), base, 0.3), kAttentionTolerance);
}

TEST(Attention, SourceDomainIou) {
    const auto base = square(32, 8, 20);
    const auto h = generate_attention({base, 0.4671, 0.3, 5});
    EXPECT_NEAR(achieved(h, base, 0.3), 0.4671, kAttentionTolerance);
}

TEST(Attention, RandomTargetsAreHit) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> target(0.05, 0.95);
    std::uniform_int_distribution<std::size_t> lo(2, 8);
    for (int t = 0; t < 100; ++t) {
        const std::size_t a = lo(rng);
        const auto base = square(32, a, a + 12);
        const double want = target(rng);
        const double tau = t % 2 ? 0.3 : 0.4;
        const auto h = generate_attention({base, want, tau, static_cast<std::uint64_t>(t)});
        EXPECT_NEAR(achieved(h, base, tau), want, kAttentionTolerance) << t;
        for (float v : h.data().values()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(Attention, Deterministic) {
    const auto base = square(20, 3, 12);
    EXPECT_EQ(generate_attention({base, 0.3, 0.3, 4}).data(),
              generate_attention({base, 0.3, 0.3, 4}).data());
}

TEST(Attention, UnreachableTargetIsConstructionError) {
    // 2 base pixels out of 4: IoU 0.4 needs a non-integer overlap.
    const auto base = testing::mask_from({2, 2}, {1, 1, 0, 0});
    for (auto spec : {AttentionSpec{base, 0.4, 0.3, 0}, AttentionSpec{base, 1.2, 0.3, 0},
                      AttentionSpec{testing::mask_from({2, 2}, {0, 0, 0, 0}), 0.5, 0.3, 0}}) {
        try {
            generate_attention(spec);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Construction);
        }
    }
}

} // namespace
} // namespace shiftlens::phantom
