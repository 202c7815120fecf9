#include <cstring>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "shiftlens/io.hpp"
#include "shiftlens/npy.hpp"
#include "support.hpp"

namespace shiftlens {
namespace {

using testing::TempDir;
using testing::fixture_dir;
using testing::read_file;
using testing::write_file;

std::vector<std::byte> as_bytes(const std::string& s) {
    std::vector<std::byte> out(s.size());
    std::memcpy(out.data(), s.data(), s.size());
    return out;
}

std::string npy_with_header(const std::string& dict, const std::string& payload) {
    std::string header = dict;
    while ((10 + header.size() + 1) % 64 != 0) header += ' ';
    header += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(header.size() & 0xff);
    out += static_cast<char>(header.size() >> 8);
    return out + header + payload;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::Io;
}

TEST(Npy, ShapeTwoByThreeLoadsRowMajor) {
    std::string payload(6 * sizeof(float), '\0');
    for (int i = 0; i < 6; ++i) {
        const float v = static_cast<float>(i);
        std::memcpy(payload.data() + i * sizeof(float), &v, sizeof v);
    }
    const auto bytes = as_bytes(npy_with_header(
        "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }", payload));
    const auto grid = npy::to_float_grid(npy::parse(bytes));
    ASSERT_EQ(grid.shape(), (Shape{2, 3}));
    EXPECT_EQ(grid.at(0, 0), 0.0f);
    EXPECT_EQ(grid.at(0, 2), 2.0f);
    EXPECT_EQ(grid.at(1, 0), 3.0f);
    EXPECT_EQ(grid.at(1, 2), 5.0f);
}

TEST(Npy, NumpyWrittenFilesRoundTripByteIdentical) {
    for (const char* name : {"f4_2x3.npy", "f8_4x5x3.npy", "u1_5x7.npy", "f4_scalar_shape1.npy"}) {
        SCOPED_TRACE(name);
        const auto path = fixture_dir() / "npy" / name;
        TempDir dir;
        npy::save_array(dir / "copy.npy", npy::load_array(path));
        EXPECT_EQ(read_file(dir / "copy.npy"), read_file(path));
    }
}

TEST(Npy, NumpyValuesAndAxisOrder) {
    const auto a = npy::load_array(fixture_dir() / "npy" / "f4_2x3.npy");
    EXPECT_EQ(a.dtype, npy::Dtype::Float32);
    const auto g = npy::to_float_grid(a);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(g[i], static_cast<float>(i) / 4.0f);

    const auto d = npy::load_array(fixture_dir() / "npy" / "f8_4x5x3.npy");
    EXPECT_EQ(d.dtype, npy::Dtype::Float64);
    EXPECT_EQ(d.shape, (Shape{4, 5, 3}));
}

TEST(Npy, Version2HeaderIsRead) {
    const auto g = npy::to_float_grid(npy::load_array(fixture_dir() / "npy" / "f4_v2.npy"));
    ASSERT_EQ(g.shape(), (Shape{3, 4}));
    EXPECT_EQ(g.at(2, 3), 11.0f);
    EXPECT_EQ(g.at(1, 0), 4.0f);
}

TEST(Npy, UnsupportedDtypes) {
    EXPECT_EQ(kind_of([] { npy::load_array(fixture_dir() / "npy" / "i4_3.npy"); }),
              ErrorKind::UnsupportedDtype);
    EXPECT_EQ(kind_of([] { npy::load_array(fixture_dir() / "npy" / "f4_big_endian.npy"); }),
              ErrorKind::UnsupportedDtype);
}

TEST(Npy, FortranOrderIsRejected) {
    EXPECT_EQ(kind_of([] { npy::load_array(fixture_dir() / "npy" / "f4_fortran.npy"); }),
              ErrorKind::Format);
}

TEST(Npy, MalformedHeaders) {
    EXPECT_EQ(kind_of([] { npy::parse(as_bytes("not an npy file at all")); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] { npy::parse(as_bytes("\x93NUMPY\x01")); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] {
                  npy::parse(as_bytes(npy_with_header("{'descr': '<f4', 'fortran_order': False, }", "")));
              }),
              ErrorKind::Format);
    // Payload shorter than the shape requires.
    EXPECT_EQ(kind_of([] {
                  npy::parse(as_bytes(npy_with_header(
                      "{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }", "abcd")));
              }),
              ErrorKind::Format);
}

TEST(Npy, HeaderIsAlignedAndCanonical) {
    const FloatGrid g({2, 3}, 1.0f);
    const auto bytes = npy::serialize(npy::from_grid(g));
    std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    ASSERT_EQ(text.substr(0, 6), "\x93NUMPY");
    EXPECT_EQ(text[6], '\x01');
    const std::size_t header_len = static_cast<unsigned char>(text[8]) |
                                   (static_cast<unsigned char>(text[9]) << 8);
    EXPECT_EQ((10 + header_len) % 64, 0u);
    EXPECT_NE(text.find("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }"),
              std::string::npos);
    EXPECT_EQ(text[10 + header_len - 1], '\n');
}

TEST(Npy, RoundTripIsBitExactForEveryDtype) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    TempDir dir;

    FloatGrid f({3, 4, 5});
    for (auto& v : f.values()) v = static_cast<float>(n(rng));
    npy::save_array(dir / "f.npy", npy::from_grid(f));
    EXPECT_EQ(npy::to_float_grid(npy::load_array(dir / "f.npy")), f);

    Grid<double> d({7});
    for (auto& v : d.values()) v = n(rng);
    npy::save_array(dir / "d.npy", npy::from_grid(d));
    const auto loaded = npy::load_array(dir / "d.npy");
    ASSERT_EQ(loaded.dtype, npy::Dtype::Float64);
    std::vector<double> back(7);
    std::memcpy(back.data(), loaded.bytes.data(), 7 * sizeof(double));
    EXPECT_EQ(back, d.storage());

    ByteGrid b({2, 2}, std::vector<std::uint8_t>{0, 1, 1, 0});
    npy::save_array(dir / "b.npy", npy::from_grid(b));
    const auto mask = load_mask(dir / "b.npy", MaskRole::GroundTruth);
    EXPECT_EQ(mask.data(), b);
}

TEST(Npy, AxisOrderMatchesFlatIndex) {
    const auto a = npy::load_array(fixture_dir() / "npy" / "f8_4x5x3.npy");
    const auto g = npy::to_float_grid(a);
    std::vector<double> raw(a.element_count());
    std::memcpy(raw.data(), a.bytes.data(), raw.size() * sizeof(double));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t k = 0; k < 3; ++k)
                EXPECT_EQ(g.at(i, j, k), static_cast<float>(raw[i * 15 + j * 3 + k]));
}

class VolumeIo : public ::testing::Test {
protected:
    void write_volume(const std::string& sidecar) {
        npy::save_array(dir / "v.npy", npy::from_grid(FloatGrid({16, 16, 8}, 40.0f)));
        write_file(dir / "v.json", sidecar);
    }
    TempDir dir;
};

TEST_F(VolumeIo, SourceSpacing) {
    write_volume(R"({"spacing_mm": [0.457, 0.457, 1.114], "id": "src"})");
    const auto v = load_volume(dir / "v.npy", dir / "v.json");
    EXPECT_EQ(v.shape(), (Shape{16, 16, 8}));
    EXPECT_EQ(v.spacing_mm(), (Spacing{0.457, 0.457, 1.114}));
    EXPECT_EQ(v.id(), "src");
}

TEST_F(VolumeIo, TargetSpacing) {
    write_volume(R"({"spacing_mm": [0.452, 0.452, 0.715]})");
    const auto v = load_volume(dir / "v.npy", dir / "v.json");
    EXPECT_EQ(v.spacing_mm(), (Spacing{0.452, 0.452, 0.715}));
    EXPECT_EQ(v.id(), "v");
}

TEST_F(VolumeIo, NegativeOrMissingSpacing) {
    write_volume(R"({"spacing_mm": [0.5, 0.5, -1]})");
    EXPECT_EQ(kind_of([&] { load_volume(dir / "v.npy", dir / "v.json"); }), ErrorKind::Sidecar);
    write_volume(R"({"id": "x"})");
    EXPECT_EQ(kind_of([&] { load_volume(dir / "v.npy", dir / "v.json"); }), ErrorKind::Sidecar);
    EXPECT_EQ(kind_of([&] { load_volume(dir / "v.npy", dir / "nope.json"); }), ErrorKind::Sidecar);
}

TEST_F(VolumeIo, TwoDimensionalArrayIsShapeError) {
    npy::save_array(dir / "flat.npy", npy::from_grid(FloatGrid({16, 16}, 0.0f)));
    write_file(dir / "flat.json", R"({"spacing_mm": [1, 1, 1]})");
    EXPECT_EQ(kind_of([&] { load_volume(dir / "flat.npy", dir / "flat.json"); }), ErrorKind::Shape);
}

TEST_F(VolumeIo, SaveLoadRoundTrip) {
    FloatGrid g({4, 3, 2});
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(i) - 5.5f;
    const Volume v(g, {0.4, 0.5, 0.6}, "rt");
    save_volume(dir / "rt.npy", dir / "rt.json", v);
    const auto back = load_volume(dir / "rt.npy", dir / "rt.json");
    EXPECT_EQ(back.data(), g);
    EXPECT_EQ(back.spacing_mm(), v.spacing_mm());
    EXPECT_EQ(back.id(), "rt");
}

TEST(ValidatePair, MatchingShapesPass) {
    const Volume v(FloatGrid({16, 16, 8}, 0.0f), {1, 1, 1});
    EXPECT_NO_THROW(validate_pair(v, Mask(ByteGrid({16, 16, 8}, 1), MaskRole::GroundTruth)));
}

TEST(ValidatePair, MismatchNamesBothShapes) {
    const Volume v(FloatGrid({16, 16, 8}, 0.0f), {1, 1, 1});
    try {
        validate_pair(v, Mask(ByteGrid({16, 16, 7}, 0), MaskRole::GroundTruth));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("(16, 16, 8)"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("(16, 16, 7)"), std::string::npos);
    }
}

TEST(MaskIo, ValueTwoIsRejected) {
    EXPECT_EQ(kind_of([] { Mask(ByteGrid({2, 2}, std::vector<std::uint8_t>{0, 1, 2, 0}), MaskRole::GroundTruth); }),
              ErrorKind::Validation);
    TempDir dir;
    npy::save_array(dir / "m.npy", npy::from_grid(ByteGrid({2, 2}, std::vector<std::uint8_t>{0, 1, 2, 0})));
    EXPECT_EQ(kind_of([&] { load_mask(dir / "m.npy", MaskRole::Prediction); }), ErrorKind::Validation);
}

TEST(MaskIo, FloatMasksAcceptedNanRejected) {
    TempDir dir;
    npy::save_array(dir / "ok.npy", npy::from_grid(FloatGrid({1, 3}, std::vector<float>{0, 1, 1})));
    EXPECT_EQ(load_mask(dir / "ok.npy", MaskRole::GroundTruth).count(), 2u);
    npy::save_array(dir / "nan.npy", npy::from_grid(FloatGrid({1, 2}, std::vector<float>{0, NAN})));
    EXPECT_EQ(kind_of([&] { load_mask(dir / "nan.npy", MaskRole::GroundTruth); }), ErrorKind::Validation);
    npy::save_array(dir / "half.npy", npy::from_grid(FloatGrid({1, 2}, std::vector<float>{0, 0.5f})));
    EXPECT_EQ(kind_of([&] { load_mask(dir / "half.npy", MaskRole::GroundTruth); }), ErrorKind::Validation);
}

TEST(HeatmapIo, OutOfRangeValuesFailToLoad) {
    TempDir dir;
    npy::save_array(dir / "h.npy", npy::from_grid(FloatGrid({2, 2}, std::vector<float>{0, 0.5f, 1.0f, 1.5f})));
    EXPECT_EQ(kind_of([&] { load_heatmap(dir / "h.npy"); }), ErrorKind::Validation);
    npy::save_array(dir / "n.npy", npy::from_grid(FloatGrid({1, 2}, std::vector<float>{0, -0.1f})));
    EXPECT_EQ(kind_of([&] { load_heatmap(dir / "n.npy"); }), ErrorKind::Validation);
    npy::save_array(dir / "ok.npy", npy::from_grid(FloatGrid({1, 2}, std::vector<float>{0, 1})));
    EXPECT_NO_THROW(load_heatmap(dir / "ok.npy"));
}

TEST(ManifestIo, FixtureManifestResolvesPaths) {
    const auto m = load_manifest(fixture_dir() / "saliency" / "slice00.manifest.json");
    EXPECT_EQ(m.slice_id, "slice00");
    EXPECT_EQ(m.input_shape, (std::array<std::size_t, 2>{16, 16}));
    ASSERT_EQ(m.layers.size(), 7u);
    EXPECT_EQ(m.layers[0].name, "encoder.4");
    EXPECT_TRUE(std::filesystem::exists(m.layers[6].grads_path));
    EXPECT_TRUE(m.ground_truth_mask_path.has_value());
    EXPECT_EQ(m.gradient_target, "prediction_mask");
}

TEST(ManifestIo, SaveLoadRoundTrip) {
    TempDir dir;
    const auto src = fixture_dir() / "saliency";
    std::filesystem::copy(src, dir.path(), std::filesystem::copy_options::recursive);
    auto m = load_manifest(dir / "slice01.manifest.json");
    save_manifest(dir / "again.manifest.json", m);
    const auto doc = nlohmann::json::parse(read_file(dir / "again.manifest.json"));
    EXPECT_EQ(doc["layers"][0]["features"], "dumps/slice01.encoder.4.features.npy");
    const auto back = load_manifest(dir / "again.manifest.json");
    EXPECT_EQ(back.layers.size(), m.layers.size());
    EXPECT_EQ(back.prediction_mask_path, m.prediction_mask_path);
}

TEST(ManifestIo, MissingFileAndDuplicateLayer) {
    TempDir dir;
    std::filesystem::copy(fixture_dir() / "saliency", dir.path(), std::filesystem::copy_options::recursive);
    auto doc = nlohmann::json::parse(read_file(dir / "slice00.manifest.json"));
    auto broken = doc;
    broken["layers"][3]["grads"] = "dumps/absent.npy";
    write_file(dir / "a.json", broken.dump());
    EXPECT_EQ(kind_of([&] { load_manifest(dir / "a.json"); }), ErrorKind::Manifest);

    auto dup = doc;
    dup["layers"][1] = dup["layers"][0];
    write_file(dir / "b.json", dup.dump());
    EXPECT_EQ(kind_of([&] { load_manifest(dir / "b.json"); }), ErrorKind::Manifest);

    write_file(dir / "c.json", "{not json");
    EXPECT_EQ(kind_of([&] { load_manifest(dir / "c.json"); }), ErrorKind::Manifest);
}

} // namespace
} // namespace shiftlens
