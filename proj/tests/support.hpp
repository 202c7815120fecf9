#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "shiftlens/types.hpp"

namespace shiftlens::testing {

inline std::filesystem::path fixture_dir() { return SHIFTLENS_FIXTURE_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("shiftlens_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline Mask random_mask(std::mt19937_64& rng, Shape shape, double p = 0.5,
                        MaskRole role = MaskRole::GroundTruth) {
    std::bernoulli_distribution bit(p);
    ByteGrid g(std::move(shape), 0);
    for (auto& v : g.values()) v = bit(rng);
    return Mask(std::move(g), role);
}

inline Heatmap random_heatmap(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    FloatGrid g(std::move(shape), 0.0f);
    for (auto& v : g.values()) v = u(rng);
    return Heatmap(std::move(g));
}

inline Mask mask_from(Shape shape, std::vector<std::uint8_t> values,
                      MaskRole role = MaskRole::GroundTruth) {
    return Mask(ByteGrid(std::move(shape), std::move(values)), role);
}

} // namespace shiftlens::testing
