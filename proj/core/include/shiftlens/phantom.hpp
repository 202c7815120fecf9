#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shiftlens/types.hpp"

namespace shiftlens::phantom {

// xoshiro256** (Blackman & Vigna) seeded through SplitMix64. Both are fully
// specified integer algorithms, so a seed reproduces the same stream in any
// language.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next() noexcept;
    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    // Standard normal via Box-Muller; each pair of uniforms yields two
    // deviates, consumed cosine first.
    double normal() noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
    std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Solid cylinder aligned with grid axis `axis`. Positions are in mm measured
// from the centre of voxel (0, 0, 0).
struct Cylinder {
    int axis = 2;
    std::array<double, 3> center_mm{};
    double radius_mm = 1.0;
    double length_mm = 1.0;

    friend bool operator==(const Cylinder&, const Cylinder&) = default;
};

struct PhantomSpec {
    Shape shape{64, 64, 32};
    Spacing spacing_mm{0.5, 0.5, 0.5};
    double background_hu = -1000.0;
    double tissue_hu = 42.0;
    double vessel_hu = 300.0;
    // In-plane disc of tissue around the slice centre, spanning every slice.
    // Unset means 35% of the smaller in-plane extent; 0 disables it.
    std::optional<double> tissue_radius_mm;
    double noise_std = 0.0;
    std::vector<Cylinder> vessels;
    std::uint64_t seed = 0;
    std::string id = "phantom";

    void validate() const;
    double effective_tissue_radius() const;

    friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

// The mask depends only on geometry; noise is drawn per voxel in row-major order.
std::pair<Volume, Mask> generate_phantom(const PhantomSpec& spec);

// Number of voxel centres inside a cylinder, counted independently of the
// generator (used as a voxelization cross-check).
std::uint64_t count_cylinder_voxels(const Cylinder& c, const Shape& shape, const Spacing& spacing);

struct AttentionSpec {
    Mask base;
    double target_iou = 0.5;
    double tau = 0.3;
    std::uint64_t seed = 0;
};

inline constexpr double kAttentionTolerance = 0.01;

// Builds a heatmap whose binarization at `tau` overlaps `base` with the
// requested IoU (within kAttentionTolerance). The supra-threshold set keeps
// the deepest base pixels (erosion) and adds the nearest outside pixels
// (dilation); ties are broken by the seeded generator.
Heatmap generate_attention(const AttentionSpec& spec);

} // namespace shiftlens::phantom
