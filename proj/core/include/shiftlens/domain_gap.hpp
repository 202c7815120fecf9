#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftlens/types.hpp"

namespace shiftlens::gap {

// Streaming mean/variance (Welford) with the pairwise merge from Chan et al.,
// so per-volume accumulators combine exactly regardless of grouping.
class RunningStats {
public:
    void push(double x) noexcept;
    void merge(const RunningStats& other) noexcept;

    std::uint64_t count() const noexcept { return count_; }
    double mean() const noexcept { return mean_; }
    double population_variance() const noexcept;
    double population_std() const noexcept;

private:
    std::uint64_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct IntensityWindow {
    double lo = 0.0;
    double hi = 80.0;
};

struct IntensityStats {
    double window_lo = 0.0;
    double window_hi = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population
    std::uint64_t voxel_count = 0;
};

RunningStats accumulate_window(const Volume& volume, IntensityWindow window);
IntensityStats intensity_stats(const RunningStats& acc, IntensityWindow window);
IntensityStats intensity_stats(const Volume& volume, IntensityWindow window);

struct ResolutionDelta {
    Spacing source{};
    Spacing target{};
    // (target - source) / source * 100 per axis.
    std::array<double, 3> percent_difference{};
};

ResolutionDelta resolution_compare(const Spacing& source, const Spacing& target);

inline constexpr double kAirThresholdHu = -500.0;
inline constexpr std::size_t kMinAirVoxels = 100;

struct PatchNoise {
    std::array<bool, 3> high_corner{};  // per axis: patch anchored at the far end
    std::uint64_t air_voxels = 0;
    std::optional<double> std;          // absent when air_voxels < kMinAirVoxels
};

struct NoiseStats {
    double noise_std = 0.0;
    std::string method;
    std::vector<PatchNoise> patches;
};

// Median of the population std of air voxels (< -500 HU) in the eight
// corner patches of edge `patch_edge`, clipped to the volume.
NoiseStats estimate_background_noise(const Volume& volume, std::size_t patch_edge);

// Exact squared Euclidean distance (mm^2) from each foreground element to the
// nearest background element centre. The grid is treated as surrounded by
// background, so a lone voxel at isotropic spacing s gets distance s.
// Works for rank 2 and rank 3 masks; spacing has one entry per axis.
Grid<double> squared_distance_transform(const ByteGrid& mask, std::span<const double> spacing);

struct DiameterStats {
    double mean = 0.0;
    double median = 0.0;
    double std = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
    double p99 = 0.0;
    std::uint64_t sample_count = 0;
};

// Diameters (2 x EDT, mm) sampled at ridge voxels: foreground voxels whose
// distance is >= that of every in-grid 26-neighbour.
std::vector<double> diameter_samples(const Mask& mask, const Spacing& spacing);
DiameterStats summarize_diameters(std::vector<double> samples);
DiameterStats vessel_diameters(const Mask& mask, const Spacing& spacing);

struct DomainGapReport {
    IntensityStats source_intensity;
    IntensityStats target_intensity;
    ResolutionDelta resolution;
    NoiseStats source_noise;
    NoiseStats target_noise;
    std::optional<double> noise_ratio;  // absent when source noise is 0
    std::optional<DiameterStats> source_diameters;
    std::optional<DiameterStats> target_diameters;
};

struct DatasetSummary {
    IntensityStats intensity;
    Spacing mean_spacing{};
    NoiseStats noise;
    std::optional<DiameterStats> diameters;
    std::size_t volume_count = 0;
};

DomainGapReport domain_gap_report(const DatasetSummary& source, const DatasetSummary& target);

struct GapConfig {
    IntensityWindow window;
    std::size_t patch_edge = 20;
    std::size_t workers = 1;
};

// Dataset-level statistics. Intensity accumulators merge exactly; spacing and
// noise are means of the per-volume values; diameters pool every ridge sample
// from the volumes that carry a mask.
DatasetSummary summarize_dataset(const std::vector<Volume>& volumes,
                                 const std::vector<std::optional<Mask>>& masks,
                                 const GapConfig& config);

} // namespace shiftlens::gap
