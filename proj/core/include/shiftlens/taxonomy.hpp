#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlens/types.hpp"

namespace shiftlens::taxonomy {

enum class Category { Perfect, Good, Bad, Worst, TrueNegative };
enum class Quadrant { GoodDiceGoodXai, GoodDiceBadXai, BadDiceGoodXai, BadDiceBadXai };

inline constexpr std::array<Category, 5> kCategories{Category::Perfect, Category::Good,
                                                      Category::Bad, Category::Worst,
                                                      Category::TrueNegative};
inline constexpr std::array<Quadrant, 4> kQuadrants{
    Quadrant::GoodDiceGoodXai, Quadrant::GoodDiceBadXai, Quadrant::BadDiceGoodXai,
    Quadrant::BadDiceBadXai};

std::string_view to_string(Category c) noexcept;
std::string_view to_string(Quadrant q) noexcept;
Category parse_category(std::string_view text);
Quadrant parse_quadrant(std::string_view text);

// Slice bins: Perfect > perfect; Good in (good, perfect]; Bad in (bad, good];
// Worst <= bad. The joint cuts are inclusive lower bounds.
struct Thresholds {
    double perfect = 0.85;
    double good = 0.65;
    double bad = 0.4;
    double dice_cut = 0.5;
    double f1_cut = 0.3;

    void validate() const;
    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct DiceCounts {
    std::uint64_t pred = 0;
    std::uint64_t gt = 0;
    std::uint64_t intersection = 0;

    DiceCounts& operator+=(const DiceCounts& o) noexcept;
    double dice() const noexcept;  // 1.0 when both are empty
};

DiceCounts dice_counts(const Mask& pred, const Mask& gt);
double dice(const Mask& pred, const Mask& gt);

Category classify_slice(double dice, std::uint64_t gt_count, std::uint64_t pred_count,
                        const Thresholds& thresholds = {});

Quadrant joint_classify(double dice, double xai_f1, double dice_cut, double f1_cut);

struct SliceRecord {
    std::string slice_id;
    std::optional<double> dice;    // absent on true-negative slices
    std::optional<double> xai_f1;  // F1 of attention vs ground truth at the primary threshold
    std::uint64_t gt_count = 0;
    std::uint64_t pred_count = 0;
    Category category = Category::TrueNegative;
    std::optional<Quadrant> quadrant;  // only for slices with ground-truth vessels and an F1

    friend bool operator==(const SliceRecord&, const SliceRecord&) = default;
};

SliceRecord make_record(std::string slice_id, const Mask& pred, const Mask& gt,
                        std::optional<double> xai_f1, const Thresholds& thresholds = {});

struct GroupStats {
    std::uint64_t count = 0;
    double percent = 0.0;
    std::optional<double> mean_dice;
    std::optional<double> mean_f1;

    friend bool operator==(const GroupStats&, const GroupStats&) = default;
};

struct Distribution {
    std::uint64_t total = 0;
    std::array<GroupStats, 5> categories{};  // kCategories order
    std::uint64_t vessel_slices = 0;         // records carrying a quadrant
    std::array<GroupStats, 4> quadrants{};   // kQuadrants order, % of vessel_slices
    Thresholds thresholds;

    friend bool operator==(const Distribution&, const Distribution&) = default;
};

Distribution distribution(std::span<const SliceRecord> records, const Thresholds& thresholds = {});

double percent_drop(double baseline, double value);

struct SegmentationSummary {
    double pooled_dice = 0.0;     // counts pooled over every voxel
    double case_mean_dice = 0.0;  // mean of per-case Dice
    std::uint64_t cases = 0;
    std::optional<double> baseline_dice;
    std::optional<double> drop_percent;  // (1 - pooled / baseline) * 100

    friend bool operator==(const SegmentationSummary&, const SegmentationSummary&) = default;
};

SegmentationSummary volume_dice(std::span<const Mask> preds, std::span<const Mask> gts,
                                std::optional<double> baseline = std::nullopt);

} // namespace shiftlens::taxonomy
