#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shiftlens/types.hpp"

namespace shiftlens::align {

// Strictly increasing thresholds in (0, 1).
class ThresholdSpec {
public:
    ThresholdSpec();  // {0.2, 0.3, 0.4}
    explicit ThresholdSpec(std::vector<double> taus);

    const std::vector<double>& taus() const noexcept { return taus_; }

private:
    std::vector<double> taus_;
};

// Pixel is set iff h >= tau.
Mask binarize(const Heatmap& heatmap, double tau);

struct OverlapCounts {
    std::uint64_t attention = 0;     // |A|
    std::uint64_t reference = 0;     // |M|
    std::uint64_t intersection = 0;  // |A ∩ M|
    std::uint64_t union_ = 0;        // |A ∪ M|

    OverlapCounts& operator+=(const OverlapCounts& o) noexcept;
    friend bool operator==(const OverlapCounts&, const OverlapCounts&) = default;
};

OverlapCounts count_overlap(const Mask& attention, const Mask& reference);

// Empty-set conventions: both empty -> every metric is 1; exactly one empty
// -> every metric is 0. Either case is flagged.
struct Metrics {
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_attention = false;
    bool empty_reference = false;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics metrics_from_counts(const OverlapCounts& counts);

double iou(const Mask& a, const Mask& b);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_attention = false;
    bool empty_reference = false;
};

PrecisionRecallF1 precision_recall_f1(const Mask& attention, const Mask& reference);

enum class Target { GroundTruth, Prediction };

std::string_view to_string(Target target) noexcept;

struct AlignmentScores {
    double tau = 0.0;
    Target target = Target::GroundTruth;
    Metrics metrics;
    OverlapCounts counts;

    friend bool operator==(const AlignmentScores&, const AlignmentScores&) = default;
};

// IoU_PM - IoU_GT at one threshold.
struct GapScore {
    double tau = 0.0;
    double gap = 0.0;

    friend bool operator==(const GapScore&, const GapScore&) = default;
};

struct SliceScores {
    std::string slice_id;
    std::vector<AlignmentScores> rows;  // per tau: GT row (if gt given), then PM row
    std::vector<GapScore> gaps;         // empty when gt is absent
    bool ground_truth_missing = false;

    const AlignmentScores* find(double tau, Target target) const;

    friend bool operator==(const SliceScores&, const SliceScores&) = default;
};

SliceScores score_slice(const Heatmap& heatmap, const Mask* ground_truth, const Mask& prediction,
                        const ThresholdSpec& taus, std::string slice_id = {});

struct AggregateRow {
    double tau = 0.0;
    Target target = Target::GroundTruth;
    std::uint64_t slices = 0;
    OverlapCounts pooled;
    Metrics micro;  // metrics of the pooled counts
    Metrics macro;  // mean of per-slice metrics (flags: any slice flagged)

    friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct AggregateGap {
    double tau = 0.0;
    double micro = 0.0;
    double macro = 0.0;

    friend bool operator==(const AggregateGap&, const AggregateGap&) = default;
};

struct AlignmentTable {
    std::vector<AggregateRow> rows;  // ordered by tau, GT before PM
    std::vector<AggregateGap> gaps;

    const AggregateRow* find(double tau, Target target) const;
    const AggregateGap* find_gap(double tau) const;

    friend bool operator==(const AlignmentTable&, const AlignmentTable&) = default;
};

AlignmentTable aggregate_scores(std::span<const SliceScores> slices);

} // namespace shiftlens::align
