#include "shiftlens/alignment.hpp"

#include <algorithm>
#include <map>

namespace shiftlens::align {

ThresholdSpec::ThresholdSpec() : taus_{0.2, 0.3, 0.4} {}

ThresholdSpec::ThresholdSpec(std::vector<double> taus) : taus_(std::move(taus)) {
    if (taus_.empty()) fail(ErrorKind::Validation, "threshold list is empty");
    for (std::size_t i = 0; i < taus_.size(); ++i) {
        if (!(taus_[i] > 0.0 && taus_[i] < 1.0)) {
            fail(ErrorKind::Validation, "threshold " + std::to_string(taus_[i]) + " outside (0,1)");
        }
        if (i && !(taus_[i] > taus_[i - 1])) {
            fail(ErrorKind::Validation, "thresholds must be strictly increasing");
        }
    }
}

Mask binarize(const Heatmap& heatmap, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        fail(ErrorKind::Validation, "threshold " + std::to_string(tau) + " outside (0,1)");
    }
    ByteGrid out(heatmap.shape(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<double>(heatmap.data()[i]) >= tau ? 1 : 0;
    }
    return Mask(std::move(out), MaskRole::BinarizedAttention);
}

OverlapCounts& OverlapCounts::operator+=(const OverlapCounts& o) noexcept {
    attention += o.attention;
    reference += o.reference;
    intersection += o.intersection;
    union_ += o.union_;
    return *this;
}

OverlapCounts count_overlap(const Mask& attention, const Mask& reference) {
    require_same_shape(attention.shape(), reference.shape(), "overlap");
    OverlapCounts c;
    const auto a = attention.data().values();
    const auto m = reference.data().values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        c.attention += a[i];
        c.reference += m[i];
        c.intersection += a[i] & m[i];
        c.union_ += a[i] | m[i];
    }
    return c;
}

Metrics metrics_from_counts(const OverlapCounts& c) {
    Metrics m;
    m.empty_attention = c.attention == 0;
    m.empty_reference = c.reference == 0;
    if (m.empty_attention && m.empty_reference) {
        m.iou = m.precision = m.recall = m.f1 = 1.0;
        return m;
    }
    if (m.empty_attention || m.empty_reference) return m;
    const auto i = static_cast<double>(c.intersection);
    m.iou = i / static_cast<double>(c.union_);
    m.precision = i / static_cast<double>(c.attention);
    m.recall = i / static_cast<double>(c.reference);
    // 2PR / (P + R) reduced to counts, so the value is a single rounding.
    m.f1 = 2.0 * i / static_cast<double>(c.attention + c.reference);
    return m;
}

double iou(const Mask& a, const Mask& b) { return metrics_from_counts(count_overlap(a, b)).iou; }

PrecisionRecallF1 precision_recall_f1(const Mask& attention, const Mask& reference) {
    const auto m = metrics_from_counts(count_overlap(attention, reference));
    return {m.precision, m.recall, m.f1, m.empty_attention, m.empty_reference};
}

std::string_view to_string(Target target) noexcept {
    return target == Target::GroundTruth ? "GT" : "PM";
}

const AlignmentScores* SliceScores::find(double tau, Target target) const {
    for (const auto& r : rows) {
        if (r.tau == tau && r.target == target) return &r;
    }
    return nullptr;
}

SliceScores score_slice(const Heatmap& heatmap, const Mask* ground_truth, const Mask& prediction,
                        const ThresholdSpec& taus, std::string slice_id) {
    require_same_shape(heatmap.shape(), prediction.shape(), "slice '" + slice_id + "' prediction");
    if (ground_truth) {
        require_same_shape(heatmap.shape(), ground_truth->shape(),
                           "slice '" + slice_id + "' ground truth");
    }
    SliceScores out;
    out.slice_id = std::move(slice_id);
    out.ground_truth_missing = ground_truth == nullptr;
    for (double tau : taus.taus()) {
        const Mask attention = binarize(heatmap, tau);
        double gt_iou = 0.0;
        if (ground_truth) {
            const auto counts = count_overlap(attention, *ground_truth);
            out.rows.push_back({tau, Target::GroundTruth, metrics_from_counts(counts), counts});
            gt_iou = out.rows.back().metrics.iou;
        }
        const auto counts = count_overlap(attention, prediction);
        out.rows.push_back({tau, Target::Prediction, metrics_from_counts(counts), counts});
        if (ground_truth) out.gaps.push_back({tau, out.rows.back().metrics.iou - gt_iou});
    }
    return out;
}

const AggregateRow* AlignmentTable::find(double tau, Target target) const {
    for (const auto& r : rows) {
        if (r.tau == tau && r.target == target) return &r;
    }
    return nullptr;
}

const AggregateGap* AlignmentTable::find_gap(double tau) const {
    for (const auto& g : gaps) {
        if (g.tau == tau) return &g;
    }
    return nullptr;
}

AlignmentTable aggregate_scores(std::span<const SliceScores> slices) {
    if (slices.empty()) fail(ErrorKind::EmptyInput, "no slice scores to aggregate");
    struct Acc {
        std::uint64_t n = 0;
        OverlapCounts pooled;
        double iou = 0, precision = 0, recall = 0, f1 = 0;
        bool empty_attention = false, empty_reference = false;
    };
    std::map<std::pair<double, int>, Acc> groups;
    for (const auto& s : slices) {
        for (const auto& r : s.rows) {
            auto& g = groups[{r.tau, static_cast<int>(r.target)}];
            ++g.n;
            g.pooled += r.counts;
            g.iou += r.metrics.iou;
            g.precision += r.metrics.precision;
            g.recall += r.metrics.recall;
            g.f1 += r.metrics.f1;
            g.empty_attention |= r.metrics.empty_attention;
            g.empty_reference |= r.metrics.empty_reference;
        }
    }
    AlignmentTable table;
    for (const auto& [key, g] : groups) {
        AggregateRow row;
        row.tau = key.first;
        row.target = static_cast<Target>(key.second);
        row.slices = g.n;
        row.pooled = g.pooled;
        row.micro = metrics_from_counts(g.pooled);
        const double n = static_cast<double>(g.n);
        row.macro = {g.iou / n, g.precision / n, g.recall / n, g.f1 / n, g.empty_attention,
                     g.empty_reference};
        table.rows.push_back(row);
    }
    for (const auto& row : table.rows) {
        if (row.target != Target::Prediction) continue;
        if (const auto* gt = table.find(row.tau, Target::GroundTruth)) {
            table.gaps.push_back(
                {row.tau, row.micro.iou - gt->micro.iou, row.macro.iou - gt->macro.iou});
        }
    }
    return table;
}

} // namespace shiftlens::align
