#include "shiftlens/taxonomy.hpp"

namespace shiftlens::taxonomy {

std::string_view to_string(Category c) noexcept {
    switch (c) {
        case Category::Perfect: return "Perfect";
        case Category::Good: return "Good";
        case Category::Bad: return "Bad";
        case Category::Worst: return "Worst";
        case Category::TrueNegative: return "TrueNegative";
    }
    return "";
}

std::string_view to_string(Quadrant q) noexcept {
    switch (q) {
        case Quadrant::GoodDiceGoodXai: return "GG";
        case Quadrant::GoodDiceBadXai: return "GB";
        case Quadrant::BadDiceGoodXai: return "BG";
        case Quadrant::BadDiceBadXai: return "BB";
    }
    return "";
}

Category parse_category(std::string_view text) {
    for (auto c : kCategories) {
        if (to_string(c) == text) return c;
    }
    fail(ErrorKind::Validation, "unknown category '" + std::string(text) + "'");
}

Quadrant parse_quadrant(std::string_view text) {
    for (auto q : kQuadrants) {
        if (to_string(q) == text) return q;
    }
    fail(ErrorKind::Validation, "unknown quadrant '" + std::string(text) + "'");
}

void Thresholds::validate() const {
    if (!(0.0 <= bad && bad < good && good < perfect && perfect <= 1.0)) {
        fail(ErrorKind::Validation, "category cut points must satisfy 0 <= bad < good < perfect <= 1");
    }
    if (!(dice_cut >= 0.0 && dice_cut <= 1.0 && f1_cut >= 0.0 && f1_cut <= 1.0)) {
        fail(ErrorKind::Validation, "joint cuts must lie in [0,1]");
    }
}

DiceCounts& DiceCounts::operator+=(const DiceCounts& o) noexcept {
    pred += o.pred;
    gt += o.gt;
    intersection += o.intersection;
    return *this;
}

double DiceCounts::dice() const noexcept {
    if (pred + gt == 0) return 1.0;
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(pred + gt);
}

DiceCounts dice_counts(const Mask& pred, const Mask& gt) {
    require_same_shape(pred.shape(), gt.shape(), "dice");
    DiceCounts c;
    const auto p = pred.data().values();
    const auto g = gt.data().values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        c.pred += p[i];
        c.gt += g[i];
        c.intersection += p[i] & g[i];
    }
    return c;
}

double dice(const Mask& pred, const Mask& gt) { return dice_counts(pred, gt).dice(); }

Category classify_slice(double dice, std::uint64_t gt_count, std::uint64_t pred_count,
                        const Thresholds& t) {
    if (gt_count == 0) return pred_count == 0 ? Category::TrueNegative : Category::Worst;
    if (dice > t.perfect) return Category::Perfect;
    if (dice > t.good) return Category::Good;
    if (dice > t.bad) return Category::Bad;
    return Category::Worst;
}

Quadrant joint_classify(double dice, double xai_f1, double dice_cut, double f1_cut) {
    const bool good_dice = dice >= dice_cut;
    const bool good_xai = xai_f1 >= f1_cut;
    if (good_dice) return good_xai ? Quadrant::GoodDiceGoodXai : Quadrant::GoodDiceBadXai;
    return good_xai ? Quadrant::BadDiceGoodXai : Quadrant::BadDiceBadXai;
}

SliceRecord make_record(std::string slice_id, const Mask& pred, const Mask& gt,
                        std::optional<double> xai_f1, const Thresholds& thresholds) {
    const auto counts = dice_counts(pred, gt);
    SliceRecord r;
    r.slice_id = std::move(slice_id);
    r.gt_count = counts.gt;
    r.pred_count = counts.pred;
    r.xai_f1 = xai_f1;
    // A false positive on a vessel-free slice scores Dice 0.
    const double d = counts.gt == 0 ? 0.0 : counts.dice();
    r.category = classify_slice(d, counts.gt, counts.pred, thresholds);
    if (r.category != Category::TrueNegative) r.dice = d;
    if (counts.gt > 0 && xai_f1) {
        r.quadrant = joint_classify(d, *xai_f1, thresholds.dice_cut, thresholds.f1_cut);
    }
    return r;
}

Distribution distribution(std::span<const SliceRecord> records, const Thresholds& thresholds) {
    if (records.empty()) fail(ErrorKind::EmptyInput, "no slice records");
    struct Acc {
        std::uint64_t n = 0, n_dice = 0, n_f1 = 0;
        double dice = 0.0, f1 = 0.0;
        void add(const SliceRecord& r) {
            ++n;
            if (r.dice) {
                ++n_dice;
                dice += *r.dice;
            }
            if (r.xai_f1) {
                ++n_f1;
                f1 += *r.xai_f1;
            }
        }
        GroupStats finish(std::uint64_t total) const {
            GroupStats g;
            g.count = n;
            g.percent = total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0;
            if (n_dice) g.mean_dice = dice / static_cast<double>(n_dice);
            if (n_f1) g.mean_f1 = f1 / static_cast<double>(n_f1);
            return g;
        }
    };
    std::array<Acc, 5> cats{};
    std::array<Acc, 4> quads{};
    Distribution out;
    out.thresholds = thresholds;
    out.total = records.size();
    for (const auto& r : records) {
        cats[static_cast<std::size_t>(r.category)].add(r);
        if (r.quadrant) {
            ++out.vessel_slices;
            quads[static_cast<std::size_t>(*r.quadrant)].add(r);
        }
    }
    for (std::size_t i = 0; i < cats.size(); ++i) out.categories[i] = cats[i].finish(out.total);
    for (std::size_t i = 0; i < quads.size(); ++i) {
        out.quadrants[i] = quads[i].finish(out.vessel_slices);
    }
    return out;
}

double percent_drop(double baseline, double value) {
    if (!(baseline > 0.0)) fail(ErrorKind::Validation, "baseline Dice must be positive");
    return (1.0 - value / baseline) * 100.0;
}

SegmentationSummary volume_dice(std::span<const Mask> preds, std::span<const Mask> gts,
                                std::optional<double> baseline) {
    if (preds.size() != gts.size()) {
        fail(ErrorKind::Validation, std::to_string(preds.size()) + " predictions for " +
                                        std::to_string(gts.size()) + " ground truths");
    }
    if (preds.empty()) fail(ErrorKind::EmptyInput, "no volume pairs");
    DiceCounts pooled;
    double case_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto c = dice_counts(preds[i], gts[i]);
        pooled += c;
        case_sum += c.dice();
    }
    SegmentationSummary out;
    out.cases = preds.size();
    out.pooled_dice = pooled.dice();
    out.case_mean_dice = case_sum / static_cast<double>(preds.size());
    if (baseline) {
        out.baseline_dice = baseline;
        out.drop_percent = percent_drop(*baseline, out.pooled_dice);
    }
    return out;
}

} // namespace shiftlens::taxonomy
