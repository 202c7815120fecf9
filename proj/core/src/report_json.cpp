// JSON mapping for every report type. Keys mirror the struct fields.

#include <optional>

#include <nlohmann/json.hpp>

#include "shiftlens/report.hpp"

namespace nlohmann {
template <typename T>
struct adl_serializer<std::optional<T>> {
    static void to_json(json& j, const std::optional<T>& v) {
        if (v) {
            j = *v;
        } else {
            j = nullptr;
        }
    }
    static void from_json(const json& j, std::optional<T>& v) {
        if (j.is_null()) {
            v.reset();
        } else {
            v = j.get<T>();
        }
    }
};
} // namespace nlohmann

namespace shiftlens::gap {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IntensityStats, window_lo, window_hi, mean, std, voxel_count)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ResolutionDelta, source, target, percent_difference)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PatchNoise, high_corner, air_voxels, std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NoiseStats, noise_std, method, patches)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DiameterStats, mean, median, std, min, max, p99, sample_count)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DomainGapReport, source_intensity, target_intensity,
                                   resolution, source_noise, target_noise, noise_ratio,
                                   source_diameters, target_diameters)

} // namespace shiftlens::gap

namespace shiftlens::align {

NLOHMANN_JSON_SERIALIZE_ENUM(Target, {{Target::GroundTruth, "GT"}, {Target::Prediction, "PM"}})

void to_json(nlohmann::json& j, const OverlapCounts& c) {
    j = {{"attention", c.attention},
         {"reference", c.reference},
         {"intersection", c.intersection},
         {"union", c.union_}};
}

void from_json(const nlohmann::json& j, OverlapCounts& c) {
    j.at("attention").get_to(c.attention);
    j.at("reference").get_to(c.reference);
    j.at("intersection").get_to(c.intersection);
    j.at("union").get_to(c.union_);
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Metrics, iou, precision, recall, f1, empty_attention,
                                   empty_reference)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AlignmentScores, tau, target, metrics, counts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GapScore, tau, gap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SliceScores, slice_id, rows, gaps, ground_truth_missing)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AggregateRow, tau, target, slices, pooled, micro, macro)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AggregateGap, tau, micro, macro)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AlignmentTable, rows, gaps)

} // namespace shiftlens::align

namespace shiftlens::taxonomy {

NLOHMANN_JSON_SERIALIZE_ENUM(Category, {{Category::Perfect, "Perfect"},
                                        {Category::Good, "Good"},
                                        {Category::Bad, "Bad"},
                                        {Category::Worst, "Worst"},
                                        {Category::TrueNegative, "TrueNegative"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Quadrant, {{Quadrant::GoodDiceGoodXai, "GG"},
                                        {Quadrant::GoodDiceBadXai, "GB"},
                                        {Quadrant::BadDiceGoodXai, "BG"},
                                        {Quadrant::BadDiceBadXai, "BB"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Thresholds, perfect, good, bad, dice_cut, f1_cut)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SliceRecord, slice_id, dice, xai_f1, gt_count, pred_count,
                                   category, quadrant)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GroupStats, count, percent, mean_dice, mean_f1)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Distribution, total, categories, vessel_slices, quadrants,
                                   thresholds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SegmentationSummary, pooled_dice, case_mean_dice, cases,
                                   baseline_dice, drop_percent)

} // namespace shiftlens::taxonomy

namespace shiftlens::report {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Provenance, tool_version, config, seeds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DomainGapSection, source_label, target_label, report)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DomainEvaluation, label, taus, primary_tau, alignment, taxonomy,
                                   segmentation, slice_scores, slice_records)

nlohmann::json to_json(const RunReport& report) {
    nlohmann::json j;
    j["domain_gap"] = report.domain_gap;
    j["evaluations"] = report.evaluations;
    j["provenance"] = report.provenance;
    return j;
}

RunReport from_json(const nlohmann::json& doc) {
    RunReport r;
    try {
        doc.at("domain_gap").get_to(r.domain_gap);
        doc.at("evaluations").get_to(r.evaluations);
        doc.at("provenance").get_to(r.provenance);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("report JSON: ") + e.what());
    }
    return r;
}

} // namespace shiftlens::report
