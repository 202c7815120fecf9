#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftlens/alignment.hpp"
#include "shiftlens/domain_gap.hpp"
#include "shiftlens/phantom.hpp"
#include "shiftlens/report.hpp"
#include "shiftlens/saliency.hpp"
#include "shiftlens/taxonomy.hpp"

// The commands behind each CLI subcommand, usable without the CLI.
namespace shiftlens::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
    std::optional<fs::path> source_dir;
    std::optional<fs::path> target_dir;
    std::string source_label = "source";
    std::string target_label = "target";
    std::string manifest_glob = "*.manifest.json";
    saliency::MethodSpec method;
    std::vector<std::string> layers = saliency::default_layer_set().names();
    std::vector<double> taus{0.2, 0.3, 0.4};
    double primary_tau = 0.3;
    taxonomy::Thresholds cuts;
    gap::IntensityWindow window;
    std::size_t patch_edge = 20;
    fs::path output_dir = "out";
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    bool per_layer = false;

    void validate() const;
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base = {});
RunConfig load_config(const fs::path& path, RunConfig base = {});
// Everything that influences results. Worker count and output location are
// left out so they cannot change report bytes.
nlohmann::json provenance_config(const RunConfig& config);

// Files in `dir` whose names match the shell pattern, sorted by name.
std::vector<fs::path> glob_files(const fs::path& dir, const std::string& pattern);

// Directory layout: <id>.npy with an <id>.json sidecar and an optional
// <id>_mask.npy vessel mask.
gap::DatasetSummary load_dataset_summary(const fs::path& dir, const RunConfig& config);

report::RunReport cmd_domain_gap(const fs::path& source_dir, const fs::path& target_dir,
                                 const RunConfig& config);

// Returns the slice ids written, in manifest order. Failures carry the
// manifest path and slice id.
std::vector<std::string> cmd_saliency(const std::vector<fs::path>& manifests,
                                      const RunConfig& config);

struct DomainInputs {
    std::string label;
    fs::path heatmap_dir;                // <id>.heatmap.npy
    std::optional<fs::path> gt_dir;      // <id>.npy
    fs::path pred_dir;                   // <id>.npy
};

report::DomainEvaluation evaluate_domain(const DomainInputs& inputs, const RunConfig& config);

report::RunReport cmd_evaluate(const std::vector<DomainInputs>& domains, const RunConfig& config);

// Segmentation-only taxonomy from <id>.npy mask pairs. 3D masks are split
// along axis 2 into slices named <id>_<k>; Dice for the summary is pooled over
// whole volumes.
report::DomainEvaluation evaluate_masks(const std::string& label, const fs::path& gt_dir,
                                        const fs::path& pred_dir, const RunConfig& config);

report::RunReport cmd_taxonomy(const std::vector<std::pair<fs::path, fs::path>>& mask_dirs,
                               const std::vector<std::string>& labels, const RunConfig& config);

// Writes the report as JSON, Markdown and the CSV bundle under output_dir.
void write_report(const report::RunReport& report, const fs::path& dir);

phantom::PhantomSpec phantom_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const phantom::PhantomSpec& spec);

// <dir>/<id>.npy, <id>.json sidecar, <id>_mask.npy and <id>.spec.json.
void write_phantom(const fs::path& dir, const phantom::PhantomSpec& spec);

struct DomainTargets {
    std::string label;
    double spacing_xy_mm = 0.5;
    double spacing_z_mm = 1.0;
    double noise_std = 5.0;
    double iou_gt = 0.5;
    double iou_pm = 0.5;
};

struct CorpusSpec {
    std::vector<DomainTargets> domains;
    std::size_t volumes = 2;
    std::size_t slices = 12;
    std::size_t slice_size = 32;
    double tau = 0.3;
    std::uint64_t seed = 0;
};

// Defaults: a high-resolution, low-noise source and a noisier target.
CorpusSpec default_corpus();

// For each domain: volumes/ (domain-gap input) and gt/, pred/, heatmaps/
// (evaluate input). Heatmaps are built so that the binarized attention meets
// the ground truth at iou_gt; prediction masks meet the attention at iou_pm.
void write_corpus(const fs::path& dir, const CorpusSpec& spec);

} // namespace shiftlens::pipeline
