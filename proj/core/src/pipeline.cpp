#include "shiftlens/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "shiftlens/io.hpp"
#include "shiftlens/parallel.hpp"

namespace shiftlens::pipeline {
namespace {

using nlohmann::json;

const std::string kHeatmapSuffix = ".heatmap.npy";
const std::string kMaskSuffix = "_mask.npy";

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void require_dir(const fs::path& dir, const std::string& what) {
    if (!fs::is_directory(dir)) fail(ErrorKind::Io, what + " directory not found: " + dir.string());
}

// id -> path for every file in `dir` named <id><suffix>.
std::map<std::string, fs::path> index_by_suffix(const fs::path& dir, const std::string& suffix,
                                                const std::string& exclude_suffix = {}) {
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (!ends_with(name, suffix) || name.size() == suffix.size()) continue;
        if (!exclude_suffix.empty() && ends_with(name, exclude_suffix)) continue;
        out.emplace(name.substr(0, name.size() - suffix.size()), entry.path());
    }
    return out;
}

[[noreturn]] void rethrow_for_slice(const Error& e, const std::string& slice_id) {
    throw Error(e.kind(), "slice '" + slice_id + "': " + e.what());
}

// Every id must appear in each index; reports the first gap in id order.
void check_pairing(const std::vector<std::pair<std::string, const std::map<std::string, fs::path>*>>&
                       sets) {
    std::set<std::string> all;
    for (const auto& [name, index] : sets) {
        for (const auto& [id, path] : *index) all.insert(id);
    }
    for (const auto& id : all) {
        for (const auto& [name, index] : sets) {
            if (!index->contains(id)) {
                fail(ErrorKind::Pairing, "slice '" + id + "' has no " + name + " file");
            }
        }
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

template <typename T>
void read_key(const json& doc, const char* key, T& out) {
    if (doc.contains(key)) out = doc.at(key).get<T>();
}

Mask slice_of(const Mask& volume, std::size_t k, MaskRole role) {
    const auto& g = volume.data();
    ByteGrid out({g.dim(0), g.dim(1)}, 0);
    for (std::size_t i = 0; i < g.dim(0); ++i) {
        for (std::size_t j = 0; j < g.dim(1); ++j) out.at(i, j) = g.at(i, j, k);
    }
    return Mask(std::move(out), role);
}

Mask disc_mask(std::size_t size, double ci, double cj, double r) {
    ByteGrid g({size, size}, 0);
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
            g.at(i, j) = di * di + dj * dj <= r * r;
        }
    }
    return Mask(std::move(g), MaskRole::GroundTruth);
}

} // namespace

void RunConfig::validate() const {
    align::ThresholdSpec spec(taus);
    if (std::find(taus.begin(), taus.end(), primary_tau) == taus.end()) {
        fail(ErrorKind::Validation, fmt::format("primary threshold {} is not in the threshold set",
                                                primary_tau));
    }
    cuts.validate();
    saliency::LayerSet layer_set(layers);
    if (method.pool.window == 0) fail(ErrorKind::Validation, "pool window must be >= 1");
    if (!(window.lo < window.hi)) fail(ErrorKind::Validation, "intensity window must have lo < hi");
    if (patch_edge == 0) fail(ErrorKind::Validation, "patch edge must be >= 1");
    if (workers == 0) fail(ErrorKind::Validation, "worker count must be >= 1");
}

RunConfig config_from_json(const json& doc, RunConfig c) {
    static const std::set<std::string> known{
        "source_dir", "target_dir", "source_label", "target_label", "manifest_glob",
        "method",     "pool_window", "layers",      "thresholds",   "primary_tau",
        "taxonomy",   "intensity_window", "patch_edge", "output_dir", "workers",
        "seed",       "per_layer"};
    if (!doc.is_object()) fail(ErrorKind::Validation, "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) fail(ErrorKind::Validation, "unknown config key '" + key + "'");
    }
    try {
        if (doc.contains("source_dir")) c.source_dir = doc["source_dir"].get<std::string>();
        if (doc.contains("target_dir")) c.target_dir = doc["target_dir"].get<std::string>();
        read_key(doc, "source_label", c.source_label);
        read_key(doc, "target_label", c.target_label);
        read_key(doc, "manifest_glob", c.manifest_glob);
        if (doc.contains("method")) c.method.method = saliency::parse_method(doc["method"].get<std::string>());
        read_key(doc, "pool_window", c.method.pool.window);
        read_key(doc, "layers", c.layers);
        read_key(doc, "thresholds", c.taus);
        read_key(doc, "primary_tau", c.primary_tau);
        if (doc.contains("taxonomy")) {
            const auto& t = doc["taxonomy"];
            read_key(t, "perfect", c.cuts.perfect);
            read_key(t, "good", c.cuts.good);
            read_key(t, "bad", c.cuts.bad);
            read_key(t, "dice_cut", c.cuts.dice_cut);
            read_key(t, "f1_cut", c.cuts.f1_cut);
        }
        if (doc.contains("intensity_window")) {
            const auto w = doc["intensity_window"].get<std::array<double, 2>>();
            c.window = {w[0], w[1]};
        }
        read_key(doc, "patch_edge", c.patch_edge);
        if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
        read_key(doc, "workers", c.workers);
        read_key(doc, "seed", c.seed);
        read_key(doc, "per_layer", c.per_layer);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, path.string() + ": " + e.what());
    }
    return config_from_json(doc, std::move(base));
}

json provenance_config(const RunConfig& c) {
    return {{"method", saliency::to_string(c.method.method)},
            {"pool_window", c.method.pool.window},
            {"layers", c.layers},
            {"thresholds", c.taus},
            {"primary_tau", c.primary_tau},
            {"taxonomy",
             {{"perfect", c.cuts.perfect},
              {"good", c.cuts.good},
              {"bad", c.cuts.bad},
              {"dice_cut", c.cuts.dice_cut},
              {"f1_cut", c.cuts.f1_cut}}},
            {"intensity_window", {c.window.lo, c.window.hi}},
            {"patch_edge", c.patch_edge},
            {"seed", c.seed}};
}

std::vector<fs::path> glob_files(const fs::path& dir, const std::string& pattern) {
    require_dir(dir, "input");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() &&
            fnmatch(pattern.c_str(), entry.path().filename().c_str(), 0) == 0) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

gap::DatasetSummary load_dataset_summary(const fs::path& dir, const RunConfig& config) {
    require_dir(dir, "dataset");
    const auto files = index_by_suffix(dir, ".npy", kMaskSuffix);
    if (files.empty()) fail(ErrorKind::EmptyInput, "no volumes in " + dir.string());

    std::vector<std::string> missing;
    for (const auto& [id, path] : files) {
        if (!fs::exists(dir / (id + ".json"))) missing.push_back(path.filename().string());
    }
    if (!missing.empty()) {
        fail(ErrorKind::Sidecar, fmt::format("{}: volumes without a .json sidecar: {}",
                                             dir.string(), fmt::join(missing, ", ")));
    }

    std::vector<std::pair<std::string, fs::path>> items(files.begin(), files.end());
    struct Loaded {
        Volume volume;
        std::optional<Mask> mask;
    };
    auto loaded = parallel_map(items.size(), config.workers, [&](std::size_t i) {
        const auto& [id, path] = items[i];
        Volume v = load_volume(path, dir / (id + ".json"));
        std::optional<Mask> m;
        const auto mask_path = dir / (id + kMaskSuffix);
        if (fs::exists(mask_path)) m = load_mask(mask_path, MaskRole::GroundTruth);
        return Loaded{std::move(v), std::move(m)};
    });
    std::vector<Volume> volumes;
    std::vector<std::optional<Mask>> masks;
    for (auto& l : loaded) {
        volumes.push_back(std::move(l.volume));
        masks.push_back(std::move(l.mask));
    }
    return gap::summarize_dataset(volumes, masks,
                                  gap::GapConfig{config.window, config.patch_edge, config.workers});
}

report::RunReport cmd_domain_gap(const fs::path& source_dir, const fs::path& target_dir,
                                 const RunConfig& config) {
    config.validate();
    const auto source = load_dataset_summary(source_dir, config);
    const auto target = load_dataset_summary(target_dir, config);
    report::RunReport r;
    r.domain_gap = report::DomainGapSection{config.source_label, config.target_label,
                                            gap::domain_gap_report(source, target)};
    r.provenance.config = provenance_config(config);
    r.provenance.seeds = {config.seed};
    write_report(r, config.output_dir);
    return r;
}

std::vector<std::string> cmd_saliency(const std::vector<fs::path>& manifests,
                                      const RunConfig& config) {
    config.validate();
    if (manifests.empty()) fail(ErrorKind::EmptyInput, "no manifests given");
    const saliency::LayerSet layers(config.layers);
    fs::create_directories(config.output_dir);

    // Load first so duplicate slice ids are caught before anything is written.
    auto loaded = parallel_map(manifests.size(), config.workers, [&](std::size_t i) {
        try {
            return load_manifest(manifests[i]);
        } catch (const Error& e) {
            throw Error(e.kind(), manifests[i].string() + ": " + e.what());
        }
    });
    std::set<std::string> seen;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        if (!seen.insert(loaded[i].slice_id).second) {
            fail(ErrorKind::Manifest, manifests[i].string() + ": duplicate slice id '" +
                                          loaded[i].slice_id + "'");
        }
    }

    return parallel_map(loaded.size(), config.workers, [&](std::size_t i) {
        const auto result =
            saliency::compute_pipeline(loaded[i], config.method, layers, config.per_layer);
        saliency::write_slice(config.output_dir, result, config.method, layers);
        return result.slice_id;
    });
}

report::DomainEvaluation evaluate_domain(const DomainInputs& in, const RunConfig& config) {
    config.validate();
    require_dir(in.heatmap_dir, "heatmap");
    require_dir(in.pred_dir, "prediction mask");
    const auto heatmaps = index_by_suffix(in.heatmap_dir, kHeatmapSuffix);
    const auto preds = index_by_suffix(in.pred_dir, ".npy");
    std::map<std::string, fs::path> gts;
    if (in.gt_dir) {
        require_dir(*in.gt_dir, "ground-truth mask");
        gts = index_by_suffix(*in.gt_dir, ".npy");
    }
    std::vector<std::pair<std::string, const std::map<std::string, fs::path>*>> sets{
        {"heatmap", &heatmaps}, {"prediction mask", &preds}};
    if (in.gt_dir) sets.emplace_back("ground-truth mask", &gts);
    check_pairing(sets);
    if (heatmaps.empty()) fail(ErrorKind::EmptyInput, "no heatmaps in " + in.heatmap_dir.string());

    std::vector<std::string> ids;
    for (const auto& [id, path] : heatmaps) ids.push_back(id);
    const align::ThresholdSpec taus(config.taus);

    struct SliceResult {
        align::SliceScores scores;
        std::optional<taxonomy::SliceRecord> record;
        Mask pred;
        std::optional<Mask> gt;
    };
    auto results = parallel_map(ids.size(), config.workers, [&](std::size_t i) {
        const auto& id = ids[i];
        try {
            const Heatmap h = load_heatmap(heatmaps.at(id), id);
            Mask pred = load_mask(preds.at(id), MaskRole::Prediction);
            std::optional<Mask> gt;
            if (in.gt_dir) gt = load_mask(gts.at(id), MaskRole::GroundTruth);
            auto scores = align::score_slice(h, gt ? &*gt : nullptr, pred, taus, id);
            std::optional<taxonomy::SliceRecord> record;
            if (gt) {
                const auto* row = scores.find(config.primary_tau, align::Target::GroundTruth);
                record = taxonomy::make_record(id, pred, *gt, row->metrics.f1, config.cuts);
            }
            return SliceResult{std::move(scores), std::move(record), std::move(pred), std::move(gt)};
        } catch (const Error& e) {
            rethrow_for_slice(e, id);
        }
    });

    report::DomainEvaluation ev;
    ev.label = in.label;
    ev.taus = config.taus;
    ev.primary_tau = config.primary_tau;
    std::vector<Mask> pred_masks, gt_masks;
    for (auto& r : results) {
        ev.slice_scores.push_back(std::move(r.scores));
        if (r.record) ev.slice_records.push_back(std::move(*r.record));
        if (r.gt) {
            pred_masks.push_back(std::move(r.pred));
            gt_masks.push_back(std::move(*r.gt));
        }
    }
    ev.alignment = align::aggregate_scores(ev.slice_scores);
    if (in.gt_dir) {
        ev.taxonomy = taxonomy::distribution(ev.slice_records, config.cuts);
        ev.segmentation = taxonomy::volume_dice(pred_masks, gt_masks);
    }
    return ev;
}

report::RunReport cmd_evaluate(const std::vector<DomainInputs>& domains, const RunConfig& config) {
    config.validate();
    if (domains.empty()) fail(ErrorKind::EmptyInput, "no domains to evaluate");
    report::RunReport r;
    for (const auto& d : domains) r.evaluations.push_back(evaluate_domain(d, config));
    report::fill_segmentation_drops(r.evaluations);
    r.provenance.config = provenance_config(config);
    r.provenance.seeds = {config.seed};
    write_report(r, config.output_dir);
    return r;
}

report::DomainEvaluation evaluate_masks(const std::string& label, const fs::path& gt_dir,
                                        const fs::path& pred_dir, const RunConfig& config) {
    config.validate();
    require_dir(gt_dir, "ground-truth mask");
    require_dir(pred_dir, "prediction mask");
    const auto gts = index_by_suffix(gt_dir, ".npy");
    const auto preds = index_by_suffix(pred_dir, ".npy");
    check_pairing({{"ground-truth mask", &gts}, {"prediction mask", &preds}});
    if (gts.empty()) fail(ErrorKind::EmptyInput, "no masks in " + gt_dir.string());

    std::vector<std::string> ids;
    for (const auto& [id, path] : gts) ids.push_back(id);
    struct CaseResult {
        Mask pred;
        Mask gt;
        std::vector<taxonomy::SliceRecord> records;
    };
    auto cases = parallel_map(ids.size(), config.workers, [&](std::size_t i) {
        const auto& id = ids[i];
        try {
            Mask pred = load_mask(preds.at(id), MaskRole::Prediction);
            Mask gt = load_mask(gts.at(id), MaskRole::GroundTruth);
            require_same_shape(pred.shape(), gt.shape(), "prediction vs ground truth");
            std::vector<taxonomy::SliceRecord> records;
            if (gt.data().rank() == 2) {
                records.push_back(taxonomy::make_record(id, pred, gt, std::nullopt, config.cuts));
            } else if (gt.data().rank() == 3) {
                for (std::size_t k = 0; k < gt.data().dim(2); ++k) {
                    records.push_back(taxonomy::make_record(
                        fmt::format("{}_{:04}", id, k), slice_of(pred, k, MaskRole::Prediction),
                        slice_of(gt, k, MaskRole::GroundTruth), std::nullopt, config.cuts));
                }
            } else {
                fail(ErrorKind::Shape, "masks must be 2D or 3D, got " + shape_string(gt.shape()));
            }
            return CaseResult{std::move(pred), std::move(gt), std::move(records)};
        } catch (const Error& e) {
            rethrow_for_slice(e, id);
        }
    });

    report::DomainEvaluation ev;
    ev.label = label;
    ev.taus = config.taus;
    ev.primary_tau = config.primary_tau;
    std::vector<Mask> pred_masks, gt_masks;
    for (auto& c : cases) {
        for (auto& rec : c.records) ev.slice_records.push_back(std::move(rec));
        pred_masks.push_back(std::move(c.pred));
        gt_masks.push_back(std::move(c.gt));
    }
    ev.taxonomy = taxonomy::distribution(ev.slice_records, config.cuts);
    ev.segmentation = taxonomy::volume_dice(pred_masks, gt_masks);
    return ev;
}

report::RunReport cmd_taxonomy(const std::vector<std::pair<fs::path, fs::path>>& mask_dirs,
                               const std::vector<std::string>& labels, const RunConfig& config) {
    if (mask_dirs.empty()) fail(ErrorKind::EmptyInput, "no mask directories given");
    if (labels.size() != mask_dirs.size()) {
        fail(ErrorKind::Validation, "one label is needed per mask directory pair");
    }
    report::RunReport r;
    for (std::size_t i = 0; i < mask_dirs.size(); ++i) {
        r.evaluations.push_back(
            evaluate_masks(labels[i], mask_dirs[i].first, mask_dirs[i].second, config));
    }
    report::fill_segmentation_drops(r.evaluations);
    r.provenance.config = provenance_config(config);
    r.provenance.seeds = {config.seed};
    write_report(r, config.output_dir);
    return r;
}

void write_report(const report::RunReport& r, const fs::path& dir) {
    const auto sections = report::available_sections(r);
    report::render(r, report::Format::Json, dir, sections);
    report::render(r, report::Format::Markdown, dir, sections);
    report::render(r, report::Format::CsvBundle, dir, sections);
}

phantom::PhantomSpec phantom_spec_from_json(const json& doc) {
    phantom::PhantomSpec s;
    try {
        read_key(doc, "shape", s.shape);
        read_key(doc, "spacing_mm", s.spacing_mm);
        read_key(doc, "background_hu", s.background_hu);
        read_key(doc, "tissue_hu", s.tissue_hu);
        read_key(doc, "vessel_hu", s.vessel_hu);
        if (doc.contains("tissue_radius_mm") && !doc["tissue_radius_mm"].is_null()) {
            s.tissue_radius_mm = doc["tissue_radius_mm"].get<double>();
        }
        read_key(doc, "noise_std", s.noise_std);
        read_key(doc, "seed", s.seed);
        read_key(doc, "id", s.id);
        if (doc.contains("vessels")) {
            for (const auto& v : doc["vessels"]) {
                phantom::Cylinder c;
                read_key(v, "axis", c.axis);
                read_key(v, "center_mm", c.center_mm);
                read_key(v, "radius_mm", c.radius_mm);
                read_key(v, "length_mm", c.length_mm);
                s.vessels.push_back(c);
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

json to_json(const phantom::PhantomSpec& s) {
    json vessels = json::array();
    for (const auto& c : s.vessels) {
        vessels.push_back({{"axis", c.axis},
                           {"center_mm", c.center_mm},
                           {"radius_mm", c.radius_mm},
                           {"length_mm", c.length_mm}});
    }
    return {{"shape", s.shape},
            {"spacing_mm", s.spacing_mm},
            {"background_hu", s.background_hu},
            {"tissue_hu", s.tissue_hu},
            {"vessel_hu", s.vessel_hu},
            {"tissue_radius_mm", s.tissue_radius_mm ? json(*s.tissue_radius_mm) : json(nullptr)},
            {"noise_std", s.noise_std},
            {"vessels", vessels},
            {"seed", s.seed},
            {"id", s.id}};
}

void write_phantom(const fs::path& dir, const phantom::PhantomSpec& spec) {
    const auto [volume, mask] = phantom::generate_phantom(spec);
    fs::create_directories(dir);
    save_volume(dir / (spec.id + ".npy"), dir / (spec.id + ".json"), volume);
    save_mask(dir / (spec.id + kMaskSuffix), mask);
    write_text(dir / (spec.id + ".spec.json"), to_json(spec).dump(2) + "\n");
}

CorpusSpec default_corpus() {
    CorpusSpec c;
    c.domains = {{"source", 0.457, 1.114, 2.37, 0.4671, 0.5220},
                 {"target", 0.452, 0.715, 7.96, 0.1018, 0.2823}};
    return c;
}

void write_corpus(const fs::path& dir, const CorpusSpec& spec) {
    if (spec.domains.empty()) fail(ErrorKind::Validation, "corpus needs at least one domain");
    if (spec.slice_size < 16) fail(ErrorKind::Validation, "corpus slices must be at least 16 px");
    phantom::Rng rng(spec.seed);
    for (const auto& d : spec.domains) {
        const fs::path root = dir / d.label;
        for (std::size_t v = 0; v < spec.volumes; ++v) {
            phantom::PhantomSpec p;
            p.spacing_mm = {d.spacing_xy_mm, d.spacing_xy_mm, d.spacing_z_mm};
            p.noise_std = d.noise_std;
            p.seed = rng.next();
            p.id = fmt::format("{}_{:03}", d.label, v);
            const double zext = static_cast<double>(p.shape[2] - 1) * d.spacing_z_mm;
            const double mid = static_cast<double>(p.shape[0] - 1) * d.spacing_xy_mm / 2.0;
            p.vessels = {{2, {mid - 3.0, mid, zext / 2.0}, 1.2, zext},
                         {2, {mid + 3.0, mid + 1.0, zext / 2.0}, 0.8, zext}};
            write_phantom(root / "volumes", p);
        }

        fs::create_directories(root / "gt");
        fs::create_directories(root / "pred");
        fs::create_directories(root / "heatmaps");
        const double n = static_cast<double>(spec.slice_size);
        for (std::size_t s = 0; s < spec.slices; ++s) {
            const std::string id = fmt::format("{}_s{:03}", d.label, s);
            const double r = n * (0.15 + 0.1 * rng.uniform());
            const double ci = n / 2.0 + (rng.uniform() - 0.5) * n * 0.2;
            const double cj = n / 2.0 + (rng.uniform() - 0.5) * n * 0.2;
            const Mask gt = disc_mask(spec.slice_size, ci, cj, r);
            const Heatmap h = phantom::generate_attention({gt, d.iou_gt, spec.tau, rng.next()});
            const Mask attention = align::binarize(h, spec.tau);
            const Heatmap ph =
                phantom::generate_attention({attention, d.iou_pm, spec.tau, rng.next()});
            const Mask pred(align::binarize(ph, spec.tau).data(), MaskRole::Prediction);
            save_mask(root / "gt" / (id + ".npy"), gt);
            save_mask(root / "pred" / (id + ".npy"), pred);
            save_heatmap(root / "heatmaps" / (id + kHeatmapSuffix), h);
        }
    }
}

} // namespace shiftlens::pipeline
