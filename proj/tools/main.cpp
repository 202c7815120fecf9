#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "shiftlens/io.hpp"
#include "shiftlens/pipeline.hpp"
#include "shiftlens/report.hpp"

namespace {

namespace fs = std::filesystem;
using namespace shiftlens;
using pipeline::RunConfig;

constexpr const char* kWorkersEnv = "SHIFTLENS_WORKERS";

// Options shared by every analysis subcommand. Values are applied on top of
// the config file only when given on the command line.
struct CommonFlags {
    std::string config_path;
    std::string output_dir;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    std::vector<double> taus;
    double primary_tau = 0.0;
    double dice_cut = 0.0;
    double f1_cut = 0.0;
    std::string method;
    std::size_t pool_window = 0;
    std::vector<std::string> layers;
    bool per_layer = false;

    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* app) {
        opts["config"] = app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        opts["out"] = app->add_option("-o,--out", output_dir, "Output directory");
        opts["workers"] = app->add_option("-j,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
        opts["seed"] = app->add_option("--seed", seed, "Seed recorded in provenance");
        opts["thresholds"] = app->add_option("--thresholds", taus, "Binarization thresholds")->delimiter(',');
        opts["primary"] = app->add_option("--primary-tau", primary_tau, "Primary threshold");
        opts["dice_cut"] = app->add_option("--dice-cut", dice_cut, "Joint analysis Dice cut");
        opts["f1_cut"] = app->add_option("--f1-cut", f1_cut, "Joint analysis XAI F1 cut");
        opts["method"] = app->add_option("--method", method, "segxrescam or seg-gradcam");
        opts["pool"] = app->add_option("--pool-window", pool_window, "Gradient max-pool window");
        opts["layers"] = app->add_option("--layers", layers, "Layer set")->delimiter(',');
        opts["per_layer"] = app->add_flag("--per-layer", per_layer, "Also write per-layer maps");
    }

    bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

    RunConfig resolve() const {
        RunConfig c;
        if (given("config")) c = pipeline::load_config(config_path);
        if (const char* env = std::getenv(kWorkersEnv); env && *env) {
            try {
                const long n = std::stol(env);
                if (n < 1) throw std::invalid_argument(env);
                c.workers = static_cast<std::size_t>(n);
            } catch (const std::exception&) {
                fail(ErrorKind::Validation, std::string(kWorkersEnv) + " must be a positive integer");
            }
        }
        if (given("out")) c.output_dir = output_dir;
        if (given("workers")) c.workers = workers;
        if (given("seed")) c.seed = seed;
        if (given("thresholds")) c.taus = taus;
        if (given("primary")) c.primary_tau = primary_tau;
        if (given("dice_cut")) c.cuts.dice_cut = dice_cut;
        if (given("f1_cut")) c.cuts.f1_cut = f1_cut;
        if (given("method")) c.method.method = saliency::parse_method(method);
        if (given("pool")) c.method.pool.window = pool_window;
        if (given("layers")) c.layers = layers;
        if (given("per_layer")) c.per_layer = per_layer;
        c.validate();
        return c;
    }
};

std::string one_line(std::string s) {
    for (auto& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

void print_paths(const std::vector<fs::path>& paths) {
    for (const auto& p : paths) std::cout << p.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-shift diagnostics for vessel segmentation models"};
    app.set_version_flag("--version", std::string(report::kToolVersion));
    app.require_subcommand(1);

    // domain-gap
    CommonFlags gap_flags;
    std::string gap_source, gap_target, gap_source_label, gap_target_label;
    auto* gap_cmd = app.add_subcommand("domain-gap", "Compare intensity, resolution, noise and vessel morphology");
    gap_flags.attach(gap_cmd);
    auto* gap_src_opt = gap_cmd->add_option("--source", gap_source, "Source dataset directory");
    auto* gap_tgt_opt = gap_cmd->add_option("--target", gap_target, "Target dataset directory");
    gap_cmd->add_option("--source-label", gap_source_label, "Source column label");
    gap_cmd->add_option("--target-label", gap_target_label, "Target column label");
    std::size_t patch_edge = 0;
    auto* patch_opt = gap_cmd->add_option("--patch-edge", patch_edge, "Corner patch edge in voxels");

    // saliency
    CommonFlags sal_flags;
    std::vector<std::string> manifest_inputs;
    std::string manifest_glob;
    auto* sal_cmd = app.add_subcommand("saliency", "Compute aggregated heatmaps from layer dumps");
    sal_flags.attach(sal_cmd);
    sal_cmd->add_option("manifests", manifest_inputs, "Manifest files or directories")->required();
    auto* glob_opt = sal_cmd->add_option("--manifest-glob", manifest_glob, "Pattern used inside directories");

    // evaluate
    CommonFlags eval_flags;
    std::vector<std::vector<std::string>> eval_domains;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score heatmaps against masks and build the report");
    eval_flags.attach(eval_cmd);
    eval_cmd->add_option("--domain", eval_domains,
                         "LABEL HEATMAP_DIR GT_DIR PRED_DIR (GT_DIR may be '-'); repeatable")
        ->expected(4)
        ->allow_extra_args(false)
        ->required();

    // taxonomy
    CommonFlags tax_flags;
    std::vector<std::vector<std::string>> tax_domains;
    auto* tax_cmd = app.add_subcommand("taxonomy", "Slice-level Dice categories from mask pairs");
    tax_flags.attach(tax_cmd);
    tax_cmd->add_option("--domain", tax_domains, "LABEL GT_DIR PRED_DIR; repeatable")
        ->expected(3)
        ->allow_extra_args(false)
        ->required();

    // phantom
    auto* ph_cmd = app.add_subcommand("phantom", "Synthetic volumes, heatmaps and corpora");
    ph_cmd->require_subcommand(1);
    std::string ph_spec, ph_out;
    auto* ph_volume = ph_cmd->add_subcommand("volume", "Generate one phantom from a JSON spec");
    ph_volume->add_option("--spec", ph_spec, "Phantom spec JSON")->required()->check(CLI::ExistingFile);
    ph_volume->add_option("-o,--out", ph_out, "Output directory")->required();

    std::string att_mask, att_out;
    double att_iou = 0.5, att_tau = 0.3;
    std::uint64_t att_seed = 0;
    auto* ph_att = ph_cmd->add_subcommand("attention", "Heatmap with a target IoU against a mask");
    ph_att->add_option("--mask", att_mask, "2D base mask (.npy)")->required()->check(CLI::ExistingFile);
    ph_att->add_option("--iou", att_iou, "Target IoU")->required();
    ph_att->add_option("--tau", att_tau, "Binarization threshold");
    ph_att->add_option("--seed", att_seed, "Seed");
    ph_att->add_option("-o,--out", att_out, "Output heatmap (.npy)")->required();

    std::string corpus_out;
    std::uint64_t corpus_seed = 0;
    std::size_t corpus_slices = 12, corpus_volumes = 2;
    auto* ph_corpus = ph_cmd->add_subcommand("corpus", "Synthetic source/target evaluation corpus");
    ph_corpus->add_option("-o,--out", corpus_out, "Output directory")->required();
    ph_corpus->add_option("--seed", corpus_seed, "Seed");
    ph_corpus->add_option("--slices", corpus_slices, "Evaluation slices per domain");
    ph_corpus->add_option("--volumes", corpus_volumes, "Volumes per domain");

    // report
    std::vector<std::string> report_inputs, report_sections;
    std::string report_format = "markdown", report_out = ".";
    auto* rep_cmd = app.add_subcommand("report", "Merge report.json files and render them");
    rep_cmd->add_option("inputs", report_inputs, "report.json files")->required()->check(CLI::ExistingFile);
    rep_cmd->add_option("--format", report_format, "json, csv-bundle or markdown");
    rep_cmd->add_option("--sections", report_sections, "Sections to render")->delimiter(',');
    rep_cmd->add_option("-o,--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gap_cmd->parsed()) {
            RunConfig c = gap_flags.resolve();
            if (*patch_opt) c.patch_edge = patch_edge;
            if (!gap_source_label.empty()) c.source_label = gap_source_label;
            if (!gap_target_label.empty()) c.target_label = gap_target_label;
            if (*gap_src_opt) c.source_dir = gap_source;
            if (*gap_tgt_opt) c.target_dir = gap_target;
            if (!c.source_dir || !c.target_dir) {
                fail(ErrorKind::Validation, "domain-gap needs --source and --target (or config)");
            }
            pipeline::cmd_domain_gap(*c.source_dir, *c.target_dir, c);
            std::cout << (c.output_dir / "report.md").string() << "\n";
        } else if (sal_cmd->parsed()) {
            RunConfig c = sal_flags.resolve();
            if (*glob_opt) c.manifest_glob = manifest_glob;
            std::vector<fs::path> manifests;
            for (const auto& in : manifest_inputs) {
                if (fs::is_directory(in)) {
                    for (auto& p : pipeline::glob_files(in, c.manifest_glob)) manifests.push_back(p);
                } else {
                    manifests.emplace_back(in);
                }
            }
            const auto ids = pipeline::cmd_saliency(manifests, c);
            for (const auto& id : ids) std::cout << (c.output_dir / (id + ".heatmap.npy")).string() << "\n";
        } else if (eval_cmd->parsed()) {
            const RunConfig c = eval_flags.resolve();
            std::vector<pipeline::DomainInputs> domains;
            for (const auto& d : eval_domains) {
                pipeline::DomainInputs in{d[0], d[1], std::nullopt, d[3]};
                if (d[2] != "-") in.gt_dir = fs::path(d[2]);
                domains.push_back(std::move(in));
            }
            pipeline::cmd_evaluate(domains, c);
            std::cout << (c.output_dir / "report.md").string() << "\n";
        } else if (tax_cmd->parsed()) {
            const RunConfig c = tax_flags.resolve();
            std::vector<std::pair<fs::path, fs::path>> dirs;
            std::vector<std::string> labels;
            for (const auto& d : tax_domains) {
                labels.push_back(d[0]);
                dirs.emplace_back(d[1], d[2]);
            }
            pipeline::cmd_taxonomy(dirs, labels, c);
            std::cout << (c.output_dir / "report.md").string() << "\n";
        } else if (ph_volume->parsed()) {
            std::ifstream in(ph_spec);
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::Validation, ph_spec + ": " + e.what());
            }
            const auto spec = pipeline::phantom_spec_from_json(doc);
            pipeline::write_phantom(ph_out, spec);
            std::cout << (fs::path(ph_out) / (spec.id + ".npy")).string() << "\n";
        } else if (ph_att->parsed()) {
            const Mask base = load_mask(att_mask, MaskRole::GroundTruth);
            save_heatmap(att_out, phantom::generate_attention({base, att_iou, att_tau, att_seed}));
            std::cout << att_out << "\n";
        } else if (ph_corpus->parsed()) {
            auto spec = pipeline::default_corpus();
            spec.seed = corpus_seed;
            spec.slices = corpus_slices;
            spec.volumes = corpus_volumes;
            pipeline::write_corpus(corpus_out, spec);
            std::cout << corpus_out << "\n";
        } else if (rep_cmd->parsed()) {
            std::vector<report::RunReport> reports;
            for (const auto& p : report_inputs) reports.push_back(report::load_report(p));
            const auto merged = report::merge_reports(reports);
            std::vector<report::Section> sections;
            for (const auto& s : report_sections) sections.push_back(report::parse_section(s));
            if (sections.empty()) sections = report::available_sections(merged);
            print_paths(report::render(merged, report::parse_format(report_format), report_out, sections));
        }
    } catch (const Error& e) {
        std::cerr << fmt::format("error\t{}\t{}\n", to_string(e.kind()), one_line(e.what()));
        return 1;
    } catch (const std::exception& e) {
        std::cerr << fmt::format("error\tInternalError\t{}\n", one_line(e.what()));
        return 2;
    }
    return 0;
}
