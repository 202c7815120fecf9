#include "shiftlens/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace shiftlens::report {
namespace {

using align::AggregateRow;
using align::Metrics;
using align::Target;
using taxonomy::Category;
using taxonomy::Quadrant;

std::string f4(double v) { return fmt::format("{:.4f}", v); }
std::string f2(double v) { return fmt::format("{:.2f}", v); }
std::string f3(double v) { return fmt::format("{:.3f}", v); }
std::string pct1(double v) { return fmt::format("{:.1f}", v); }
std::string signed_pct(double v) { return fmt::format("{:+.1f}%", v); }

std::string opt4(const std::optional<double>& v) { return v ? f4(*v) : "--"; }

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

    std::string str() const {
        std::string out = line(header_);
        std::vector<std::string> rule(header_.size(), "---");
        out += line(rule);
        for (const auto& r : rows_) out += line(r);
        return out;
    }

private:
    static std::string line(const std::vector<std::string>& cells) {
        std::string out = "|";
        for (const auto& c : cells) out += " " + c + " |";
        return out + "\n";
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) { row(header); }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += csv_field(cells[i]);
        }
        text_ += "\r\n";
    }
    const std::string& str() const { return text_; }

private:
    std::string text_;
};

std::string num(double v) { return fmt::format("{}", v); }
std::string num(std::uint64_t v) { return fmt::format("{}", v); }
std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }
std::string flag(bool b) { return b ? "1" : "0"; }

std::string category_label(Category c) {
    return c == Category::TrueNegative ? "True Negative" : std::string(taxonomy::to_string(c));
}

std::string category_rule(Category c, const taxonomy::Thresholds& t) {
    switch (c) {
        case Category::Perfect: return fmt::format("> {}", t.perfect);
        case Category::Good: return fmt::format("{} < Dice <= {}", t.good, t.perfect);
        case Category::Bad: return fmt::format("{} < Dice <= {}", t.bad, t.good);
        case Category::Worst: return fmt::format("<= {}", t.bad);
        case Category::TrueNegative: return "No vessels (correct)";
    }
    return "";
}

std::string quadrant_label(Quadrant q) {
    switch (q) {
        case Quadrant::GoodDiceGoodXai: return "Good Dice & Good XAI";
        case Quadrant::GoodDiceBadXai: return "Good Dice & Bad XAI";
        case Quadrant::BadDiceGoodXai: return "Bad Dice & Good XAI";
        case Quadrant::BadDiceBadXai: return "Bad Dice & Bad XAI";
    }
    return "";
}

const Metrics& pick(const AggregateRow& row, bool micro) { return micro ? row.micro : row.macro; }

std::string config_line(const RunReport& r) {
    return fmt::format("Tool version {}. Config: `{}`. Seeds: [{}].\n", r.provenance.tool_version,
                       r.provenance.config.dump(), fmt::join(r.provenance.seeds, ", "));
}

void domain_gap_md(std::ostringstream& out, const DomainGapSection& s) {
    const auto& g = s.report;
    const auto& src = s.source_label;
    const auto& tgt = s.target_label;
    out << fmt::format("## Intensity distribution ({}..{} HU window)\n\n",
                       g.source_intensity.window_lo, g.source_intensity.window_hi);
    out << "Population statistics over voxels inside the window (inclusive).\n\n";
    Table t1({"Metric", src, tgt});
    t1.row({"Mean Intensity (HU)", f2(g.source_intensity.mean), f2(g.target_intensity.mean)});
    t1.row({"Std Intensity (HU)", f2(g.source_intensity.std), f2(g.target_intensity.std)});
    t1.row({"Voxels in window", num(g.source_intensity.voxel_count),
            num(g.target_intensity.voxel_count)});
    out << t1.str() << "\n";

    out << "## Spatial resolution\n\nDifference is (target - source) / source.\n\n";
    Table t2({"Axis", src, tgt, "Difference"});
    const char* axes[] = {"X", "Y", "Z"};
    for (std::size_t a = 0; a < 3; ++a) {
        t2.row({fmt::format("{} Resolution (mm)", axes[a]), f3(g.resolution.source[a]),
                f3(g.resolution.target[a]), signed_pct(g.resolution.percent_difference[a])});
    }
    out << t2.str() << "\n";

    out << "## Background noise\n\nMethod: " << g.source_noise.method << ".\n\n";
    Table t3({"Metric", src, tgt});
    t3.row({"Noise Std (HU)", f2(g.source_noise.noise_std), f2(g.target_noise.noise_std)});
    t3.row({"Noise Ratio", "--", g.noise_ratio ? fmt::format("{:.2f}x", *g.noise_ratio) : "--"});
    out << t3.str() << "\n";

    if (g.source_diameters || g.target_diameters) {
        out << "## Vessel diameter distribution\n\n"
               "Diameter = 2 x Euclidean distance transform at ridge voxels.\n\n";
        Table t4({"Metric", src, tgt});
        auto cell = [](const std::optional<gap::DiameterStats>& d, auto field) {
            return d ? f2(field(*d)) : std::string("--");
        };
        using D = gap::DiameterStats;
        t4.row({"Mean Diameter (mm)", cell(g.source_diameters, [](const D& d) { return d.mean; }),
                cell(g.target_diameters, [](const D& d) { return d.mean; })});
        t4.row({"Median Diameter (mm)",
                cell(g.source_diameters, [](const D& d) { return d.median; }),
                cell(g.target_diameters, [](const D& d) { return d.median; })});
        t4.row({"Std Deviation (mm)", cell(g.source_diameters, [](const D& d) { return d.std; }),
                cell(g.target_diameters, [](const D& d) { return d.std; })});
        t4.row({"Min Diameter (mm)", cell(g.source_diameters, [](const D& d) { return d.min; }),
                cell(g.target_diameters, [](const D& d) { return d.min; })});
        t4.row({"Max Diameter (mm)", cell(g.source_diameters, [](const D& d) { return d.max; }),
                cell(g.target_diameters, [](const D& d) { return d.max; })});
        t4.row({"99th Percentile (mm)", cell(g.source_diameters, [](const D& d) { return d.p99; }),
                cell(g.target_diameters, [](const D& d) { return d.p99; })});
        t4.row({"Ridge samples",
                g.source_diameters ? num(g.source_diameters->sample_count) : "--",
                g.target_diameters ? num(g.target_diameters->sample_count) : "--"});
        out << t4.str() << "\n";
    }
}

void segmentation_md(std::ostringstream& out, const RunReport& r) {
    out << "## Cross-domain segmentation performance\n\n"
           "Dice pools voxel counts over all cases; the case mean is auxiliary.\n\n";
    Table t({"Domain", "Dice", "Performance Drop", "Case-mean Dice", "Cases"});
    for (const auto& e : r.evaluations) {
        if (!e.segmentation) continue;
        const auto& s = *e.segmentation;
        t.row({e.label, f4(s.pooled_dice),
               s.drop_percent ? fmt::format("-{:.1f}%", *s.drop_percent) : "--",
               f4(s.case_mean_dice), num(s.cases)});
    }
    out << t.str() << "\n";
}

void taxonomy_md(std::ostringstream& out, const RunReport& r) {
    std::vector<const DomainEvaluation*> evals;
    for (const auto& e : r.evaluations) {
        if (e.taxonomy) evals.push_back(&e);
    }
    const auto& th = evals.front()->taxonomy->thresholds;
    out << "## Slice-level performance distribution\n\n"
           "A slice without ground-truth vessels but with predicted vessels counts as Worst "
           "(Dice 0).\n\n";
    std::vector<std::string> header{"Category", "Dice Threshold"};
    for (const auto* e : evals) header.push_back(e->label + " (%)");
    Table t(header);
    for (std::size_t i = 0; i < taxonomy::kCategories.size(); ++i) {
        std::vector<std::string> row{category_label(taxonomy::kCategories[i]),
                                     category_rule(taxonomy::kCategories[i], th)};
        for (const auto* e : evals) row.push_back(pct1(e->taxonomy->categories[i].percent) + "%");
        t.row(row);
    }
    std::vector<std::string> totals{"Slices", ""};
    for (const auto* e : evals) totals.push_back(num(e->taxonomy->total));
    t.row(totals);
    out << t.str() << "\n";
}

void alignment_md(std::ostringstream& out, const RunReport& r, Target target, bool micro) {
    const std::string title = target == Target::GroundTruth
                                  ? "XAI-ground truth alignment (XAI ∩ GT)"
                                  : "XAI-prediction mask alignment (XAI ∩ PM)";
    out << "## " << title << ", " << (micro ? "micro" : "macro") << "-averaged\n\n"
        << (micro ? "Counts pooled over slices before computing each metric.\n\n"
                  : "Mean of per-slice metrics.\n\n");
    Table t({"Threshold", "Domain", "IoU", "F1", "Precision", "Recall", "Slices"});
    std::vector<double> taus;
    for (const auto& e : r.evaluations) {
        if (!e.alignment) continue;
        for (const auto& row : e.alignment->rows) {
            if (std::find(taus.begin(), taus.end(), row.tau) == taus.end()) taus.push_back(row.tau);
        }
    }
    std::sort(taus.begin(), taus.end());
    for (double tau : taus) {
        for (const auto& e : r.evaluations) {
            if (!e.alignment) continue;
            const auto* row = e.alignment->find(tau, target);
            if (!row) continue;
            const auto& m = pick(*row, micro);
            t.row({fmt::format("{}", tau), e.label, f4(m.iou), f4(m.f1), f4(m.precision),
                   f4(m.recall), num(row->slices)});
        }
    }
    out << t.str() << "\n";
}

void gap_md(std::ostringstream& out, const RunReport& r) {
    std::vector<const DomainEvaluation*> evals;
    for (const auto& e : r.evaluations) {
        if (e.alignment && e.alignment->find_gap(e.primary_tau)) evals.push_back(&e);
    }
    for (bool micro : {true, false}) {
        out << fmt::format("## Comparison of XAI alignment metrics (threshold {}), {}-averaged\n\n",
                           evals.front()->primary_tau, micro ? "micro" : "macro");
        std::vector<std::string> header{"Metric"};
        for (const auto* e : evals) header.push_back(e->label);
        Table t(header);
        std::vector<std::string> gt{"XAI-GT IoU"}, pm{"XAI-PM IoU"}, gap{"Gap (XAI-PM − XAI-GT)"};
        for (const auto* e : evals) {
            const auto& a = *e->alignment;
            gt.push_back(f4(pick(*a.find(e->primary_tau, Target::GroundTruth), micro).iou));
            pm.push_back(f4(pick(*a.find(e->primary_tau, Target::Prediction), micro).iou));
            const auto* g = a.find_gap(e->primary_tau);
            gap.push_back(f4(micro ? g->micro : g->macro));
        }
        t.row(gt);
        t.row(pm);
        t.row(gap);
        out << t.str() << "\n";
    }
}

void joint_md(std::ostringstream& out, const RunReport& r) {
    std::vector<const DomainEvaluation*> evals;
    for (const auto& e : r.evaluations) {
        if (e.taxonomy) evals.push_back(&e);
    }
    const auto& th = evals.front()->taxonomy->thresholds;
    out << fmt::format(
        "## Joint slice-level analysis: segmentation vs. explainability quality\n\n"
        "Vessel-bearing slices only. Good Dice: Dice >= {}; Good XAI: XAI-GT F1 >= {} "
        "(at threshold {}). These cuts are configurable assumptions.\n\n",
        th.dice_cut, th.f1_cut, evals.front()->primary_tau);
    Table t({"Domain", "Category", "Count", "%", "Mean Dice", "Mean F1"});
    for (const auto* e : evals) {
        for (std::size_t i = 0; i < taxonomy::kQuadrants.size(); ++i) {
            const auto& g = e->taxonomy->quadrants[i];
            t.row({e->label, quadrant_label(taxonomy::kQuadrants[i]), num(g.count),
                   pct1(g.percent), opt4(g.mean_dice), opt4(g.mean_f1)});
        }
    }
    out << t.str() << "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

} // namespace

std::string_view to_string(Section section) noexcept {
    switch (section) {
        case Section::DomainGap: return "domain-gap";
        case Section::Segmentation: return "segmentation";
        case Section::Taxonomy: return "taxonomy";
        case Section::Alignment: return "alignment";
        case Section::Gap: return "gap";
        case Section::Joint: return "joint";
    }
    return "";
}

Section parse_section(std::string_view text) {
    for (auto s : kAllSections) {
        if (to_string(s) == text) return s;
    }
    fail(ErrorKind::Validation, "unknown report section '" + std::string(text) + "'");
}

Format parse_format(std::string_view text) {
    if (text == "json") return Format::Json;
    if (text == "csv-bundle") return Format::CsvBundle;
    if (text == "markdown") return Format::Markdown;
    fail(ErrorKind::Validation, "unknown format '" + std::string(text) +
                                    "', expected json, csv-bundle or markdown");
}

bool has_section(const RunReport& r, Section section) {
    auto any = [&](auto pred) { return std::any_of(r.evaluations.begin(), r.evaluations.end(), pred); };
    switch (section) {
        case Section::DomainGap: return r.domain_gap.has_value();
        case Section::Segmentation:
            return any([](const DomainEvaluation& e) { return e.segmentation.has_value(); });
        case Section::Taxonomy:
        case Section::Joint:
            return any([](const DomainEvaluation& e) { return e.taxonomy.has_value(); });
        case Section::Alignment:
            return any([](const DomainEvaluation& e) { return e.alignment.has_value(); });
        case Section::Gap:
            return any([](const DomainEvaluation& e) {
                return e.alignment && e.alignment->find_gap(e.primary_tau) != nullptr;
            });
    }
    return false;
}

std::vector<Section> available_sections(const RunReport& report) {
    std::vector<Section> out;
    for (auto s : kAllSections) {
        if (has_section(report, s)) out.push_back(s);
    }
    return out;
}

std::string render_json(const RunReport& report) { return to_json(report).dump(2) + "\n"; }

std::string render_markdown(const RunReport& r, std::span<const Section> sections) {
    for (auto s : sections) {
        if (!has_section(r, s)) {
            fail(ErrorKind::Section, "report has no '" + std::string(to_string(s)) + "' section");
        }
    }
    std::ostringstream out;
    out << "# Domain shift diagnostic report\n\n" << config_line(r) << "\n";
    auto wanted = [&](Section s) {
        return std::find(sections.begin(), sections.end(), s) != sections.end();
    };
    if (wanted(Section::DomainGap)) domain_gap_md(out, *r.domain_gap);
    if (wanted(Section::Segmentation)) segmentation_md(out, r);
    if (wanted(Section::Taxonomy)) taxonomy_md(out, r);
    if (wanted(Section::Alignment)) {
        for (auto target : {Target::GroundTruth, Target::Prediction}) {
            alignment_md(out, r, target, true);
            alignment_md(out, r, target, false);
        }
    }
    if (wanted(Section::Gap)) gap_md(out, r);
    if (wanted(Section::Joint)) joint_md(out, r);
    return out.str();
}

std::map<std::string, std::string> render_csv_bundle(const RunReport& r) {
    std::map<std::string, std::string> files;

    Csv scores({"domain", "slice_id", "tau", "target", "iou", "f1", "precision", "recall",
                "attention_px", "reference_px", "intersection_px", "union_px", "empty_attention",
                "empty_reference"});
    Csv slices({"domain", "slice_id", "dice", "xai_f1", "gt_px", "pred_px", "category",
                "quadrant"});
    Csv summary({"domain", "tau", "target", "averaging", "iou", "f1", "precision", "recall",
                 "slices"});
    for (const auto& e : r.evaluations) {
        for (const auto& s : e.slice_scores) {
            for (const auto& row : s.rows) {
                const auto& m = row.metrics;
                scores.row({e.label, s.slice_id, num(row.tau), std::string(align::to_string(row.target)),
                            num(m.iou), num(m.f1), num(m.precision), num(m.recall),
                            num(row.counts.attention), num(row.counts.reference),
                            num(row.counts.intersection), num(row.counts.union_),
                            flag(m.empty_attention), flag(m.empty_reference)});
            }
        }
        for (const auto& rec : e.slice_records) {
            slices.row({e.label, rec.slice_id, opt_num(rec.dice), opt_num(rec.xai_f1),
                        num(rec.gt_count), num(rec.pred_count),
                        std::string(taxonomy::to_string(rec.category)),
                        rec.quadrant ? std::string(taxonomy::to_string(*rec.quadrant)) : ""});
        }
        if (e.alignment) {
            for (const auto& row : e.alignment->rows) {
                for (bool micro : {true, false}) {
                    const auto& m = pick(row, micro);
                    summary.row({e.label, num(row.tau), std::string(align::to_string(row.target)),
                                 micro ? "micro" : "macro", num(m.iou), num(m.f1),
                                 num(m.precision), num(m.recall), num(row.slices)});
                }
            }
        }
    }
    files["scores.csv"] = scores.str();
    files["slices.csv"] = slices.str();
    files["alignment_summary.csv"] = summary.str();

    if (r.domain_gap) {
        const auto& g = r.domain_gap->report;
        Csv gap({"metric", r.domain_gap->source_label, r.domain_gap->target_label});
        gap.row({"intensity_mean_hu", num(g.source_intensity.mean), num(g.target_intensity.mean)});
        gap.row({"intensity_std_hu", num(g.source_intensity.std), num(g.target_intensity.std)});
        const char* axes[] = {"x", "y", "z"};
        for (std::size_t a = 0; a < 3; ++a) {
            gap.row({fmt::format("spacing_{}_mm", axes[a]), num(g.resolution.source[a]),
                     num(g.resolution.target[a])});
            gap.row({fmt::format("spacing_{}_percent_difference", axes[a]), "",
                     num(g.resolution.percent_difference[a])});
        }
        gap.row({"noise_std_hu", num(g.source_noise.noise_std), num(g.target_noise.noise_std)});
        gap.row({"noise_ratio", "", opt_num(g.noise_ratio)});
        files["domain_gap.csv"] = gap.str();
    }
    return files;
}

std::vector<std::filesystem::path> render(const RunReport& report, Format format,
                                          const std::filesystem::path& dir,
                                          std::span<const Section> sections) {
    for (auto s : sections) {
        if (!has_section(report, s)) {
            fail(ErrorKind::Section, "report has no '" + std::string(to_string(s)) + "' section");
        }
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    switch (format) {
        case Format::Json:
            written.push_back(dir / "report.json");
            write_file(written.back(), render_json(report));
            break;
        case Format::Markdown:
            written.push_back(dir / "report.md");
            write_file(written.back(), render_markdown(report, sections));
            break;
        case Format::CsvBundle:
            for (const auto& [name, text] : render_csv_bundle(report)) {
                written.push_back(dir / name);
                write_file(written.back(), text);
            }
            break;
    }
    return written;
}

RunReport merge_reports(std::span<const RunReport> reports) {
    if (reports.empty()) fail(ErrorKind::EmptyInput, "no reports to merge");
    RunReport out;
    out.provenance.config = nlohmann::json::array();
    for (const auto& r : reports) {
        if (!out.domain_gap && r.domain_gap) out.domain_gap = r.domain_gap;
        out.evaluations.insert(out.evaluations.end(), r.evaluations.begin(), r.evaluations.end());
        out.provenance.config.push_back(r.provenance.config);
        out.provenance.seeds.insert(out.provenance.seeds.end(), r.provenance.seeds.begin(),
                                    r.provenance.seeds.end());
    }
    fill_segmentation_drops(out.evaluations);
    return out;
}

void fill_segmentation_drops(std::vector<DomainEvaluation>& evaluations) {
    std::optional<double> baseline;
    for (auto& e : evaluations) {
        if (!e.segmentation) continue;
        if (!baseline) {
            baseline = e.segmentation->pooled_dice;
            continue;
        }
        if (!e.segmentation->baseline_dice) {
            e.segmentation->baseline_dice = baseline;
            e.segmentation->drop_percent =
                taxonomy::percent_drop(*baseline, e.segmentation->pooled_dice);
        }
    }
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

} // namespace shiftlens::report
