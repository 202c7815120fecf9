#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftlens/alignment.hpp"
#include "shiftlens/domain_gap.hpp"
#include "shiftlens/taxonomy.hpp"

namespace shiftlens::report {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct Provenance {
    std::string tool_version{kToolVersion};
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::uint64_t> seeds;
};

struct DomainGapSection {
    std::string source_label = "source";
    std::string target_label = "target";
    gap::DomainGapReport report;
};

// Phase-2 results for one dataset.
struct DomainEvaluation {
    std::string label;
    std::vector<double> taus;
    double primary_tau = 0.3;
    std::optional<align::AlignmentTable> alignment;
    std::optional<taxonomy::Distribution> taxonomy;
    std::optional<taxonomy::SegmentationSummary> segmentation;
    std::vector<align::SliceScores> slice_scores;
    std::vector<taxonomy::SliceRecord> slice_records;
};

struct RunReport {
    std::optional<DomainGapSection> domain_gap;
    std::vector<DomainEvaluation> evaluations;
    Provenance provenance;
};

enum class Section { DomainGap, Segmentation, Taxonomy, Alignment, Gap, Joint };
enum class Format { Json, CsvBundle, Markdown };

inline constexpr std::array<Section, 6> kAllSections{Section::DomainGap, Section::Segmentation,
                                                      Section::Taxonomy,  Section::Alignment,
                                                      Section::Gap,       Section::Joint};

std::string_view to_string(Section section) noexcept;
Section parse_section(std::string_view text);
Format parse_format(std::string_view text);

bool has_section(const RunReport& report, Section section);
// Sections present in the report, in table order.
std::vector<Section> available_sections(const RunReport& report);

nlohmann::json to_json(const RunReport& report);
RunReport from_json(const nlohmann::json& doc);

// Presentation only: every number printed is read from the report.
std::string render_json(const RunReport& report);
std::string render_markdown(const RunReport& report, std::span<const Section> sections);
// File name -> RFC 4180 CSV text.
std::map<std::string, std::string> render_csv_bundle(const RunReport& report);

// Writes the requested format into `dir`; throws SectionError when a
// requested section is missing. Returns the paths written.
std::vector<std::filesystem::path> render(const RunReport& report, Format format,
                                          const std::filesystem::path& dir,
                                          std::span<const Section> sections);

// Concatenates evaluations, keeps the first domain-gap section, and fills the
// Dice drop of every later evaluation against the first one that has a
// segmentation summary.
RunReport merge_reports(std::span<const RunReport> reports);

// Sets baseline_dice and drop_percent on every evaluation after the first one
// with a segmentation summary, unless already set.
void fill_segmentation_drops(std::vector<DomainEvaluation>& evaluations);

RunReport load_report(const std::filesystem::path& path);

} // namespace shiftlens::report
