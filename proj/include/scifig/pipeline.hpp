#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scifig/decontam.hpp"
#include "scifig/image.hpp"

namespace scifig::pipeline {

struct PipelineConfig {
    std::vector<std::filesystem::path> inputs;  // files or directories
    std::filesystem::path out_dir;
    int jobs = 1;
    int resize = image::kTargetSize;
    int jpeg_quality = image::kDefaultJpegQuality;
    std::optional<std::string> rasterizer;
    std::chrono::seconds hook_timeout{120};
    std::uint64_t key_start = 0;
    std::optional<std::filesystem::path> symbol_table;  // overrides the built-in table
};

// Counts for one stage; out = in - sum(rejections) - sum(removals).
struct StageCounts {
    std::string name;
    std::size_t in = 0;
    std::size_t out = 0;
    std::map<std::string, std::size_t> rejections;
    std::map<std::string, std::size_t> removals;

    std::size_t rejected() const;
    std::size_t removed() const;
    bool balanced() const { return out + rejected() + removed() == in; }
};

struct RunSummary {
    std::string command;
    std::size_t archives_in = 0;
    std::size_t archives_skipped = 0;
    std::size_t archives_processed = 0;
    std::vector<StageCounts> stages;  // pair-level stages, in pipeline order
    std::size_t pairs_in = 0;
    std::size_t pairs_out = 0;
    nlohmann::ordered_json settings;

    std::size_t total_rejections() const;
    std::size_t total_removals() const;
    // pairs_out = pairs_in - rejections - removals, and every stage balances
    // and feeds the next.
    bool accounting_holds() const;
    nlohmann::ordered_json to_json() const;
};

RunSummary summary_from_json(const nlohmann::json& j);

inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kRejectionsName = "rejections.jsonl";
inline constexpr const char* kSkipsName = "skips.jsonl";
inline constexpr const char* kSummaryName = "run_summary.json";

// Full extraction runs. Per-paper failures land in the skip and rejection
// logs; only configuration and I/O setup problems throw.
RunSummary run_extract_arxiv(const PipelineConfig& config);
RunSummary run_extract_pmc(const PipelineConfig& config);

struct DecontamConfig {
    std::filesystem::path manifest;
    std::filesystem::path index;
    std::optional<std::filesystem::path> out_dir;  // defaults to the manifest's directory
    std::string provider = "phash";
    double threshold = decontam::kDefaultThreshold;
    int jobs = 1;
};

inline constexpr const char* kKeptName = "manifest.kept.jsonl";
inline constexpr const char* kRemovedName = "manifest.removed.jsonl";
inline constexpr const char* kUndecidedName = "manifest.undecided.jsonl";
inline constexpr const char* kDecontamReportName = "decontam_report.json";
inline constexpr const char* kDecontamSummaryName = "decontam_run_summary.json";

struct DecontamOutcome {
    decontam::DecontamReport report;
    RunSummary summary;
};

DecontamOutcome run_decontaminate(const DecontamConfig& config);

nlohmann::ordered_json report_to_json(const decontam::DecontamReport& report);

// Input files in deterministic order. Directories are walked recursively;
// `suffixes` filters directory contents (empty accepts everything).
std::vector<std::filesystem::path> list_inputs(const std::vector<std::filesystem::path>& inputs,
                                               const std::vector<std::string>& suffixes);

}  // namespace scifig::pipeline
