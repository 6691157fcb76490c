#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scifig/caption.hpp"
#include "scifig/latex/parser.hpp"
#include "scifig/util/bytes.hpp"

namespace scifig::dataset {

inline constexpr int kKeyDigits = 9;
inline constexpr const char* kPipelineVersion = "scifig-1.0.0";

struct ExtractedPair {
    std::string key;
    std::string subset;         // "arxiv" or "pmc"
    std::string paper_id;
    std::string source_path;    // graphics member
    std::string document_path;  // .tex or .nxml member the pair came from
    latex::Span caption_span;
    caption::NormalizedCaption caption;
    Bytes jpeg;
    int width = 0;
    int height = 0;
    std::string image_sha256;
};

// Sorts by (subset, paper_id, source_path, caption_span, document_path) and
// numbers sequentially from `key_start`.
void assign_keys(std::vector<ExtractedPair>& pairs, std::uint64_t key_start = 0);

std::string format_key(std::uint64_t n);

// Settings recorded in every manifest row.
struct ManifestContext {
    std::string pipeline_version = kPipelineVersion;
    std::string substitution_table_sha256;
    std::string codec;
    std::optional<std::string> rasterizer;
};

// One manifest line. Images live content-addressed under images/.
struct ManifestRow {
    std::string key;
    std::string subset;
    std::string paper_id;
    std::string source_path;
    std::string document_path;
    latex::Span caption_span;
    std::string caption;
    std::size_t caption_chars = 0;
    std::size_t caption_words = 0;
    std::size_t ref_count = 0;
    std::size_t cit_count = 0;
    bool caption_lossy = false;
    int width = 0;
    int height = 0;
    std::string image_sha256;
    std::string image_path;  // relative to the manifest's directory
    std::string pipeline_version;
    std::string substitution_table_sha256;
    std::string codec;
    std::optional<std::string> rasterizer;

    bool operator==(const ManifestRow&) const = default;
};

std::string image_relative_path(const std::string& sha256);

ManifestRow make_row(const ExtractedPair& pair, const ManifestContext& ctx);

nlohmann::ordered_json row_to_json(const ManifestRow& row);
// Throws Error(Format) for a missing or mistyped field.
ManifestRow row_from_json(const nlohmann::json& j);

// Rows written in key order, one compact JSON object per line. Throws
// Error(DuplicateKey) or Error(Io). Returns the row count.
std::size_t write_manifest(std::vector<ManifestRow> rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

struct ShardInfo {
    std::filesystem::path path;
    std::size_t count = 0;
};

// {index:05d}.tar holding {key}.jpg, {key}.txt and {key}.json per row, in
// key order. Images are read from `image_root / row.image_path`.
std::vector<ShardInfo> write_shards(std::vector<ManifestRow> rows, const std::filesystem::path& image_root,
                                    std::size_t shard_size, const std::filesystem::path& out_dir);

struct SubsetStats {
    std::size_t figure_count = 0;
    double caption_chars_sum = 0.0;
    double caption_words_sum = 0.0;

    std::optional<double> avg_caption_chars() const;
    std::optional<double> avg_caption_words() const;
    void merge(const SubsetStats& other);
};

struct DatasetStats {
    SubsetStats total;
    std::map<std::string, SubsetStats> per_subset;
};

DatasetStats compute_stats(const std::vector<ManifestRow>& rows);
DatasetStats compute_stats(const std::filesystem::path& manifest);

// Aligned text table: Dataset | # figures | avg caption length | avg caption words.
std::string format_stats_table(const DatasetStats& stats);
nlohmann::ordered_json stats_to_json(const DatasetStats& stats);

struct MixtureEntry {
    std::string name;
    std::uint64_t count = 0;
    double fraction = 0.0;
    int percent = 0;
};

// Fractions of the total. Percentages are rounded half-up, then the entry
// with the largest fraction (first on ties) absorbs the difference to 100.
// Throws Error(AllZero) when every count is zero or the list is empty.
std::vector<MixtureEntry> mixture_proportions(const std::vector<std::pair<std::string, std::uint64_t>>& counts);

std::string format_mixture_table(const std::vector<MixtureEntry>& entries);
nlohmann::ordered_json mixture_to_json(const std::vector<MixtureEntry>& entries);

}  // namespace scifig::dataset
