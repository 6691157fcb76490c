#include "scifig/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "scifig/error.hpp"
#include "scifig/util/tar.hpp"
#include "scifig/util/text.hpp"

namespace scifig::dataset {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_key(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*llu", kKeyDigits, static_cast<unsigned long long>(n));
    return buf;
}

void assign_keys(std::vector<ExtractedPair>& pairs, std::uint64_t key_start) {
    std::stable_sort(pairs.begin(), pairs.end(), [](const ExtractedPair& a, const ExtractedPair& b) {
        return std::tie(a.subset, a.paper_id, a.source_path, a.caption_span.begin, a.caption_span.end,
                        a.document_path) < std::tie(b.subset, b.paper_id, b.source_path, b.caption_span.begin,
                                                    b.caption_span.end, b.document_path);
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].key = format_key(key_start + i);
}

std::string image_relative_path(const std::string& sha256) { return "images/" + sha256 + ".jpg"; }

ManifestRow make_row(const ExtractedPair& pair, const ManifestContext& ctx) {
    ManifestRow r;
    r.key = pair.key;
    r.subset = pair.subset;
    r.paper_id = pair.paper_id;
    r.source_path = pair.source_path;
    r.document_path = pair.document_path;
    r.caption_span = pair.caption_span;
    r.caption = pair.caption.text;
    r.caption_chars = pair.caption.char_length;
    r.caption_words = word_count(pair.caption.text);
    r.ref_count = pair.caption.replacements.ref;
    r.cit_count = pair.caption.replacements.cit;
    r.caption_lossy = pair.caption.lossy;
    r.width = pair.width;
    r.height = pair.height;
    r.image_sha256 = pair.image_sha256;
    r.image_path = image_relative_path(pair.image_sha256);
    r.pipeline_version = ctx.pipeline_version;
    r.substitution_table_sha256 = ctx.substitution_table_sha256;
    r.codec = ctx.codec;
    r.rasterizer = ctx.rasterizer;
    return r;
}

ordered_json row_to_json(const ManifestRow& r) {
    ordered_json j;
    j["key"] = r.key;
    j["subset"] = r.subset;
    j["paper_id"] = r.paper_id;
    j["source_path"] = r.source_path;
    j["document_path"] = r.document_path;
    j["caption_span"] = {r.caption_span.begin, r.caption_span.end};
    j["caption"] = r.caption;
    j["caption_chars"] = r.caption_chars;
    j["caption_words"] = r.caption_words;
    j["ref_count"] = r.ref_count;
    j["cit_count"] = r.cit_count;
    j["caption_lossy"] = r.caption_lossy;
    j["width"] = r.width;
    j["height"] = r.height;
    j["image_sha256"] = r.image_sha256;
    j["image_path"] = r.image_path;
    j["pipeline_version"] = r.pipeline_version;
    j["substitution_table_sha256"] = r.substitution_table_sha256;
    j["codec"] = r.codec;
    j["rasterizer"] = r.rasterizer ? ordered_json(*r.rasterizer) : ordered_json(nullptr);
    return j;
}

ManifestRow row_from_json(const json& j) {
    try {
        ManifestRow r;
        r.key = j.at("key").get<std::string>();
        r.subset = j.at("subset").get<std::string>();
        r.paper_id = j.at("paper_id").get<std::string>();
        r.source_path = j.at("source_path").get<std::string>();
        r.document_path = j.at("document_path").get<std::string>();
        const auto& span = j.at("caption_span");
        if (!span.is_array() || span.size() != 2) throw Error(ErrorKind::Format, "caption_span must be [begin, end]");
        r.caption_span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
        r.caption = j.at("caption").get<std::string>();
        r.caption_chars = j.at("caption_chars").get<std::size_t>();
        r.caption_words = j.at("caption_words").get<std::size_t>();
        r.ref_count = j.at("ref_count").get<std::size_t>();
        r.cit_count = j.at("cit_count").get<std::size_t>();
        r.caption_lossy = j.at("caption_lossy").get<bool>();
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
        r.image_sha256 = j.at("image_sha256").get<std::string>();
        r.image_path = j.at("image_path").get<std::string>();
        r.pipeline_version = j.at("pipeline_version").get<std::string>();
        r.substitution_table_sha256 = j.at("substitution_table_sha256").get<std::string>();
        r.codec = j.at("codec").get<std::string>();
        if (const auto it = j.find("rasterizer"); it != j.end() && !it->is_null()) {
            r.rasterizer = it->get<std::string>();
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, std::string("manifest row: ") + e.what());
    }
}

namespace {

void sort_by_key(std::vector<ManifestRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ManifestRow& a, const ManifestRow& b) { return a.key < b.key; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].key == rows[i - 1].key) throw Error(ErrorKind::DuplicateKey, "duplicate key " + rows[i].key);
    }
}

std::string with_thousands(std::uint64_t n) {
    const std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i != 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

std::string display_name(const std::string& subset) {
    if (subset == "arxiv") return "arXiv";
    if (subset == "pmc") return "PMC";
    return subset;
}

std::string format_avg(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        width.resize(std::max(width.size(), r.size()), 0);
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], utf8_length(r[c]));
    }
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            const std::string pad(width[c] - utf8_length(r[c]), ' ');
            if (c == 0) {
                line += r[c] + pad;
            } else {
                line += "  " + pad + r[c];
            }
        }
        out += line + "\n";
    }
    return out;
}

}  // namespace

std::size_t write_manifest(std::vector<ManifestRow> rows, const fs::path& path) {
    sort_by_key(rows);
    std::string text;
    for (const auto& r : rows) {
        text += row_to_json(r).dump();
        text.push_back('\n');
    }
    try {
        write_file_atomic(path, text);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Io, e.what());
    }
    return rows.size();
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": not an object");
        rows.push_back(row_from_json(j));
    }
    return rows;
}

std::vector<ShardInfo> write_shards(std::vector<ManifestRow> rows, const fs::path& image_root, std::size_t shard_size,
                                    const fs::path& out_dir) {
    if (shard_size == 0) throw Error(ErrorKind::Config, "shard size must be at least 1");
    sort_by_key(rows);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<ShardInfo> shards;
    for (std::size_t start = 0; start < rows.size(); start += shard_size) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.tar", shards.size());
        const fs::path final_path = out_dir / name;
        const fs::path part = out_dir / (std::string(name) + ".part");
        {
            std::ofstream out(part, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::Io, "cannot write " + part.string());
            TarWriter tar(out);
            const std::size_t end = std::min(rows.size(), start + shard_size);
            for (std::size_t i = start; i < end; ++i) {
                const ManifestRow& r = rows[i];
                tar.add_file(r.key + ".jpg", read_file(image_root / r.image_path));
                tar.add_file(r.key + ".txt", std::string_view(r.caption));
                tar.add_file(r.key + ".json", std::string_view(row_to_json(r).dump()));
            }
            tar.finish();
            out.flush();
            if (!out) throw Error(ErrorKind::Io, "write failed for " + part.string());
        }
        fs::rename(part, final_path, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot rename " + part.string() + ": " + ec.message());
        shards.push_back({final_path, std::min(shard_size, rows.size() - start)});
    }
    return shards;
}

std::optional<double> SubsetStats::avg_caption_chars() const {
    if (figure_count == 0) return std::nullopt;
    return caption_chars_sum / static_cast<double>(figure_count);
}

std::optional<double> SubsetStats::avg_caption_words() const {
    if (figure_count == 0) return std::nullopt;
    return caption_words_sum / static_cast<double>(figure_count);
}

void SubsetStats::merge(const SubsetStats& other) {
    figure_count += other.figure_count;
    caption_chars_sum += other.caption_chars_sum;
    caption_words_sum += other.caption_words_sum;
}

DatasetStats compute_stats(const std::vector<ManifestRow>& rows) {
    DatasetStats stats;
    for (const auto& r : rows) {
        SubsetStats one;
        one.figure_count = 1;
        one.caption_chars_sum = static_cast<double>(r.caption_chars);
        one.caption_words_sum = static_cast<double>(r.caption_words);
        stats.per_subset[r.subset].merge(one);
        stats.total.merge(one);
    }
    return stats;
}

DatasetStats compute_stats(const fs::path& manifest) { return compute_stats(read_manifest(manifest)); }

std::string format_stats_table(const DatasetStats& stats) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Dataset", "# figures", "avg caption length", "avg caption words"});
    auto add = [&](const std::string& name, const SubsetStats& s) {
        rows.push_back({name, with_thousands(s.figure_count), format_avg(s.avg_caption_chars()),
                        format_avg(s.avg_caption_words())});
    };
    for (const auto& [subset, s] : stats.per_subset) add(display_name(subset), s);
    add("Total", stats.total);
    return render_table(rows);
}

ordered_json stats_to_json(const DatasetStats& stats) {
    auto one = [](const SubsetStats& s) {
        ordered_json j;
        j["figures"] = s.figure_count;
        const auto chars = s.avg_caption_chars();
        const auto words = s.avg_caption_words();
        j["avg_caption_chars"] = chars ? ordered_json(*chars) : ordered_json(nullptr);
        j["avg_caption_words"] = words ? ordered_json(*words) : ordered_json(nullptr);
        return j;
    };
    ordered_json out;
    out["subsets"] = ordered_json::object();
    for (const auto& [subset, s] : stats.per_subset) {
        ordered_json j = one(s);
        j["dataset"] = display_name(subset);
        out["subsets"][subset] = j;
    }
    out["total"] = one(stats.total);
    return out;
}

std::vector<MixtureEntry> mixture_proportions(const std::vector<std::pair<std::string, std::uint64_t>>& counts) {
    std::uint64_t sum = 0;
    for (const auto& [name, n] : counts) sum += n;
    if (sum == 0) throw Error(ErrorKind::AllZero, "mixture needs at least one positive count");
    std::vector<MixtureEntry> out;
    std::size_t largest = 0;
    int percent_sum = 0;
    for (const auto& [name, n] : counts) {
        MixtureEntry e;
        e.name = name;
        e.count = n;
        e.fraction = static_cast<double>(n) / static_cast<double>(sum);
        e.percent = static_cast<int>(std::floor(e.fraction * 100.0 + 0.5));
        percent_sum += e.percent;
        out.push_back(e);
        if (out.back().fraction > out[largest].fraction) largest = out.size() - 1;
    }
    out[largest].percent += 100 - percent_sum;
    return out;
}

std::string format_mixture_table(const std::vector<MixtureEntry>& entries) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Subset", "# figures", "fraction", "proportion"});
    for (const auto& e : entries) {
        char frac[64];
        std::snprintf(frac, sizeof frac, "%.6f", e.fraction);
        rows.push_back({e.name, with_thousands(e.count), frac, std::to_string(e.percent) + "%"});
    }
    return render_table(rows);
}

ordered_json mixture_to_json(const std::vector<MixtureEntry>& entries) {
    ordered_json out = ordered_json::array();
    for (const auto& e : entries) {
        ordered_json j;
        j["subset"] = e.name;
        j["count"] = e.count;
        j["fraction"] = e.fraction;
        j["percent"] = e.percent;
        out.push_back(j);
    }
    return out;
}

}  // namespace scifig::dataset
