#include "scifig/cli.hpp"

#include <cstdlib>
#include <thread>

#include <CLI11.hpp>

#include "scifig/dataset.hpp"
#include "scifig/decontam.hpp"
#include "scifig/error.hpp"
#include "scifig/fetch.hpp"
#include "scifig/image.hpp"
#include "scifig/pipeline.hpp"
#include "scifig/util/sha256.hpp"

namespace scifig::cli {

namespace fs = std::filesystem;

namespace {

int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::optional<std::string> rasterizer_from(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SCIFIG_RASTERIZER"); env != nullptr && *env != '\0') return std::string(env);
    return std::nullopt;
}

std::pair<std::string, std::string> split_assignment(const std::string& arg, const char* what) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
        throw Error(ErrorKind::Config, std::string(what) + " must look like NAME=VALUE: " + arg);
    }
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

void print_summary(const pipeline::RunSummary& s, const fs::path& out_dir, std::ostream& out) {
    out << s.command << ": " << s.archives_in << " archives (" << s.archives_skipped << " skipped), " << s.pairs_in
        << " graphics considered, " << s.total_rejections() << " rejected, " << s.pairs_out << " pairs written to "
        << (out_dir / pipeline::kManifestName).string() << "\n";
}

struct ExtractOptions {
    std::vector<std::string> inputs;
    std::string out;
    int jobs = default_jobs();
    int resize = image::kTargetSize;
    int quality = image::kDefaultJpegQuality;
    std::string rasterizer;
    int hook_timeout = 120;
    std::uint64_t key_start = 0;
    std::string symbol_table;

    pipeline::PipelineConfig config() const {
        pipeline::PipelineConfig c;
        for (const auto& i : inputs) c.inputs.emplace_back(i);
        c.out_dir = out;
        c.jobs = jobs;
        c.resize = resize;
        c.jpeg_quality = quality;
        c.rasterizer = rasterizer_from(rasterizer);
        c.hook_timeout = std::chrono::seconds(hook_timeout);
        c.key_start = key_start;
        if (!symbol_table.empty()) c.symbol_table = fs::path(symbol_table);
        return c;
    }
};

void add_extract_options(CLI::App* cmd, ExtractOptions& o, bool with_rasterizer) {
    cmd->add_option("inputs", o.inputs, "Archive files or directories")->required();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--jobs", o.jobs, "Worker threads");
    cmd->add_option("--resize", o.resize, "Maximum output side in pixels");
    cmd->add_option("--jpeg-quality", o.quality, "JPEG quality 1-100");
    cmd->add_option("--key-start", o.key_start, "First key number");
    cmd->add_option("--symbol-table", o.symbol_table, "LaTeX symbol table replacing the built-in one");
    if (with_rasterizer) {
        cmd->add_option("--rasterizer", o.rasterizer,
                        "Shell command for pdf/eps/ps with {input} {output} {maxdim}; default $SCIFIG_RASTERIZER");
        cmd->add_option("--hook-timeout", o.hook_timeout, "Rasterizer timeout in seconds");
    }
}

// Normalizes an image the same way extraction does, so index rows and
// queries are described from comparable bytes.
Bytes normalized_jpeg(const fs::path& path) {
    const Bytes raw = read_file(path);
    const auto format = ingest::image_format_from_extension(ingest::path_extension(path.string()));
    const image::Raster r = image::decode_image(raw, format.value_or(ingest::ImageFormat::Jpg), std::nullopt);
    return image::encode_jpeg(image::resize_to_target(r));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Figure-caption dataset builder for arXiv sources and PMC packages", "scifig"};
    app.require_subcommand(1);

    ExtractOptions arxiv;
    auto* cmd_arxiv = app.add_subcommand("extract-arxiv", "Extract pairs from arXiv source archives");
    add_extract_options(cmd_arxiv, arxiv, true);

    ExtractOptions pmc;
    auto* cmd_pmc = app.add_subcommand("extract-pmc", "Extract pairs from PMC OA packages");
    add_extract_options(cmd_pmc, pmc, false);

    pipeline::DecontamConfig dc;
    std::string dc_manifest, dc_index, dc_out;
    dc.jobs = default_jobs();
    bool dc_json = false;
    auto* cmd_decon = app.add_subcommand("decontaminate", "Remove pairs similar to evaluation images");
    cmd_decon->add_option("manifest", dc_manifest, "Manifest to filter")->required();
    cmd_decon->add_option("--index", dc_index, "Descriptor index file (SFDX1)")->required();
    cmd_decon->add_option("--out", dc_out, "Output directory (default: manifest directory)");
    cmd_decon->add_option("--provider", dc.provider, "phash | sidecar:PATH | exec:COMMAND");
    cmd_decon->add_option("--threshold", dc.threshold, "Remove when similarity is above this");
    cmd_decon->add_option("--jobs", dc.jobs, "Worker threads");
    cmd_decon->add_flag("--json", dc_json, "Print the report as JSON");

    std::string st_manifest;
    bool st_json = false;
    auto* cmd_stats = app.add_subcommand("stats", "Figure counts and caption lengths");
    cmd_stats->add_option("manifest", st_manifest, "Manifest file")->required();
    cmd_stats->add_flag("--json", st_json, "Machine-readable output");

    std::string sh_manifest, sh_out;
    long long sh_size = 1000;
    auto* cmd_shard = app.add_subcommand("shard", "Pack a manifest into tar shards");
    cmd_shard->add_option("manifest", sh_manifest, "Manifest file")->required();
    cmd_shard->add_option("--out", sh_out, "Shard directory")->required();
    cmd_shard->add_option("--shard-size", sh_size, "Pairs per shard");

    std::string fe_manifest, fe_out;
    fetch::FetchOptions fe;
    long long fe_backoff_ms = 500;
    auto* cmd_fetch = app.add_subcommand("fetch", "Download or copy source archives");
    cmd_fetch->add_option("manifest", fe_manifest, "Acquisition manifest (JSONL)")->required();
    cmd_fetch->add_option("--out", fe_out, "Destination directory")->required();
    cmd_fetch->add_option("--jobs", fe.parallelism, "Concurrent transfers");
    cmd_fetch->add_option("--attempts", fe.attempts, "Attempts per entry");
    cmd_fetch->add_option("--backoff-ms", fe_backoff_ms, "Initial retry delay");

    std::vector<std::string> mx_counts;
    bool mx_json = false;
    auto* cmd_mix = app.add_subcommand("mixture", "Training-mixture proportions from subset sizes");
    cmd_mix->add_option("counts", mx_counts, "NAME=COUNT per subset")->required();
    cmd_mix->add_flag("--json", mx_json, "Machine-readable output");

    std::vector<std::string> ix_inputs;
    std::string ix_out, ix_provider = "phash";
    auto* cmd_index = app.add_subcommand("build-index", "Describe evaluation images into a descriptor index");
    cmd_index->add_option("inputs", ix_inputs, "LABEL=PATH (image file or directory)")->required();
    cmd_index->add_option("--out", ix_out, "Index file to write")->required();
    cmd_index->add_option("--provider", ix_provider, "phash | sidecar:PATH | exec:COMMAND");

    std::vector<std::string> argv_store{"scifig"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_arxiv->parsed()) {
            const auto config = arxiv.config();
            print_summary(pipeline::run_extract_arxiv(config), config.out_dir, out);
        } else if (cmd_pmc->parsed()) {
            const auto config = pmc.config();
            print_summary(pipeline::run_extract_pmc(config), config.out_dir, out);
        } else if (cmd_decon->parsed()) {
            dc.manifest = dc_manifest;
            dc.index = dc_index;
            if (!dc_out.empty()) dc.out_dir = fs::path(dc_out);
            const auto outcome = pipeline::run_decontaminate(dc);
            if (dc_json) {
                out << pipeline::report_to_json(outcome.report).dump(2) << "\n";
            } else {
                const auto& r = outcome.report;
                out << "decontaminate: " << r.total << " pairs, " << r.removed << " removed, " << r.undecided
                    << " undecided (threshold " << r.threshold << ", provider " << r.provider
                    << (r.provider_paper_faithful ? "" : ", not the paper's descriptor model") << ")\n";
            }
        } else if (cmd_stats->parsed()) {
            const auto stats = dataset::compute_stats(fs::path(st_manifest));
            out << (st_json ? dataset::stats_to_json(stats).dump(2) + "\n" : dataset::format_stats_table(stats));
        } else if (cmd_shard->parsed()) {
            if (sh_size < 1) throw Error(ErrorKind::Config, "--shard-size must be at least 1");
            const fs::path manifest(sh_manifest);
            const auto shards = dataset::write_shards(dataset::read_manifest(manifest), manifest.parent_path(),
                                                      static_cast<std::size_t>(sh_size), sh_out);
            out << "shard: " << shards.size() << " shards written to " << sh_out << "\n";
        } else if (cmd_fetch->parsed()) {
            if (fe.parallelism < 1 || fe.attempts < 1) throw Error(ErrorKind::Config, "--jobs and --attempts must be at least 1");
            fe.initial_backoff = std::chrono::milliseconds(fe_backoff_ms);
            fe.base_dir = fs::path(fe_manifest).parent_path();
            const auto entries = fetch::read_acquisition_manifest(fe_manifest);
            const auto results = fetch::fetch_all(entries, fe_out, fe);
            const fs::path report = fs::path(fe_out) / "fetch_report.jsonl";
            fetch::write_fetch_report(results, report);
            std::size_t ok = 0;
            for (const auto& r : results) ok += r.status == fetch::FetchStatus::Ok ? 1 : 0;
            out << "fetch: " << ok << "/" << results.size() << " OK, report " << report.string() << "\n";
        } else if (cmd_mix->parsed()) {
            std::vector<std::pair<std::string, std::uint64_t>> counts;
            for (const auto& a : mx_counts) {
                const auto [name, value] = split_assignment(a, "count");
                std::size_t used = 0;
                unsigned long long n = 0;
                try {
                    n = std::stoull(value, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != value.size() || value.front() == '-') {
                    throw Error(ErrorKind::Config, "count must be a non-negative integer: " + a);
                }
                counts.emplace_back(name, n);
            }
            const auto mix = dataset::mixture_proportions(counts);
            out << (mx_json ? dataset::mixture_to_json(mix).dump(2) + "\n" : dataset::format_mixture_table(mix));
        } else if (cmd_index->parsed()) {
            const auto provider = decontam::make_provider(ix_provider);
            std::vector<std::vector<float>> rows;
            std::vector<std::string> labels;
            for (const auto& a : ix_inputs) {
                const auto [label, path] = split_assignment(a, "input");
                for (const auto& file : pipeline::list_inputs({fs::path(path)}, {})) {
                    const Bytes jpeg = normalized_jpeg(file);
                    rows.push_back(provider->describe(jpeg, sha256_hex(jpeg)).values);
                    labels.push_back(label);
                }
            }
            decontam::DescriptorIndex::build(rows, labels).write(ix_out);
            out << "build-index: " << rows.size() << " descriptors written to " << ix_out << "\n";
        }
    } catch (const Error& e) {
        err << "scifig: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "scifig: I/O: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "scifig: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace scifig::cli
