#include "scifig/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "scifig/caption.hpp"
#include "scifig/dataset.hpp"
#include "scifig/error.hpp"
#include "scifig/ingest.hpp"
#include "scifig/jats.hpp"
#include "scifig/latex/figures.hpp"
#include "scifig/latex/parser.hpp"
#include "scifig/util/gzip.hpp"
#include "scifig/util/sha256.hpp"
#include "scifig/util/tar.hpp"
#include "scifig/util/text.hpp"

namespace scifig::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::size_t StageCounts::rejected() const {
    std::size_t n = 0;
    for (const auto& [k, v] : rejections) n += v;
    return n;
}

std::size_t StageCounts::removed() const {
    std::size_t n = 0;
    for (const auto& [k, v] : removals) n += v;
    return n;
}

std::size_t RunSummary::total_rejections() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.rejected();
    return n;
}

std::size_t RunSummary::total_removals() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.removed();
    return n;
}

bool RunSummary::accounting_holds() const {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (!stages[i].balanced()) return false;
        if (i == 0 && stages[i].in != pairs_in) return false;
        if (i > 0 && stages[i].in != stages[i - 1].out) return false;
    }
    if (!stages.empty() && stages.back().out != pairs_out) return false;
    return pairs_out + total_rejections() + total_removals() == pairs_in;
}

ordered_json RunSummary::to_json() const {
    ordered_json j;
    j["command"] = command;
    j["archives"] = {{"in", archives_in}, {"skipped", archives_skipped}, {"processed", archives_processed}};
    j["stages"] = ordered_json::array();
    for (const auto& s : stages) {
        ordered_json st;
        st["stage"] = s.name;
        st["in"] = s.in;
        st["rejections"] = s.rejections;
        st["removals"] = s.removals;
        st["out"] = s.out;
        j["stages"].push_back(st);
    }
    j["pairs_in"] = pairs_in;
    j["rejections_total"] = total_rejections();
    j["removals_total"] = total_removals();
    j["pairs_out"] = pairs_out;
    j["accounting_ok"] = accounting_holds();
    j["settings"] = settings;
    return j;
}

RunSummary summary_from_json(const json& j) {
    try {
        RunSummary s;
        s.command = j.at("command").get<std::string>();
        s.archives_in = j.at("archives").at("in").get<std::size_t>();
        s.archives_skipped = j.at("archives").at("skipped").get<std::size_t>();
        s.archives_processed = j.at("archives").at("processed").get<std::size_t>();
        for (const auto& st : j.at("stages")) {
            StageCounts c;
            c.name = st.at("stage").get<std::string>();
            c.in = st.at("in").get<std::size_t>();
            c.out = st.at("out").get<std::size_t>();
            c.rejections = st.at("rejections").get<std::map<std::string, std::size_t>>();
            c.removals = st.at("removals").get<std::map<std::string, std::size_t>>();
            s.stages.push_back(std::move(c));
        }
        s.pairs_in = j.at("pairs_in").get<std::size_t>();
        s.pairs_out = j.at("pairs_out").get<std::size_t>();
        s.settings = j.at("settings");
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, std::string("run summary: ") + e.what());
    }
}

std::vector<fs::path> list_inputs(const std::vector<fs::path>& inputs, const std::vector<std::string>& suffixes) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        std::error_code ec;
        if (fs::is_directory(in, ec)) {
            std::vector<fs::path> found;
            for (auto it = fs::recursive_directory_iterator(in, ec); !ec && it != fs::recursive_directory_iterator();
                 it.increment(ec)) {
                if (!it->is_regular_file()) continue;
                const std::string name = it->path().filename().string();
                if (name.empty() || name.front() == '.') continue;
                const bool wanted = suffixes.empty() || std::any_of(suffixes.begin(), suffixes.end(), [&](const auto& s) {
                                        return ends_with_ci(name, s);
                                    });
                if (wanted) found.push_back(it->path());
            }
            if (ec) throw Error(ErrorKind::Io, "cannot list " + in.string() + ": " + ec.message());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(in, ec)) {
            out.push_back(in);
        } else {
            throw Error(ErrorKind::Io, "input does not exist: " + in.string());
        }
    }
    return out;
}

namespace {

struct Task {
    std::size_t seq = 0;
    std::string paper_id;
    std::string origin;  // input file, plus member name for bulk containers
    Bytes raw;
    std::optional<std::string> read_error;  // ErrorKind name when the bytes could not be read
    std::string read_detail;
};

struct SkipEntry {
    std::string paper_id;
    std::string stage;
    std::string reason;
    std::string detail;
};

struct PaperResult {
    bool skipped = false;
    std::vector<SkipEntry> skips;
    std::vector<ordered_json> rejections;
    std::vector<dataset::ExtractedPair> pairs;  // jpeg bytes already written to disk
    std::vector<StageCounts> stages;
};

// Fixed-capacity FIFO between the reader thread and the workers.
class TaskQueue {
public:
    explicit TaskQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

    void push(Task t) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_; });
        items_.push_back(std::move(t));
        not_empty_.notify_one();
    }
    std::optional<Task> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        Task t = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return t;
    }
    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<Task> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

// Runs `process` over every task from `produce` on `jobs` workers and
// returns results ordered by task sequence number.
std::vector<PaperResult> run_pool(int jobs, const std::function<void(const std::function<void(Task)>&)>& produce,
                                  const std::function<PaperResult(Task&)>& process) {
    TaskQueue queue(static_cast<std::size_t>(jobs) * 2);
    std::mutex results_mu;
    std::map<std::size_t, PaperResult> results;
    std::exception_ptr failure;
    auto worker = [&] {
        while (auto task = queue.pop()) {
            try {
                PaperResult r = process(*task);
                std::lock_guard lock(results_mu);
                results.emplace(task->seq, std::move(r));
            } catch (...) {
                std::lock_guard lock(results_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < std::max(1, jobs); ++i) threads.emplace_back(worker);
    try {
        produce([&](Task t) { queue.push(std::move(t)); });
    } catch (...) {
        queue.close();
        for (auto& t : threads) t.join();
        throw;
    }
    queue.close();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    std::vector<PaperResult> ordered;
    ordered.reserve(results.size());
    for (auto& [seq, r] : results) ordered.push_back(std::move(r));
    return ordered;
}

std::vector<StageCounts> make_stages(std::initializer_list<const char*> names) {
    std::vector<StageCounts> s;
    for (const char* n : names) s.push_back(StageCounts{n, 0, 0, {}, {}});
    return s;
}

ordered_json rejection_json(const std::string& paper_id, const std::string& doc_path, latex::Span span,
                            std::string_view reason, std::string_view stage) {
    ordered_json j;
    j["paper_id"] = paper_id;
    j["tex_path"] = doc_path;
    j["span"] = {span.begin, span.end};
    j["reason"] = reason;
    j["stage"] = stage;
    return j;
}

// Settings shared by all workers of one extraction run.
struct ExtractContext {
    const PipelineConfig* config = nullptr;
    const caption::SubstitutionTable* table = nullptr;
    std::optional<image::RasterizerHook> hook;
    fs::path image_dir;
};

std::string image_failure_reason(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Hook: return "HookError";
        case ErrorKind::VectorNoHook: return "VectorNoHook";
        default: return "DecodeError";
    }
}

// Decodes, normalizes and stores one image; the result per member is
// cached because several figures may share a file.
struct ImageOutcome {
    std::optional<std::string> failure;
    std::string sha256;
    int width = 0;
    int height = 0;
};

ImageOutcome normalize_member(const ExtractContext& ctx, const ingest::ArchiveMember& member) {
    ImageOutcome out;
    try {
        const auto format = member.image_format.value_or(ingest::ImageFormat::Jpg);
        const image::Raster raster = image::decode_image(member.data, format, ctx.hook);
        const image::Raster resized = image::resize_to_target(raster, ctx.config->resize);
        const Bytes jpeg = image::encode_jpeg(resized, ctx.config->jpeg_quality);
        out.sha256 = sha256_hex(jpeg);
        out.width = resized.width;
        out.height = resized.height;
        const fs::path dest = ctx.image_dir / (out.sha256 + ".jpg");
        std::error_code ec;
        if (!fs::exists(dest, ec)) write_file_atomic(dest, jpeg);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        out.failure = image_failure_reason(e.kind());
    }
    return out;
}

// Caption and image stages for one candidate.
void finish_candidate(const ExtractContext& ctx, const std::string& subset, const ingest::PaperArchive& archive,
                      const std::string& doc_path, const std::string& graphics_path, latex::Span span,
                      caption::NormalizedCaption cap, std::map<std::string, ImageOutcome>& cache, PaperResult& r) {
    StageCounts& caption_stage = r.stages[1];
    StageCounts& image_stage = r.stages[2];
    ++caption_stage.in;
    if (cap.text.empty()) {
        ++caption_stage.rejections["EmptyCaption"];
        r.rejections.push_back(rejection_json(archive.paper_id, doc_path, span, "EmptyCaption", "caption_text"));
        return;
    }
    ++caption_stage.out;
    ++image_stage.in;
    auto it = cache.find(graphics_path);
    if (it == cache.end()) {
        const ingest::ArchiveMember* member = archive.find(graphics_path);
        ImageOutcome o;
        if (member == nullptr) {
            o.failure = "DecodeError";
        } else {
            o = normalize_member(ctx, *member);
        }
        it = cache.emplace(graphics_path, std::move(o)).first;
    }
    const ImageOutcome& img = it->second;
    if (img.failure) {
        ++image_stage.rejections[*img.failure];
        r.rejections.push_back(rejection_json(archive.paper_id, doc_path, span, *img.failure, "imageproc"));
        return;
    }
    ++image_stage.out;
    dataset::ExtractedPair p;
    p.subset = subset;
    p.paper_id = archive.paper_id;
    p.source_path = graphics_path;
    p.document_path = doc_path;
    p.caption_span = span;
    p.caption = std::move(cap);
    p.width = img.width;
    p.height = img.height;
    p.image_sha256 = img.sha256;
    r.pairs.push_back(std::move(p));
}

void skip(PaperResult& r, const std::string& paper_id, std::string stage, std::string reason, std::string detail = {}) {
    r.skipped = true;
    r.skips.push_back({paper_id, std::move(stage), std::move(reason), std::move(detail)});
}

void note_member_issues(PaperResult& r, const ingest::PaperArchive& archive) {
    for (const auto& issue : archive.issues) r.skips.push_back({archive.paper_id, "ingest", issue.reason, issue.path});
}

PaperResult process_arxiv(const ExtractContext& ctx, Task& task) {
    PaperResult r;
    r.stages = make_stages({"latex_figures", "caption_text", "imageproc"});
    if (task.read_error) {
        skip(r, task.paper_id, "ingest", *task.read_error, task.read_detail);
        return r;
    }
    ingest::Submission sub;
    try {
        sub = ingest::open_submission(task.raw);
    } catch (const Error& e) {
        skip(r, task.paper_id, "ingest", std::string(to_string(e.kind())), e.what());
        return r;
    }
    task.raw = Bytes();
    if (sub.kind != ingest::SourceKind::LatexProjectTar) {
        skip(r, task.paper_id, "ingest", std::string(ingest::to_string(sub.kind)));
        return r;
    }
    ingest::PaperArchive archive;
    try {
        archive = ingest::enumerate_members(sub.payload, task.paper_id);
    } catch (const Error& e) {
        skip(r, task.paper_id, "ingest", std::string(to_string(e.kind())), e.what());
        return r;
    }
    sub.payload = Bytes();
    note_member_issues(r, archive);
    std::map<std::string, ImageOutcome> cache;
    for (const ingest::ArchiveMember* tex : archive.tex_sources()) {
        const latex::TexDocument doc = latex::parse_tex(latex::decode_tex(tex->data));
        const latex::CandidateReport report = latex::find_figure_candidates(doc, archive, tex->path);
        StageCounts& fig_stage = r.stages[0];
        fig_stage.in += report.graphics_seen;
        fig_stage.out += report.candidates.size();
        for (const auto& rej : report.rejections) {
            ++fig_stage.rejections[std::string(latex::to_string(rej.reason))];
            r.rejections.push_back(
                rejection_json(rej.paper_id, rej.tex_path, rej.span, latex::to_string(rej.reason), "latex_figures"));
        }
        for (const auto& cand : report.candidates) {
            finish_candidate(ctx, "arxiv", archive, tex->path, cand.graphics_path, cand.caption_span,
                             caption::normalize_caption(cand.caption_source, *ctx.table), cache, r);
        }
    }
    return r;
}

PaperResult process_pmc(const ExtractContext& ctx, Task& task) {
    PaperResult r;
    r.stages = make_stages({"jats_figures", "caption_text", "imageproc"});
    if (task.read_error) {
        skip(r, task.paper_id, "ingest", *task.read_error, task.read_detail);
        return r;
    }
    ingest::PaperArchive archive;
    try {
        archive = ingest::enumerate_pmc_package(task.raw, task.paper_id);
    } catch (const Error& e) {
        skip(r, task.paper_id, "ingest", std::string(to_string(e.kind())), e.what());
        return r;
    }
    task.raw = Bytes();
    note_member_issues(r, archive);
    const ingest::ArchiveMember* nxml = archive.find(*archive.nxml_path);
    jats::XmlDocument doc;
    try {
        doc = jats::parse_jats(nxml->data);
    } catch (const Error& e) {
        skip(r, task.paper_id, "jats_figures", std::string(to_string(e.kind())), e.what());
        return r;
    }
    const jats::FigureReport report = jats::extract_jats_figures(doc, archive);
    StageCounts& fig_stage = r.stages[0];
    fig_stage.in += report.slots_seen;
    fig_stage.out += report.candidates.size();
    for (const auto& rej : report.rejections) {
        ++fig_stage.rejections[std::string(jats::to_string(rej.reason))];
        r.rejections.push_back(
            rejection_json(rej.paper_id, rej.nxml_path, rej.span, jats::to_string(rej.reason), "jats_figures"));
    }
    std::map<std::string, ImageOutcome> cache;
    for (const auto& cand : report.candidates) {
        finish_candidate(ctx, "pmc", archive, cand.tex_path, cand.graphics_path, cand.caption_span,
                         caption::normalize_plain_caption(cand.caption_source), cache, r);
    }
    return r;
}

std::string file_name(const fs::path& p) { return p.filename().string(); }

Task read_task(std::size_t seq, const fs::path& path) {
    Task t;
    t.seq = seq;
    t.paper_id = ingest::paper_id_from_filename(file_name(path));
    t.origin = path.string();
    try {
        t.raw = read_file(path);
    } catch (const Error& e) {
        t.read_error = std::string(to_string(e.kind()));
        t.read_detail = e.what();
    }
    return t;
}

std::string member_basename(const std::string& name) {
    const auto slash = name.find_last_of('/');
    return slash == std::string::npos ? name : name.substr(slash + 1);
}

// An uncompressed tar whose first member that is not a PDF is a .gz file is
// an arXiv bulk container of per-paper submissions. Otherwise the file is
// one submission.
void produce_arxiv(const fs::path& path, std::size_t& seq, const std::function<void(Task)>& emit) {
    Bytes head(512);
    {
        FileSource probe(path);
        head.resize(probe.read_full(head));
    }
    if (has_gzip_magic(head) || !looks_like_tar(head)) {
        emit(read_task(seq++, path));
        return;
    }
    FileSource source(path);
    TarReader reader(source);
    std::vector<TarEntry> pending;
    bool bulk = false;
    try {
        while (auto entry = reader.next()) {
            if (entry->type != TarEntryType::Regular) continue;
            pending.push_back(std::move(*entry));
            if (ends_with_ci(pending.back().name, ".pdf")) continue;
            bulk = ends_with_ci(pending.back().name, ".gz");
            break;
        }
    } catch (const Error&) {
        bulk = false;
    }
    if (!bulk) {
        emit(read_task(seq++, path));
        return;
    }
    auto emit_entry = [&](TarEntry& e) {
        Task t;
        t.seq = seq++;
        t.paper_id = ingest::paper_id_from_filename(member_basename(e.name));
        t.origin = path.string() + ":" + e.name;
        t.raw = std::move(e.data);
        emit(std::move(t));
    };
    for (auto& e : pending) emit_entry(e);
    try {
        while (auto entry = reader.next()) {
            if (entry->type != TarEntryType::Regular) continue;
            emit_entry(*entry);
        }
    } catch (const Error& e) {
        Task t;
        t.seq = seq++;
        t.paper_id = ingest::paper_id_from_filename(file_name(path));
        t.origin = path.string();
        t.read_error = std::string(to_string(e.kind()));
        t.read_detail = e.what();
        emit(std::move(t));
    }
}

void validate(const PipelineConfig& c) {
    if (c.out_dir.empty()) throw Error(ErrorKind::Config, "--out is required");
    if (c.jobs < 1) throw Error(ErrorKind::Config, "--jobs must be at least 1");
    if (c.resize < 1) throw Error(ErrorKind::Config, "--resize must be at least 1");
    if (c.jpeg_quality < 1 || c.jpeg_quality > 100) throw Error(ErrorKind::Config, "--jpeg-quality must be in 1..100");
}

// Creates the output directory and proves it is writable.
void prepare_out_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out / "images", ec);
    if (ec) throw Error(ErrorKind::Config, "cannot create output directory " + out.string() + ": " + ec.message());
    const fs::path probe = out / ".scifig-write-probe";
    {
        std::ofstream f(probe);
        if (!f) throw Error(ErrorKind::Config, "output directory is not writable: " + out.string());
    }
    fs::remove(probe, ec);
}

void write_jsonl(const fs::path& path, const std::vector<ordered_json>& rows) {
    std::string text;
    for (const auto& r : rows) text += r.dump() + "\n";
    write_file_atomic(path, text);
}

ordered_json settings_json(const PipelineConfig& c, const caption::SubstitutionTable& table) {
    ordered_json s;
    s["pipeline_version"] = dataset::kPipelineVersion;
    s["resize"] = c.resize;
    s["jpeg_quality"] = c.jpeg_quality;
    s["codec"] = image::codec_description(c.jpeg_quality);
    s["rasterizer"] = c.rasterizer ? ordered_json(*c.rasterizer) : ordered_json(nullptr);
    s["key_start"] = c.key_start;
    s["substitution_table_version"] = table.version();
    s["substitution_table_sha256"] = table.sha256();
    return s;
}

RunSummary run_extract(const PipelineConfig& config, const std::string& subset) {
    validate(config);
    std::vector<fs::path> files;
    files = list_inputs(config.inputs, subset == "pmc" ? std::vector<std::string>{".tar.gz", ".tgz"}
                                                        : std::vector<std::string>{});
    prepare_out_dir(config.out_dir);

    std::optional<caption::SubstitutionTable> custom;
    if (config.symbol_table) custom = caption::SubstitutionTable::load(*config.symbol_table);
    const caption::SubstitutionTable& table = custom ? *custom : caption::SubstitutionTable::builtin();

    ExtractContext ctx;
    ctx.config = &config;
    ctx.table = &table;
    ctx.image_dir = config.out_dir / "images";
    if (config.rasterizer && !config.rasterizer->empty()) {
        ctx.hook = image::RasterizerHook{*config.rasterizer,
                                         std::chrono::duration_cast<std::chrono::milliseconds>(config.hook_timeout),
                                         config.resize};
    }

    auto produce = [&](const std::function<void(Task)>& emit) {
        std::size_t seq = 0;
        for (const auto& f : files) {
            if (subset == "arxiv") {
                produce_arxiv(f, seq, emit);
            } else {
                emit(read_task(seq++, f));
            }
        }
    };
    auto process = [&](Task& t) { return subset == "arxiv" ? process_arxiv(ctx, t) : process_pmc(ctx, t); };
    std::vector<PaperResult> results = run_pool(config.jobs, produce, process);

    RunSummary summary;
    summary.command = subset == "arxiv" ? "extract-arxiv" : "extract-pmc";
    summary.stages = make_stages({subset == "arxiv" ? "latex_figures" : "jats_figures", "caption_text", "imageproc"});
    std::vector<ordered_json> skips;
    std::vector<ordered_json> rejections;
    std::vector<dataset::ExtractedPair> pairs;
    for (auto& r : results) {
        ++summary.archives_in;
        if (r.skipped) {
            ++summary.archives_skipped;
        } else {
            ++summary.archives_processed;
        }
        for (std::size_t i = 0; i < r.stages.size(); ++i) {
            StageCounts& dst = summary.stages[i];
            dst.in += r.stages[i].in;
            dst.out += r.stages[i].out;
            for (const auto& [k, v] : r.stages[i].rejections) dst.rejections[k] += v;
        }
        for (const auto& s : r.skips) {
            ordered_json j;
            j["paper_id"] = s.paper_id;
            j["stage"] = s.stage;
            j["reason"] = s.reason;
            j["detail"] = s.detail;
            skips.push_back(std::move(j));
        }
        for (auto& j : r.rejections) rejections.push_back(std::move(j));
        for (auto& p : r.pairs) pairs.push_back(std::move(p));
    }
    summary.pairs_in = summary.stages.front().in;
    summary.pairs_out = pairs.size();
    summary.settings = settings_json(config, table);

    dataset::assign_keys(pairs, config.key_start);
    dataset::ManifestContext mctx;
    mctx.substitution_table_sha256 = table.sha256();
    mctx.codec = image::codec_description(config.jpeg_quality);
    mctx.rasterizer = ctx.hook ? std::optional<std::string>(ctx.hook->command) : std::nullopt;
    std::vector<dataset::ManifestRow> rows;
    rows.reserve(pairs.size());
    for (const auto& p : pairs) rows.push_back(dataset::make_row(p, mctx));
    dataset::write_manifest(std::move(rows), config.out_dir / kManifestName);
    write_jsonl(config.out_dir / kRejectionsName, rejections);
    write_jsonl(config.out_dir / kSkipsName, skips);
    write_file_atomic(config.out_dir / kSummaryName, summary.to_json().dump(2) + "\n");
    return summary;
}

}  // namespace

RunSummary run_extract_arxiv(const PipelineConfig& config) { return run_extract(config, "arxiv"); }

RunSummary run_extract_pmc(const PipelineConfig& config) { return run_extract(config, "pmc"); }

ordered_json report_to_json(const decontam::DecontamReport& report) {
    ordered_json j;
    j["total"] = report.total;
    j["removed"] = report.removed;
    j["undecided"] = report.undecided;
    j["kept"] = report.total - report.removed - report.undecided;
    j["removal_rate"] = report.removal_rate;
    j["per_eval_dataset_hits"] = report.per_eval_dataset_hits;
    j["threshold"] = report.threshold;
    j["provider"] = report.provider;
    j["provider_paper_faithful"] = report.provider_paper_faithful;
    j["similarity_input"] = report.similarity_input;
    return j;
}

DecontamOutcome run_decontaminate(const DecontamConfig& config) {
    if (config.jobs < 1) throw Error(ErrorKind::Config, "--jobs must be at least 1");
    const auto provider = decontam::make_provider(config.provider);
    const decontam::DescriptorIndex index = decontam::DescriptorIndex::load(config.index);
    const std::vector<dataset::ManifestRow> rows = dataset::read_manifest(config.manifest);
    const fs::path manifest_dir = config.manifest.parent_path();
    const fs::path out_dir = config.out_dir.value_or(manifest_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Config, "cannot create output directory " + out_dir.string());

    std::vector<std::optional<decontam::Descriptor>> descriptors(rows.size());
    std::vector<std::string> provider_errors(rows.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            try {
                const Bytes jpeg = read_file(manifest_dir / rows[i].image_path);
                descriptors[i] = provider->describe(jpeg, rows[i].image_sha256);
            } catch (const Error& e) {
                provider_errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < config.jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    decontam::FilterResult res = decontam::filter_pairs(descriptors, index, config.threshold);
    res.report.provider = provider->name();
    res.report.provider_paper_faithful = provider->paper_faithful();

    // Output rows point at the same image files as the input manifest.
    const fs::path image_base = fs::relative(fs::absolute(manifest_dir), fs::absolute(out_dir), ec);
    auto relocate = [&](dataset::ManifestRow row) {
        if (!image_base.empty() && image_base != ".") row.image_path = (image_base / row.image_path).generic_string();
        return row;
    };
    std::vector<dataset::ManifestRow> kept;
    for (std::size_t i : res.kept) kept.push_back(relocate(rows[i]));
    dataset::write_manifest(std::move(kept), out_dir / kKeptName);
    std::vector<ordered_json> removed;
    for (std::size_t i : res.removed) {
        ordered_json j = dataset::row_to_json(relocate(rows[i]));
        j["similarity"] = res.matches[i]->score;
        j["matched_dataset"] = res.matches[i]->label;
        j["matched_row"] = res.matches[i]->row;
        removed.push_back(std::move(j));
    }
    write_jsonl(out_dir / kRemovedName, removed);
    std::vector<ordered_json> undecided;
    for (std::size_t i : res.undecided) {
        ordered_json j = dataset::row_to_json(relocate(rows[i]));
        j["provider_error"] = provider_errors[i];
        undecided.push_back(std::move(j));
    }
    write_jsonl(out_dir / kUndecidedName, undecided);
    write_file_atomic(out_dir / kDecontamReportName, report_to_json(res.report).dump(2) + "\n");

    RunSummary summary;
    summary.command = "decontaminate";
    StageCounts stage{"decontam", rows.size(), res.kept.size(), {}, {}};
    if (!res.undecided.empty()) stage.rejections["ProviderError"] = res.undecided.size();
    if (!res.removed.empty()) stage.removals["NearDuplicate"] = res.removed.size();
    summary.stages.push_back(stage);
    summary.pairs_in = rows.size();
    summary.pairs_out = res.kept.size();
    summary.settings = {{"threshold", config.threshold},
                        {"provider", provider->name()},
                        {"index", config.index.string()},
                        {"index_rows", index.size()},
                        {"index_dim", index.dim()}};
    write_file_atomic(out_dir / kDecontamSummaryName, summary.to_json().dump(2) + "\n");
    return {res.report, summary};
}

}  // namespace scifig::pipeline
