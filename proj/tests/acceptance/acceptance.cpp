// One PASS/FAIL line per acceptance criterion. Every tolerance is pinned
// here. `--freeze` rewrites the golden manifests, but only after the run
// agrees with the hand-derived expectation tables; `--keep DIR` leaves the
// run outputs in DIR for inspection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csetjmp>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <jpeglib.h>

#include "json.hpp"
#include "scifig/caption.hpp"
#include "scifig/dataset.hpp"
#include "scifig/decontam.hpp"
#include "scifig/error.hpp"
#include "scifig/image.hpp"
#include "scifig/pipeline.hpp"
#include "scifig/util/bytes.hpp"
#include "support/fixtures.hpp"
#include "support/imagegen.hpp"

using namespace scifig;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kGoldenSeconds = 5.0;
constexpr double kThroughputSeconds = 30.0;
constexpr std::size_t kThroughputFiles = 1000;
constexpr std::size_t kMinArxivProjects = 20;
constexpr std::size_t kMinPmcPackages = 10;
constexpr std::size_t kMinCaptionCases = 50;
constexpr int kIdempotenceCompositions = 10000;
constexpr double kThresholdStep = 1e-6;
constexpr double kOracleTolerance = 1e-6;
constexpr int kOracleInstances = 100;
constexpr double kStatsTolerance = 1e-9;
constexpr int kMaxSide = 512;

struct Options {
    bool freeze = false;
    std::optional<fs::path> keep;
};

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
};

int g_failures = 0;

void report(const std::string& id, const std::string& title, const Outcome& o, const std::string& measured) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << title;
    if (!measured.empty()) std::cout << " [" << measured << "]";
    std::cout << "\n";
    for (std::size_t i = 0; i < o.notes.size() && i < 10; ++i) std::cout << "    " << o.notes[i] << "\n";
    if (o.notes.size() > 10) std::cout << "    ... " << o.notes.size() - 10 << " more\n";
    if (!o.pass) ++g_failures;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::string> sorted_lines(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

std::string join_tab(const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t i = 0; i < fields.size(); ++i) s += (i ? "\t" : "") + fields[i];
    return s;
}

void compare_lists(Outcome& o, const std::string& what, const std::vector<std::string>& want,
                   const std::vector<std::string>& got) {
    if (want == got) return;
    o.check(false, what + ": expected " + std::to_string(want.size()) + " rows, got " + std::to_string(got.size()));
    for (const auto& w : want) {
        if (std::find(got.begin(), got.end(), w) == got.end()) o.check(false, "  missing: " + w);
    }
    for (const auto& g : got) {
        if (std::find(want.begin(), want.end(), g) == want.end()) o.check(false, "  unexpected: " + g);
    }
}

// Summary-level accounting recomputed from the stage table on disk.
bool summary_balances(const nlohmann::json& j, std::string& why) {
    std::uint64_t rejections = 0;
    std::uint64_t removals = 0;
    std::optional<std::uint64_t> previous_out;
    for (const auto& st : j.at("stages")) {
        std::uint64_t r = 0;
        std::uint64_t m = 0;
        for (const auto& [k, v] : st.at("rejections").items()) r += v.get<std::uint64_t>();
        for (const auto& [k, v] : st.at("removals").items()) m += v.get<std::uint64_t>();
        const auto in = st.at("in").get<std::uint64_t>();
        const auto out = st.at("out").get<std::uint64_t>();
        if (in != out + r + m) {
            why = "stage " + st.at("stage").get<std::string>() + " does not balance";
            return false;
        }
        if (previous_out && *previous_out != in) {
            why = "stage " + st.at("stage").get<std::string>() + " does not chain";
            return false;
        }
        previous_out = out;
        rejections += r;
        removals += m;
    }
    const auto pairs_in = j.at("pairs_in").get<std::uint64_t>();
    const auto pairs_out = j.at("pairs_out").get<std::uint64_t>();
    if (pairs_out != pairs_in - rejections - removals) {
        why = "pairs_out != pairs_in - rejections - removals";
        return false;
    }
    if (!j.at("accounting_ok").get<bool>()) {
        why = "accounting_ok is false";
        return false;
    }
    return true;
}

std::vector<fs::path> g_summaries;

// The smoke target is a 4-core laptop.
int worker_count() { return static_cast<int>(std::max(1u, std::min(4u, std::thread::hardware_concurrency()))); }

struct CorpusRun {
    fs::path out;
    pipeline::RunSummary summary;
    double seconds = 0;
};

CorpusRun extract(const std::string& subset, const fs::path& in, const fs::path& out, int jobs) {
    pipeline::PipelineConfig cfg;
    cfg.inputs = {in};
    cfg.out_dir = out;
    cfg.jobs = jobs;
    const auto t0 = Clock::now();
    CorpusRun r;
    r.summary = subset == "arxiv" ? pipeline::run_extract_arxiv(cfg) : pipeline::run_extract_pmc(cfg);
    r.seconds = seconds_since(t0);
    r.out = out;
    g_summaries.push_back(out / pipeline::kSummaryName);
    return r;
}

std::size_t fixture_count(const std::string& subset) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(testing::fixtures_dir() / subset)) n += e.is_directory() ? 1 : 0;
    return n;
}

// Rule fidelity against the hand tables, then byte identity with the golden.
void golden_suite(const std::string& id, const std::string& title, const std::string& subset, std::size_t min_count,
                  const CorpusRun& run, const Options& opt) {
    Outcome o;
    const std::size_t fixtures = fixture_count(subset);
    o.check(fixtures >= min_count, "only " + std::to_string(fixtures) + " fixtures");

    std::vector<std::string> want_pairs;
    for (const auto& row : testing::read_tsv(testing::golden_dir() / (subset + "_expected_pairs.tsv"))) {
        want_pairs.push_back(join_tab(row));
    }
    std::vector<std::string> got_pairs;
    for (const auto& r : dataset::read_manifest(run.out / pipeline::kManifestName)) {
        got_pairs.push_back(join_tab({r.paper_id, r.source_path, std::to_string(r.width), std::to_string(r.height),
                                      r.caption}));
    }
    compare_lists(o, "pairs", want_pairs, got_pairs);

    std::vector<std::string> want_outcomes;
    for (const auto& row : testing::read_tsv(testing::golden_dir() / (subset + "_expected_outcomes.tsv"))) {
        want_outcomes.push_back(join_tab(row));
    }
    std::vector<std::string> got_outcomes;
    for (const auto& line : testing::read_lines(run.out / pipeline::kRejectionsName)) {
        const auto j = nlohmann::json::parse(line);
        got_outcomes.push_back(join_tab({"rejection", j.at("paper_id").get<std::string>(),
                                         j.at("stage").get<std::string>(), j.at("reason").get<std::string>()}));
    }
    for (const auto& line : testing::read_lines(run.out / pipeline::kSkipsName)) {
        const auto j = nlohmann::json::parse(line);
        got_outcomes.push_back(join_tab({"skip", j.at("paper_id").get<std::string>(), j.at("stage").get<std::string>(),
                                         j.at("reason").get<std::string>()}));
    }
    compare_lists(o, "rejections and skips", sorted_lines(want_outcomes), sorted_lines(got_outcomes));

    const fs::path golden = testing::golden_dir() / (subset + "_manifest.jsonl");
    const std::string produced = testing::read_text(run.out / pipeline::kManifestName);
    if (opt.freeze && o.pass) {
        write_file_atomic(golden, std::string_view(produced));
        std::cout << "froze " << golden.string() << "\n";
    }
    if (!fs::exists(golden)) {
        o.check(false, "golden manifest missing; run with --freeze");
    } else {
        o.check(testing::read_text(golden) == produced, "manifest differs from " + golden.filename().string());
    }
    o.check(run.seconds < kGoldenSeconds, "runtime " + fixed(run.seconds) + " s");
    report(id, title, o,
           std::to_string(fixtures) + " fixtures, " + std::to_string(got_pairs.size()) + " pairs, " +
               fixed(run.seconds) + " s < " + fixed(kGoldenSeconds, 0) + " s");
}

void caption_suite() {
    Outcome o;
    const auto cases = testing::read_caption_cases(testing::golden_dir() / "captions.txt");
    o.check(cases.size() >= kMinCaptionCases, "only " + std::to_string(cases.size()) + " caption cases");
    std::size_t golden_ok = 0;
    for (const auto& c : cases) {
        const std::string got = caption::normalize_caption(c.input).text;
        if (got == c.expected) {
            ++golden_ok;
        } else {
            o.check(false, c.name + ": got \"" + got + "\"");
        }
    }

    // The marker contract on its own: every reference and citation command
    // becomes exactly one marker.
    const auto markers = caption::normalize_caption("\\ref{a} \\eqref{b} \\autoref{c} \\cite{d,e} \\citep[p.~1]{f}");
    o.check(markers.text == "<ref> <ref> <ref> <cit.> <cit.>", "marker text: " + markers.text);
    o.check(markers.replacements.ref == 3 && markers.replacements.cit == 2, "marker counts");

    // Idempotence over random compositions of rule-exercising fragments.
    const std::vector<std::string> fragments = {
        "plain words ", "\\ref{a}", "\\cite{b,c}", "$\\alpha^2$", "\\textbf{bold}", "\\'e", "\\\"{o}", "---",
        "--", "``", "''", "`", "'", "~", "\\%", "\\&", "\\_", "{", "}", "$", "\\\\", "\\,", "\\url{x~y}",
        "\\verb|q_r|", "% comment\n", "\n", "  ", "\\unknown{arg}", "\\foo ", "\\frac{1}{2}", "\\sqrt{x}",
        "\\emph{", "\\label{l}", "\\[ y \\]", "\\href{u}{t}", "\\ss ", "\\S", "-", "\\-", "\\textcolor{red}{c}",
        "é", "α", "<ref>", "<cit.>", "\\c{c}", "\\LaTeX", "#", "&", "^", "_"};
    std::mt19937 rng(7);
    std::uniform_int_distribution<std::size_t> count(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, fragments.size() - 1);
    int stable = 0;
    for (int i = 0; i < kIdempotenceCompositions; ++i) {
        std::string src;
        const std::size_t n = count(rng);
        for (std::size_t k = 0; k < n; ++k) src += fragments[pick(rng)];
        const std::string once = caption::normalize_caption(src).text;
        if (caption::normalize_caption(once).text == once) {
            ++stable;
        } else {
            o.check(false, "not idempotent: " + src);
        }
    }
    report("AC3", "caption normalization golden table and idempotence", o,
           std::to_string(golden_ok) + "/" + std::to_string(cases.size()) + " golden, " + std::to_string(stable) +
               "/" + std::to_string(kIdempotenceCompositions) + " idempotent");
}

std::vector<float> random_vector(std::mt19937& rng, std::size_t dim) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = n(rng);
    return v;
}

// Unit descriptor whose first component is exactly `target` after
// normalization; walks the second component one ulp at a time.
std::optional<decontam::Descriptor> with_first_component(float target) {
    float y = static_cast<float>(std::sqrt(1.0 - static_cast<double>(target) * target));
    for (int step = 0; step < 4096; ++step) {
        const float cand = step % 2 == 0 ? std::nextafter(y, 2.0f) : std::nextafter(y, 0.0f);
        for (float yy : {y, cand}) {
            auto d = decontam::make_descriptor({target, yy});
            if (d.values[0] == target) return d;
        }
        y = cand;
    }
    return std::nullopt;
}

void decontam_suite() {
    using namespace decontam;
    Outcome o;

    // Threshold boundary, compared in single precision.
    const float at = static_cast<float>(kDefaultThreshold);
    const float above = static_cast<float>(kDefaultThreshold + kThresholdStep);
    const DescriptorIndex axis = DescriptorIndex::build({{1.0f, 0.0f}}, {"eval"});
    const auto d_at = with_first_component(at);
    const auto d_above = with_first_component(above);
    o.check(d_at && d_above, "could not construct boundary descriptors");
    if (d_at && d_above) {
        const FilterResult r = filter_pairs({*d_at, *d_above}, axis);
        o.check(r.kept == std::vector<std::size_t>{0}, "score at the threshold was not kept");
        o.check(r.removed == std::vector<std::size_t>{1}, "score above the threshold was not removed");
    }

    // Planted duplicates among descriptors orthogonal to the index span.
    std::mt19937 rng(2024);
    const std::size_t dim = 128;
    const std::size_t rows = 50;
    std::vector<std::vector<float>> basis;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows; ++i) {
        basis.push_back(random_vector(rng, dim));
        labels.push_back(i % 2 == 0 ? "cifar10" : "imagenet");
    }
    const DescriptorIndex index = DescriptorIndex::build(basis, labels);
    std::vector<std::vector<double>> q;
    for (const auto& b : basis) {
        std::vector<double> v(b.begin(), b.end());
        for (const auto& u : q) {
            double p = 0;
            for (std::size_t k = 0; k < dim; ++k) p += v[k] * u[k];
            for (std::size_t k = 0; k < dim; ++k) v[k] -= p * u[k];
        }
        double n = 0;
        for (double x : v) n += x * x;
        for (double& x : v) x /= std::sqrt(n);
        q.push_back(v);
    }
    const std::vector<std::size_t> planted = {17, 500, 999};
    std::vector<std::optional<Descriptor>> items;
    for (std::size_t i = 0; i < 1000; ++i) {
        if (std::find(planted.begin(), planted.end(), i) != planted.end()) {
            std::vector<float> v = basis[i % rows];
            std::normal_distribution<float> noise(0.0f, 0.01f);
            for (auto& x : v) x += noise(rng);
            items.push_back(make_descriptor(v));
            continue;
        }
        const auto r = random_vector(rng, dim);
        std::vector<double> v(r.begin(), r.end());
        for (const auto& u : q) {
            double p = 0;
            for (std::size_t k = 0; k < dim; ++k) p += v[k] * u[k];
            for (std::size_t k = 0; k < dim; ++k) v[k] -= p * u[k];
        }
        items.push_back(make_descriptor(std::vector<float>(v.begin(), v.end())));
    }
    const FilterResult planted_run = filter_pairs(items, index);
    o.check(planted_run.removed == planted, "planted removal set differs; removed " +
                                                std::to_string(planted_run.removed.size()));

    // max_similarity against a long-double brute force.
    double worst = 0;
    std::mt19937 orng(99);
    for (int inst = 0; inst < kOracleInstances; ++inst) {
        const std::size_t d = 1 + orng() % 64;
        const std::size_t n = 1 + orng() % 200;
        std::vector<std::vector<float>> raw;
        std::vector<std::string> lab;
        for (std::size_t i = 0; i < n; ++i) {
            raw.push_back(random_vector(orng, d));
            lab.push_back("d" + std::to_string(i % 3));
        }
        const auto query = random_vector(orng, d);
        const Match m = max_similarity(make_descriptor(query), DescriptorIndex::build(raw, lab));
        long double best = -2;
        for (std::size_t i = 0; i < n; ++i) {
            long double dp = 0, na = 0, nb = 0;
            for (std::size_t k = 0; k < d; ++k) {
                dp += static_cast<long double>(raw[i][k]) * query[k];
                na += static_cast<long double>(raw[i][k]) * raw[i][k];
                nb += static_cast<long double>(query[k]) * query[k];
            }
            best = std::max(best, dp / std::sqrt(na * nb));
        }
        worst = std::max(worst, std::fabs(static_cast<double>(m.score - best)));
    }
    o.check(worst <= kOracleTolerance, "oracle deviation " + std::to_string(worst));
    std::ostringstream dev;
    dev << worst;
    report("AC4", "decontamination threshold semantics, planted duplicates, similarity oracle", o,
           "removed " + std::to_string(planted_run.removed.size()) + "/1000 planted 3, max oracle deviation " +
               dev.str() + " <= 1e-6");
}

struct JpegInfo {
    bool ok = false;
    int width = 0;
    int height = 0;
    int components = 0;
    J_COLOR_SPACE space = JCS_UNKNOWN;
    std::string error;
};

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

// Full decode through libjpeg; warnings (corrupt data) count as failures.
JpegInfo inspect_jpeg(const Bytes& data) {
    JpegInfo info;
    if (data.size() < 4 || data[0] != 0xFF || data[1] != 0xD8 || data[data.size() - 2] != 0xFF ||
        data[data.size() - 1] != 0xD9) {
        info.error = "missing SOI/EOI";
        return info;
    }
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        info.error = err.message;
        jpeg_destroy_decompress(&cinfo);
        return info;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
    jpeg_read_header(&cinfo, TRUE);
    info.space = cinfo.jpeg_color_space;
    info.components = cinfo.num_components;
    jpeg_start_decompress(&cinfo);
    info.width = static_cast<int>(cinfo.output_width);
    info.height = static_cast<int>(cinfo.output_height);
    std::vector<JSAMPLE> row(static_cast<std::size_t>(cinfo.output_width) * cinfo.output_components);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW p = row.data();
        jpeg_read_scanlines(&cinfo, &p, 1);
    }
    jpeg_finish_decompress(&cinfo);
    info.ok = err.base.num_warnings == 0;
    if (!info.ok) info.error = "decoder warnings";
    jpeg_destroy_decompress(&cinfo);
    return info;
}

std::pair<int, int> ratio_oracle(int w, int h) {
    if (std::max(w, h) <= kMaxSide) return {w, h};
    if (w >= h) return {kMaxSide, std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * kMaxSide / w)))};
    return {std::max(1, static_cast<int>(std::lround(static_cast<double>(w) * kMaxSide / h))), kMaxSide};
}

// Source dimensions declared by the fixtures, by (paper id, member path).
std::map<std::pair<std::string, std::string>, std::pair<int, int>> declared_sizes(const std::string& subset) {
    std::map<std::pair<std::string, std::string>, std::pair<int, int>> sizes;
    for (const auto& e : fs::directory_iterator(testing::fixtures_dir() / subset)) {
        const fs::path list = e.path() / "images.list";
        if (!fs::exists(list)) continue;
        for (const auto& line : testing::read_lines(list)) {
            std::istringstream in(line);
            std::string member, size;
            if (!(in >> member >> size)) continue;
            const auto x = size.find('x');
            sizes[{e.path().filename().string(), member}] = {std::stoi(size.substr(0, x)), std::stoi(size.substr(x + 1))};
        }
    }
    return sizes;
}

std::map<std::string, std::string> tree_digest(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testing::read_text(e.path());
    }
    return files;
}

void image_suite(const std::vector<std::pair<std::string, CorpusRun>>& first,
                 const std::vector<std::pair<std::string, CorpusRun>>& second) {
    Outcome o;
    std::size_t checked = 0;
    std::size_t ratio_checked = 0;
    for (const auto& [subset, run] : first) {
        const auto sizes = declared_sizes(subset);
        for (const auto& row : dataset::read_manifest(run.out / pipeline::kManifestName)) {
            const Bytes data = read_file(run.out / row.image_path);
            const JpegInfo info = inspect_jpeg(data);
            ++checked;
            const std::string tag = row.key + " (" + row.paper_id + "/" + row.source_path + ")";
            o.check(info.ok, tag + ": " + info.error);
            o.check(info.components == 3 && info.space == JCS_YCbCr, tag + ": not a 3-component YCbCr JPEG");
            o.check(std::max(info.width, info.height) <= kMaxSide, tag + ": larger than 512");
            o.check(info.width == row.width && info.height == row.height, tag + ": manifest size differs from file");
            std::string member = row.source_path;
            auto it = sizes.find({row.paper_id, member});
            if (it != sizes.end()) {
                const auto [w, h] = ratio_oracle(it->second.first, it->second.second);
                o.check(w == info.width && h == info.height, tag + ": ratio oracle gives " + std::to_string(w) + "x" +
                                                                 std::to_string(h));
                ++ratio_checked;
            } else {
                o.check(false, tag + ": no declared source size");
            }
        }
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
        o.check(tree_digest(first[i].second.out) == tree_digest(second[i].second.out),
                first[i].first + ": second run differs");
    }
    report("AC5", "image normalization over the fixture corpus", o,
           std::to_string(checked) + " JPEGs valid RGB <= 512, " + std::to_string(ratio_checked) +
               " ratio-oracle matches, 2 runs byte-identical");
}

void mixture_suite() {
    Outcome o;
    const auto m = dataset::mixture_proportions({{"CommonPool", 11778443}, {"arXiv", 1117377}, {"PMC", 766855}});
    o.check(m.size() == 3, "three entries");
    std::string got;
    for (const auto& e : m) got += (got.empty() ? "" : "/") + std::to_string(e.percent);
    o.check(got == "86/8/6", "percentages " + got);
    report("AC6", "mixture proportions from the dataset table counts", o, got);
}

void stats_suite(const std::vector<std::pair<std::string, CorpusRun>>& runs) {
    Outcome o;
    std::vector<dataset::ManifestRow> rows;
    for (const auto& [subset, run] : runs) {
        for (auto& r : dataset::read_manifest(run.out / pipeline::kManifestName)) rows.push_back(std::move(r));
    }
    const auto stats = dataset::compute_stats(rows);

    // Schema: Dataset | # figures | avg caption length, rows arXiv, PMC, Total.
    const std::string table = dataset::format_stats_table(stats);
    std::istringstream in(table);
    std::string header;
    std::getline(in, header);
    o.check(header.rfind("Dataset", 0) == 0, "header starts with Dataset");
    o.check(header.find("# figures") != std::string::npos, "header has # figures");
    o.check(header.find("avg caption length") != std::string::npos, "header has avg caption length");
    std::vector<std::string> labels;
    for (std::string l; std::getline(in, l);) {
        if (l.find_first_not_of("-|: ") == std::string::npos) continue;
        labels.push_back(l.substr(0, l.find_first_of(" |")));
    }
    o.check(labels == std::vector<std::string>{"arXiv", "PMC", "Total"}, "row labels");

    double worst = 0;
    for (const std::string subset : {"arxiv", "pmc", ""}) {
        long double chars = 0;
        long double words = 0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            if (!subset.empty() && r.subset != subset) continue;
            for (unsigned char c : r.caption) chars += (c & 0xC0) != 0x80;
            std::istringstream ws(r.caption);
            for (std::string t; ws >> t;) words += 1;
            ++n;
        }
        const auto& got = subset.empty() ? stats.total : stats.per_subset.at(subset);
        o.check(got.figure_count == n, "figure count for " + (subset.empty() ? std::string("total") : subset));
        if (n == 0) continue;
        worst = std::max(worst, std::fabs(*got.avg_caption_chars() - static_cast<double>(chars / n)));
        worst = std::max(worst, std::fabs(*got.avg_caption_words() - static_cast<double>(words / n)));
    }
    o.check(worst <= kStatsTolerance, "stats deviation " + std::to_string(worst));
    std::ostringstream dev;
    dev << worst;
    report("AC7", "stats schema and arithmetic", o,
           std::to_string(rows.size()) + " rows, max deviation " + dev.str() + " <= 1e-9");
}

void accounting_suite() {
    Outcome o;
    for (const auto& p : g_summaries) {
        std::string why;
        const auto j = nlohmann::json::parse(testing::read_text(p));
        if (!summary_balances(j, why)) o.check(false, p.string() + ": " + why);
    }
    report("AC8", "end-to-end accounting from every run summary", o,
           std::to_string(g_summaries.size()) + " summaries");
}

// Decontaminates the arXiv fixture output against an index planted with
// two of its own images; feeds AC8 with a summary that has removals.
void decontaminate_fixture(const CorpusRun& arxiv, const fs::path& work) {
    const auto rows = dataset::read_manifest(arxiv.out / pipeline::kManifestName);
    decontam::PhashProvider phash;
    std::vector<std::vector<float>> planted;
    for (std::size_t i = 0; i < rows.size() && planted.size() < 2; i += 5) {
        planted.push_back(phash.describe(read_file(arxiv.out / rows[i].image_path), rows[i].image_sha256).values);
    }
    decontam::DescriptorIndex::build(planted, std::vector<std::string>(planted.size(), "eval"))
        .write(work / "eval.sfdx");
    pipeline::DecontamConfig cfg;
    cfg.manifest = arxiv.out / pipeline::kManifestName;
    cfg.index = work / "eval.sfdx";
    cfg.out_dir = work / "decontaminated";
    pipeline::run_decontaminate(cfg);
    g_summaries.push_back(work / "decontaminated" / pipeline::kDecontamSummaryName);
}

CorpusRun throughput_run(const fs::path& work) {
    const fs::path in = work / "throughput";
    fs::create_directories(in);
    const Bytes png = testing::make_png(320, 240, 5);
    for (std::size_t i = 0; i < kThroughputFiles; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "2201.%05zu", i);
        const std::string tex = std::string("\\documentclass{article}\\begin{document}\n") +
                                "\\begin{figure}\\includegraphics[width=\\linewidth]{fig.png}\n"
                                "\\caption{Synthetic figure " + id + " with \\cite{x} and $\\alpha$.}\\end{figure}\n"
                                "\\end{document}\n";
        write_file_atomic(in / (std::string(id) + ".gz"), testing::make_targz({{"main.tex", to_bytes(tex)},
                                                                               {"fig.png", png}}));
    }
    return extract("arxiv", in, work / "throughput-out", worker_count());
}

void throughput_suite(const CorpusRun& run) {
    Outcome o;
    o.check(run.summary.pairs_out == kThroughputFiles, "pairs out " + std::to_string(run.summary.pairs_out));
    o.check(run.seconds < kThroughputSeconds, "runtime " + fixed(run.seconds) + " s");
    report("AC9", "throughput smoke on synthetic .tex submissions", o,
           std::to_string(kThroughputFiles) + " files, " + std::to_string(worker_count()) + " workers, " + fixed(run.seconds) +
               " s < " + fixed(kThroughputSeconds, 0) + " s");
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--freeze") {
            opt.freeze = true;
        } else if (a == "--keep" && i + 1 < argc) {
            opt.keep = fs::path(argv[++i]);
        } else {
            std::cerr << "usage: scifig_acceptance [--freeze] [--keep DIR]\n";
            return 2;
        }
    }
    try {
        testing::ScratchDir scratch("acceptance");
        const fs::path work = opt.keep ? *opt.keep : scratch.path();
        if (opt.keep) fs::remove_all(work);
        fs::create_directories(work);

        testing::build_corpus("arxiv", work / "arxiv-in");
        testing::build_corpus("pmc", work / "pmc-in");
        const int jobs = worker_count();
        std::vector<std::pair<std::string, CorpusRun>> first = {
            {"arxiv", extract("arxiv", work / "arxiv-in", work / "arxiv-out", jobs)},
            {"pmc", extract("pmc", work / "pmc-in", work / "pmc-out", jobs)}};
        std::vector<std::pair<std::string, CorpusRun>> second = {
            {"arxiv", extract("arxiv", work / "arxiv-in", work / "arxiv-out2", 1)},
            {"pmc", extract("pmc", work / "pmc-in", work / "pmc-out2", 1)}};

        golden_suite("AC1", "arXiv rule-fidelity golden suite", "arxiv", kMinArxivProjects, first[0].second, opt);
        golden_suite("AC2", "JATS golden suite", "pmc", kMinPmcPackages, first[1].second, opt);
        caption_suite();
        decontam_suite();
        image_suite(first, second);
        mixture_suite();
        stats_suite(first);
        decontaminate_fixture(first[0].second, work);
        const CorpusRun smoke = throughput_run(work);
        accounting_suite();
        throughput_suite(smoke);
    } catch (const std::exception& e) {
        std::cout << "FAIL harness error: " << e.what() << "\n";
        return 1;
    }
    std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed") << "\n";
    return g_failures == 0 ? 0 : 1;
}
