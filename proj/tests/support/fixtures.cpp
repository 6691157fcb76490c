#include "support/fixtures.hpp"

#include <stdlib.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scifig/util/gzip.hpp"
#include "scifig/util/tar.hpp"
#include "support/imagegen.hpp"

namespace scifig::testing {

fs::path test_dir() { return SCIFIG_TEST_DIR; }
fs::path fixtures_dir() { return test_dir() / "fixtures"; }
fs::path golden_dir() { return test_dir() / "golden"; }
fs::path cli_binary() { return SCIFIG_BINARY; }

ScratchDir::ScratchDir(const std::string& tag) {
    std::string tmpl = (fs::temp_directory_path() / ("scifig-" + tag + "-XXXXXX")).string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Bytes make_tar(const FileList& files) {
    std::ostringstream out;
    TarWriter tar(out);
    for (const auto& [name, data] : files) tar.add_file(name, data);
    tar.finish();
    return to_bytes(out.str());
}

Bytes make_targz(const FileList& files) { return gzip_compress(make_tar(files)); }

std::uint32_t fnv1a(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

std::string read_text(const fs::path& path) {
    const Bytes b = read_file(path);
    return std::string(as_chars(b));
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

namespace {

Bytes synthesize(const std::string& member, int w, int h, const std::string& variant) {
    const std::uint32_t seed = fnv1a(member);
    std::string ext = member.substr(member.find_last_of('.') + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == "png") {
        PngKind kind = PngKind::Rgb;
        if (variant == "alpha") kind = PngKind::Rgba;
        if (variant == "gray") kind = PngKind::Gray;
        if (variant == "palette") kind = PngKind::Palette;
        return make_png(w, h, seed, kind);
    }
    if (ext == "jpg" || ext == "jpeg") {
        Bytes b = make_jpeg(w, h, seed);
        if (variant == "truncated") b.resize(b.size() / 2);
        return b;
    }
    if (ext == "gif") return make_gif(w, h, seed, variant == "transparent");
    if (ext == "pdf") return fake_pdf();
    if (ext == "eps" || ext == "ps") return fake_eps();
    throw std::runtime_error("images.list: cannot synthesize " + member);
}

}  // namespace

FileList fixture_members(const fs::path& dir) {
    FileList files;
    std::vector<fs::path> paths;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        const std::string rel = fs::relative(p, dir).generic_string();
        if (rel == "images.list" || rel == "submission.kind") continue;
        files.emplace_back(rel, read_file(p));
    }
    if (fs::exists(dir / "images.list")) {
        for (const auto& line : read_lines(dir / "images.list")) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream in(line);
            std::string member, size, variant;
            in >> member >> size >> variant;
            const auto x = size.find('x');
            const int w = std::stoi(size.substr(0, x));
            const int h = std::stoi(size.substr(x + 1));
            files.emplace_back(member, synthesize(member, w, h, variant));
        }
    }
    return files;
}

Bytes pack_fixture(const fs::path& dir) {
    std::string kind = "tar";
    if (fs::exists(dir / "submission.kind")) {
        std::istringstream in(read_text(dir / "submission.kind"));
        in >> kind;
    }
    const FileList files = fixture_members(dir);
    if (kind == "tar") return make_targz(files);
    if (kind == "raw-tar") return make_tar(files);
    if (kind == "single-tex" || kind == "pdf") {
        if (files.size() != 1) throw std::runtime_error(kind + " fixture needs exactly one file: " + dir.string());
        return gzip_compress(files.front().second);
    }
    if (kind == "corrupt-gzip") {
        Bytes b = make_targz(files);
        for (std::size_t i = 12; i < b.size(); i += 7) b[i] ^= 0x5A;
        return b;
    }
    throw std::runtime_error("unknown submission.kind '" + kind + "' in " + dir.string());
}

std::vector<fs::path> build_corpus(const std::string& subset, const fs::path& out_dir) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(fixtures_dir() / subset)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    fs::create_directories(out_dir);
    std::vector<fs::path> out;
    for (const auto& d : dirs) {
        const std::string name = d.filename().string() + (subset == "pmc" ? ".tar.gz" : ".gz");
        const fs::path file = out_dir / name;
        write_file_atomic(file, pack_fixture(d));
        out.push_back(file);
    }
    return out;
}

std::vector<CaptionCase> read_caption_cases(const fs::path& path) {
    std::vector<CaptionCase> cases;
    CaptionCase cur;
    enum { Idle, Input, Expected } state = Idle;
    std::vector<std::string> input_lines;
    for (const auto& line : read_lines(path)) {
        if (line.rfind("### ", 0) == 0) {
            cur = CaptionCase{line.substr(4), {}, {}};
            input_lines.clear();
            state = Input;
            continue;
        }
        if (state == Input) {
            if (line == "---") {
                for (std::size_t i = 0; i < input_lines.size(); ++i) {
                    cur.input += input_lines[i];
                    if (i + 1 < input_lines.size()) cur.input += "\n";
                }
                state = Expected;
            } else {
                input_lines.push_back(line);
            }
            continue;
        }
        if (state == Expected) {
            cur.expected = line;
            cases.push_back(cur);
            state = Idle;
        }
    }
    return cases;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& line : read_lines(path)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        rows.push_back(std::move(cols));
    }
    return rows;
}

}  // namespace scifig::testing
