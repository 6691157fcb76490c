#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scifig/util/bytes.hpp"

namespace scifig::testing {

namespace fs = std::filesystem;

fs::path test_dir();
fs::path fixtures_dir();
fs::path golden_dir();
fs::path cli_binary();

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag = "test");
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

using FileList = std::vector<std::pair<std::string, Bytes>>;

Bytes make_tar(const FileList& files);
Bytes make_targz(const FileList& files);

// 32-bit FNV-1a, a platform-independent seed source.
std::uint32_t fnv1a(std::string_view s);

// Packs one fixture directory into the bytes of a submission file.
//
// Every regular file is a member under its relative path, except:
//   images.list      "<member path> <W>x<H> [variant]" lines; the image is
//                    synthesized from the extension and variant (png: rgb,
//                    alpha, gray, palette; jpg: truncated; gif:
//                    transparent). pdf/eps/ps get a minimal vector stub.
//   submission.kind  tar (default), raw-tar, single-tex, pdf, corrupt-gzip.
FileList fixture_members(const fs::path& dir);
Bytes pack_fixture(const fs::path& dir);

// Writes every fixture of `subset` ("arxiv" or "pmc") into `out_dir`
// as <name>.gz or <name>.tar.gz; returns the files in name order.
std::vector<fs::path> build_corpus(const std::string& subset, const fs::path& out_dir);

struct CaptionCase {
    std::string name;
    std::string input;
    std::string expected;
};

// Blocks of "### name", input lines, "---", one expected line.
std::vector<CaptionCase> read_caption_cases(const fs::path& path);

// Tab-separated rows; blank lines and '#' comments skipped.
std::vector<std::vector<std::string>> read_tsv(const fs::path& path);

std::vector<std::string> read_lines(const fs::path& path);
std::string read_text(const fs::path& path);

}  // namespace scifig::testing
