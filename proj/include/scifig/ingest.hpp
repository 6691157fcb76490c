#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scifig/util/bytes.hpp"

namespace scifig::ingest {

// Format of one decompressed arXiv submission. Only LatexProjectTar goes on
// to figure extraction.
enum class SourceKind { LatexProjectTar, SingleTex, Html, Ghostscript, Pdf, Unknown };

std::string_view to_string(SourceKind kind);

enum class ImageFormat { Jpg, Jpeg, Gif, Png, Pdf, Eps, Ps };

// Extensions accepted as graphics, in the order used when an
// \includegraphics path omits its extension.
inline constexpr std::array<std::string_view, 7> kGraphicsExtensionOrder = {
    "pdf", "png", "jpg", "jpeg", "gif", "eps", "ps"};

std::optional<ImageFormat> image_format_from_extension(std::string_view ext);
std::string_view extension_of(ImageFormat format);
bool is_vector_format(ImageFormat format);

// Lowercased extension of the final path segment, or empty.
std::string path_extension(std::string_view path);

enum class MemberKind { TexSource, Image, Other };

std::string_view to_string(MemberKind kind);

struct ArchiveMember {
    std::string path;
    std::uint64_t size_bytes = 0;
    MemberKind kind = MemberKind::Other;
    std::optional<ImageFormat> image_format;  // set iff kind == Image
    Bytes data;

    bool operator==(const ArchiveMember&) const = default;
};

ArchiveMember make_member(std::string normalized_path, Bytes data);

// Lexically normalizes a member path: strips "./" and empty segments, folds
// "..". Returns nullopt when the path is absolute or escapes the root.
std::optional<std::string> normalize_member_path(std::string_view raw);

// Something dropped while enumerating, reported to the skip log.
struct MemberIssue {
    std::string path;
    std::string reason;  // PathTraversal, DuplicatePath, Link
};

struct PaperArchive {
    std::string paper_id;
    std::map<std::string, ArchiveMember> members;
    std::optional<std::string> nxml_path;  // PMC packages only
    std::vector<MemberIssue> issues;

    const ArchiveMember* find(std::string_view path) const;
    std::vector<const ArchiveMember*> tex_sources() const;

    bool operator==(const PaperArchive&) const = default;
};

// Classification order: tar structure, %PDF, %!PS, HTML (first non-blank
// byte '<'), a TeX control word in the first 4 KiB, else Unknown.
SourceKind classify_source(ByteView payload);

struct Submission {
    SourceKind kind = SourceKind::Unknown;
    Bytes payload;  // decompressed
};

// Gunzips a raw submission when it carries the gzip magic, then classifies.
// Throws Error(Decompress) for a corrupt gzip stream.
Submission open_submission(ByteView raw);

// Throws Error(Tar) on a truncated or corrupt archive. Traversal paths,
// links and directories are excluded; traversal and duplicates are noted in
// PaperArchive::issues.
PaperArchive enumerate_members(ByteView tar, std::string paper_id);

// PMC OA package (.tar.gz). Throws Error(MissingNxml) / Error(MultipleNxml)
// unless exactly one .nxml member is present.
PaperArchive enumerate_pmc_package(ByteView targz, std::string paper_id);

// "astro-ph0001001.gz" -> "astro-ph0001001", "PMC123.tar.gz" -> "PMC123".
std::string paper_id_from_filename(std::string_view filename);

}  // namespace scifig::ingest
