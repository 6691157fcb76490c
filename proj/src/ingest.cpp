#include "scifig/ingest.hpp"

#include <algorithm>
#include <cstring>

#include "scifig/error.hpp"
#include "scifig/util/gzip.hpp"
#include "scifig/util/tar.hpp"
#include "scifig/util/text.hpp"

namespace scifig::ingest {

std::string_view to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::LatexProjectTar: return "LatexProjectTar";
        case SourceKind::SingleTex: return "SingleTex";
        case SourceKind::Html: return "Html";
        case SourceKind::Ghostscript: return "Ghostscript";
        case SourceKind::Pdf: return "Pdf";
        case SourceKind::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::string_view to_string(MemberKind kind) {
    switch (kind) {
        case MemberKind::TexSource: return "TexSource";
        case MemberKind::Image: return "Image";
        case MemberKind::Other: return "Other";
    }
    return "Other";
}

std::optional<ImageFormat> image_format_from_extension(std::string_view ext) {
    const std::string e = to_lower_ascii(ext);
    if (e == "jpg") return ImageFormat::Jpg;
    if (e == "jpeg") return ImageFormat::Jpeg;
    if (e == "gif") return ImageFormat::Gif;
    if (e == "png") return ImageFormat::Png;
    if (e == "pdf") return ImageFormat::Pdf;
    if (e == "eps") return ImageFormat::Eps;
    if (e == "ps") return ImageFormat::Ps;
    return std::nullopt;
}

std::string_view extension_of(ImageFormat format) {
    switch (format) {
        case ImageFormat::Jpg: return "jpg";
        case ImageFormat::Jpeg: return "jpeg";
        case ImageFormat::Gif: return "gif";
        case ImageFormat::Png: return "png";
        case ImageFormat::Pdf: return "pdf";
        case ImageFormat::Eps: return "eps";
        case ImageFormat::Ps: return "ps";
    }
    return "";
}

bool is_vector_format(ImageFormat format) {
    return format == ImageFormat::Pdf || format == ImageFormat::Eps || format == ImageFormat::Ps;
}

std::string path_extension(std::string_view path) {
    const auto slash = path.rfind('/');
    const std::string_view base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    const auto dot = base.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return {};
    return to_lower_ascii(base.substr(dot + 1));
}

ArchiveMember make_member(std::string normalized_path, Bytes data) {
    ArchiveMember m;
    m.size_bytes = data.size();
    m.data = std::move(data);
    const std::string ext = path_extension(normalized_path);
    if (ext == "tex") {
        m.kind = MemberKind::TexSource;
    } else if (auto fmt = image_format_from_extension(ext)) {
        m.kind = MemberKind::Image;
        m.image_format = fmt;
    }
    m.path = std::move(normalized_path);
    return m;
}

std::optional<std::string> normalize_member_path(std::string_view raw) {
    if (raw.empty() || raw.front() == '/') return std::nullopt;
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto end = raw.find_first_of("/\\", start);
        if (end == std::string_view::npos) end = raw.size();
        const std::string_view seg = raw.substr(start, end - start);
        if (seg == "..") {
            if (parts.empty()) return std::nullopt;
            parts.pop_back();
        } else if (!seg.empty() && seg != ".") {
            parts.push_back(seg);
        }
        start = end + 1;
    }
    if (parts.empty()) return std::nullopt;
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back('/');
        out.append(p);
    }
    return out;
}

const ArchiveMember* PaperArchive::find(std::string_view path) const {
    const auto it = members.find(std::string(path));
    return it == members.end() ? nullptr : &it->second;
}

std::vector<const ArchiveMember*> PaperArchive::tex_sources() const {
    std::vector<const ArchiveMember*> out;
    for (const auto& [path, m] : members) {
        if (m.kind == MemberKind::TexSource) out.push_back(&m);
    }
    return out;
}

SourceKind classify_source(ByteView payload) {
    if (looks_like_tar(payload)) return SourceKind::LatexProjectTar;
    const std::string_view text = as_chars(payload);
    if (text.starts_with("%PDF")) return SourceKind::Pdf;
    if (text.starts_with("%!PS")) return SourceKind::Ghostscript;
    const auto first = text.find_first_not_of(" \t\r\n\f\v");
    if (first != std::string_view::npos && text[first] == '<') return SourceKind::Html;
    const std::string_view head = text.substr(0, 4096);
    for (std::size_t i = 0; i + 1 < head.size(); ++i) {
        const char c = head[i + 1];
        if (head[i] == '\\' && ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) {
            return SourceKind::SingleTex;
        }
    }
    return SourceKind::Unknown;
}

Submission open_submission(ByteView raw) {
    Submission s;
    if (has_gzip_magic(raw)) {
        s.payload = gunzip(raw);
    } else {
        s.payload.assign(raw.begin(), raw.end());
    }
    s.kind = classify_source(s.payload);
    return s;
}

namespace {

PaperArchive enumerate_from(ByteSource& source, std::string paper_id) {
    PaperArchive archive;
    archive.paper_id = std::move(paper_id);
    TarReader reader(source);
    while (auto entry = reader.next()) {
        if (entry->type == TarEntryType::Symlink || entry->type == TarEntryType::Hardlink) {
            archive.issues.push_back({entry->name, "Link"});
            continue;
        }
        if (entry->type != TarEntryType::Regular) continue;
        auto path = normalize_member_path(entry->name);
        if (!path) {
            archive.issues.push_back({entry->name, "PathTraversal"});
            continue;
        }
        auto [it, inserted] = archive.members.try_emplace(*path);
        if (!inserted) {
            // Later entries win, as with tar extraction.
            archive.issues.push_back({*path, "DuplicatePath"});
        }
        it->second = make_member(*path, std::move(entry->data));
    }
    return archive;
}

}  // namespace

PaperArchive enumerate_members(ByteView tar, std::string paper_id) {
    MemorySource mem(tar);
    return enumerate_from(mem, std::move(paper_id));
}

PaperArchive enumerate_pmc_package(ByteView targz, std::string paper_id) {
    MemorySource mem(targz);
    GzipSource gz(mem);
    PaperArchive archive = enumerate_from(gz, std::move(paper_id));
    std::vector<std::string> nxml;
    for (const auto& [path, m] : archive.members) {
        if (path_extension(path) == "nxml") nxml.push_back(path);
    }
    if (nxml.empty()) {
        throw Error(ErrorKind::MissingNxml, "no .nxml member in " + archive.paper_id);
    }
    if (nxml.size() > 1) {
        throw Error(ErrorKind::MultipleNxml,
                    std::to_string(nxml.size()) + " .nxml members in " + archive.paper_id);
    }
    archive.nxml_path = nxml.front();
    return archive;
}

std::string paper_id_from_filename(std::string_view filename) {
    const auto slash = filename.find_last_of("/\\");
    std::string_view base = slash == std::string_view::npos ? filename : filename.substr(slash + 1);
    for (std::string_view suffix : {".tar.gz", ".tgz", ".gz", ".tar"}) {
        if (ends_with_ci(base, suffix) && base.size() > suffix.size()) {
            base.remove_suffix(suffix.size());
            break;
        }
    }
    return std::string(base);
}

}  // namespace scifig::ingest
