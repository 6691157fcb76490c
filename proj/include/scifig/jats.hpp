#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scifig/ingest.hpp"
#include "scifig/latex/figures.hpp"
#include "scifig/util/bytes.hpp"

namespace scifig::jats {

struct XmlNode {
    bool is_text = false;
    std::string name;  // qualified element name as written ("xlink:href" style prefixes kept)
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;  // text nodes only
    std::vector<XmlNode> children;
    std::size_t byte_begin = 0;  // element start offset in the input
    std::size_t byte_end = 0;

    std::string_view local_name() const;
    // Attribute matched by local name, so "href" finds "xlink:href".
    const std::string* attribute(std::string_view local) const;
};

struct XmlDocument {
    XmlNode root;
};

// Throws Error(Xml) for malformed input. The encoding declared in the XML
// declaration is honoured.
XmlDocument parse_jats(ByteView bytes);

struct JatsFigure {
    std::optional<std::string> fig_id;
    std::optional<std::string> lang;          // lang or xml:lang, verbatim
    std::vector<std::string> graphic_hrefs;   // every graphic of the fig, document order
    std::string caption_text;                 // xref -> <ref>, whitespace collapsed
    std::size_t byte_begin = 0;
    std::size_t byte_end = 0;
};

std::vector<JatsFigure> collect_figures(const XmlDocument& doc);

enum class RejectReason { NonEnglish, NoGraphic, NotJpg, MissingFile, NoCaption };

std::string_view to_string(RejectReason reason);

struct Rejection {
    std::string paper_id;
    std::string nxml_path;
    latex::Span span;  // fig element byte range
    RejectReason reason;
};

struct FigureReport {
    std::vector<latex::FigureCandidate> candidates;
    std::vector<Rejection> rejections;
    std::size_t slots_seen = 0;  // one per graphic; a fig without graphics counts once
};

// Language filter: absent passes; otherwise must start with "en",
// case-insensitively.
bool passes_language_filter(const std::optional<std::string>& lang);

// Each graphic href is matched by file name against the package members;
// only a .jpg member qualifies. Extensionless hrefs try ".jpg".
FigureReport extract_jats_figures(const XmlDocument& doc, const ingest::PaperArchive& archive);

}  // namespace scifig::jats
