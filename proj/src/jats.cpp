#include "scifig/jats.hpp"

#include <expat.h>

#include "scifig/caption.hpp"
#include "scifig/error.hpp"
#include "scifig/util/text.hpp"

namespace scifig::jats {

std::string_view XmlNode::local_name() const {
    const auto colon = name.find(':');
    return colon == std::string::npos ? std::string_view(name) : std::string_view(name).substr(colon + 1);
}

const std::string* XmlNode::attribute(std::string_view local) const {
    // Exact name first, so "lang" is preferred over "xml:lang" when both exist.
    for (const auto& [k, v] : attributes) {
        if (k == local) return &v;
    }
    for (const auto& [k, v] : attributes) {
        const auto colon = k.find(':');
        if (colon != std::string::npos && std::string_view(k).substr(colon + 1) == local) return &v;
    }
    return nullptr;
}

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::NonEnglish: return "NonEnglish";
        case RejectReason::NoGraphic: return "NoGraphic";
        case RejectReason::NotJpg: return "NotJpg";
        case RejectReason::MissingFile: return "MissingFile";
        case RejectReason::NoCaption: return "NoCaption";
    }
    return "";
}

namespace {

struct BuildState {
    XML_Parser parser = nullptr;
    XmlNode root;
    std::vector<XmlNode*> stack;
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** atts) {
    auto* st = static_cast<BuildState*>(user);
    XmlNode node;
    node.name = name;
    for (int i = 0; atts[i] != nullptr; i += 2) {
        node.attributes.emplace_back(atts[i], atts[i + 1]);
    }
    node.byte_begin = static_cast<std::size_t>(XML_GetCurrentByteIndex(st->parser));
    XmlNode* parent = st->stack.back();
    parent->children.push_back(std::move(node));
    st->stack.push_back(&parent->children.back());
}

void XMLCALL on_end(void* user, const XML_Char* /*name*/) {
    auto* st = static_cast<BuildState*>(user);
    XmlNode* node = st->stack.back();
    node->byte_end = static_cast<std::size_t>(XML_GetCurrentByteIndex(st->parser) + XML_GetCurrentByteCount(st->parser));
    st->stack.pop_back();
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
    auto* st = static_cast<BuildState*>(user);
    XmlNode* parent = st->stack.back();
    if (!parent->children.empty() && parent->children.back().is_text) {
        parent->children.back().text.append(s, static_cast<std::size_t>(len));
        return;
    }
    XmlNode t;
    t.is_text = true;
    t.text.assign(s, static_cast<std::size_t>(len));
    parent->children.push_back(std::move(t));
}

}  // namespace

XmlDocument parse_jats(ByteView bytes) {
    // Children vectors grow while pointers into them sit on the stack, so
    // element pointers are only held for the innermost open path; vector
    // growth of a parent happens only when that parent is the innermost.
    BuildState st;
    st.parser = XML_ParserCreate(nullptr);
    if (st.parser == nullptr) throw Error(ErrorKind::Xml, "cannot create XML parser");
    st.stack.push_back(&st.root);
    XML_SetUserData(st.parser, &st);
    XML_SetElementHandler(st.parser, on_start, on_end);
    XML_SetCharacterDataHandler(st.parser, on_text);
    const auto status = XML_Parse(st.parser, reinterpret_cast<const char*>(bytes.data()),
                                  static_cast<int>(bytes.size()), XML_TRUE);
    if (status != XML_STATUS_OK) {
        const std::string msg = std::string(XML_ErrorString(XML_GetErrorCode(st.parser))) + " at line " +
                                std::to_string(XML_GetCurrentLineNumber(st.parser));
        XML_ParserFree(st.parser);
        throw Error(ErrorKind::Xml, msg);
    }
    XML_ParserFree(st.parser);
    XmlDocument doc;
    doc.root = std::move(st.root);
    return doc;
}

namespace {

void caption_text(const XmlNode& node, std::string& out) {
    for (const auto& child : node.children) {
        if (child.is_text) {
            out += child.text;
            continue;
        }
        const auto local = child.local_name();
        if (local == "xref") {
            out += caption::kRefMarker;
            continue;
        }
        const bool block = local == "title" || local == "p" || local == "label" || local == "list-item";
        if (block) out.push_back(' ');
        caption_text(child, out);
        if (block) out.push_back(' ');
    }
}

// Graphics of a fig, not descending into nested figs.
void collect_graphics(const XmlNode& node, std::vector<std::string>& hrefs) {
    for (const auto& child : node.children) {
        if (child.is_text) continue;
        const auto local = child.local_name();
        if (local == "fig") continue;
        if (local == "graphic") {
            const std::string* href = child.attribute("href");
            hrefs.push_back(href != nullptr ? *href : std::string());
            continue;
        }
        collect_graphics(child, hrefs);
    }
}

const XmlNode* find_caption(const XmlNode& fig) {
    for (const auto& child : fig.children) {
        if (!child.is_text && child.local_name() == "caption") return &child;
    }
    return nullptr;
}

void collect_figs(const XmlNode& node, std::vector<JatsFigure>& out) {
    for (const auto& child : node.children) {
        if (child.is_text) continue;
        if (child.local_name() == "fig") {
            JatsFigure fig;
            if (const auto* id = child.attribute("id")) fig.fig_id = *id;
            if (const auto* lang = child.attribute("lang")) fig.lang = *lang;
            collect_graphics(child, fig.graphic_hrefs);
            if (const XmlNode* cap = find_caption(child)) {
                std::string raw;
                caption_text(*cap, raw);
                fig.caption_text = collapse_whitespace(raw);
            }
            fig.byte_begin = child.byte_begin;
            fig.byte_end = child.byte_end;
            out.push_back(std::move(fig));
        }
        collect_figs(child, out);
    }
}

std::string basename_of(std::string_view path) {
    const auto slash = path.find_last_of('/');
    return std::string(slash == std::string_view::npos ? path : path.substr(slash + 1));
}

}  // namespace

std::vector<JatsFigure> collect_figures(const XmlDocument& doc) {
    std::vector<JatsFigure> out;
    collect_figs(doc.root, out);
    return out;
}

bool passes_language_filter(const std::optional<std::string>& lang) {
    return !lang.has_value() || starts_with_ci(*lang, "en");
}

FigureReport extract_jats_figures(const XmlDocument& doc, const ingest::PaperArchive& archive) {
    FigureReport report;
    const std::string nxml = archive.nxml_path.value_or("");
    for (const JatsFigure& fig : collect_figures(doc)) {
        const latex::Span span{fig.byte_begin, fig.byte_end};
        auto reject = [&](RejectReason reason) {
            report.rejections.push_back({archive.paper_id, nxml, span, reason});
        };
        if (fig.graphic_hrefs.empty()) {
            ++report.slots_seen;
            reject(passes_language_filter(fig.lang) ? RejectReason::NoGraphic : RejectReason::NonEnglish);
            continue;
        }
        for (const std::string& href : fig.graphic_hrefs) {
            ++report.slots_seen;
            if (!passes_language_filter(fig.lang)) {
                reject(RejectReason::NonEnglish);
                continue;
            }
            const std::string name = basename_of(trim(href));
            if (name.empty()) {
                reject(RejectReason::NoGraphic);
                continue;
            }
            const std::string ext = ingest::path_extension(name);
            if (!ext.empty() && ext != "jpg") {
                reject(RejectReason::NotJpg);
                continue;
            }
            const std::string wanted = ext.empty() ? name + ".jpg" : name;
            std::vector<const ingest::ArchiveMember*> hits;
            bool other_format = false;
            for (const auto& [path, m] : archive.members) {
                const std::string base = basename_of(path);
                if (iequals_ascii(base, wanted)) {
                    hits.push_back(&m);
                } else if (ext.empty() && ingest::path_extension(base) != "jpg" &&
                           starts_with_ci(base, name + ".") && base.size() > name.size() + 1 &&
                           base.find('.', name.size() + 1) == std::string::npos) {
                    other_format = true;
                }
            }
            if (hits.size() != 1) {
                reject(hits.empty() && other_format ? RejectReason::NotJpg : RejectReason::MissingFile);
                continue;
            }
            if (fig.caption_text.empty()) {
                reject(RejectReason::NoCaption);
                continue;
            }
            report.candidates.push_back(
                {archive.paper_id, nxml, hits.front()->path, fig.caption_text, span, span});
        }
    }
    return report;
}

}  // namespace scifig::jats
