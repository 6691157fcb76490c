#include "scifig/latex/figures.hpp"

#include <algorithm>

#include "scifig/util/text.hpp"

namespace scifig::latex {

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::MissingFile: return "MissingFile";
        case RejectReason::NoCaption: return "NoCaption";
        case RejectReason::MultipleGraphics: return "MultipleGraphics";
    }
    return "";
}

std::string clean_graphics_argument(std::string_view raw) {
    std::string out;
    for (char c : trim(raw)) {
        if (c != '{' && c != '}') out.push_back(c);
    }
    return std::string(trim(out));
}

namespace {

bool is_image_member(const ingest::ArchiveMember& m) {
    return m.kind == ingest::MemberKind::Image;
}

}  // namespace

ResolveResult resolve_graphics_path(std::string_view raw, const ingest::PaperArchive& archive) {
    const auto normalized = ingest::normalize_member_path(clean_graphics_argument(raw));
    if (!normalized) return ResolveFailure::NotFound;

    std::vector<std::string> attempts{*normalized};
    if (!ingest::image_format_from_extension(ingest::path_extension(*normalized))) {
        for (auto ext : ingest::kGraphicsExtensionOrder) {
            attempts.push_back(*normalized + "." + std::string(ext));
        }
    }

    for (const auto& attempt : attempts) {
        if (const auto* m = archive.find(attempt); m != nullptr && is_image_member(*m)) {
            return m->path;
        }
    }
    for (const auto& attempt : attempts) {
        const std::string lowered = to_lower_ascii(attempt);
        std::vector<const ingest::ArchiveMember*> hits;
        for (const auto& [path, m] : archive.members) {
            if (is_image_member(m) && to_lower_ascii(path) == lowered) hits.push_back(&m);
        }
        if (hits.size() == 1) return hits.front()->path;
        if (hits.size() > 1) return ResolveFailure::Ambiguous;
    }
    return ResolveFailure::NotFound;
}

namespace {

// Flattened members of one neighbourhood plus the nested scopes (environment
// and group nodes) found while walking it.
struct Scope {
    std::vector<const TexNode*> members;
    std::vector<const TexNode*> nested;
};

void collect(const std::vector<TexNode>& nodes, Scope& scope) {
    for (const auto& node : nodes) {
        switch (node.kind) {
            case NodeKind::Command:
                if (is_definition_command(node.name)) break;
                scope.members.push_back(&node);
                for (const auto& arg : node.args) collect(arg.children, scope);
                break;
            case NodeKind::Environment:
            case NodeKind::Group:
                scope.nested.push_back(&node);
                break;
            default:
                break;
        }
    }
}

bool is_caption(const TexNode& node, const TexDocument& doc) {
    if (node.kind != NodeKind::Command || node.name != "caption") return false;
    const TexArg* arg = node.required_arg();
    return arg != nullptr && arg->braced && !trim(doc.text(arg->span)).empty();
}

void process_scope(const Scope& scope, const TexDocument& doc, const ingest::PaperArchive& archive,
                   const std::string& tex_path, CandidateReport& report) {
    std::vector<const TexNode*> graphics;
    std::vector<const TexNode*> captions;
    for (const TexNode* m : scope.members) {
        if (m->name == "includegraphics") {
            graphics.push_back(m);
        } else if (is_caption(*m, doc)) {
            captions.push_back(m);
        }
    }
    for (const TexNode* g : graphics) {
        ++report.graphics_seen;
        auto reject = [&](RejectReason reason) {
            report.rejections.push_back({archive.paper_id, tex_path, g->span, reason});
        };
        const TexArg* path_arg = g->required_arg();
        if (path_arg == nullptr) {
            reject(RejectReason::MissingFile);
            continue;
        }
        const ResolveResult resolved = resolve_graphics_path(doc.text(path_arg->span), archive);
        if (!std::holds_alternative<std::string>(resolved)) {
            reject(RejectReason::MissingFile);
            continue;
        }
        if (captions.empty()) {
            reject(RejectReason::NoCaption);
            continue;
        }
        if (graphics.size() > 1) {
            reject(RejectReason::MultipleGraphics);
            continue;
        }
        // Nearest following caption, else nearest preceding.
        const TexNode* chosen = captions.back();
        for (const TexNode* c : captions) {
            if (c->span.begin > g->span.begin) {
                chosen = c;
                break;
            }
        }
        const TexArg* cap = chosen->required_arg();
        report.candidates.push_back({archive.paper_id, tex_path, std::get<std::string>(resolved),
                                     std::string(doc.text(cap->span)), cap->span, g->span});
    }
}

void walk(const Scope& scope, const TexDocument& doc, const ingest::PaperArchive& archive,
          const std::string& tex_path, CandidateReport& report) {
    process_scope(scope, doc, archive, tex_path, report);
    for (const TexNode* owner : scope.nested) {
        Scope inner;
        // Environment arguments belong to the environment's own scope.
        for (const auto& arg : owner->args) collect(arg.children, inner);
        collect(owner->children, inner);
        walk(inner, doc, archive, tex_path, report);
    }
}

}  // namespace

CandidateReport find_figure_candidates(const TexDocument& doc, const ingest::PaperArchive& archive,
                                       const std::string& tex_path) {
    CandidateReport report;
    Scope root;
    collect(doc.nodes, root);
    walk(root, doc, archive, tex_path, report);
    std::stable_sort(report.candidates.begin(), report.candidates.end(),
                     [](const auto& a, const auto& b) { return a.graphics_span.begin < b.graphics_span.begin; });
    std::stable_sort(report.rejections.begin(), report.rejections.end(),
                     [](const auto& a, const auto& b) { return a.span.begin < b.span.begin; });
    return report;
}

}  // namespace scifig::latex
