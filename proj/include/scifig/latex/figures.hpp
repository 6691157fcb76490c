#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scifig/ingest.hpp"
#include "scifig/latex/parser.hpp"

namespace scifig::latex {

struct FigureCandidate {
    std::string paper_id;
    std::string tex_path;       // document the pair came from
    std::string graphics_path;  // resolved archive member
    std::string caption_source;  // raw LaTeX of the \caption argument
    Span caption_span;
    Span graphics_span;

    bool operator==(const FigureCandidate&) const = default;
};

enum class RejectReason { MissingFile, NoCaption, MultipleGraphics };

std::string_view to_string(RejectReason reason);

struct Rejection {
    std::string paper_id;
    std::string tex_path;
    Span span;  // the \includegraphics command
    RejectReason reason;

    bool operator==(const Rejection&) const = default;
};

struct CandidateReport {
    std::vector<FigureCandidate> candidates;
    std::vector<Rejection> rejections;
    std::size_t graphics_seen = 0;  // \includegraphics nodes considered
};

enum class ResolveFailure { NotFound, Ambiguous };

using ResolveResult = std::variant<std::string, ResolveFailure>;

// Resolves an \includegraphics argument against the archive root. The raw
// path is tried first; when it has no graphics extension the whitelist
// extensions are appended in kGraphicsExtensionOrder. A full exact-case
// sweep precedes a case-insensitive one; a case-insensitive hit on more than
// one member is Ambiguous.
ResolveResult resolve_graphics_path(std::string_view raw, const ingest::PaperArchive& archive);

// Applies the neighbourhood rules to every \includegraphics in `doc`. The
// neighbourhood of a node is its enclosing environment or group; command
// arguments are transparent, nested environments and groups are not.
// Definition commands (\newcommand, \def, ...) are not searched.
CandidateReport find_figure_candidates(const TexDocument& doc, const ingest::PaperArchive& archive,
                                       const std::string& tex_path);

// Strips whitespace and braces from an \includegraphics argument.
std::string clean_graphics_argument(std::string_view raw);

}  // namespace scifig::latex
