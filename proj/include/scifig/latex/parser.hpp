#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "scifig/util/bytes.hpp"

namespace scifig::latex {

// Half-open byte range into TexDocument::source.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const Span&) const = default;
};

enum class NodeKind { Command, Environment, Group, Text, Comment, Math, Verbatim };

struct TexNode;

struct TexArg {
    bool optional = false;
    bool braced = true;  // false for single-token accent arguments
    Span span;           // content between the delimiters
    std::vector<TexNode> children;
};

struct TexNode {
    NodeKind kind = NodeKind::Text;
    // Command name without backslash, environment name, math delimiter
    // ("$", "$$", "\\(", "\\["), or verbatim flavour ("verb", "lstlisting").
    std::string name;
    bool starred = false;
    std::vector<TexArg> args;       // Command, Environment
    std::vector<TexNode> children;  // Environment, Group
    std::string content;            // Text, Comment, Math, Verbatim; defined name for \def-style commands
    Span span;

    // i-th required (braced or token) argument, or nullptr.
    const TexArg* required_arg(std::size_t i = 0) const;
    const TexArg* optional_arg(std::size_t i = 0) const;
};

struct ParseOptions {
    // Caption mode: a '%' with no later newline is literal text. Real comments
    // inside a braced argument are always newline-terminated, so this keeps
    // already-plain text stable under reparsing.
    bool comments_need_newline = false;
};

struct TexDocument {
    std::string source;
    std::vector<TexNode> nodes;
    bool degraded = false;  // recovery was applied (unbalanced input)

    std::string_view text(Span span) const { return std::string_view(source).substr(span.begin, span.end - span.begin); }
};

// ISO-8859-1 to UTF-8; total, one scalar per input byte.
std::string decode_tex(ByteView bytes);

// Total parser for the command/environment/group/comment/math/verbatim
// subset of LaTeX. Never throws on malformed input.
TexDocument parse_tex(std::string source, ParseOptions options = {});

// Environments whose bodies are captured opaquely.
bool is_verbatim_environment(std::string_view name);

// Environments whose bodies are math.
bool is_math_environment(std::string_view name);

// \newcommand, \def and friends: their arguments are definitions, not uses.
bool is_definition_command(std::string_view name);

}  // namespace scifig::latex
