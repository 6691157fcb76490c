#include "scifig/latex/parser.hpp"

#include <optional>
#include <unordered_set>

#include "scifig/util/text.hpp"

namespace scifig::latex {

const TexArg* TexNode::required_arg(std::size_t i) const {
    for (const auto& a : args) {
        if (!a.optional) {
            if (i == 0) return &a;
            --i;
        }
    }
    return nullptr;
}

const TexArg* TexNode::optional_arg(std::size_t i) const {
    for (const auto& a : args) {
        if (a.optional) {
            if (i == 0) return &a;
            --i;
        }
    }
    return nullptr;
}

std::string decode_tex(ByteView bytes) {
    return latin1_to_utf8(bytes);
}

bool is_verbatim_environment(std::string_view name) {
    static const std::unordered_set<std::string_view> kNames = {
        "verbatim", "verbatim*", "Verbatim", "Verbatim*", "lstlisting", "minted", "comment", "BVerbatim", "LVerbatim"};
    return kNames.contains(name);
}

bool is_math_environment(std::string_view name) {
    static const std::unordered_set<std::string_view> kNames = {
        "equation", "equation*", "align",     "align*",     "gather",      "gather*",     "multline",
        "multline*", "eqnarray", "eqnarray*", "displaymath", "math",       "flalign",     "flalign*",
        "alignat",  "alignat*", "split",     "cases",       "array",       "matrix",      "pmatrix",
        "bmatrix"};
    return kNames.contains(name);
}

// Environments that take no braced argument; a brace after \begin{...}
// opens a group in their body.
bool takes_no_braced_args(std::string_view name) {
    static const std::unordered_set<std::string_view> kNames = {
        "figure", "figure*", "table", "table*", "center", "flushleft", "flushright", "document", "quote"};
    return kNames.contains(name);
}

bool is_definition_command(std::string_view name) {
    static const std::unordered_set<std::string_view> kNames = {
        "newcommand", "renewcommand", "providecommand", "DeclareRobustCommand", "DeclareMathOperator",
        "newrobustcmd", "newenvironment", "renewenvironment", "def", "gdef", "edef", "xdef", "let"};
    return kNames.contains(name);
}

namespace {

enum class FrameKind { Root, Env, Brace, Bracket };

struct Frame {
    FrameKind kind;
    std::string name;
};

constexpr std::size_t kMaxDepth = 512;

bool is_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '@';
}

bool is_blank(char c) {
    return c == ' ' || c == '\t' || c == '\r';
}

// Switches and spacing commands that never take a braced argument, so a
// following group stays a group.
const std::unordered_set<std::string_view>& no_arg_commands() {
    static const std::unordered_set<std::string_view> kNames = {
        "centering", "raggedright", "raggedleft", "hfill",     "vfill",       "par",       "noindent",
        "indent",    "newline",     "clearpage",  "newpage",   "cleardoublepage", "hline", "toprule",
        "midrule",   "bottomrule",  "small",      "footnotesize", "scriptsize", "tiny",     "large",
        "Large",     "LARGE",       "huge",       "Huge",      "normalsize",  "bf",        "it",
        "rm",        "sf",          "tt",         "sc",        "em",          "sl",        "bfseries",
        "itshape",   "mdseries",    "upshape",    "rmfamily",  "sffamily",    "ttfamily",  "normalfont",
        "scshape",   "slshape",     "relax",      "maketitle", "smallskip",   "medskip",   "bigskip",
        "displaystyle", "textstyle", "scriptstyle", "protect", "null",        "nobreak",   "and",
        "quad",      "qquad",       "appendix",   "makeatletter", "makeatother", "ldots",  "dots",
        "cdots",     "today",       "LaTeX",      "TeX",       "selectfont",  "allowbreak", "break"};
    return kNames;
}

// Commands whose only arguments are bracketed.
const std::unordered_set<std::string_view>& optional_only_commands() {
    static const std::unordered_set<std::string_view> kNames = {"item", "linebreak", "pagebreak", "nolinebreak"};
    return kNames;
}

// Accents that take one token or group: \'e, \"{o}, \c c, \v{s}.
bool is_accent_symbol(std::string_view name) {
    return name == "'" || name == "`" || name == "^" || name == "\"" || name == "~" || name == "=" || name == ".";
}

bool is_accent_word(std::string_view name) {
    return name == "c" || name == "v" || name == "u" || name == "H" || name == "d" || name == "b" ||
           name == "k" || name == "r" || name == "t";
}

class Parser {
public:
    Parser(const std::string& source, ParseOptions options) : s_(source), opt_(options) {}

    std::vector<TexNode> parse() {
        bool closed = false;
        return parse_sequence(FrameKind::Root, {}, closed);
    }

    bool degraded() const { return degraded_; }

private:
    std::size_t n() const { return s_.size(); }
    char at(std::size_t i) const { return i < s_.size() ? s_[i] : '\0'; }

    bool frame_open(FrameKind kind, std::string_view name = {}) const {
        // Excludes the innermost frame, which the caller has already checked.
        for (std::size_t i = frames_.size() - 1; i-- > 0;) {
            if (frames_[i].kind == kind && (kind != FrameKind::Env || frames_[i].name == name)) return true;
        }
        return false;
    }

    static void append_text(std::vector<TexNode>& out, const std::string& s, std::size_t begin, std::size_t end) {
        if (begin >= end) return;
        if (!out.empty() && out.back().kind == NodeKind::Text && out.back().span.end == begin) {
            out.back().content.append(s, begin, end - begin);
            out.back().span.end = end;
            return;
        }
        TexNode t;
        t.kind = NodeKind::Text;
        t.content = s.substr(begin, end - begin);
        t.span = {begin, end};
        out.push_back(std::move(t));
    }

    // True at a '%' that starts a comment under the current options.
    bool comment_starts(std::size_t i) const {
        if (at(i) != '%') return false;
        return !opt_.comments_need_newline || s_.find('\n', i) != std::string::npos;
    }

    // Index just past a comment starting at i (newline and the next line's
    // leading blanks included, as TeX discards them).
    std::size_t comment_end(std::size_t i) const {
        auto eol = s_.find('\n', i);
        if (eol == std::string::npos) return n();
        ++eol;
        while (eol < n() && is_blank(s_[eol])) ++eol;
        return eol;
    }

    bool blank_line_at(std::size_t i) const {
        if (at(i) != '\n') return false;
        std::size_t j = i + 1;
        while (j < n() && is_blank(s_[j])) ++j;
        return at(j) == '\n';
    }

    // Scans for `closer` from i, skipping escapes and comments, stopping at a
    // blank line. Returns the closer index or npos.
    std::size_t scan_math_close(std::size_t i, std::string_view closer) const {
        while (i < n()) {
            if (s_.compare(i, closer.size(), closer) == 0) return i;
            const char c = s_[i];
            if (c == '\\') {
                i += 2;
            } else if (comment_starts(i)) {
                i = comment_end(i);
            } else if (blank_line_at(i)) {
                return std::string::npos;
            } else {
                ++i;
            }
        }
        return std::string::npos;
    }

    std::size_t paragraph_end(std::size_t i) const {
        while (i < n() && !blank_line_at(i)) ++i;
        return i;
    }

    // Matching ']' for an optional argument opening at `open`, at brace depth
    // zero and within the paragraph.
    std::size_t find_optional_close(std::size_t open) const {
        int depth = 0;
        std::size_t i = open + 1;
        while (i < n()) {
            const char c = s_[i];
            if (c == '\\') {
                i += 2;
                continue;
            }
            if (comment_starts(i)) {
                i = comment_end(i);
                continue;
            }
            if (blank_line_at(i)) return std::string::npos;
            if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth < 0) return std::string::npos;
            } else if (c == ']' && depth == 0) {
                return i;
            }
            ++i;
        }
        return std::string::npos;
    }

    void skip_arg_whitespace(bool allow_newline) {
        bool seen_newline = false;
        while (pos_ < n()) {
            const char c = s_[pos_];
            if (is_blank(c)) {
                ++pos_;
            } else if (c == '\n' && allow_newline && !seen_newline) {
                seen_newline = true;
                ++pos_;
            } else {
                break;
            }
        }
    }

    TexArg parse_delimited_arg(bool optional) {
        TexArg arg;
        arg.optional = optional;
        ++pos_;
        arg.span.begin = pos_;
        bool closed = false;
        arg.children = parse_sequence(optional ? FrameKind::Bracket : FrameKind::Brace, {}, closed);
        arg.span.end = closed ? pos_ - 1 : pos_;
        return arg;
    }

    // Bracketed arguments before the first braced one; whitespace only before
    // the first braced argument.
    void parse_args(TexNode& node, bool allow_newline, bool optional_only = false) {
        if (frames_.size() >= kMaxDepth) return;
        bool has_required = false;
        for (;;) {
            const std::size_t save = pos_;
            if (!has_required) skip_arg_whitespace(allow_newline);
            if (at(pos_) == '[' && !has_required && find_optional_close(pos_) != std::string::npos) {
                node.args.push_back(parse_delimited_arg(true));
            } else if (at(pos_) == '{' && !optional_only) {
                node.args.push_back(parse_delimited_arg(false));
                has_required = true;
            } else {
                pos_ = save;
                break;
            }
        }
    }

    // Definition syntax: brackets may follow braces, whitespace anywhere, and
    // parsing stops after `max_required` braced arguments.
    void parse_args_flexible(TexNode& node, int max_required) {
        if (frames_.size() >= kMaxDepth) return;
        int required = 0;
        while (required < max_required) {
            const std::size_t save = pos_;
            skip_arg_whitespace(true);
            if (at(pos_) == '[' && find_optional_close(pos_) != std::string::npos) {
                node.args.push_back(parse_delimited_arg(true));
            } else if (at(pos_) == '{') {
                node.args.push_back(parse_delimited_arg(false));
                ++required;
            } else {
                pos_ = save;
                break;
            }
        }
    }

    // Reads "\name" or "\x" at pos_ into a string; empty if not at a backslash.
    std::string read_control_sequence() {
        if (at(pos_) != '\\' || pos_ + 1 >= n()) return {};
        std::size_t i = pos_ + 1;
        if (is_letter(s_[i])) {
            while (i < n() && is_letter(s_[i])) ++i;
        } else {
            next_utf8(s_, i);
        }
        std::string name = s_.substr(pos_ + 1, i - pos_ - 1);
        pos_ = i;
        return name;
    }

    void parse_definition(TexNode& node) {
        const std::string& name = node.name;
        if (name == "def" || name == "gdef" || name == "edef" || name == "xdef") {
            skip_arg_whitespace(true);
            node.content = read_control_sequence();
            // Parameter text (#1#2...) up to the body.
            while (pos_ < n() && s_[pos_] != '{' && !blank_line_at(pos_)) ++pos_;
            if (at(pos_) == '{') node.args.push_back(parse_delimited_arg(false));
            return;
        }
        if (name == "let") {
            skip_arg_whitespace(true);
            node.content = read_control_sequence();
            skip_arg_whitespace(true);
            if (at(pos_) == '=') ++pos_;
            skip_arg_whitespace(true);
            if (at(pos_) == '\\') {
                read_control_sequence();
            } else if (pos_ < n()) {
                next_utf8(s_, pos_);
            }
            return;
        }
        if (name == "newenvironment" || name == "renewenvironment") {
            parse_args_flexible(node, 3);
            return;
        }
        skip_arg_whitespace(true);
        if (at(pos_) == '\\') {
            node.content = read_control_sequence();
            parse_args_flexible(node, 1);
        } else {
            parse_args_flexible(node, 2);
        }
    }

    void parse_token_arg(TexNode& node, bool skip_spaces) {
        if (skip_spaces) {
            while (pos_ < n() && is_blank(s_[pos_])) ++pos_;
        }
        if (pos_ >= n()) return;
        const char c = s_[pos_];
        if (c == '{') {
            if (frames_.size() < kMaxDepth) node.args.push_back(parse_delimited_arg(false));
            return;
        }
        TexArg arg;
        arg.braced = false;
        arg.span.begin = pos_;
        if (c == '\\') {
            parse_command(arg.children);
        } else if (c == '}' || c == '$' || c == '%' || c == '\n' || c == ']') {
            return;
        } else {
            const std::size_t begin = pos_;
            next_utf8(s_, pos_);
            append_text(arg.children, s_, begin, pos_);
        }
        arg.span.end = pos_;
        node.args.push_back(std::move(arg));
    }

    void parse_math(std::vector<TexNode>& out, std::size_t start, std::string_view open, std::string_view close) {
        const std::size_t body = start + open.size();
        std::size_t close_at = scan_math_close(body, close);
        TexNode m;
        m.kind = NodeKind::Math;
        m.name = std::string(open);
        if (close_at == std::string::npos) {
            degraded_ = true;
            close_at = paragraph_end(body);
            m.content = s_.substr(body, close_at - body);
            pos_ = close_at;
        } else {
            m.content = s_.substr(body, close_at - body);
            pos_ = close_at + close.size();
        }
        m.span = {start, pos_};
        out.push_back(std::move(m));
    }

    void parse_verb(std::vector<TexNode>& out, std::size_t start, std::string name) {
        TexNode v;
        v.kind = NodeKind::Verbatim;
        v.name = std::move(name);
        if (v.name == "lstinline") {
            TexNode scratch;
            parse_args(scratch, false, true);
        } else if (at(pos_) == '*') {
            v.starred = true;
            ++pos_;
        }
        if (pos_ >= n() || s_[pos_] == '\n') {
            degraded_ = true;
            v.span = {start, pos_};
            out.push_back(std::move(v));
            return;
        }
        const char open = s_[pos_];
        const char close = open == '{' ? '}' : open;
        const std::size_t body = pos_ + 1;
        auto end = s_.find(close, body);
        const auto eol = s_.find('\n', body);
        if (end == std::string::npos || (eol != std::string::npos && eol < end)) {
            degraded_ = true;
            end = eol == std::string::npos ? n() : eol;
            v.content = s_.substr(body, end - body);
            pos_ = end;
        } else {
            v.content = s_.substr(body, end - body);
            pos_ = end + 1;
        }
        v.span = {start, pos_};
        out.push_back(std::move(v));
    }

    void parse_environment(std::vector<TexNode>& out, std::size_t start) {
        std::size_t i = pos_;
        while (i < n() && is_blank(s_[i])) ++i;
        const auto close = at(i) == '{' ? s_.find('}', i) : std::string::npos;
        const auto eol = s_.find('\n', i);
        if (close == std::string::npos || (eol != std::string::npos && eol < close) ||
            frames_.size() >= kMaxDepth) {
            degraded_ = true;
            TexNode cmd;
            cmd.kind = NodeKind::Command;
            cmd.name = "begin";
            cmd.span = {start, pos_};
            out.push_back(std::move(cmd));
            return;
        }
        const std::string name(trim(std::string_view(s_).substr(i + 1, close - i - 1)));
        pos_ = close + 1;

        if (is_verbatim_environment(name)) {
            TexNode v;
            v.kind = NodeKind::Verbatim;
            v.name = name;
            const std::string end_marker = "\\end{" + name + "}";
            const auto end = s_.find(end_marker, pos_);
            if (end == std::string::npos) {
                degraded_ = true;
                v.content = s_.substr(pos_);
                pos_ = n();
            } else {
                v.content = s_.substr(pos_, end - pos_);
                pos_ = end + end_marker.size();
            }
            v.span = {start, pos_};
            out.push_back(std::move(v));
            return;
        }

        TexNode env;
        env.kind = NodeKind::Environment;
        env.name = name;
        parse_args(env, false, takes_no_braced_args(name));
        bool closed = false;
        env.children = parse_sequence(FrameKind::Env, name, closed);
        env.span = {start, pos_};
        out.push_back(std::move(env));
    }

    // At "\end": reads "\end{name}" and returns name, advancing pos_.
    std::optional<std::string> try_read_end() {
        if (s_.compare(pos_, 4, "\\end") != 0 || is_letter(at(pos_ + 4))) return std::nullopt;
        std::size_t i = pos_ + 4;
        while (i < n() && is_blank(s_[i])) ++i;
        if (at(i) != '{') return std::nullopt;
        const auto close = s_.find('}', i);
        const auto eol = s_.find('\n', i);
        if (close == std::string::npos || (eol != std::string::npos && eol < close)) return std::nullopt;
        pos_ = close + 1;
        return std::string(trim(std::string_view(s_).substr(i + 1, close - i - 1)));
    }

    void parse_command(std::vector<TexNode>& out) {
        const std::size_t start = pos_;
        ++pos_;
        if (pos_ >= n()) {
            append_text(out, s_, start, pos_);
            return;
        }
        TexNode cmd;
        cmd.kind = NodeKind::Command;
        if (is_letter(s_[pos_])) {
            const std::size_t b = pos_;
            while (pos_ < n() && is_letter(s_[pos_])) ++pos_;
            cmd.name = s_.substr(b, pos_ - b);
        } else {
            const std::size_t b = pos_;
            next_utf8(s_, pos_);
            cmd.name = s_.substr(b, pos_ - b);
        }

        if (cmd.name == "(") {
            parse_math(out, start, "\\(", "\\)");
            return;
        }
        if (cmd.name == "[") {
            parse_math(out, start, "\\[", "\\]");
            return;
        }
        if (cmd.name == "begin") {
            parse_environment(out, start);
            return;
        }
        if (cmd.name == "verb" || cmd.name == "lstinline") {
            parse_verb(out, start, cmd.name);
            return;
        }

        if (is_accent_symbol(cmd.name)) {
            parse_token_arg(cmd, false);
        } else if (cmd.name == "\\") {
            if (at(pos_) == '*') {
                cmd.starred = true;
                ++pos_;
            }
            if (at(pos_) == '[' && find_optional_close(pos_) != std::string::npos) {
                cmd.args.push_back(parse_delimited_arg(true));
            }
        } else if (is_letter(cmd.name.front())) {
            if (at(pos_) == '*') {
                cmd.starred = true;
                ++pos_;
            }
            if (is_definition_command(cmd.name)) {
                parse_definition(cmd);
            } else if (is_accent_word(cmd.name)) {
                parse_token_arg(cmd, true);
            } else if (optional_only_commands().contains(cmd.name)) {
                parse_args(cmd, true, true);
            } else if (!no_arg_commands().contains(cmd.name)) {
                parse_args(cmd, true);
            }
        }
        cmd.span = {start, pos_};
        out.push_back(std::move(cmd));
    }

    std::vector<TexNode> parse_sequence(FrameKind kind, std::string name, bool& closed) {
        frames_.push_back({kind, std::move(name)});
        std::vector<TexNode> out;
        closed = false;
        auto finish = [&](bool ok) {
            closed = ok;
            frames_.pop_back();
        };
        while (pos_ < n()) {
            const char c = s_[pos_];
            if (c == '\\') {
                const std::size_t save = pos_;
                if (auto end_name = try_read_end()) {
                    const Frame& top = frames_.back();
                    if (top.kind == FrameKind::Env && top.name == *end_name) {
                        finish(true);
                        return out;
                    }
                    degraded_ = true;
                    if (frame_open(FrameKind::Env, *end_name)) {
                        // Implicitly close this frame; the owner consumes \end.
                        pos_ = save;
                        finish(false);
                        return out;
                    }
                    continue;  // stray \end dropped
                }
                pos_ = save;
                parse_command(out);
            } else if (c == '{') {
                if (frames_.size() >= kMaxDepth) {
                    degraded_ = true;
                    append_text(out, s_, pos_, pos_ + 1);
                    ++pos_;
                    continue;
                }
                TexNode g;
                g.kind = NodeKind::Group;
                const std::size_t start = pos_;
                ++pos_;
                bool group_closed = false;
                g.children = parse_sequence(FrameKind::Brace, {}, group_closed);
                g.span = {start, pos_};
                out.push_back(std::move(g));
            } else if (c == '}') {
                if (frames_.back().kind == FrameKind::Brace) {
                    ++pos_;
                    finish(true);
                    return out;
                }
                degraded_ = true;
                if (frame_open(FrameKind::Brace)) {
                    finish(false);
                    return out;
                }
                ++pos_;
            } else if (c == ']' && frames_.back().kind == FrameKind::Bracket) {
                ++pos_;
                finish(true);
                return out;
            } else if (c == '$') {
                if (at(pos_ + 1) == '$') {
                    parse_math(out, pos_, "$$", "$$");
                } else {
                    parse_math(out, pos_, "$", "$");
                }
            } else if (c == '%' && comment_starts(pos_)) {
                TexNode comment;
                comment.kind = NodeKind::Comment;
                const auto eol = s_.find('\n', pos_);
                comment.content = s_.substr(pos_ + 1, (eol == std::string::npos ? n() : eol) - pos_ - 1);
                const std::size_t start = pos_;
                pos_ = comment_end(pos_);
                comment.span = {start, pos_};
                out.push_back(std::move(comment));
            } else {
                const std::size_t start = pos_;
                ++pos_;
                while (pos_ < n()) {
                    const char d = s_[pos_];
                    if (d == '\\' || d == '{' || d == '}' || d == '$' || d == '%' || d == ']') break;
                    ++pos_;
                }
                append_text(out, s_, start, pos_);
            }
        }
        if (kind != FrameKind::Root) degraded_ = true;
        finish(false);
        return out;
    }

    const std::string& s_;
    ParseOptions opt_;
    std::size_t pos_ = 0;
    std::vector<Frame> frames_;
    bool degraded_ = false;
};

}  // namespace

TexDocument parse_tex(std::string source, ParseOptions options) {
    TexDocument doc;
    doc.source = std::move(source);
    Parser parser(doc.source, options);
    doc.nodes = parser.parse();
    doc.degraded = parser.degraded();
    return doc;
}

}  // namespace scifig::latex
