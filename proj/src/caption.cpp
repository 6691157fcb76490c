#include "scifig/caption.hpp"

#include <cctype>
#include <vector>

#include "scifig/error.hpp"
#include "scifig/latex/parser.hpp"
#include "scifig/util/bytes.hpp"
#include "scifig/util/sha256.hpp"
#include "scifig/util/text.hpp"

namespace scifig::caption {

namespace detail {
extern const std::string_view kBuiltinTable;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

// Characters and sequences that a second conversion pass would reinterpret.
bool stable_replacement(std::string_view s) {
    if (s.find_first_of("\\{}$~`") != std::string_view::npos) return false;
    return s.find("--") == std::string_view::npos && s.find("''") == std::string_view::npos;
}

}  // namespace

SubstitutionTable SubstitutionTable::parse(std::string_view text) {
    SubstitutionTable table;
    table.sha256_ = sha256_hex(text);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto eol = text.find('\n', start);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(start, eol - start);
        start = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto pos = line.find("version:");
            if (pos != std::string_view::npos && table.version_.empty()) {
                table.version_ = std::string(trim(line.substr(pos + 8)));
            }
            continue;
        }
        const auto f = split_tabs(line);
        auto fail = [&](const std::string& why) {
            throw Error(ErrorKind::Format, "substitution table line " + std::to_string(line_no) + ": " + why);
        };
        if (f.size() < 2 || f[1].empty()) fail("expected kind and macro");
        const std::string_view kind = f[0];
        const std::string macro(f[1]);
        if (kind == "accent") {
            if (f.size() != 4) fail("accent needs accent, base, composed");
            if (!stable_replacement(f[3])) fail("unstable replacement");
            table.composed_[{macro, std::string(f[2])}] = std::string(f[3]);
            continue;
        }
        if (kind == "accentmark") {
            if (f.size() != 3) fail("accentmark needs accent, mark");
            table.marks_[macro] = std::string(f[2]);
            continue;
        }
        MacroRule rule;
        if (kind == "sym") {
            if (f.size() != 3) fail("sym needs a replacement");
            if (!stable_replacement(f[2])) fail("unstable replacement");
            rule.kind = MacroKind::Symbol;
            rule.replacement = std::string(f[2]);
        } else if (kind == "keep") {
            rule.kind = MacroKind::Keep;
        } else if (kind == "keeplast") {
            rule.kind = MacroKind::KeepLast;
        } else if (kind == "drop") {
            rule.kind = MacroKind::Drop;
        } else if (kind == "ref") {
            rule.kind = MacroKind::Ref;
        } else if (kind == "cite") {
            rule.kind = MacroKind::Cite;
        } else if (kind == "frac") {
            rule.kind = MacroKind::Fraction;
        } else if (kind == "sqrt_") {
            rule.kind = MacroKind::Root;
        } else if (kind == "raw") {
            rule.kind = MacroKind::Raw;
        } else {
            fail("unknown kind '" + std::string(kind) + "'");
        }
        table.rules_[macro] = std::move(rule);
    }
    if (table.version_.empty()) {
        throw Error(ErrorKind::Format, "substitution table has no version header");
    }
    return table;
}

SubstitutionTable SubstitutionTable::load(const std::filesystem::path& path) {
    const Bytes data = read_file(path);
    return parse(as_chars(data));
}

const SubstitutionTable& SubstitutionTable::builtin() {
    static const SubstitutionTable table = parse(detail::kBuiltinTable);
    return table;
}

const MacroRule* SubstitutionTable::find(std::string_view macro) const {
    const auto it = rules_.find(std::string(macro));
    return it == rules_.end() ? nullptr : &it->second;
}

std::string SubstitutionTable::compose_accent(std::string_view accent, std::string_view base) const {
    if (base.empty()) {
        const auto it = composed_.find({std::string(accent), std::string()});
        return it == composed_.end() ? std::string() : it->second;
    }
    std::size_t pos = 0;
    next_utf8(base, pos);
    const std::string first(base.substr(0, pos));
    const std::string rest(base.substr(pos));
    if (const auto it = composed_.find({std::string(accent), first}); it != composed_.end()) {
        return it->second + rest;
    }
    const auto mark = marks_.find(std::string(accent));
    return first + (mark == marks_.end() ? std::string() : mark->second) + rest;
}

namespace {

using latex::NodeKind;
using latex::TexArg;
using latex::TexDocument;
using latex::TexNode;

// Maps characters that would be re-read as markup to inert look-alikes.
std::string sanitize_literal(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '\\': out += "＼"; break;
            case '{': out += "｛"; break;
            case '}': out += "｝"; break;
            case '$': out += "＄"; break;
            case '~': out += "˜"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

latex::ParseOptions caption_parse_options() {
    latex::ParseOptions opt;
    opt.comments_need_newline = true;
    return opt;
}

class Renderer {
public:
    explicit Renderer(const SubstitutionTable& table) : table_(table) {}

    std::string render_source(std::string_view source, bool math) {
        const TexDocument doc = latex::parse_tex(std::string(source), caption_parse_options());
        std::string out;
        render_nodes(doc, doc.nodes, math, out);
        return out;
    }

    bool lossy() const { return lossy_; }

private:
    void render_nodes(const TexDocument& doc, const std::vector<TexNode>& nodes, bool math, std::string& out) {
        bool eat_space = false;
        for (const auto& node : nodes) {
            if (eat_space && node.kind == NodeKind::Text) {
                render_text(skip_control_space(node.content), math, out);
            } else {
                render_node(doc, node, math, out);
            }
            eat_space = !math && swallows_space(node);
        }
    }

    // In text mode TeX discards the blanks that end a control word.
    static bool swallows_space(const TexNode& node) {
        if (node.kind != NodeKind::Command || !node.args.empty() || node.name.empty()) return false;
        for (char c : node.name) {
            if (!std::isalpha(static_cast<unsigned char>(c))) return false;
        }
        return true;
    }

    // Blanks plus at most one newline; a blank line still separates words.
    static std::string_view skip_control_space(std::string_view s) {
        std::size_t i = 0;
        bool newline = false;
        while (i < s.size()) {
            if (s[i] == ' ' || s[i] == '\t' || s[i] == '\r') {
                ++i;
            } else if (s[i] == '\n' && !newline) {
                newline = true;
                ++i;
            } else {
                break;
            }
        }
        if (i < s.size() && s[i] == '\n') return s.substr(i - 1);
        return s.substr(i);
    }

    void render_arg(const TexDocument& doc, const TexArg& arg, bool math, std::string& out) {
        render_nodes(doc, arg.children, math, out);
    }

    void render_required_args(const TexDocument& doc, const TexNode& node, bool math, std::string& out) {
        for (const auto& arg : node.args) {
            if (!arg.optional) render_arg(doc, arg, math, out);
        }
    }

    void render_text(std::string_view text, bool math, std::string& out) {
        for (char c : text) {
            if (c == '~') {
                out.push_back(' ');
            } else if (math && c == '\'') {
                out += "′";
            } else if (math && c == '&') {
                out.push_back(' ');
            } else {
                out.push_back(c);
            }
        }
    }

    void render_command(const TexDocument& doc, const TexNode& node, bool math, std::string& out) {
        const std::string& name = node.name;
        if (name == " " || name == "\n" || name == "\t" || name == "\r") {
            out.push_back(' ');
            return;
        }
        if (table_.is_accent(name)) {
            std::string base;
            if (const TexArg* arg = node.required_arg()) render_arg(doc, *arg, math, base);
            out += table_.compose_accent(name, base);
            return;
        }
        const MacroRule* rule = table_.find(name);
        if (rule == nullptr) {
            lossy_ = true;
            render_required_args(doc, node, math, out);
            return;
        }
        switch (rule->kind) {
            case MacroKind::Symbol:
                out += rule->replacement;
                render_required_args(doc, node, math, out);
                break;
            case MacroKind::Keep:
                render_required_args(doc, node, math, out);
                break;
            case MacroKind::KeepLast: {
                const TexArg* last = nullptr;
                for (const auto& arg : node.args) {
                    if (!arg.optional) last = &arg;
                }
                if (last != nullptr) render_arg(doc, *last, math, out);
                break;
            }
            case MacroKind::Drop:
                break;
            case MacroKind::Ref:
                out += kRefMarker;
                break;
            case MacroKind::Cite:
                out += kCiteMarker;
                break;
            case MacroKind::Fraction: {
                const TexArg* num = node.required_arg(0);
                const TexArg* den = node.required_arg(1);
                if (num != nullptr) render_arg(doc, *num, math, out);
                if (den != nullptr) {
                    out.push_back('/');
                    render_arg(doc, *den, math, out);
                }
                break;
            }
            case MacroKind::Root:
                out += "√";
                render_required_args(doc, node, math, out);
                break;
            case MacroKind::Raw:
                if (const TexArg* arg = node.required_arg()) out += sanitize_literal(doc.text(arg->span));
                break;
        }
    }

    void render_node(const TexDocument& doc, const TexNode& node, bool math, std::string& out) {
        switch (node.kind) {
            case NodeKind::Text:
                render_text(node.content, math, out);
                break;
            case NodeKind::Command:
                render_command(doc, node, math, out);
                break;
            case NodeKind::Environment:
                render_nodes(doc, node.children, math || latex::is_math_environment(node.name), out);
                break;
            case NodeKind::Group:
                render_nodes(doc, node.children, math, out);
                break;
            case NodeKind::Math:
                out += render_source(node.content, true);
                break;
            case NodeKind::Verbatim:
                out += sanitize_literal(node.content);
                break;
            case NodeKind::Comment:
                break;
        }
    }

    const SubstitutionTable& table_;
    bool lossy_ = false;
};

// TeX input ligatures, applied to the assembled text so that ligatures split
// by markup ("-{}-") end up the same as contiguous ones.
std::string apply_ligatures(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.compare(i, 3, "---") == 0) {
            out += "—";
            i += 3;
        } else if (s.compare(i, 2, "--") == 0) {
            out += "–";
            i += 2;
        } else if (s.compare(i, 2, "``") == 0) {
            out += "“";
            i += 2;
        } else if (s.compare(i, 2, "''") == 0) {
            out += "”";
            i += 2;
        } else if (s[i] == '`') {
            out += "‘";
            i += 1;
        } else {
            out.push_back(s[i]);
            i += 1;
        }
    }
    return out;
}

NormalizedCaption finish(std::string text, bool lossy) {
    NormalizedCaption c;
    c.text = std::move(text);
    c.char_length = utf8_length(c.text);
    c.replacements.ref = count_occurrences(c.text, kRefMarker);
    c.replacements.cit = count_occurrences(c.text, kCiteMarker);
    c.lossy = lossy;
    return c;
}

}  // namespace

NormalizedCaption normalize_caption(std::string_view latex_source, const SubstitutionTable& table) {
    Renderer renderer(table);
    const std::string rendered = renderer.render_source(latex_source, false);
    return finish(collapse_whitespace(apply_ligatures(rendered)), renderer.lossy());
}

NormalizedCaption normalize_plain_caption(std::string_view text) {
    return finish(collapse_whitespace(text), false);
}

std::size_t caption_char_length(const NormalizedCaption& caption) {
    return utf8_length(caption.text);
}

}  // namespace scifig::caption
