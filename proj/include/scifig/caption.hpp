#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>

namespace scifig::caption {

enum class MacroKind { Symbol, Keep, KeepLast, Drop, Ref, Cite, Fraction, Root, Raw };

struct MacroRule {
    MacroKind kind = MacroKind::Symbol;
    std::string replacement;
};

// Macro -> replacement table, loaded from the versioned TSV data file.
class SubstitutionTable {
public:
    // Throws Error(Format) on a malformed line or an unstable replacement.
    static SubstitutionTable parse(std::string_view text);
    static SubstitutionTable load(const std::filesystem::path& path);

    // Table compiled into the binary from data/latex_symbols.tsv.
    static const SubstitutionTable& builtin();

    const MacroRule* find(std::string_view macro) const;
    // Precomposed form of `base` under `accent`, else base + combining mark.
    std::string compose_accent(std::string_view accent, std::string_view base) const;
    bool is_accent(std::string_view macro) const { return marks_.contains(std::string(macro)); }

    const std::string& version() const { return version_; }
    const std::string& sha256() const { return sha256_; }
    std::size_t size() const { return rules_.size() + composed_.size(); }

private:
    std::string version_;
    std::string sha256_;
    std::unordered_map<std::string, MacroRule> rules_;
    std::map<std::pair<std::string, std::string>, std::string> composed_;
    std::unordered_map<std::string, std::string> marks_;
};

struct Replacements {
    std::size_t ref = 0;
    std::size_t cit = 0;

    bool operator==(const Replacements&) const = default;
};

struct NormalizedCaption {
    std::string text;
    std::size_t char_length = 0;  // unicode scalars in text
    Replacements replacements;    // <ref> / <cit.> markers present in text
    bool lossy = false;           // an unknown macro was dropped

    bool operator==(const NormalizedCaption&) const = default;
};

inline constexpr std::string_view kRefMarker = "<ref>";
inline constexpr std::string_view kCiteMarker = "<cit.>";

// LaTeX caption source -> unicode plaintext. Total; idempotent on its own
// output.
NormalizedCaption normalize_caption(std::string_view latex_source,
                                    const SubstitutionTable& table = SubstitutionTable::builtin());

// Already-plain caption text (JATS): whitespace collapsing only.
NormalizedCaption normalize_plain_caption(std::string_view text);

std::size_t caption_char_length(const NormalizedCaption& caption);

}  // namespace scifig::caption
