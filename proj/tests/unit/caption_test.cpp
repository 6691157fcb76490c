#include <random>

#include "doctest.h"
#include "scifig/caption.hpp"
#include "scifig/error.hpp"
#include "scifig/util/text.hpp"
#include "support/fixtures.hpp"

using namespace scifig;
using namespace scifig::caption;

namespace {

// Fragments that exercise every rule kind; compositions of these drive the
// idempotence property.
const std::vector<std::string> kFragments = {
    "plain words ", "\\ref{a}", "\\cite{b,c}", "$\\alpha^2$", "\\textbf{bold}", "\\'e", "\\\"{o}",
    "---", "--", "``", "''", "`", "'", "~", "\\%", "\\&", "\\_", "{", "}", "$", "\\\\", "\\,",
    "\\url{x~y}", "\\verb|q_r|", "% comment\n", "\n", "  ", "\\unknown{arg}", "\\foo ", "\\frac{1}{2}",
    "\\sqrt{x}", "\\emph{", "\\label{l}", "\\[ y \\]", "\\href{u}{t}", "\\ss ", "\\S", "-", "\\-",
    "\\textcolor{red}{c}", "é", "α", "<ref>", "<cit.>", "\\c{c}", "\\LaTeX", "#", "&", "^", "_",
};

std::string random_composition(std::mt19937& rng) {
    std::uniform_int_distribution<std::size_t> count(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, kFragments.size() - 1);
    std::string s;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) s += kFragments[pick(rng)];
    return s;
}

}  // namespace

TEST_CASE("caption golden table") {
    const auto cases = testing::read_caption_cases(testing::golden_dir() / "captions.txt");
    REQUIRE(cases.size() >= 50);
    for (const auto& c : cases) {
        INFO("case: " << c.name);
        CHECK(normalize_caption(c.input).text == c.expected);
    }
}

TEST_CASE("marker counts follow the text") {
    const auto c = normalize_caption("\\ref{a} and \\cite{b} and \\eqref{c}");
    CHECK(c.replacements.ref == 2);
    CHECK(c.replacements.cit == 1);
    CHECK(c.char_length == utf8_length(c.text));
    CHECK_FALSE(c.lossy);
}

TEST_CASE("unknown macros mark the caption lossy") {
    CHECK(normalize_caption("\\mymacro{x}").lossy);
    CHECK_FALSE(normalize_caption("\\textbf{x}").lossy);
}

TEST_CASE("char length counts unicode scalars") {
    const auto c = normalize_caption("$\\alpha\\beta$");
    CHECK(c.text == "αβ");
    CHECK(c.char_length == 2);
    CHECK(caption_char_length(c) == 2);
}

TEST_CASE("plain captions only collapse whitespace") {
    const auto c = normalize_plain_caption("  a \\ref{x}\n\t b  ");
    CHECK(c.text == "a \\ref{x} b");
    CHECK(c.replacements.ref == 0);
}

TEST_CASE("idempotence on random compositions") {
    std::mt19937 rng(20240611);
    std::size_t failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::string src = random_composition(rng);
        const auto once = normalize_caption(src);
        const auto twice = normalize_caption(once.text);
        if (twice.text != once.text) {
            if (++failures <= 5) {
                INFO("source: " << src);
                CHECK(twice.text == once.text);
            }
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("substitution table parsing") {
    SUBCASE("builtin table has a version and digest") {
        const auto& t = SubstitutionTable::builtin();
        CHECK(t.version() == "1");
        CHECK(t.sha256().size() == 64);
        CHECK(t.size() > 300);
    }
    SUBCASE("custom table overrides the rules") {
        const auto t = SubstitutionTable::parse("# version: test\nsym\talpha\tALPHA\nref\tmyref\n");
        CHECK(normalize_caption("$\\alpha$ \\myref{x}", t).text == "ALPHA <ref>");
        CHECK(normalize_caption("\\ref{x}", t).text == "x");
    }
    SUBCASE("missing version header") {
        CHECK_THROWS_AS(SubstitutionTable::parse("sym\talpha\tA\n"), Error);
    }
    SUBCASE("unstable replacement rejected") {
        CHECK_THROWS_AS(SubstitutionTable::parse("# version: 1\nsym\tx\t\\y\n"), Error);
        CHECK_THROWS_AS(SubstitutionTable::parse("# version: 1\nsym\tx\ta--b\n"), Error);
    }
    SUBCASE("unknown kind rejected") {
        CHECK_THROWS_AS(SubstitutionTable::parse("# version: 1\nbogus\tx\n"), Error);
    }
    SUBCASE("accent composition falls back to a combining mark") {
        const auto& t = SubstitutionTable::builtin();
        CHECK(t.compose_accent("'", "e") == "é");
        CHECK(t.compose_accent("'", "q") == "q\u0301");
    }
}
