#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "scifig/util/bytes.hpp"

namespace scifig {

void append_utf8(std::string& out, char32_t cp);

// Decodes one scalar at `pos`, advancing it. Invalid sequences decode as
// U+FFFD and advance one byte.
char32_t next_utf8(std::string_view s, std::size_t& pos);

// Number of unicode scalars in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// ISO-8859-1 is a total mapping: byte b -> U+00bb.
std::string latin1_to_utf8(ByteView bytes);

std::string to_lower_ascii(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool ends_with_ci(std::string_view s, std::string_view suffix);

std::string_view trim(std::string_view s);

// Collapses runs of whitespace (ASCII whitespace and U+00A0) to one space and
// trims both ends.
std::string collapse_whitespace(std::string_view s);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

// Number of whitespace-separated tokens.
std::size_t word_count(std::string_view s);

}  // namespace scifig
