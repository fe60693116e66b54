#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blindeval::text {

/// Decodes UTF-8 into Unicode scalar values. Returns nullopt on invalid
/// input (overlong forms, surrogates, truncated sequences, > U+10FFFF).
std::optional<std::u32string> decode_utf8(std::string_view utf8);

bool is_valid_utf8(std::string_view utf8);

std::string encode_utf8(std::u32string_view scalars);

/// NFC normalization. Input must be valid UTF-8.
std::string nfc(std::string_view utf8);

bool is_whitespace(char32_t c);
bool is_punctuation(char32_t c);

/// Cell escaping for the TSV interchange formats: backslash, tab, newline
/// and carriage return become \\, \t, \n, \r.
std::string escape_cell(std::string_view raw);
std::string unescape_cell(std::string_view cell);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace blindeval::text
