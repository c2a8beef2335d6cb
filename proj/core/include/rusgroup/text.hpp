#pragma once

// UTF-8 helpers shared by the similarity scorers and validation.
//
// Case folding covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic
// capitals. Code points outside those blocks are left untouched, which keeps
// folding idempotent and locale-independent.

#include <string>
#include <string_view>
#include <vector>

namespace rusgroup::text {

// Invalid sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view input);
std::string encode_utf8(std::u32string_view input);

bool is_space(char32_t cp) noexcept;
bool is_punct(char32_t cp) noexcept;
char32_t fold_case(char32_t cp) noexcept;

std::string trim(std::string_view input);

// Trim plus case fold. Interior whitespace is preserved.
std::string normalize(std::string_view input, bool case_fold = true);

// Whitespace split, punctuation stripped from token edges, case folded.
// Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view input, bool case_fold = true);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace rusgroup::text
