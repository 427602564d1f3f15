#ifndef CBGEN_TEXT_HPP
#define CBGEN_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace cbgen {

// Tokenizer version tag stored in vectorizers; bump if the rules change.
inline constexpr const char* kTokenizerVersion = "ws_lower_v1";

// Lowercase (ASCII), split on whitespace, strip leading/trailing punctuation
// from each token, drop tokens that end up empty. Bytes >= 0x80 pass through
// untouched, so UTF-8 text survives minus case folding.
std::vector<std::string> tokenize(std::string_view text);

// Splits on a single character; keeps empty fields.
std::vector<std::string_view> split(std::string_view s, char sep);

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

// Fixed-point formatting for report files.
std::string format_fixed(double v, int digits);

}  // namespace cbgen

#endif  // CBGEN_TEXT_HPP
