#include "cbgen/text.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace cbgen {

static bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }
static bool is_punct_byte(unsigned char c) { return std::ispunct(c) != 0; }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < n && !is_space_byte(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::size_t b = i, e = j;
      while (b < e && is_punct_byte(static_cast<unsigned char>(text[b]))) ++b;
      while (e > b && is_punct_byte(static_cast<unsigned char>(text[e - 1])))
        --e;
      if (e > b) {
        std::string tok;
        tok.reserve(e - b);
        for (std::size_t k = b; k < e; ++k) {
          unsigned char c = static_cast<unsigned char>(text[k]);
          tok.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                                 : static_cast<char>(c));
        }
        out.push_back(std::move(tok));
      }
    }
    i = j;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return std::string(buf);
}

}  // namespace cbgen
