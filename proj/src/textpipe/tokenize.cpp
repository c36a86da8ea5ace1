#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xdd/textpipe.hpp"

namespace xdd::text {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

struct CodePoint {
  char32_t value;
  std::size_t begin;
  std::size_t end;
};

// Lenient UTF-8 decoder: malformed bytes decode to U+FFFD, one byte each.
std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0 && b0 < 0xF8) {
      len = 4;
      cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
      len = b0 < 0xF0 ? 3 : 1;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0x80) {
      cp = kInvalid;
    }
    if (len > 1) {
      bool ok = i + len <= s.size();
      for (std::size_t j = 1; ok && j < len; ++j) {
        const auto b = static_cast<unsigned char>(s[i + j]);
        if ((b & 0xC0) != 0x80) {
          ok = false;
        } else {
          cp = (cp << 6) | (b & 0x3F);
        }
      }
      if (!ok) {
        cp = kInvalid;
        len = 1;
      }
    } else if (b0 >= 0xF8) {
      cp = kInvalid;
    }
    out.push_back({cp, i, i + len});
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Simple case folding for the scripts that show up in English-language
// social media text: ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic.
char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x137 && (c % 2 == 0)) return c + 1;
  if (c >= 0x139 && c <= 0x148 && (c % 2 == 1)) return c + 1;
  if (c >= 0x14A && c <= 0x177 && (c % 2 == 0)) return c + 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E && (c % 2 == 1)) return c + 1;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
         c == 0xA0 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 ||
         c == 0x202F || c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019; }

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFF01 && c <= 0xFF0F);
}

bool is_emoji(char32_t c) {
  return (c >= 0x1F000 && c <= 0x1FAFF) || (c >= 0x2600 && c <= 0x27BF) ||
         (c >= 0x2B00 && c <= 0x2BFF) || (c >= 0x2190 && c <= 0x21FF) ||
         (c >= 0x2300 && c <= 0x23FF);
}

// Code points that extend the preceding emoji.
bool is_emoji_modifier(char32_t c) {
  return c == 0xFE0F || c == 0xFE0E || c == 0x20E3 || (c >= 0x1F3FB && c <= 0x1F3FF) ||
         (c >= 0xE0020 && c <= 0xE007F);
}

bool is_word_char(char32_t c) {
  return !is_space(c) && !is_punct(c) && !is_emoji(c) && c != 0x200D;
}

bool starts_url(const std::vector<CodePoint>& cps, std::size_t i) {
  static constexpr std::string_view kPrefixes[] = {"http://", "https://", "www."};
  for (auto prefix : kPrefixes) {
    if (i + prefix.size() > cps.size()) continue;
    bool match = true;
    for (std::size_t j = 0; j < prefix.size() && match; ++j) {
      match = to_lower(cps[i + j].value) == static_cast<char32_t>(prefix[j]);
    }
    if (match) return true;
  }
  return false;
}

bool is_url_trailer(char32_t c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ')' ||
         c == ']' || c == '}' || c == '"' || c == '\'';
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  const auto cps = decode(text);
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i].value;
    if (is_space(c)) {
      flush();
      ++i;
      continue;
    }
    if (word.empty() && starts_url(cps, i)) {
      std::size_t end = i;
      while (end < cps.size() && !is_space(cps[end].value)) ++end;
      std::size_t url_end = end;
      while (url_end > i + 1 && is_url_trailer(cps[url_end - 1].value)) --url_end;
      std::string url;
      for (std::size_t j = i; j < url_end; ++j) append_utf8(url, to_lower(cps[j].value));
      tokens.push_back(std::move(url));
      for (std::size_t j = url_end; j < end; ++j) {
        std::string p;
        append_utf8(p, cps[j].value);
        tokens.push_back(std::move(p));
      }
      i = end;
      continue;
    }
    if (is_emoji(c)) {
      flush();
      std::string emoji;
      append_utf8(emoji, c);
      ++i;
      while (i < cps.size()) {
        if (is_emoji_modifier(cps[i].value)) {
          append_utf8(emoji, cps[i].value);
          ++i;
        } else if (cps[i].value == 0x200D && i + 1 < cps.size() && is_emoji(cps[i + 1].value)) {
          append_utf8(emoji, cps[i].value);
          append_utf8(emoji, cps[i + 1].value);
          i += 2;
        } else {
          break;
        }
      }
      tokens.push_back(std::move(emoji));
      continue;
    }
    if (is_apostrophe(c) && !word.empty() && i + 1 < cps.size() &&
        is_word_char(cps[i + 1].value)) {
      word += '\'';
      ++i;
      continue;
    }
    if (is_punct(c) || c == 0x200D) {
      flush();
      if (c != 0x200D) {
        std::string p;
        append_utf8(p, c);
        tokens.push_back(std::move(p));
      }
      ++i;
      continue;
    }
    append_utf8(word, to_lower(c));
    ++i;
  }
  flush();
  return tokens;
}

bool is_punctuation_token(std::string_view token) {
  if (token.empty()) return false;
  for (const auto& cp : decode(token)) {
    if (!is_punct(cp.value)) return false;
  }
  return true;
}

}  // namespace xdd::text
