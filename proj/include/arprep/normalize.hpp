#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace arprep {

enum class CharClass : std::uint8_t {
  kArabicLetter,
  kArabicDiacritic,  // tashkeel
  kTatweel,
  kLatinLetter,
  kDigit,
  kPunctuation,
  kWhitespace,
  kEmoji,
  kOther,
};

const char* to_string(CharClass c);

namespace detail {
extern const std::array<CharClass, 0x10000> kBmpClass;
CharClass classify_astral(char32_t cp);
}  // namespace detail

inline CharClass classify(char32_t cp) {
  return cp < 0x10000 ? detail::kBmpClass[cp] : detail::classify_astral(cp);
}

inline bool is_whitespace(char32_t cp) { return classify(cp) == CharClass::kWhitespace; }
inline bool is_arabic_letter(char32_t cp) { return classify(cp) == CharClass::kArabicLetter; }

namespace utf8 {

inline constexpr char32_t kInvalid = 0xFFFFFFFF;

struct Decoded {
  char32_t cp;      // kInvalid for a malformed byte
  std::size_t len;  // bytes consumed, >= 1
};

// Decodes one scalar value at s[pos]. Malformed, overlong and surrogate
// encodings consume a single byte and report kInvalid.
inline Decoded decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len;
  char32_t cp;
  char32_t min;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return {kInvalid, 1};
  }
  if (pos + len > s.size()) return {kInvalid, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {kInvalid, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {kInvalid, 1};
  return {cp, len};
}

void append(std::string& out, char32_t cp);

// Number of scalar values; each malformed byte counts as one.
std::size_t length(std::string_view s);

// Replaces every malformed byte with U+FFFD. Returns the replacement count.
std::size_t sanitize(std::string_view in, std::string& out);

// Calls fn(cp, byte_offset, byte_len) for each scalar value.
template <typename Fn>
void for_each(std::string_view s, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto d = decode(s, pos);
    fn(d.cp, pos, d.len);
    pos += d.len;
  }
}

}  // namespace utf8

// Splits on Unicode whitespace; malformed bytes belong to words.
std::vector<std::string> split_words(std::string_view text);

/// Removes tashkeel, tatweel, emoji and HTML/XML markup, and decodes the
/// common named HTML entities. Everything else is copied through in order,
/// including malformed UTF-8 bytes. Idempotent.
std::string normalize_text(std::string_view text);

/// Arabic letters over non-whitespace scalar values; 0 for blank input.
double arabic_ratio(std::string_view text);

/// True iff the text contains an ASCII letter [A-Za-z].
bool contains_latin(std::string_view text);

}  // namespace arprep
