#include "arprep/normalize.hpp"

#include <array>

namespace arprep {

const char* to_string(CharClass c) {
  switch (c) {
    case CharClass::kArabicLetter: return "arabic_letter";
    case CharClass::kArabicDiacritic: return "arabic_diacritic";
    case CharClass::kTatweel: return "tatweel";
    case CharClass::kLatinLetter: return "latin_letter";
    case CharClass::kDigit: return "digit";
    case CharClass::kPunctuation: return "punctuation";
    case CharClass::kWhitespace: return "whitespace";
    case CharClass::kEmoji: return "emoji";
    case CharClass::kOther: return "other";
  }
  return "other";
}

namespace {

constexpr std::array<CharClass, 128> make_ascii_table() {
  std::array<CharClass, 128> t{};
  for (auto& c : t) c = CharClass::kOther;
  for (int c = 'a'; c <= 'z'; ++c) t[c] = CharClass::kLatinLetter;
  for (int c = 'A'; c <= 'Z'; ++c) t[c] = CharClass::kLatinLetter;
  for (int c = '0'; c <= '9'; ++c) t[c] = CharClass::kDigit;
  for (char c : std::string_view("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")) {
    t[static_cast<unsigned char>(c)] = CharClass::kPunctuation;
  }
  for (char c : std::string_view(" \t\n\v\f\r")) {
    t[static_cast<unsigned char>(c)] = CharClass::kWhitespace;
  }
  return t;
}

constexpr auto kAsciiTable = make_ascii_table();

constexpr bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

constexpr CharClass classify_arabic_block(char32_t cp) {
  if (cp == 0x0640) return CharClass::kTatweel;
  if (in(cp, 0x064B, 0x065F) || cp == 0x0670) return CharClass::kArabicDiacritic;
  if (in(cp, 0x0620, 0x063F) || in(cp, 0x0641, 0x064A) || in(cp, 0x066E, 0x066F) ||
      in(cp, 0x0671, 0x06D3) || cp == 0x06D5 || in(cp, 0x06EE, 0x06EF) ||
      in(cp, 0x06FA, 0x06FC) || cp == 0x06FF) {
    return CharClass::kArabicLetter;
  }
  if (in(cp, 0x0660, 0x0669) || in(cp, 0x06F0, 0x06F9)) return CharClass::kDigit;
  if (in(cp, 0x0609, 0x060D) || cp == 0x061B || in(cp, 0x061D, 0x061F) ||
      in(cp, 0x066A, 0x066D) || cp == 0x06D4) {
    return CharClass::kPunctuation;
  }
  return CharClass::kOther;
}

constexpr CharClass classify_slow(char32_t cp) {
  if (cp < 0x80) return kAsciiTable[cp];
  if (in(cp, 0x0600, 0x06FF)) return classify_arabic_block(cp);
  if (in(cp, 0x0750, 0x077F) || in(cp, 0x08A0, 0x08C9)) return CharClass::kArabicLetter;
  if (in(cp, 0xFB50, 0xFDFF)) {
    if (in(cp, 0xFD3E, 0xFD3F)) return CharClass::kPunctuation;
    return CharClass::kArabicLetter;
  }
  if (in(cp, 0xFE70, 0xFEFC)) return CharClass::kArabicLetter;

  if (cp == 0x85 || cp == 0xA0 || cp == 0x1680 || in(cp, 0x2000, 0x200A) || cp == 0x2028 ||
      cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000) {
    return CharClass::kWhitespace;
  }
  if (in(cp, 0x1F600, 0x1F64F) || in(cp, 0x1F300, 0x1F5FF) || in(cp, 0x1F680, 0x1F6FF) ||
      in(cp, 0x1F900, 0x1F9FF) || in(cp, 0x2600, 0x27BF)) {
    return CharClass::kEmoji;
  }
  if (in(cp, 0xC0, 0x24F) && cp != 0xD7 && cp != 0xF7) return CharClass::kLatinLetter;
  if (in(cp, 0xA1, 0xBF) || cp == 0xD7 || cp == 0xF7 || in(cp, 0x2010, 0x2027) ||
      in(cp, 0x2030, 0x205E) || in(cp, 0x3001, 0x3003) || in(cp, 0x3008, 0x3011)) {
    return CharClass::kPunctuation;
  }
  return CharClass::kOther;
}

constexpr std::array<CharClass, 0x10000> make_bmp_table() {
  std::array<CharClass, 0x10000> t{};
  for (char32_t cp = 0; cp < 0x10000; ++cp) t[cp] = classify_slow(cp);
  return t;
}

}  // namespace

namespace detail {
constexpr std::array<CharClass, 0x10000> kBmpClass = make_bmp_table();
CharClass classify_astral(char32_t cp) { return classify_slow(cp); }
}  // namespace detail

namespace utf8 {

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for_each(s, [&](char32_t, std::size_t, std::size_t) { ++n; });
  return n;
}

std::size_t sanitize(std::string_view in, std::string& out) {
  std::size_t bad = 0;
  out.clear();
  out.reserve(in.size());
  for_each(in, [&](char32_t cp, std::size_t pos, std::size_t len) {
    if (cp == kInvalid) {
      append(out, 0xFFFD);
      ++bad;
    } else {
      out.append(in.substr(pos, len));
    }
  });
  return bad;
}

}  // namespace utf8

namespace {

constexpr std::size_t kMaxTagChars = 128;

struct Entity {
  std::string_view name;  // without '&' and ';'
  char32_t cp;
};

constexpr std::array<Entity, 10> kEntities{{
    {"amp", U'&'},
    {"lt", U'<'},
    {"gt", U'>'},
    {"quot", U'"'},
    {"apos", U'\''},
    {"nbsp", 0x00A0},
    {"laquo", 0x00AB},
    {"raquo", 0x00BB},
    {"hellip", 0x2026},
    {"mdash", 0x2014},
}};

// Length in bytes of a tag starting at s[pos] == '<', or 0 if none.
std::size_t tag_length(std::string_view s, std::size_t pos) {
  if (pos + 1 >= s.size()) return 0;
  const char next = s[pos + 1];
  const bool opens_tag = (next >= 'a' && next <= 'z') || (next >= 'A' && next <= 'Z') ||
                         next == '/' || next == '!' || next == '?';
  if (!opens_tag) return 0;
  std::size_t chars = 1;
  std::size_t i = pos + 1;
  while (i < s.size() && chars < kMaxTagChars) {
    const auto d = utf8::decode(s, i);
    ++chars;
    i += d.len;
    if (d.cp == U'>') return i - pos;
    if (d.cp == U'<') return 0;
  }
  return 0;
}

// Matches "&name;" at s[pos] == '&'.
const Entity* match_entity(std::string_view s, std::size_t pos, std::size_t& len) {
  for (const auto& e : kEntities) {
    const std::size_t n = e.name.size() + 2;
    if (pos + n <= s.size() && s.compare(pos + 1, e.name.size(), e.name) == 0 &&
        s[pos + n - 1] == ';') {
      len = n;
      return &e;
    }
  }
  return nullptr;
}

bool dropped(CharClass c) {
  return c == CharClass::kArabicDiacritic || c == CharClass::kTatweel || c == CharClass::kEmoji;
}

// One left-to-right sweep. Returns true if anything was removed or decoded.
bool normalize_pass(std::string_view in, std::string& out) {
  out.clear();
  out.reserve(in.size());
  bool changed = false;
  std::size_t pos = 0;
  std::size_t kept = 0;  // start of the pending run of unchanged bytes
  auto flush = [&] { out.append(in.substr(kept, pos - kept)); };
  while (pos < in.size()) {
    const char b = in[pos];
    if (b == '<') {
      if (const std::size_t n = tag_length(in, pos)) {
        flush();
        pos += n;
        kept = pos;
        changed = true;
        continue;
      }
    } else if (b == '&') {
      std::size_t n = 0;
      if (const Entity* e = match_entity(in, pos, n)) {
        flush();
        utf8::append(out, e->cp);
        pos += n;
        kept = pos;
        changed = true;
        continue;
      }
    }
    if (static_cast<unsigned char>(b) < 0x80) {
      ++pos;
      continue;
    }
    const auto d = utf8::decode(in, pos);
    if (d.cp != utf8::kInvalid && dropped(classify(d.cp))) {
      flush();
      kept = pos + d.len;
      changed = true;
    }
    pos += d.len;
  }
  flush();
  return changed;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string current;
  std::string next;
  if (!normalize_pass(text, current)) return current;
  // Removals can splice new tags or entities together ("&am<i>p;"), so sweep
  // until a pass changes nothing. Every changing pass shortens the text.
  while (normalize_pass(current, next)) current.swap(next);
  return current;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = std::string_view::npos;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto b = static_cast<unsigned char>(text[pos]);
    utf8::Decoded d = b < 0x80 ? utf8::Decoded{b, 1} : utf8::decode(text, pos);
    const bool ws = d.cp != utf8::kInvalid && is_whitespace(d.cp);
    if (ws) {
      if (start != std::string_view::npos) {
        words.emplace_back(text.substr(start, pos - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = pos;
    }
    pos += d.len;
  }
  if (start != std::string_view::npos) words.emplace_back(text.substr(start));
  return words;
}

double arabic_ratio(std::string_view text) {
  std::size_t arabic = 0;
  std::size_t total = 0;
  utf8::for_each(text, [&](char32_t cp, std::size_t, std::size_t) {
    if (cp == utf8::kInvalid) {
      ++total;
      return;
    }
    const auto c = classify(cp);
    if (c == CharClass::kWhitespace) return;
    ++total;
    if (c == CharClass::kArabicLetter) ++arabic;
  });
  return total == 0 ? 0.0 : static_cast<double>(arabic) / static_cast<double>(total);
}

bool contains_latin(std::string_view text) {
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  }
  return false;
}

}  // namespace arprep
