#include "arprep/bbpe.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "arprep/normalize.hpp"
#include "arprep/parallel.hpp"

namespace arprep {

namespace {

constexpr std::array<std::string_view, kNumSpecial> kSpecialNames{"[PAD]", "[UNK]", "[CLS]",
                                                                  "[SEP]", "[MASK]"};

struct ByteMap {
  std::array<char32_t, 256> to_cp{};
  std::unordered_map<char32_t, unsigned char> to_byte;

  ByteMap() {
    char32_t extra = 256;
    for (int b = 0; b < 256; ++b) {
      const bool printable = (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174);
      to_cp[b] = printable ? static_cast<char32_t>(b) : extra++;
      to_byte[to_cp[b]] = static_cast<unsigned char>(b);
    }
  }
};

const ByteMap& byte_map() {
  static const ByteMap map;
  return map;
}

}  // namespace

std::string_view special_token_name(TokenId id) {
  if (id < 0 || id >= kNumSpecial) throw std::out_of_range("not a special token id");
  return kSpecialNames[static_cast<std::size_t>(id)];
}

std::string bytes_to_printable(std::string_view bytes) {
  const auto& map = byte_map();
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) utf8::append(out, map.to_cp[b]);
  return out;
}

std::string printable_to_bytes(std::string_view text) {
  const auto& map = byte_map();
  std::string out;
  utf8::for_each(text, [&](char32_t cp, std::size_t pos, std::size_t) {
    const auto it = map.to_byte.find(cp);
    if (cp == utf8::kInvalid || it == map.to_byte.end()) {
      throw std::invalid_argument("character at byte " + std::to_string(pos) +
                                  " is outside the byte alphabet");
    }
    out.push_back(static_cast<char>(it->second));
  });
  return out;
}

BbpeVocab::BbpeVocab() {
  bytes_.resize(kFirstMergeId);
  for (int b = 0; b < 256; ++b) {
    bytes_[static_cast<std::size_t>(kFirstByteId + b)] = std::string(1, static_cast<char>(b));
    by_bytes_.emplace(bytes_[static_cast<std::size_t>(kFirstByteId + b)], kFirstByteId + b);
  }
}

bool BbpeVocab::can_merge(TokenId left, TokenId right) const {
  if (is_special(left) || is_special(right) || !contains(left) || !contains(right)) return false;
  std::string merged = token_bytes(left) + token_bytes(right);
  if (by_bytes_.count(merged)) return false;
  return std::find(kSpecialNames.begin(), kSpecialNames.end(), merged) == kSpecialNames.end();
}

TokenId BbpeVocab::add_merge(TokenId left, TokenId right) {
  if (!can_merge(left, right)) {
    throw std::invalid_argument("invalid merge (" + std::to_string(left) + ", " +
                                std::to_string(right) + ")");
  }
  const auto id = static_cast<TokenId>(bytes_.size());
  bytes_.push_back(token_bytes(left) + token_bytes(right));
  by_bytes_.emplace(bytes_.back(), id);
  rank_.emplace(pair_key(left, right), static_cast<std::int64_t>(merges_.size()));
  merges_.push_back({left, right});
  return id;
}

std::int64_t BbpeVocab::merge_rank(TokenId left, TokenId right) const {
  const auto it = rank_.find(pair_key(left, right));
  return it == rank_.end() ? -1 : it->second;
}

std::string BbpeVocab::token_string(TokenId id) const {
  if (!contains(id)) throw std::out_of_range("unknown token id " + std::to_string(id));
  if (is_special(id)) return std::string(kSpecialNames[static_cast<std::size_t>(id)]);
  return bytes_to_printable(token_bytes(id));
}

BbpeVocab BbpeVocab::prefix(std::size_t n_merges) const {
  BbpeVocab v;
  v.target_size_ = target_size_;
  for (std::size_t i = 0; i < std::min(n_merges, merges_.size()); ++i) {
    v.add_merge(merges_[i].left, merges_[i].right);
  }
  return v;
}

std::string BbpeVocab::merges_text() const {
  std::string out = "#version: 0.2\n";
  for (const auto& m : merges_) {
    out += token_string(m.left);
    out.push_back(' ');
    out += token_string(m.right);
    out.push_back('\n');
  }
  return out;
}

std::string BbpeVocab::vocab_json() const {
  // std::map keys give a platform-independent byte order.
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t id = 0; id < size(); ++id) j[token_string(static_cast<TokenId>(id))] = id;
  return j.dump(1) + "\n";
}

BbpeVocab BbpeVocab::from_merges_text(std::string_view text) {
  BbpeVocab v;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.starts_with("#version")) continue;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || line.find(' ', sp + 1) != std::string_view::npos) {
      throw std::runtime_error("merges line " + std::to_string(line_no) +
                               ": expected two tokens separated by one space");
    }
    auto lookup = [&](std::string_view tok) {
      const auto it = v.by_bytes_.find(printable_to_bytes(tok));
      if (it == v.by_bytes_.end()) {
        throw std::runtime_error("merges line " + std::to_string(line_no) + ": unknown token '" +
                                 std::string(tok) + "'");
      }
      return it->second;
    };
    const TokenId l = lookup(line.substr(0, sp));
    const TokenId r = lookup(line.substr(sp + 1));
    if (!v.can_merge(l, r)) {
      throw std::runtime_error("merges line " + std::to_string(line_no) +
                               ": merge duplicates an existing token");
    }
    v.add_merge(l, r);
  }
  return v;
}

void BbpeVocab::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
  };
  write(dir / "merges.txt", merges_text());
  write(dir / "vocab.json", vocab_json());
}

BbpeVocab BbpeVocab::load(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  BbpeVocab v = from_merges_text(read(dir / "merges.txt"));
  if (std::filesystem::exists(dir / "vocab.json")) {
    const auto j = nlohmann::json::parse(read(dir / "vocab.json"));
    if (j.size() != v.size()) {
      throw std::runtime_error("vocab.json has " + std::to_string(j.size()) +
                               " entries, merges imply " + std::to_string(v.size()));
    }
    for (std::size_t id = 0; id < v.size(); ++id) {
      const auto tok = v.token_string(static_cast<TokenId>(id));
      if (!j.contains(tok) || j[tok].get<std::size_t>() != id) {
        throw std::runtime_error("vocab.json disagrees with merges.txt at id " +
                                 std::to_string(id));
      }
    }
  }
  v.target_size_ = v.size();
  return v;
}

std::vector<std::string> pretokenize(std::string_view text) {
  auto words = split_words(text);
  for (std::size_t i = 1; i < words.size(); ++i) words[i].insert(words[i].begin(), kWordBoundary);
  return words;
}

void count_words(std::string_view text, WordCounts& counts) {
  for (auto& w : pretokenize(text)) ++counts[std::move(w)];
}

WordCounts count_corpus_words(std::span<const CleanDocument> docs, unsigned workers) {
  const unsigned w = std::max(1u, workers);
  std::vector<WordCounts> partial(w);
  parallel_blocks(docs.size(), w, [&](std::size_t slot, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (const auto& s : docs[i].sentences) count_words(s.text, partial[slot]);
    }
  });
  WordCounts total = std::move(partial[0]);
  for (std::size_t i = 1; i < partial.size(); ++i) {
    for (auto& [word, n] : partial[i]) total[word] += n;
  }
  return total;
}

namespace {

std::uint64_t pair_key(TokenId l, TokenId r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) |
         static_cast<std::uint32_t>(r);
}
TokenId key_left(std::uint64_t k) { return static_cast<TokenId>(k >> 32); }
TokenId key_right(std::uint64_t k) { return static_cast<TokenId>(k & 0xffffffffu); }

// Three-way comparison of a+b against c+d as unsigned byte strings.
int compare_concat(std::string_view a, std::string_view b, std::string_view c,
                   std::string_view d) {
  const std::size_t n1 = a.size() + b.size();
  const std::size_t n2 = c.size() + d.size();
  const std::size_t n = std::min(n1, n2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<unsigned char>(i < a.size() ? a[i] : b[i - a.size()]);
    const auto y = static_cast<unsigned char>(i < c.size() ? c[i] : d[i - c.size()]);
    if (x != y) return x < y ? -1 : 1;
  }
  return n1 < n2 ? -1 : (n1 > n2 ? 1 : 0);
}

struct TrainWord {
  std::vector<TokenId> symbols;
  std::uint64_t freq = 0;
};

struct HeapEntry {
  std::uint64_t count;
  std::uint64_t pair;
};

class Trainer {
 public:
  Trainer(const WordCounts& counts, const TrainOptions& opts) : opts_(opts) {
    std::vector<std::pair<std::string_view, std::uint64_t>> sorted;
    sorted.reserve(counts.size());
    for (const auto& [w, n] : counts) {
      if (!w.empty() && n > 0) sorted.emplace_back(w, n);
    }
    std::sort(sorted.begin(), sorted.end());
    words_.reserve(sorted.size());
    for (const auto& [w, n] : sorted) {
      TrainWord tw;
      tw.freq = n;
      tw.symbols.reserve(w.size());
      for (unsigned char b : w) tw.symbols.push_back(BbpeVocab::byte_token(b));
      words_.push_back(std::move(tw));
    }
    vocab_.set_target_size(opts.target_size);
  }

  BbpeVocab run() {
    for (std::uint32_t w = 0; w < words_.size(); ++w) {
      const auto& s = words_[w].symbols;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const auto k = pair_key(s[i], s[i + 1]);
        counts_[k] += words_[w].freq;
        auto& where = where_[k];
        if (where.empty() || where.back() != w) where.push_back(w);
      }
    }
    for (const auto& [k, c] : counts_) heap_.push({c, k});
    stamp_.assign(words_.size(), 0);

    while (vocab_.size() < opts_.target_size && !heap_.empty()) {
      const HeapEntry top = heap_.top();
      heap_.pop();
      const auto it = counts_.find(top.pair);
      const std::uint64_t current = it == counts_.end() ? 0 : it->second;
      if (current != top.count) {
        if (current > 0) heap_.push({current, top.pair});
        continue;
      }
      if (current < opts_.min_frequency) break;
      const TokenId l = key_left(top.pair);
      const TokenId r = key_right(top.pair);
      if (!vocab_.can_merge(l, r)) continue;
      apply(top.pair, l, r, vocab_.add_merge(l, r));
    }
    return std::move(vocab_);
  }

 private:
  struct Less {
    const BbpeVocab* vocab;
    // True when a ranks below b.
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.count != b.count) return a.count < b.count;
      const auto& al = vocab->token_bytes(key_left(a.pair));
      const auto& ar = vocab->token_bytes(key_right(a.pair));
      const auto& bl = vocab->token_bytes(key_left(b.pair));
      const auto& br = vocab->token_bytes(key_right(b.pair));
      const int c = compare_concat(al, ar, bl, br);
      if (c != 0) return c > 0;
      return al > bl;
    }
  };

  void apply(std::uint64_t key, TokenId l, TokenId r, TokenId merged) {
    ++iteration_;
    std::vector<std::uint32_t> occurrences = std::move(where_[key]);
    where_.erase(key);
    std::vector<std::uint64_t> touched;
    std::vector<TokenId> next;
    for (const std::uint32_t w : occurrences) {
      if (stamp_[w] == iteration_) continue;
      stamp_[w] = iteration_;
      auto& word = words_[w];
      auto& s = word.symbols;
      next.clear();
      bool hit = false;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == l && s[i + 1] == r) {
          next.push_back(merged);
          i += 2;
          hit = true;
        } else {
          next.push_back(s[i]);
          ++i;
        }
      }
      if (!hit) continue;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const auto k = pair_key(s[i], s[i + 1]);
        auto c = counts_.find(k);
        c->second -= word.freq;
        if (c->second == 0) counts_.erase(c);
      }
      for (std::size_t i = 0; i + 1 < next.size(); ++i) {
        const auto k = pair_key(next[i], next[i + 1]);
        counts_[k] += word.freq;
        if (next[i] == merged || next[i + 1] == merged) {
          auto& where = where_[k];
          if (where.empty() || where.back() != w) where.push_back(w);
          touched.push_back(k);
        }
      }
      s.swap(next);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (const auto k : touched) {
      const auto c = counts_.find(k);
      if (c != counts_.end()) heap_.push({c->second, k});
    }
  }

  TrainOptions opts_;
  BbpeVocab vocab_;
  std::vector<TrainWord> words_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, Less> heap_{Less{&vocab_}};
  std::vector<std::uint32_t> stamp_;
  std::uint32_t iteration_ = 0;
};

}  // namespace

BbpeVocab train_bbpe(const WordCounts& words, const TrainOptions& opts) {
  if (opts.target_size <= static_cast<std::size_t>(kFirstMergeId)) {
    throw std::invalid_argument("target_size must exceed " + std::to_string(kFirstMergeId) +
                                " (256 bytes + " + std::to_string(kNumSpecial) +
                                " special tokens)");
  }
  bool any = false;
  for (const auto& [w, n] : words) {
    if (!w.empty() && n > 0) {
      any = true;
      break;
    }
  }
  if (!any) throw std::invalid_argument("cannot train a tokenizer on an empty corpus");
  return Trainer(words, opts).run();
}

BbpeVocab train_bbpe(std::span<const CleanDocument> docs, const TrainOptions& opts,
                     unsigned workers) {
  return train_bbpe(count_corpus_words(docs, workers), opts);
}

std::vector<TokenId> encode_word(std::string_view word_bytes, const BbpeVocab& vocab) {
  std::vector<TokenId> s;
  s.reserve(word_bytes.size());
  for (unsigned char b : word_bytes) s.push_back(BbpeVocab::byte_token(b));
  while (s.size() >= 2) {
    std::int64_t best = -1;
    TokenId bl = 0;
    TokenId br = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const auto rank = vocab.merge_rank(s[i], s[i + 1]);
      if (rank >= 0 && (best < 0 || rank < best)) {
        best = rank;
        bl = s[i];
        br = s[i + 1];
      }
    }
    if (best < 0) break;
    const TokenId merged = kFirstMergeId + static_cast<TokenId>(best);
    std::size_t out = 0;
    for (std::size_t i = 0; i < s.size();) {
      if (i + 1 < s.size() && s[i] == bl && s[i + 1] == br) {
        s[out++] = merged;
        i += 2;
      } else {
        s[out++] = s[i++];
      }
    }
    s.resize(out);
  }
  return s;
}

std::vector<TokenizedWord> encode(std::string_view text, const BbpeVocab& vocab) {
  const auto words = pretokenize(text);
  std::vector<TokenizedWord> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    out[i].word_index = i;
    out[i].token_ids = encode_word(words[i], vocab);
  }
  return out;
}

std::vector<TokenId> encode_ids(std::string_view text, const BbpeVocab& vocab) {
  std::vector<TokenId> ids;
  for (auto& w : encode(text, vocab)) ids.insert(ids.end(), w.token_ids.begin(), w.token_ids.end());
  return ids;
}

std::string decode_bytes(std::span<const TokenId> ids, const BbpeVocab& vocab) {
  std::string out;
  for (const TokenId id : ids) {
    if (!vocab.contains(id)) throw std::out_of_range("unknown token id " + std::to_string(id));
    if (vocab.is_special(id)) {
      out += special_token_name(id);
    } else {
      out += vocab.token_bytes(id);
    }
  }
  return out;
}

DecodeResult decode_with_stats(std::span<const TokenId> ids, const BbpeVocab& vocab) {
  DecodeResult r;
  r.invalid_sequences = utf8::sanitize(decode_bytes(ids, vocab), r.text);
  return r;
}

std::string decode(std::span<const TokenId> ids, const BbpeVocab& vocab) {
  return decode_with_stats(ids, vocab).text;
}

}  // namespace arprep
