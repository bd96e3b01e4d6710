#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "arprep/corpus_filter.hpp"

namespace arprep {

using TokenId = std::int32_t;

// Special tokens occupy the lowest ids.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr TokenId kNumSpecial = 5;
inline constexpr TokenId kFirstByteId = kNumSpecial;
inline constexpr TokenId kFirstMergeId = kFirstByteId + 256;

// Byte prepended to every word after the first one in a text.
inline constexpr char kWordBoundary = ' ';

std::string_view special_token_name(TokenId id);

struct Merge {
  TokenId left = 0;
  TokenId right = 0;
  bool operator==(const Merge&) const = default;
};

/// Byte alphabet, ordered merges and the token <-> id bijection.
/// Ids: specials 0-4, byte b at 5 + b, merge k at 261 + k.
class BbpeVocab {
 public:
  BbpeVocab();

  std::size_t size() const { return bytes_.size(); }
  std::size_t target_size() const { return target_size_; }
  void set_target_size(std::size_t n) { target_size_ = n; }

  const std::vector<Merge>& merges() const { return merges_; }
  bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecial; }
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  const std::string& token_bytes(TokenId id) const { return bytes_.at(static_cast<std::size_t>(id)); }
  static TokenId byte_token(unsigned char b) { return kFirstByteId + b; }

  // A merge is allowed when its result is not already a token: byte
  // sequences stay unique and no merged token shadows a special name.
  bool can_merge(TokenId left, TokenId right) const;
  TokenId add_merge(TokenId left, TokenId right);

  // Rank of the merge producing (left, right), or -1.
  std::int64_t merge_rank(TokenId left, TokenId right) const;

  // Printable form: specials by name, others through the byte-to-unicode map.
  std::string token_string(TokenId id) const;

  // Vocabulary restricted to the first n merges.
  BbpeVocab prefix(std::size_t n_merges) const;

  std::string merges_text() const;
  std::string vocab_json() const;
  static BbpeVocab from_merges_text(std::string_view text);

  // Writes merges.txt and vocab.json.
  void save(const std::filesystem::path& dir) const;
  // Rebuilds from merges.txt and checks vocab.json if present.
  static BbpeVocab load(const std::filesystem::path& dir);

 private:
  static std::uint64_t pair_key(TokenId l, TokenId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) |
           static_cast<std::uint32_t>(r);
  }

  std::vector<std::string> bytes_;  // per id; specials are empty
  std::vector<Merge> merges_;
  std::unordered_map<std::string, TokenId> by_bytes_;
  std::unordered_map<std::uint64_t, std::int64_t> rank_;
  std::size_t target_size_ = 64000;
};

// GPT-2 style byte <-> printable code point mapping used in vocab files.
std::string bytes_to_printable(std::string_view bytes);
std::string printable_to_bytes(std::string_view text);

/// Pre-tokenization: whitespace-separated words, each non-initial one
/// prefixed with the boundary byte.
std::vector<std::string> pretokenize(std::string_view text);

using WordCounts = std::unordered_map<std::string, std::uint64_t>;

void count_words(std::string_view text, WordCounts& counts);
WordCounts count_corpus_words(std::span<const CleanDocument> docs, unsigned workers = 1);

struct TrainOptions {
  std::size_t target_size = 64000;
  std::uint64_t min_frequency = 2;
};

/// Learns merges over pre-tokenized word units. Most frequent adjacent pair
/// first; ties go to the lexicographically smaller merged byte string, then
/// the smaller left token.
BbpeVocab train_bbpe(const WordCounts& words, const TrainOptions& opts);
BbpeVocab train_bbpe(std::span<const CleanDocument> docs, const TrainOptions& opts,
                     unsigned workers = 1);

struct TokenizedWord {
  std::size_t word_index = 0;
  std::vector<TokenId> token_ids;
};

// Applies merges in learned order to one pre-tokenized unit.
std::vector<TokenId> encode_word(std::string_view word_bytes, const BbpeVocab& vocab);

std::vector<TokenizedWord> encode(std::string_view text, const BbpeVocab& vocab);
std::vector<TokenId> encode_ids(std::string_view text, const BbpeVocab& vocab);

struct DecodeResult {
  std::string text;
  std::size_t invalid_sequences = 0;
};

// Raw concatenated bytes; specials render as their names.
std::string decode_bytes(std::span<const TokenId> ids, const BbpeVocab& vocab);
DecodeResult decode_with_stats(std::span<const TokenId> ids, const BbpeVocab& vocab);
std::string decode(std::span<const TokenId> ids, const BbpeVocab& vocab);

}  // namespace arprep
