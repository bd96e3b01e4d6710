#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arprep/bbpe.hpp"
#include "arprep/corpus_filter.hpp"
#include "arprep/random.hpp"

namespace arprep {

struct MaskingPolicy {
  double mask_prob = 0.15;
  double replace_mask = 0.80;
  double replace_random = 0.10;
  double keep_original = 0.10;
  std::size_t dup_factor = 3;
  // Upper bound on masked tokens as a fraction of maskable tokens; the first
  // chosen word is always masked.
  double max_token_fraction = 0.20;

  void validate() const;
  nlohmann::json to_json() const;
};

enum class MaskAction : std::uint8_t { kMask, kRandom, kKeep };

// Token range [begin, begin + length) covered by one word.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
};

struct MaskResult {
  std::vector<TokenId> token_ids;
  std::vector<std::size_t> positions;  // sorted
  std::vector<TokenId> labels;         // original id per position
  std::vector<MaskAction> actions;     // per position
  std::size_t words_masked = 0;
};

/// Whole-word masking over the word spans of a token sequence. Positions
/// outside every span (CLS/SEP) are never touched.
MaskResult mask_word_spans(std::span<const TokenId> tokens, std::span<const WordSpan> words,
                           const MaskingPolicy& policy, Rng& rng, std::size_t vocab_size);

MaskResult whole_word_mask(std::span<const TokenizedWord> words, const MaskingPolicy& policy,
                           Rng& rng, std::size_t vocab_size);

using TokenizedSentence = std::vector<TokenizedWord>;

struct TokenizedDocument {
  std::string doc_id;
  std::vector<TokenizedSentence> sentences;
};

std::size_t token_count(const TokenizedSentence& s);

/// Encodes every sentence; sentences longer than `max_sentence_tokens` are
/// cut at the limit and counted in `truncated`.
std::vector<TokenizedDocument> tokenize_documents(std::span<const CleanDocument> docs,
                                                  const BbpeVocab& vocab,
                                                  std::size_t max_sentence_tokens,
                                                  unsigned workers = 1,
                                                  std::uint64_t* truncated = nullptr);

struct Segment {
  std::vector<TokenizedWord> words;
  std::size_t doc_index = 0;
  std::size_t token_count() const;
};

struct SegmentPair {
  Segment a;
  Segment b;
  bool is_next = true;
};

struct PairOptions {
  std::size_t max_len = 128;
  std::size_t min_target_a = 32;
  double next_prob = 0.5;
  void validate() const;
};

struct PairStats {
  std::uint64_t pairs = 0;
  std::uint64_t is_next = 0;
  std::uint64_t truncated_pairs = 0;
  std::uint64_t skipped_sentences = 0;  // trailing single sentences with no partner
  bool single_document = false;         // every pair forced to is_next
};

/// Packs consecutive sentences into segment A up to a random target length,
/// then pairs it with its true continuation or with text from another
/// document. Randomness is keyed by (seed, document index).
std::vector<SegmentPair> build_segment_pairs(std::span<const TokenizedDocument> docs,
                                             const PairOptions& opts, std::uint64_t seed,
                                             unsigned workers = 1, PairStats* stats = nullptr);

struct TrainingInstance {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> segment_ids;
  std::vector<std::size_t> masked_positions;
  std::vector<TokenId> masked_labels;
  bool is_next = true;
  std::uint32_t dup_index = 0;
  // Not serialized; kept for inspection.
  std::vector<WordSpan> word_spans;
  std::vector<MaskAction> mask_actions;
  std::size_t words = 0;
  std::size_t words_masked = 0;
};

struct GenerationStats {
  std::uint64_t instances = 0;
  std::uint64_t masked_tokens = 0;
  std::uint64_t maskable_tokens = 0;
  std::uint64_t masked_words = 0;
  std::uint64_t words = 0;
  nlohmann::json to_json() const;
};

/// Emits dup_factor instances per pair with independent maskings; masking
/// randomness is keyed by (seed, pair index, dup index).
std::vector<TrainingInstance> generate_instances(std::span<const SegmentPair> pairs,
                                                 std::size_t vocab_size,
                                                 const MaskingPolicy& policy, std::uint64_t seed,
                                                 std::size_t max_len = 128, unsigned workers = 1,
                                                 GenerationStats* stats = nullptr);

// Shard formats.
void write_instance_jsonl(std::ostream& out, const TrainingInstance& inst);
TrainingInstance parse_instance_jsonl(const std::string& line);

inline constexpr char kBinaryMagic[4] = {'A', 'R', 'P', 'I'};
inline constexpr std::uint32_t kBinaryVersion = 1;

// 16-byte header: magic, version, max_len, max_predictions (all u32 LE).
void write_binary_header(std::ostream& out, std::uint32_t max_len);
// Fixed-width record; see README for the layout.
void write_instance_binary(std::ostream& out, const TrainingInstance& inst, std::uint32_t max_len);
std::size_t binary_record_size(std::uint32_t max_len);

}  // namespace arprep
