#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace arprep {

struct RawDocument {
  std::string doc_id;
  std::string source;  // CC, NEWS, ELKHEIR, WIKI, OTHER, ...
  std::string text;
  std::uint64_t ingest_order = 0;
};

struct Sentence {
  std::string text;  // words joined by single spaces
  std::vector<std::string> words;
  double arabic_ratio = 0.0;

  static Sentence from_words(std::vector<std::string> words);
};

struct CleanDocument {
  std::string doc_id;
  std::string source;
  std::vector<Sentence> sentences;
  std::size_t word_count = 0;
  std::uint64_t ingest_order = 0;

  // Sentences joined by '\n'.
  std::string text() const;
};

// Filtering heuristics, numbered as in the cleaning recipe.
enum class Rule : std::uint8_t {
  kNone = 0,
  kMarkup = 1,
  kArabicRatio = 2,
  kShortSentence = 3,
  kPunctuationRun = 4,
  kShortDocument = 5,
  kNonArabicSpan = 6,
  kDuplicate = 7,
  kDiscardRatio = 8,
};

inline constexpr std::size_t kRuleCount = 9;  // index 0 unused

const char* rule_name(Rule r);

struct FilterConfig {
  std::size_t max_nonarabic_run = 5;
  std::size_t min_words_sentence = 8;
  std::size_t min_words_doc = 64;
  double arabic_ratio = 0.70;
  std::size_t max_punct_run = 3;
  double doc_discard_ratio = 0.30;
  // Whether duplicate rejections count towards the discard ratio.
  bool count_dedup_in_discard = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Verdict {
  bool pass = true;
  Rule rule = Rule::kNone;

  static Verdict ok() { return {}; }
  static Verdict fail(Rule r) { return {false, r}; }
};

std::vector<Sentence> split_sentences(std::string_view normalized_text);
inline std::vector<Sentence> split_sentences(const RawDocument& doc) {
  return split_sentences(doc.text);
}

bool has_markup_or_script(std::string_view text);

/// Rules 1-4, first violation wins.
Verdict sentence_passes(const Sentence& s, const FilterConfig& cfg = {});

/// Drops maximal runs of more than `max_run` consecutive words that contain
/// no Arabic letter. `removed`, if given, receives the number of words dropped.
Sentence strip_non_arabic_spans(const Sentence& s, std::size_t max_run = 5,
                                std::size_t* removed = nullptr);

struct DedupKey {
  std::string key;
  bool operator==(const DedupKey&) const = default;
};

// Words longer than 3 scalar values with no digit characters.
bool qualifies_for_key(std::string_view word);

std::optional<DedupKey> dedup_key(const Sentence& s);

// Position of a sentence in the whole run.
struct Occurrence {
  std::uint64_t ingest_order = 0;
  std::uint32_t sentence = 0;
  auto operator<=>(const Occurrence&) const = default;
};

// Key -> earliest occurrence. Claims from any number of threads converge to
// the minimum, so keep-first holds regardless of scheduling.
class DedupIndex {
 public:
  DedupIndex();

  void claim(const DedupKey& key, Occurrence occ);
  bool owns(const DedupKey& key, Occurrence occ) const;
  std::size_t size() const;

 private:
  struct Shard {
    mutable std::mutex mu;
    std::unordered_map<std::string, Occurrence> first;
  };
  static constexpr std::size_t kShards = 64;
  Shard& shard_for(std::string_view key) const;

  std::unique_ptr<Shard[]> shards_;
};

struct SourceStats {
  std::uint64_t input_bytes = 0;
  std::uint64_t output_bytes = 0;
  std::uint64_t input_docs = 0;
  std::uint64_t output_docs = 0;
};

struct FilterStats {
  // Every examined sentence that does not survive is charged to exactly one
  // rule. Sentences lost with a discarded document go to rule 5 or 8.
  std::array<std::uint64_t, kRuleCount> sentence_rejections{};
  std::array<std::uint64_t, kRuleCount> doc_rejections{};
  std::uint64_t sentences_examined = 0;
  std::uint64_t sentences_kept = 0;
  std::uint64_t spans_stripped = 0;
  std::uint64_t words_stripped = 0;
  std::uint64_t input_bytes = 0;
  std::uint64_t output_bytes = 0;
  std::uint64_t input_docs = 0;
  std::uint64_t output_docs = 0;
  std::uint64_t malformed_records = 0;
  std::map<std::string, SourceStats> by_source;

  double retention() const;
  std::uint64_t discarded_docs() const { return input_docs - output_docs; }
  std::uint64_t sentences_rejected() const;
  void merge(const FilterStats& other);
  nlohmann::json to_json() const;
};

/// Per-sentence screening before deduplication: normalize, split, rules 1-4,
/// span stripping, re-check of 2-4, and key extraction.
struct ScreenedSentence {
  Sentence sentence;
  Rule rejected_by = Rule::kNone;
  std::optional<DedupKey> key;
};

struct ScreenedDocument {
  std::vector<ScreenedSentence> sentences;
  std::uint64_t spans_stripped = 0;
  std::uint64_t words_stripped = 0;
};

ScreenedDocument screen_document(const RawDocument& doc, const FilterConfig& cfg);

// Registers every key of a screened document in the index.
void claim_keys(const ScreenedDocument& screened, std::uint64_t ingest_order, DedupIndex& index);

// Applies dedup against an index that already holds every earlier claim,
// then the document-level rules 8 and 5. Updates stats.
std::optional<CleanDocument> finalize_document(const RawDocument& doc, ScreenedDocument screened,
                                               const DedupIndex& index, const FilterConfig& cfg,
                                               FilterStats& stats);

/// Full per-document pipeline against a sequentially built index.
std::optional<CleanDocument> filter_document(const RawDocument& doc, DedupIndex& dedup,
                                             const FilterConfig& cfg, FilterStats& stats);

class DocumentSource {
 public:
  virtual ~DocumentSource() = default;
  virtual std::optional<RawDocument> next() = 0;
  virtual std::uint64_t malformed() const { return 0; }
};

class VectorSource final : public DocumentSource {
 public:
  explicit VectorSource(std::span<const RawDocument> docs) : docs_(docs) {}
  std::optional<RawDocument> next() override {
    if (pos_ >= docs_.size()) return std::nullopt;
    return docs_[pos_++];
  }

 private:
  std::span<const RawDocument> docs_;
  std::size_t pos_ = 0;
};

using DocumentSink = std::function<void(const CleanDocument&)>;

struct CleanOptions {
  unsigned workers = 1;
  std::size_t batch_docs = 2048;
};

/// Streams documents through the filter. Output is delivered in ingest order
/// and is identical for every worker count.
FilterStats run_corpus_clean(DocumentSource& input, const DocumentSink& sink,
                             const FilterConfig& cfg, const CleanOptions& opts = {});

struct LabeledPair {
  std::string first;
  std::string second;
  bool positive = false;
};

/// Drops pairs with any ASCII letter, then draws exactly n_pos positives and
/// n_neg negatives without replacement. Result keeps input order.
std::vector<LabeledPair> balanced_sample(std::span<const LabeledPair> pairs, std::size_t n_pos,
                                         std::size_t n_neg, std::uint64_t seed);

}  // namespace arprep
