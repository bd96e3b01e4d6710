#include "arprep/corpus_filter.hpp"

#include <algorithm>
#include <stdexcept>

#include "arprep/normalize.hpp"
#include "arprep/parallel.hpp"
#include "arprep/random.hpp"

namespace arprep {

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::kNone: return "none";
    case Rule::kMarkup: return "markup_or_script";
    case Rule::kArabicRatio: return "arabic_ratio";
    case Rule::kShortSentence: return "short_sentence";
    case Rule::kPunctuationRun: return "punctuation_run";
    case Rule::kShortDocument: return "short_document";
    case Rule::kNonArabicSpan: return "non_arabic_span";
    case Rule::kDuplicate: return "duplicate";
    case Rule::kDiscardRatio: return "discard_ratio";
  }
  return "unknown";
}

void FilterConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw std::invalid_argument(std::string(field) + ": " + why);
  };
  if (max_nonarabic_run < 1) fail("max_nonarabic_run", "must be >= 1");
  if (min_words_sentence < 1) fail("min_words_sentence", "must be >= 1");
  if (!(arabic_ratio >= 0.0 && arabic_ratio <= 1.0)) fail("arabic_ratio", "must be in [0, 1]");
  if (max_punct_run < 1) fail("max_punct_run", "must be >= 1");
  if (!(doc_discard_ratio >= 0.0 && doc_discard_ratio <= 1.0)) {
    fail("doc_discard_ratio", "must be in [0, 1]");
  }
}

Sentence Sentence::from_words(std::vector<std::string> words) {
  Sentence s;
  std::size_t bytes = 0;
  for (const auto& w : words) bytes += w.size() + 1;
  s.text.reserve(bytes);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s.text.push_back(' ');
    s.text += words[i];
  }
  s.words = std::move(words);
  s.arabic_ratio = arprep::arabic_ratio(s.text);
  return s;
}

std::string CleanDocument::text() const {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out.push_back('\n');
    out += sentences[i].text;
  }
  return out;
}

namespace {

bool is_terminal(char32_t cp) {
  return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x061F || cp == 0x061B || cp == 0x06D4;
}

void emit_sentence(std::string_view piece, std::vector<Sentence>& out) {
  auto words = split_words(piece);
  if (!words.empty()) out.push_back(Sentence::from_words(std::move(words)));
}

bool word_has_arabic(std::string_view word) {
  bool found = false;
  utf8::for_each(word, [&](char32_t cp, std::size_t, std::size_t) {
    if (!found && cp != utf8::kInvalid && is_arabic_letter(cp)) found = true;
  });
  return found;
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t begin = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '\n') {
      emit_sentence(text.substr(begin, pos - begin), out);
      begin = ++pos;
      continue;
    }
    const auto d = utf8::decode(text, pos);
    if (d.cp == utf8::kInvalid || !is_terminal(d.cp)) {
      pos += d.len;
      continue;
    }
    // Take the whole punctuation run ("؟!!", "...") with the sentence, and
    // only cut before whitespace or end of text so "3.5" stays intact.
    std::size_t end = pos + d.len;
    while (end < text.size()) {
      const auto n = utf8::decode(text, end);
      if (n.cp == utf8::kInvalid || classify(n.cp) != CharClass::kPunctuation) break;
      end += n.len;
    }
    bool boundary = end >= text.size();
    if (!boundary) {
      const auto n = utf8::decode(text, end);
      boundary = n.cp != utf8::kInvalid && is_whitespace(n.cp);
    }
    if (boundary) {
      emit_sentence(text.substr(begin, end - begin), out);
      begin = end;
    }
    pos = end;
  }
  if (begin < text.size()) emit_sentence(text.substr(begin), out);
  return out;
}

bool has_markup_or_script(std::string_view text) {
  for (std::string_view kw : {"<script", "</", "function", "var "}) {
    if (text.find(kw) != std::string_view::npos) return true;
  }
  std::size_t open = 0;
  std::size_t close = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '{') {
      ++open;
    } else if (c == '}') {
      ++close;
    } else if (c == '<' && i + 1 < text.size()) {
      const char n = text[i + 1];
      if ((n >= 'a' && n <= 'z') || (n >= 'A' && n <= 'Z') || n == '!' || n == '?') return true;
    }
  }
  return std::min(open, close) >= 2;
}

namespace {

// True if some punctuation run longer than `limit` is not made only of dots.
bool has_bad_punctuation_run(std::string_view text, std::size_t limit) {
  std::size_t run = 0;
  bool dots = true;
  bool bad = false;
  utf8::for_each(text, [&](char32_t cp, std::size_t, std::size_t) {
    if (bad) return;
    if (cp != utf8::kInvalid && classify(cp) == CharClass::kPunctuation) {
      dots = (run == 0 || dots) && cp == U'.';
      ++run;
    } else {
      if (run > limit && !dots) bad = true;
      run = 0;
      dots = true;
    }
  });
  return bad || (run > limit && !dots);
}

Verdict check_content_rules(const Sentence& s, const FilterConfig& cfg) {
  if (s.arabic_ratio < cfg.arabic_ratio) return Verdict::fail(Rule::kArabicRatio);
  if (s.words.size() < cfg.min_words_sentence) return Verdict::fail(Rule::kShortSentence);
  if (has_bad_punctuation_run(s.text, cfg.max_punct_run)) {
    return Verdict::fail(Rule::kPunctuationRun);
  }
  return Verdict::ok();
}

}  // namespace

Verdict sentence_passes(const Sentence& s, const FilterConfig& cfg) {
  if (has_markup_or_script(s.text)) return Verdict::fail(Rule::kMarkup);
  return check_content_rules(s, cfg);
}

namespace {

// Marks words inside non-Arabic runs longer than max_run. Returns the count.
std::size_t mark_foreign_runs(const Sentence& s, std::size_t max_run, std::vector<bool>& drop) {
  drop.assign(s.words.size(), false);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < s.words.size();) {
    if (word_has_arabic(s.words[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.words.size() && !word_has_arabic(s.words[j])) ++j;
    if (j - i > max_run) {
      for (std::size_t k = i; k < j; ++k) drop[k] = true;
      dropped += j - i;
    }
    i = j;
  }
  return dropped;
}

Sentence without_marked(const Sentence& s, const std::vector<bool>& drop, std::size_t dropped) {
  std::vector<std::string> kept;
  kept.reserve(s.words.size() - dropped);
  for (std::size_t i = 0; i < s.words.size(); ++i) {
    if (!drop[i]) kept.push_back(s.words[i]);
  }
  return Sentence::from_words(std::move(kept));
}

}  // namespace

Sentence strip_non_arabic_spans(const Sentence& s, std::size_t max_run, std::size_t* removed) {
  std::vector<bool> drop;
  const std::size_t dropped = mark_foreign_runs(s, max_run, drop);
  if (removed) *removed = dropped;
  return dropped == 0 ? s : without_marked(s, drop, dropped);
}

bool qualifies_for_key(std::string_view word) {
  std::size_t chars = 0;
  bool digit = false;
  utf8::for_each(word, [&](char32_t cp, std::size_t, std::size_t) {
    ++chars;
    if (cp != utf8::kInvalid && classify(cp) == CharClass::kDigit) digit = true;
  });
  return chars > 3 && !digit;
}

std::optional<DedupKey> dedup_key(const Sentence& s) {
  std::vector<const std::string*> q;
  q.reserve(s.words.size());
  for (const auto& w : s.words) {
    if (qualifies_for_key(w)) q.push_back(&w);
  }
  if (q.size() < 2) return std::nullopt;
  std::vector<const std::string*> picked;
  if (q.size() <= 6) {
    picked = q;
  } else {
    picked = {q[0], q[1], q[2], q[q.size() - 3], q[q.size() - 2], q[q.size() - 1]};
  }
  DedupKey key;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (i) key.key.push_back(' ');
    key.key += *picked[i];
  }
  return key;
}

DedupIndex::DedupIndex() : shards_(std::make_unique<Shard[]>(kShards)) {}

DedupIndex::Shard& DedupIndex::shard_for(std::string_view key) const {
  return shards_[std::hash<std::string_view>{}(key) % kShards];
}

void DedupIndex::claim(const DedupKey& key, Occurrence occ) {
  Shard& shard = shard_for(key.key);
  std::lock_guard lock(shard.mu);
  auto [it, inserted] = shard.first.try_emplace(key.key, occ);
  if (!inserted && occ < it->second) it->second = occ;
}

bool DedupIndex::owns(const DedupKey& key, Occurrence occ) const {
  Shard& shard = shard_for(key.key);
  std::lock_guard lock(shard.mu);
  const auto it = shard.first.find(key.key);
  return it != shard.first.end() && it->second == occ;
}

std::size_t DedupIndex::size() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kShards; ++i) {
    std::lock_guard lock(shards_[i].mu);
    n += shards_[i].first.size();
  }
  return n;
}

double FilterStats::retention() const {
  return input_bytes == 0 ? 0.0
                          : static_cast<double>(output_bytes) / static_cast<double>(input_bytes);
}

std::uint64_t FilterStats::sentences_rejected() const {
  std::uint64_t n = 0;
  for (auto c : sentence_rejections) n += c;
  return n;
}

void FilterStats::merge(const FilterStats& o) {
  for (std::size_t i = 0; i < kRuleCount; ++i) {
    sentence_rejections[i] += o.sentence_rejections[i];
    doc_rejections[i] += o.doc_rejections[i];
  }
  sentences_examined += o.sentences_examined;
  sentences_kept += o.sentences_kept;
  spans_stripped += o.spans_stripped;
  words_stripped += o.words_stripped;
  input_bytes += o.input_bytes;
  output_bytes += o.output_bytes;
  input_docs += o.input_docs;
  output_docs += o.output_docs;
  malformed_records += o.malformed_records;
  for (const auto& [src, s] : o.by_source) {
    auto& d = by_source[src];
    d.input_bytes += s.input_bytes;
    d.output_bytes += s.output_bytes;
    d.input_docs += s.input_docs;
    d.output_docs += s.output_docs;
  }
}

nlohmann::json FilterStats::to_json() const {
  nlohmann::json sent = nlohmann::json::object();
  nlohmann::json docs = nlohmann::json::object();
  for (std::size_t i = 1; i < kRuleCount; ++i) {
    const std::string key = std::to_string(i) + "_" + rule_name(static_cast<Rule>(i));
    sent[key] = sentence_rejections[i];
    docs[key] = doc_rejections[i];
  }
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [src, s] : by_source) {
    sources[src] = {{"input_bytes", s.input_bytes},
                    {"output_bytes", s.output_bytes},
                    {"input_docs", s.input_docs},
                    {"output_docs", s.output_docs}};
  }
  return {{"sentence_rejections", sent},
          {"doc_rejections", docs},
          {"sentences_examined", sentences_examined},
          {"sentences_kept", sentences_kept},
          {"spans_stripped", spans_stripped},
          {"words_stripped", words_stripped},
          {"input_bytes", input_bytes},
          {"output_bytes", output_bytes},
          {"input_docs", input_docs},
          {"output_docs", output_docs},
          {"malformed_records", malformed_records},
          {"retention_pct", 100.0 * retention()},
          {"by_source", sources}};
}

ScreenedDocument screen_document(const RawDocument& doc, const FilterConfig& cfg) {
  ScreenedDocument out;
  auto sentences = split_sentences(normalize_text(doc.text));
  out.sentences.reserve(sentences.size());
  std::vector<bool> drop;
  for (auto& s : sentences) {
    ScreenedSentence item;
    Verdict v = sentence_passes(s, cfg);
    if (v.pass) {
      const std::size_t removed = mark_foreign_runs(s, cfg.max_nonarabic_run, drop);
      if (removed > 0) {
        ++out.spans_stripped;
        out.words_stripped += removed;
        s = without_marked(s, drop, removed);
        v = check_content_rules(s, cfg);
      }
    }
    if (!v.pass) {
      item.rejected_by = v.rule;
    } else {
      item.key = dedup_key(s);
    }
    item.sentence = std::move(s);
    out.sentences.push_back(std::move(item));
  }
  return out;
}

void claim_keys(const ScreenedDocument& screened, std::uint64_t ingest_order, DedupIndex& index) {
  for (std::size_t i = 0; i < screened.sentences.size(); ++i) {
    const auto& s = screened.sentences[i];
    if (s.rejected_by == Rule::kNone && s.key) {
      index.claim(*s.key, {ingest_order, static_cast<std::uint32_t>(i)});
    }
  }
}

std::optional<CleanDocument> finalize_document(const RawDocument& doc, ScreenedDocument screened,
                                               const DedupIndex& index, const FilterConfig& cfg,
                                               FilterStats& stats) {
  const std::uint64_t total = screened.sentences.size();
  std::array<std::uint64_t, kRuleCount> rejected{};
  std::uint64_t discard_count = 0;
  for (std::size_t i = 0; i < screened.sentences.size(); ++i) {
    auto& s = screened.sentences[i];
    if (s.rejected_by == Rule::kNone && s.key &&
        !index.owns(*s.key, {doc.ingest_order, static_cast<std::uint32_t>(i)})) {
      s.rejected_by = Rule::kDuplicate;
    }
    if (s.rejected_by != Rule::kNone) {
      ++rejected[static_cast<std::size_t>(s.rejected_by)];
      if (s.rejected_by != Rule::kDuplicate || cfg.count_dedup_in_discard) ++discard_count;
    }
  }

  CleanDocument clean;
  clean.doc_id = doc.doc_id;
  clean.source = doc.source;
  clean.ingest_order = doc.ingest_order;
  for (auto& s : screened.sentences) {
    if (s.rejected_by != Rule::kNone) continue;
    clean.word_count += s.sentence.words.size();
    clean.sentences.push_back(std::move(s.sentence));
  }

  Rule doc_rule = Rule::kNone;
  if (total > 0 &&
      static_cast<double>(discard_count) / static_cast<double>(total) > cfg.doc_discard_ratio) {
    doc_rule = Rule::kDiscardRatio;
  } else if (clean.word_count < cfg.min_words_doc) {
    doc_rule = Rule::kShortDocument;
  }

  stats.sentences_examined += total;
  stats.spans_stripped += screened.spans_stripped;
  stats.words_stripped += screened.words_stripped;
  for (std::size_t r = 0; r < kRuleCount; ++r) stats.sentence_rejections[r] += rejected[r];
  stats.input_bytes += doc.text.size();
  ++stats.input_docs;
  auto& src = stats.by_source[doc.source];
  src.input_bytes += doc.text.size();
  ++src.input_docs;

  if (doc_rule != Rule::kNone) {
    ++stats.doc_rejections[static_cast<std::size_t>(doc_rule)];
    stats.sentence_rejections[static_cast<std::size_t>(doc_rule)] += clean.sentences.size();
    return std::nullopt;
  }
  const std::uint64_t bytes = clean.text().size();
  stats.sentences_kept += clean.sentences.size();
  stats.output_bytes += bytes;
  ++stats.output_docs;
  src.output_bytes += bytes;
  ++src.output_docs;
  return clean;
}

std::optional<CleanDocument> filter_document(const RawDocument& doc, DedupIndex& dedup,
                                             const FilterConfig& cfg, FilterStats& stats) {
  ScreenedDocument screened = screen_document(doc, cfg);
  claim_keys(screened, doc.ingest_order, dedup);
  return finalize_document(doc, std::move(screened), dedup, cfg, stats);
}

FilterStats run_corpus_clean(DocumentSource& input, const DocumentSink& sink,
                             const FilterConfig& cfg, const CleanOptions& opts) {
  cfg.validate();
  FilterStats stats;
  DedupIndex index;
  const std::size_t batch_size = std::max<std::size_t>(1, opts.batch_docs);
  std::vector<RawDocument> batch;
  std::vector<ScreenedDocument> screened;
  std::vector<std::optional<CleanDocument>> results;
  std::vector<FilterStats> partial;
  bool done = false;
  std::uint64_t last_order = 0;
  bool have_last = false;

  while (!done) {
    batch.clear();
    while (batch.size() < batch_size) {
      auto doc = input.next();
      if (!doc) {
        done = true;
        break;
      }
      if (have_last && doc->ingest_order <= last_order) {
        throw std::runtime_error("document " + doc->doc_id + ": ingest_order " +
                                 std::to_string(doc->ingest_order) + " is not increasing");
      }
      last_order = doc->ingest_order;
      have_last = true;
      batch.push_back(std::move(*doc));
    }
    if (batch.empty()) break;

    const std::size_t n = batch.size();
    screened.assign(n, {});
    results.assign(n, std::nullopt);
    // Pass 1: screen and claim keys; claims converge to the minimum occurrence.
    parallel_for(n, opts.workers, [&](std::size_t i) {
      screened[i] = screen_document(batch[i], cfg);
      claim_keys(screened[i], batch[i].ingest_order, index);
    });
    // Pass 2: keep only the minimum occurrence of each key.
    const unsigned w = std::max(1u, opts.workers);
    partial.assign(w, {});
    parallel_blocks(n, w, [&](std::size_t slot, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        results[i] = finalize_document(batch[i], std::move(screened[i]), index, cfg, partial[slot]);
      }
    });
    for (const auto& p : partial) stats.merge(p);
    for (const auto& r : results) {
      if (r) sink(*r);
    }
  }
  stats.malformed_records += input.malformed();
  return stats;
}

std::vector<LabeledPair> balanced_sample(std::span<const LabeledPair> pairs, std::size_t n_pos,
                                         std::size_t n_neg, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (contains_latin(p.first) || contains_latin(p.second)) continue;
    (p.positive ? pos : neg).push_back(i);
  }
  if (pos.size() < n_pos) {
    throw std::runtime_error("insufficient positive pairs: need " + std::to_string(n_pos) +
                             ", have " + std::to_string(pos.size()) + " eligible");
  }
  if (neg.size() < n_neg) {
    throw std::runtime_error("insufficient negative pairs: need " + std::to_string(n_neg) +
                             ", have " + std::to_string(neg.size()) + " eligible");
  }
  Rng rng(seed, StreamTag::kSample, 0);
  auto take = [&](std::vector<std::size_t>& idx, std::size_t k) {
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
  };
  take(pos, n_pos);
  take(neg, n_neg);
  std::vector<std::size_t> chosen(pos);
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::sort(chosen.begin(), chosen.end());
  std::vector<LabeledPair> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(pairs[i]);
  return out;
}

}  // namespace arprep
