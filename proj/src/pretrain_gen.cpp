#include "arprep/pretrain_gen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "arprep/parallel.hpp"

namespace arprep {

void MaskingPolicy::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  unit(mask_prob, "mask_prob");
  unit(replace_mask, "replace_mask");
  unit(replace_random, "replace_random");
  unit(keep_original, "keep_original");
  unit(max_token_fraction, "max_token_fraction");
  if (std::abs(replace_mask + replace_random + keep_original - 1.0) > 1e-9) {
    throw std::invalid_argument("replace_mask + replace_random + keep_original must equal 1");
  }
  if (dup_factor < 1) throw std::invalid_argument("dup_factor must be >= 1");
}

nlohmann::json MaskingPolicy::to_json() const {
  return {{"mask_prob", mask_prob},
          {"replace_mask", replace_mask},
          {"replace_random", replace_random},
          {"keep_original", keep_original},
          {"dup_factor", dup_factor},
          {"max_token_fraction", max_token_fraction}};
}

MaskResult mask_word_spans(std::span<const TokenId> tokens, std::span<const WordSpan> words,
                           const MaskingPolicy& policy, Rng& rng, std::size_t vocab_size) {
  MaskResult r;
  r.token_ids.assign(tokens.begin(), tokens.end());
  if (words.empty() || policy.mask_prob <= 0.0) return r;
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw std::invalid_argument("vocab_size leaves no non-special ids for random replacement");
  }

  std::size_t maskable = 0;
  for (const auto& w : words) maskable += w.length;
  const auto n_words = static_cast<double>(words.size());
  const std::size_t target =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(policy.mask_prob * n_words - 1e-9)));
  const auto token_cap = static_cast<std::size_t>(
      std::floor(policy.max_token_fraction * static_cast<double>(maskable) + 1e-9));

  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  std::vector<std::size_t> chosen;
  std::size_t masked_tokens = 0;
  for (const auto w : order) {
    if (chosen.size() >= target) break;
    if (!chosen.empty() && masked_tokens + words[w].length > token_cap) continue;
    chosen.push_back(w);
    masked_tokens += words[w].length;
  }
  std::sort(chosen.begin(), chosen.end(),
            [&](std::size_t a, std::size_t b) { return words[a].begin < words[b].begin; });

  const auto non_special = static_cast<std::uint64_t>(vocab_size) - kNumSpecial;
  for (const auto w : chosen) {
    const double u = rng.uniform01();
    const MaskAction action = u < policy.replace_mask                          ? MaskAction::kMask
                              : u < policy.replace_mask + policy.replace_random ? MaskAction::kRandom
                                                                                : MaskAction::kKeep;
    for (std::size_t p = words[w].begin; p < words[w].begin + words[w].length; ++p) {
      r.positions.push_back(p);
      r.labels.push_back(tokens[p]);
      r.actions.push_back(action);
      if (action == MaskAction::kMask) {
        r.token_ids[p] = kMaskId;
      } else if (action == MaskAction::kRandom) {
        r.token_ids[p] = kNumSpecial + static_cast<TokenId>(rng.below(non_special));
      }
    }
  }
  r.words_masked = chosen.size();
  return r;
}

MaskResult whole_word_mask(std::span<const TokenizedWord> words, const MaskingPolicy& policy,
                           Rng& rng, std::size_t vocab_size) {
  std::vector<TokenId> flat;
  std::vector<WordSpan> spans;
  spans.reserve(words.size());
  for (const auto& w : words) {
    spans.push_back({flat.size(), w.token_ids.size()});
    flat.insert(flat.end(), w.token_ids.begin(), w.token_ids.end());
  }
  return mask_word_spans(flat, spans, policy, rng, vocab_size);
}

std::size_t token_count(const TokenizedSentence& s) {
  std::size_t n = 0;
  for (const auto& w : s) n += w.token_ids.size();
  return n;
}

std::size_t Segment::token_count() const {
  std::size_t n = 0;
  for (const auto& w : words) n += w.token_ids.size();
  return n;
}

namespace {

// Keeps the first `limit` tokens of a word list.
bool truncate_words(std::vector<TokenizedWord>& words, std::size_t limit) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t n = words[i].token_ids.size();
    if (seen + n > limit) {
      words[i].token_ids.resize(limit - seen);
      words.resize(words[i].token_ids.empty() ? i : i + 1);
      return true;
    }
    seen += n;
  }
  return false;
}

void drop_last_token(Segment& s) {
  auto& last = s.words.back().token_ids;
  last.pop_back();
  if (last.empty()) s.words.pop_back();
}

}  // namespace

std::vector<TokenizedDocument> tokenize_documents(std::span<const CleanDocument> docs,
                                                  const BbpeVocab& vocab,
                                                  std::size_t max_sentence_tokens,
                                                  unsigned workers, std::uint64_t* truncated) {
  std::vector<TokenizedDocument> out(docs.size());
  std::vector<std::uint64_t> cut(docs.size(), 0);
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    out[i].doc_id = docs[i].doc_id;
    out[i].sentences.reserve(docs[i].sentences.size());
    for (const auto& s : docs[i].sentences) {
      auto words = encode(s.text, vocab);
      if (truncate_words(words, max_sentence_tokens)) ++cut[i];
      if (!words.empty()) out[i].sentences.push_back(std::move(words));
    }
  });
  if (truncated) {
    for (auto c : cut) *truncated += c;
  }
  return out;
}

void PairOptions::validate() const {
  if (max_len < 8) throw std::invalid_argument("max_len must be >= 8");
  if (min_target_a < 1 || min_target_a > max_len - 3) {
    throw std::invalid_argument("min_target_a must be in [1, max_len - 3]");
  }
  if (!(next_prob >= 0.0 && next_prob <= 1.0)) throw std::invalid_argument("next_prob must be in [0, 1]");
}

namespace {

struct DocPairs {
  std::vector<SegmentPair> pairs;
  std::uint64_t truncated = 0;
  std::uint64_t skipped = 0;
};

void append_sentence(Segment& seg, const TokenizedSentence& s) {
  seg.words.insert(seg.words.end(), s.begin(), s.end());
}

DocPairs pairs_for_document(std::span<const TokenizedDocument> docs,
                            std::span<const std::size_t> usable, std::size_t slot,
                            const PairOptions& opts, std::uint64_t seed) {
  DocPairs out;
  const std::size_t d = usable[slot];
  const auto& sents = docs[d].sentences;
  const std::size_t n = sents.size();
  const std::size_t max_tokens = opts.max_len - 3;
  const bool single = usable.size() < 2;
  Rng rng(seed, StreamTag::kPairs, d);

  std::size_t i = 0;
  while (i < n) {
    if (n - i < 2) {
      out.skipped += n - i;
      break;
    }
    const auto target_a = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(opts.min_target_a), static_cast<std::int64_t>(max_tokens)));
    SegmentPair pair;
    pair.a.doc_index = d;
    std::size_t j = i;
    std::size_t len_a = 0;
    do {
      append_sentence(pair.a, sents[j]);
      len_a += token_count(sents[j]);
      ++j;
    } while (j < n - 1 && len_a < target_a);

    pair.is_next = single || rng.bernoulli(opts.next_prob);
    const std::size_t budget_b = len_a < max_tokens ? max_tokens - len_a : 1;
    std::size_t len_b = 0;
    if (pair.is_next) {
      pair.b.doc_index = d;
      std::size_t k = j;
      do {
        append_sentence(pair.b, sents[k]);
        len_b += token_count(sents[k]);
        ++k;
      } while (k < n && len_b < budget_b);
      i = k;
    } else {
      std::size_t r = static_cast<std::size_t>(rng.below(usable.size() - 1));
      if (r >= slot) ++r;
      const std::size_t other = usable[r];
      pair.b.doc_index = other;
      const auto& os = docs[other].sentences;
      std::size_t k = static_cast<std::size_t>(rng.below(os.size()));
      do {
        append_sentence(pair.b, os[k]);
        len_b += token_count(os[k]);
        ++k;
      } while (k < os.size() && len_b < budget_b);
      // The continuation was not used; it starts the next pair.
      i = j;
    }

    if (len_a + len_b > max_tokens) {
      ++out.truncated;
      while (len_a + len_b > max_tokens) {
        if (len_a >= len_b) {
          drop_last_token(pair.a);
          --len_a;
        } else {
          drop_last_token(pair.b);
          --len_b;
        }
      }
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

}  // namespace

std::vector<SegmentPair> build_segment_pairs(std::span<const TokenizedDocument> docs,
                                             const PairOptions& opts, std::uint64_t seed,
                                             unsigned workers, PairStats* stats) {
  opts.validate();
  std::vector<std::size_t> usable;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!docs[d].sentences.empty()) usable.push_back(d);
  }
  std::vector<DocPairs> per_doc(usable.size());
  parallel_for(usable.size(), workers, [&](std::size_t slot) {
    per_doc[slot] = pairs_for_document(docs, usable, slot, opts, seed);
  });

  PairStats local;
  local.single_document = usable.size() < 2;
  std::vector<SegmentPair> pairs;
  for (auto& dp : per_doc) {
    local.truncated_pairs += dp.truncated;
    local.skipped_sentences += dp.skipped;
    for (auto& p : dp.pairs) {
      local.is_next += p.is_next ? 1 : 0;
      pairs.push_back(std::move(p));
    }
  }
  local.pairs = pairs.size();
  if (stats) *stats = local;
  return pairs;
}

nlohmann::json GenerationStats::to_json() const {
  const double token_rate =
      maskable_tokens ? static_cast<double>(masked_tokens) / static_cast<double>(maskable_tokens) : 0.0;
  const double word_rate = words ? static_cast<double>(masked_words) / static_cast<double>(words) : 0.0;
  return {{"instances", instances},
          {"masked_tokens", masked_tokens},
          {"maskable_tokens", maskable_tokens},
          {"masked_words", masked_words},
          {"words", words},
          {"token_mask_rate", token_rate},
          {"word_mask_rate", word_rate}};
}

std::vector<TrainingInstance> generate_instances(std::span<const SegmentPair> pairs,
                                                 std::size_t vocab_size,
                                                 const MaskingPolicy& policy, std::uint64_t seed,
                                                 std::size_t max_len, unsigned workers,
                                                 GenerationStats* stats) {
  policy.validate();
  const std::size_t dup = policy.dup_factor;
  std::vector<TrainingInstance> out(pairs.size() * dup);
  parallel_for(pairs.size(), workers, [&](std::size_t p) {
    const auto& pair = pairs[p];
    TrainingInstance base;
    base.is_next = pair.is_next;
    base.token_ids.push_back(kClsId);
    base.segment_ids.push_back(0);
    auto add_segment = [&](const Segment& seg, std::uint8_t id) {
      for (const auto& w : seg.words) {
        base.word_spans.push_back({base.token_ids.size(), w.token_ids.size()});
        base.token_ids.insert(base.token_ids.end(), w.token_ids.begin(), w.token_ids.end());
        base.segment_ids.insert(base.segment_ids.end(), w.token_ids.size(), id);
      }
      base.token_ids.push_back(kSepId);
      base.segment_ids.push_back(id);
    };
    add_segment(pair.a, 0);
    add_segment(pair.b, 1);
    if (base.token_ids.size() > max_len) {
      throw std::logic_error("segment pair exceeds max_len after truncation");
    }
    base.words = base.word_spans.size();
    for (std::size_t d = 0; d < dup; ++d) {
      Rng rng(seed, StreamTag::kMasking, p, d);
      auto masked = mask_word_spans(base.token_ids, base.word_spans, policy, rng, vocab_size);
      TrainingInstance inst;
      inst.token_ids = std::move(masked.token_ids);
      inst.segment_ids = base.segment_ids;
      inst.masked_positions = std::move(masked.positions);
      inst.masked_labels = std::move(masked.labels);
      inst.mask_actions = std::move(masked.actions);
      inst.is_next = base.is_next;
      inst.dup_index = static_cast<std::uint32_t>(d);
      inst.word_spans = base.word_spans;
      inst.words = base.words;
      inst.words_masked = masked.words_masked;
      out[p * dup + d] = std::move(inst);
    }
  });
  if (stats) {
    for (const auto& inst : out) {
      ++stats->instances;
      stats->masked_tokens += inst.masked_positions.size();
      for (const auto& s : inst.word_spans) stats->maskable_tokens += s.length;
      stats->masked_words += inst.words_masked;
      stats->words += inst.words;
    }
  }
  return out;
}

void write_instance_jsonl(std::ostream& out, const TrainingInstance& inst) {
  nlohmann::json j;
  j["input_ids"] = inst.token_ids;
  j["segment_ids"] = inst.segment_ids;
  j["masked_positions"] = inst.masked_positions;
  j["masked_labels"] = inst.masked_labels;
  j["is_next"] = inst.is_next;
  j["dup_index"] = inst.dup_index;
  out << j.dump() << '\n';
}

TrainingInstance parse_instance_jsonl(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TrainingInstance inst;
  inst.token_ids = j.at("input_ids").get<std::vector<TokenId>>();
  inst.segment_ids = j.at("segment_ids").get<std::vector<std::uint8_t>>();
  inst.masked_positions = j.at("masked_positions").get<std::vector<std::size_t>>();
  inst.masked_labels = j.at("masked_labels").get<std::vector<TokenId>>();
  inst.is_next = j.at("is_next").get<bool>();
  inst.dup_index = j.at("dup_index").get<std::uint32_t>();
  return inst;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(u & 0xFF);
    u = static_cast<U>(u >> 8);
  }
  out.write(buf, sizeof(T));
}

}  // namespace

void write_binary_header(std::ostream& out, std::uint32_t max_len) {
  out.write(kBinaryMagic, 4);
  put_le<std::uint32_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, max_len);
  put_le<std::uint32_t>(out, max_len);  // max_predictions
}

std::size_t binary_record_size(std::uint32_t max_len) {
  return 8 + std::size_t{max_len} * (4 + 1 + 2 + 4);
}

void write_instance_binary(std::ostream& out, const TrainingInstance& inst, std::uint32_t max_len) {
  if (inst.token_ids.size() > max_len || inst.masked_positions.size() > max_len) {
    throw std::invalid_argument("instance does not fit the fixed-width record");
  }
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(inst.token_ids.size()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(inst.masked_positions.size()));
  put_le<std::uint8_t>(out, inst.is_next ? 1 : 0);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(inst.dup_index));
  put_le<std::uint16_t>(out, 0);
  for (std::size_t i = 0; i < max_len; ++i) {
    put_le<std::int32_t>(out, i < inst.token_ids.size() ? inst.token_ids[i] : kPadId);
  }
  for (std::size_t i = 0; i < max_len; ++i) {
    put_le<std::uint8_t>(out, i < inst.segment_ids.size() ? inst.segment_ids[i] : 0);
  }
  for (std::size_t i = 0; i < max_len; ++i) {
    put_le<std::uint16_t>(
        out, static_cast<std::uint16_t>(i < inst.masked_positions.size() ? inst.masked_positions[i] : 0));
  }
  for (std::size_t i = 0; i < max_len; ++i) {
    put_le<std::int32_t>(out, i < inst.masked_labels.size() ? inst.masked_labels[i] : kPadId);
  }
}

}  // namespace arprep
