// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// nonzero when any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "arprep/bbpe.hpp"
#include "arprep/config.hpp"
#include "arprep/corpus_filter.hpp"
#include "arprep/corpus_io.hpp"
#include "arprep/eval_metrics.hpp"
#include "arprep/harness.hpp"
#include "arprep/pipeline.hpp"
#include "arprep/pretrain_gen.hpp"
#include "corpus_gen.hpp"
#include "oracles/bbpe_oracle.hpp"
#include "oracles/filter_oracle.hpp"
#include "oracles/span_oracle.hpp"
#include "pretrain_helpers.hpp"

using namespace arprep;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool gating = true;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<CleanDocument> clean(const std::vector<RawDocument>& docs, const FilterConfig& cfg,
                                 unsigned workers, FilterStats* stats = nullptr) {
  std::vector<CleanDocument> out;
  VectorSource src(docs);
  CleanOptions opts;
  opts.workers = workers;
  auto st = run_corpus_clean(src, [&](const CleanDocument& d) { out.push_back(d); }, cfg, opts);
  if (stats) *stats = st;
  return out;
}

std::string serialize(const std::vector<CleanDocument>& docs) {
  std::ostringstream out;
  for (const auto& d : docs) write_clean_jsonl(out, d);
  return out.str();
}

bool conserved(const FilterStats& st) {
  std::uint64_t docs = 0;
  for (auto c : st.doc_rejections) docs += c;
  return st.sentences_kept + st.sentences_rejected() == st.sentences_examined &&
         docs == st.discarded_docs() && st.sentence_rejections[0] == 0 && st.doc_rejections[0] == 0;
}

// ---------------------------------------------------------------------------

Outcome filter_boundaries() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const FilterConfig cfg;
  auto filler = [&](std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += testgen::join(testgen::arabic_words(rng, 10, 5)) + "\n";
    return text;
  };
  auto digits = [](std::size_t n) { return std::string(n, '1'); };
  auto ratio_probe = [&](std::size_t letters) {
    // `letters` Arabic letters plus 31 digits out of 100 visible characters.
    std::vector<std::string> w = testgen::arabic_words(rng, letters / 10, 10);
    if (letters % 10) w.push_back(testgen::arabic_word(rng, static_cast<int>(letters % 10), static_cast<int>(letters % 10)));
    w.push_back(digits(100 - letters - 1));
    return testgen::join(w, "");
  };

  struct Probe {
    std::string name;
    std::string text;
    Rule sentence_rule;  // kNone when the probe sentence must survive
    Rule doc_rule;
  };
  std::vector<Probe> probes;
  probes.push_back({"7 words", filler(10) + testgen::join(testgen::arabic_words(rng, 7, 5)), Rule::kShortSentence, Rule::kNone});
  probes.push_back({"8 words", filler(10) + testgen::join(testgen::arabic_words(rng, 8, 5)), Rule::kNone, Rule::kNone});
  probes.push_back({"ratio 0.69", filler(10) + ratio_probe(69), Rule::kArabicRatio, Rule::kNone});
  probes.push_back({"ratio 0.70", filler(10) + ratio_probe(70), Rule::kNone, Rule::kNone});
  probes.push_back({"punct run 3", filler(10) + testgen::join(testgen::arabic_words(rng, 9, 5), "!!!"), Rule::kNone, Rule::kNone});
  probes.push_back({"punct run 4", filler(10) + testgen::join(testgen::arabic_words(rng, 9, 5), "!!!!"), Rule::kPunctuationRun, Rule::kNone});
  probes.push_back({"markup", filler(10) + testgen::join(testgen::arabic_words(rng, 9, 5), " var x"), Rule::kMarkup, Rule::kNone});
  {
    auto w = testgen::arabic_words(rng, 6, 5);
    w.insert(w.begin() + 3, {"a", "b", "c", "d", "e", "f"});
    probes.push_back({"non-Arabic span, 6 words left", filler(10) + testgen::join(w), Rule::kShortSentence, Rule::kNone});
    auto v = testgen::arabic_words(rng, 9, 5);
    v.insert(v.begin() + 3, {"a", "b", "c", "d", "e", "f"});
    probes.push_back({"non-Arabic span, 9 words left", filler(10) + testgen::join(v), Rule::kNone, Rule::kNone});
  }
  // 63 and 64 surviving words: 5 x 11 words plus 8 or 9.
  auto sized_doc = [&](std::size_t last) {
    std::string text;
    for (int i = 0; i < 5; ++i) text += testgen::join(testgen::arabic_words(rng, 11, 5)) + "\n";
    return text + testgen::join(testgen::arabic_words(rng, last, 5));
  };
  probes.push_back({"63 doc words", sized_doc(8), Rule::kNone, Rule::kShortDocument});
  probes.push_back({"64 doc words", sized_doc(9), Rule::kNone, Rule::kNone});
  // 100 sentences with 30 or 31 of them too short.
  auto discard_doc = [&](std::size_t bad) {
    std::string text;
    for (std::size_t i = 0; i < 100; ++i) {
      text += testgen::join(testgen::arabic_words(rng, i < bad ? 3 : 9, 5)) + "\n";
    }
    return text;
  };
  probes.push_back({"30% discarded", discard_doc(30), Rule::kNone, Rule::kNone});
  probes.push_back({"31% discarded", discard_doc(31), Rule::kNone, Rule::kDiscardRatio});

  std::vector<std::string> failures;
  std::vector<RawDocument> all;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& p = probes[i];
    RawDocument doc{"p" + std::to_string(i), "TEST", p.text, 0};
    FilterStats st;
    const auto out = clean({doc}, cfg, 1, &st);
    bool ok = conserved(st);
    const bool kept = !out.empty();
    ok = ok && kept == (p.doc_rule == Rule::kNone);
    if (p.doc_rule != Rule::kNone) ok = ok && st.doc_rejections[static_cast<std::size_t>(p.doc_rule)] == 1;
    if (p.sentence_rule != Rule::kNone) {
      ok = ok && st.sentence_rejections[static_cast<std::size_t>(p.sentence_rule)] == 1;
    }
    const std::uint64_t short_count = p.name == "30% discarded" ? 30 : p.name == "31% discarded" ? 31 : 0;
    if (short_count > 0) {
      // Surviving sentences of a discarded document count against the document rule.
      ok = ok && st.sentence_rejections[static_cast<std::size_t>(Rule::kShortSentence)] == short_count &&
           st.sentence_rejections[static_cast<std::size_t>(Rule::kDiscardRatio)] ==
               (p.doc_rule == Rule::kDiscardRatio ? 100 - short_count : 0);
    } else if (p.doc_rule == Rule::kNone && p.sentence_rule == Rule::kNone) {
      ok = ok && st.sentences_rejected() == 0;
    }
    if (!ok) failures.push_back(p.name);
    doc.ingest_order = all.size();
    all.push_back(doc);
  }
  FilterStats st;
  clean(all, cfg, 4, &st);
  if (!conserved(st)) failures.push_back("corpus-level attribution");
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures.empty() && secs < 5.0;
  o.detail = std::to_string(probes.size()) + " boundary probes";
  for (const auto& f : failures) o.detail += ", failed: " + f;
  o.detail += ", " + fmt("%.2f s (limit 5 s)", secs);
  return o;
}

Outcome dedup_determinism() {
  std::mt19937_64 rng(202);
  std::vector<std::string> planted;
  for (int i = 0; i < 25; ++i) planted.push_back(testgen::join(testgen::arabic_words(rng, 10, 5)));
  std::vector<RawDocument> docs;
  std::map<std::string, std::pair<std::string, std::size_t>> first;  // sentence -> (doc, index)
  for (int d = 0; d < 100; ++d) {
    std::vector<std::string> sents;
    for (int i = 0; i < 12; ++i) sents.push_back(testgen::join(testgen::arabic_words(rng, 9, 5)));
    for (int k = 0, n = static_cast<int>(rng() % 4); k < n; ++k) {
      sents.insert(sents.begin() + static_cast<long>(rng() % (sents.size() + 1)), planted[rng() % planted.size()]);
    }
    std::string text;
    const std::string id = "doc" + std::to_string(d);
    for (std::size_t i = 0; i < sents.size(); ++i) {
      text += sents[i] + "\n";
      if (std::find(planted.begin(), planted.end(), sents[i]) != planted.end() && !first.count(sents[i])) {
        first[sents[i]] = {id, i};
      }
    }
    docs.push_back({id, "CC", text, static_cast<std::uint64_t>(d)});
  }
  const FilterConfig cfg;
  const auto base = serialize(clean(docs, cfg, 1));
  bool identical = true;
  for (unsigned w : {4u, 16u}) identical = identical && serialize(clean(docs, cfg, w)) == base;

  const auto out = clean(docs, cfg, 16);
  const auto ref = oracle::reference_clean(docs, cfg);
  bool oracle_ok = out.size() == ref.docs.size();
  for (std::size_t i = 0; oracle_ok && i < out.size(); ++i) {
    oracle_ok = out[i].doc_id == ref.docs[i].id && out[i].sentences.size() == ref.docs[i].sentences.size();
    for (std::size_t k = 0; oracle_ok && k < out[i].sentences.size(); ++k) {
      oracle_ok = out[i].sentences[k].text == ref.docs[i].sentences[k];
    }
  }
  // Every planted sentence survives exactly once, in its first document.
  std::size_t survived = 0;
  bool keep_first = true;
  for (const auto& [sent, where] : first) {
    std::size_t hits = 0;
    for (const auto& d : out) {
      for (const auto& s : d.sentences) {
        if (s.text == sent) {
          ++hits;
          keep_first = keep_first && d.doc_id == where.first;
        }
      }
    }
    keep_first = keep_first && hits == 1;
    survived += hits == 1;
  }
  Outcome o;
  o.pass = identical && oracle_ok && keep_first;
  o.detail = std::string("workers 1/4/16 ") + (identical ? "identical" : "DIFFER") + ", oracle " +
             (oracle_ok ? "match" : "MISMATCH") + ", " + std::to_string(survived) + "/" +
             std::to_string(first.size()) + " planted keys kept at first occurrence";
  return o;
}

std::string random_unicode(std::mt19937_64& rng, std::size_t max_len) {
  static const std::pair<char32_t, char32_t> kRanges[] = {
      {0x20, 0x7E},  {0x621, 0x64A},     {0x660, 0x669}, {0x4E00, 0x9FFF}, {0x1F600, 0x1F64F},
      {0xA0, 0x2FF}, {0x10000, 0x10FFFF}, {0x20, 0x20},   {0x09, 0x0D},     {0xE000, 0xFFFD}};
  std::string s;
  for (std::size_t i = 0, n = rng() % (max_len + 1); i < n; ++i) {
    const auto [lo, hi] = kRanges[rng() % std::size(kRanges)];
    utf8::append(s, std::uniform_int_distribution<char32_t>(lo, hi)(rng));
  }
  return s;
}

std::string whitespace_normalized(std::string_view s) {
  std::string out;
  for (const auto& w : split_words(s)) out += (out.empty() ? "" : " ") + w;
  return out;
}

Outcome tokenizer() {
  std::mt19937_64 rng(303);
  WordCounts counts;
  for (int i = 0; i < 2000; ++i) count_words(testgen::arabic_sentence(rng, 12), counts);
  for (int i = 0; i < 200; ++i) count_words(random_unicode(rng, 20), counts);
  const auto vocab = train_bbpe(counts, {2000, 2});

  std::size_t round_trip_fail = 0;
  const std::size_t n_strings = 10000;
  for (std::size_t i = 0; i < n_strings; ++i) {
    const auto s = random_unicode(rng, 40);
    if (decode(encode_ids(s, vocab), vocab) != whitespace_normalized(s)) ++round_trip_fail;
  }
  std::size_t unk = 0, noise_fail = 0;
  for (int i = 0; i < 2000; ++i) {
    std::string noise;
    for (int k = 0; k < 64; ++k) noise.push_back(static_cast<char>(rng() & 0xFF));
    const auto ids = encode_ids(noise, vocab);
    unk += static_cast<std::size_t>(std::count(ids.begin(), ids.end(), kUnkId));
    if (decode_bytes(ids, vocab) != whitespace_normalized(noise)) ++noise_fail;
  }

  const auto toy = train_bbpe(WordCounts{{"aaab", 2}, {"ab", 1}}, {300, 2});
  const bool toy_ok = !toy.merges().empty() && toy.token_bytes(toy.merges()[0].left) == "a" &&
                      toy.token_bytes(toy.merges()[0].right) == "a";

  std::size_t oracle_match = 0;
  for (int c = 0; c < 50; ++c) {
    const int alphabet = 2 + static_cast<int>(rng() % 8);
    std::string text;
    const int n_words = 1 + static_cast<int>(rng() % 1000);
    for (int i = 0; i < n_words; ++i) {
      std::string w;
      for (int k = 0, len = 1 + static_cast<int>(rng() % 8); k < len; ++k) {
        w.push_back(static_cast<char>('a' + rng() % alphabet));
      }
      text += (i ? " " : "") + w;
    }
    WordCounts wc;
    count_words(text, wc);
    std::map<std::string, std::uint64_t> ordered(wc.begin(), wc.end());
    const auto v = train_bbpe(wc, {261 + 400, 2});
    std::vector<oracle::MergeBytes> got;
    for (const auto& m : v.merges()) got.emplace_back(v.token_bytes(m.left), v.token_bytes(m.right));
    oracle_match += got == oracle::brute_force_bpe(ordered, 400);
  }
  Outcome o;
  o.pass = round_trip_fail == 0 && unk == 0 && noise_fail == 0 && toy_ok && oracle_match == 50;
  o.detail = std::to_string(n_strings - round_trip_fail) + "/" + std::to_string(n_strings) +
             " round trips, " + std::to_string(unk) + " UNK on byte noise, toy first merge " +
             (toy_ok ? "(a,a)" : "WRONG") + ", oracle " + std::to_string(oracle_match) + "/50";
  return o;
}

// Pairs of 100 words (A: 50, B: 50) where every fifth word has two tokens.
std::vector<SegmentPair> hundred_word_pairs(std::mt19937_64& rng, std::size_t n) {
  std::vector<SegmentPair> pairs(n);
  for (std::size_t p = 0; p < n; ++p) {
    for (Segment* seg : {&pairs[p].a, &pairs[p].b}) {
      seg->doc_index = p;
      for (std::size_t w = 0; w < 50; ++w) {
        TokenizedWord tw{w, {static_cast<TokenId>(5 + rng() % 900)}};
        if (w % 5 == 0) tw.token_ids.push_back(static_cast<TokenId>(5 + rng() % 900));
        seg->words.push_back(tw);
      }
    }
    pairs[p].is_next = true;
  }
  return pairs;
}

Outcome masking_statistics() {
  std::mt19937_64 rng(404);
  const auto pairs = hundred_word_pairs(rng, 3400);
  const auto inst = generate_instances(pairs, 1000, {}, 404, 128, 1);
  std::size_t words = 0, masked_words = 0, mask = 0, rnd = 0, keep = 0, violations = 0, recon_fail = 0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& x = inst[i];
    words += x.words;
    masked_words += x.words_masked;
    for (std::size_t k = 0; k < x.masked_positions.size(); ++k) {
      // Count each masked word once, at its first token.
      const auto pos = x.masked_positions[k];
      const bool word_start = std::any_of(x.word_spans.begin(), x.word_spans.end(),
                                          [&](const WordSpan& s) { return s.begin == pos; });
      if (!word_start) continue;
      switch (x.mask_actions[k]) {
        case MaskAction::kMask: ++mask; break;
        case MaskAction::kRandom: ++rnd; break;
        case MaskAction::kKeep: ++keep; break;
      }
    }
    if (!testgen::instance_problem(x, 128).empty()) ++violations;
    std::vector<TokenId> original{kClsId};
    for (const Segment* seg : {&pairs[i / 3].a, &pairs[i / 3].b}) {
      for (const auto& w : seg->words) original.insert(original.end(), w.token_ids.begin(), w.token_ids.end());
      original.push_back(kSepId);
    }
    if (testgen::reconstruct(x) != original) ++recon_fail;
  }
  const double frac = static_cast<double>(masked_words) / static_cast<double>(words);
  const double total = static_cast<double>(mask + rnd + keep);
  const double pm = mask / total, pr = rnd / total, pk = keep / total;
  Outcome o;
  o.pass = std::abs(frac - 0.15) <= 0.01 && std::abs(pm - 0.8) <= 0.02 && std::abs(pr - 0.1) <= 0.02 &&
           std::abs(pk - 0.1) <= 0.02 && violations == 0 && recon_fail == 0 && inst.size() >= 10000;
  o.detail = std::to_string(inst.size()) + " instances, masked words " + fmt("%.4f", frac) +
             ", split " + fmt("%.3f", pm) + "/" + fmt("%.3f", pr) + "/" + fmt("%.3f", pk) + ", " +
             std::to_string(violations) + " atomicity violations, " + std::to_string(recon_fail) +
             " reconstruction failures";
  return o;
}

Outcome nsp_balance() {
  std::mt19937_64 rng(505);
  const auto docs = testgen::synthetic_tokenized(rng, 3000, 2, 40, 2);
  PairStats stats;
  const auto pairs = build_segment_pairs(docs, {}, 505, 1, &stats);
  std::size_t next = 0, same_doc_negative = 0;
  for (const auto& p : pairs) {
    if (p.is_next) {
      ++next;
    } else if (p.a.doc_index == p.b.doc_index) {
      ++same_doc_negative;
    }
  }
  const double frac = static_cast<double>(next) / static_cast<double>(pairs.size());
  Outcome o;
  o.pass = pairs.size() >= 10000 && std::abs(frac - 0.5) <= 0.02 && same_doc_negative == 0;
  o.detail = std::to_string(pairs.size()) + " pairs, is_next " + fmt("%.4f", frac) + ", " +
             std::to_string(same_doc_negative) + " same-document negatives";
  return o;
}

Outcome duplication_factor() {
  std::mt19937_64 rng(606);
  const auto docs = testgen::synthetic_tokenized(rng, 400, 2, 30, 2);
  auto pairs = build_segment_pairs(docs, {}, 606);
  pairs.resize(std::min<std::size_t>(pairs.size(), 1000));
  const auto inst = generate_instances(pairs, 1000, {}, 606, 128, 2);
  bool exact = inst.size() == pairs.size() * 3;
  std::size_t eligible = 0, distinct = 0;
  for (std::size_t p = 0; exact && p < pairs.size(); ++p) {
    for (std::uint32_t d = 0; d < 3; ++d) exact = exact && inst[p * 3 + d].dup_index == d;
    if (inst[p * 3].words < 20) continue;
    ++eligible;
    const auto& a = inst[p * 3].masked_positions;
    const auto& b = inst[p * 3 + 1].masked_positions;
    const auto& c = inst[p * 3 + 2].masked_positions;
    distinct += a != b && b != c && a != c;
  }
  Outcome o;
  o.pass = pairs.size() == 1000 && exact && eligible > 0 && distinct == eligible;
  o.detail = std::to_string(pairs.size()) + " pairs, " + std::to_string(inst.size()) +
             " instances, distinct mask sets for " + std::to_string(distinct) + "/" +
             std::to_string(eligible) + " pairs with >= 20 words";
  return o;
}

Outcome metrics_oracles() {
  std::mt19937_64 rng(707);
  static const char* kTags[] = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
  std::vector<std::vector<std::string>> pred, gold;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<std::string> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = kTags[rng() % 5];
      g[k] = kTags[rng() % 5];
    }
    pred.push_back(p);
    gold.push_back(g);
  }
  std::size_t exact = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::vector<std::vector<std::string>> p1{pred[i]}, g1{gold[i]};
    const auto got = conll_mention_f1(p1, g1);
    const auto want = oracle::span_set_f1(p1, g1);
    exact += got.precision == want.precision && got.recall == want.recall && got.f1 == want.f1;
  }
  const auto corpus_got = conll_mention_f1(pred, gold);
  const auto corpus_want = oracle::span_set_f1(pred, gold);
  const bool corpus_ok = corpus_got.f1 == corpus_want.f1;

  const double f1 = f1_macro(std::vector<std::string>{"A", "B", "B", "B"},
                             std::vector<std::string>{"A", "A", "B", "B"},
                             std::vector<std::string>{"A", "B"});
  const double r = pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
  const double avg = alue_average({{"MQ2Q", 75.1}, {"MDD", 65.7}, {"SVREG", 87.4}, {"SEC", 46.8},
                                   {"FID", 84.8}, {"OOLD", 92.2}, {"XNLI", 72.4}, {"OHSD", 85.0}});
  Outcome o;
  o.pass = exact == 1000 && corpus_ok && std::abs(f1 - 0.7333333333333333) <= 1e-9 &&
           std::abs(r - 0.5) <= 1e-9 && std::abs(avg - 76.175) <= 0.05;
  o.detail = "conll vs oracle " + std::to_string(exact) + "/1000, f1_macro " + fmt("%.10f", f1) +
             ", pearson " + fmt("%.10f", r) + ", benchmark average " + fmt("%.3f", avg);
  return o;
}

Outcome aggregation() {
  const HpConfig c{2e-5, 32, 0.1};
  std::vector<RunRecord> recs{{"MDD", "m", c, 0, 1.0}, {"MDD", "m", c, 1, 2.0}, {"MDD", "m", c, 2, 3.0}};
  const auto rep = aggregate_runs(recs);
  const double mean = rep.groups.at(0).mean, sd = rep.groups.at(0).std;
  const auto jobs = emit_grid_manifest(alue_tasks(), "model").size();
  Outcome o;
  o.pass = std::abs(mean - 2.0) <= 1e-8 && std::abs(sd - 0.81649658) <= 1e-8 && jobs == 2400;
  o.detail = "mean " + fmt("%.8f", mean) + ", std " + fmt("%.8f", sd) + ", " +
             std::to_string(jobs) + " jobs for 8 tasks";
  return o;
}

json without_durations(json j) {
  if (j.is_object()) {
    j.erase("duration_ms");
    for (auto& [k, v] : j.items()) v = without_durations(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_durations(v);
  }
  return j;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome end_to_end() {
  set_log_stream(nullptr);
  const auto root = fs::temp_directory_path() / "arprep_acceptance_e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  std::mt19937_64 rng(808);
  std::size_t bytes = 0;
  {
    std::ofstream out(root / "raw.jsonl");
    for (int d = 0; bytes < 1000000; ++d) {
      std::string text;
      for (int s = 0; s < 12; ++s) text += testgen::arabic_sentence(rng, 8 + rng() % 10) + " ";
      const auto line = json{{"id", "d" + std::to_string(d)}, {"source", "CC"}, {"text", text}}.dump();
      bytes += line.size() + 1;
      out << line << "\n";
    }
  }
  PipelineConfig cfg;
  cfg.inputs = {{root / "raw.jsonl", "CC"}};
  cfg.output_dir = root / "out";
  cfg.vocab_size = 8000;
  cfg.seed = 12345;
  cfg.workers = 4;
  cfg.shard_size = 5000;

  const auto t0 = Clock::now();
  const auto first = cmd_prepare(cfg);
  const double secs = seconds_since(t0);
  auto files_a = snapshot(cfg.output_dir);
  const auto second = cmd_prepare(cfg);
  auto files_b = snapshot(cfg.output_dir);

  std::size_t shards = 0;
  bool shards_equal = files_a.size() == files_b.size();
  for (const auto& [name, content] : files_a) {
    if (name == "manifest.json") continue;
    shards += name.rfind("instances/shard-", 0) == 0;
    shards_equal = shards_equal && files_b.count(name) && files_b[name] == content;
  }
  const bool manifest_equal = without_durations(json::parse(files_a["manifest.json"])) ==
                              without_durations(json::parse(files_b["manifest.json"]));
  fs::remove_all(root);
  Outcome o;
  o.pass = first.exit_code == 0 && second.exit_code == 0 && shards > 0 && shards_equal &&
           manifest_equal && secs < 60.0;
  o.detail = fmt("%.2f MB input, ", static_cast<double>(bytes) / 1e6) + std::to_string(shards) +
             " shards " + (shards_equal ? "identical" : "DIFFER") + ", manifest " +
             (manifest_equal ? "identical" : "DIFFERS") + " modulo durations, first run " +
             fmt("%.2f s (limit 60 s)", secs);
  return o;
}

Outcome throughput() {
  std::mt19937_64 rng(909);
  std::vector<RawDocument> docs;
  std::size_t bytes = 0;
  std::vector<std::string> pool;
  for (int i = 0; i < 2000; ++i) pool.push_back(testgen::arabic_sentence(rng, 8 + rng() % 12));
  // Mostly unique text with some repeated and some noisy sentences.
  while (bytes < 100'000'000) {
    std::string text;
    for (int s = 0; s < 20; ++s) {
      const auto r = rng() % 20;
      if (r == 0) {
        text += pool[rng() % pool.size()];
      } else if (r == 1) {
        text += "<p>click here</p> !!!! http://example.com";
      } else {
        text += testgen::arabic_sentence(rng, 8 + rng() % 12);
      }
      text += s % 4 == 3 ? "\n" : " ";
    }
    bytes += text.size();
    docs.push_back({"d" + std::to_string(docs.size()), "CC", std::move(text), docs.size()});
  }
  const FilterConfig cfg;
  auto timed = [&](unsigned workers) {
    const auto t0 = Clock::now();
    FilterStats st;
    clean(docs, cfg, workers, &st);
    return seconds_since(t0);
  };
  const double t1 = timed(1);
  const double t4 = timed(4);
  const double mbps = static_cast<double>(bytes) / 1e6 / t1;
  const double speedup = t1 / t4;
  const unsigned hw = std::thread::hardware_concurrency();
  const bool rate_ok = mbps >= 20.0;
  const bool scale_ok = speedup >= 3.0;
  Outcome o;
  o.gating = false;
  o.pass = rate_ok && scale_ok;
  o.detail = fmt("%.1f MB, ", static_cast<double>(bytes) / 1e6) + fmt("%.1f MB/s single-threaded", mbps) +
             (rate_ok ? "" : " (below 20)") + ", " + fmt("%.2fx with 4 workers", speedup) +
             (scale_ok ? "" : " (below 3x)") + ", " + std::to_string(hw) + " hardware threads";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"filter boundary suite", filter_boundaries},
      {"dedup determinism", dedup_determinism},
      {"tokenizer", tokenizer},
      {"masking statistics", masking_statistics},
      {"NSP balance", nsp_balance},
      {"duplication factor", duplication_factor},
      {"metrics oracle suite", metrics_oracles},
      {"aggregation", aggregation},
      {"end-to-end determinism", end_to_end},
      {"throughput (soft)", throughput},
  };
  int gating_failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const char* status = o.pass ? "PASS" : (o.gating ? "FAIL" : "FAIL (soft, non-gating)");
    std::printf("[%s] %s: %s\n", status, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && o.gating) ++gating_failures;
  }
  std::printf("%d gating failure(s)\n", gating_failures);
  return gating_failures == 0 ? 0 : 1;
}
