#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

#include "arprep/bbpe.hpp"
#include "arprep/normalize.hpp"
#include "corpus_gen.hpp"
#include "oracles/bbpe_oracle.hpp"

using namespace arprep;

namespace {

std::string random_unicode(std::mt19937_64& rng, std::size_t max_len) {
  static const std::pair<char32_t, char32_t> kRanges[] = {
      {0x20, 0x7E}, {0x621, 0x64A}, {0x64B, 0x652}, {0x660, 0x669}, {0x4E00, 0x4E80},
      {0x1F600, 0x1F64F}, {0xA0, 0xFF}, {0x20, 0x20}, {0x09, 0x0A}, {0x10000, 0x10FFFF}};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> which(0, std::size(kRanges) - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) {
    const auto [lo, hi] = kRanges[which(rng)];
    utf8::append(s, std::uniform_int_distribution<char32_t>(lo, hi)(rng));
  }
  return s;
}

std::string whitespace_normalized(std::string_view s) {
  std::string out;
  for (const auto& w : split_words(s)) out += (out.empty() ? "" : " ") + w;
  return out;
}

BbpeVocab small_vocab(std::size_t target = 400) {
  std::mt19937_64 rng(11);
  WordCounts counts;
  for (int i = 0; i < 300; ++i) count_words(testgen::arabic_sentence(rng, 12), counts);
  count_words("hello world hello there", counts);
  return train_bbpe(counts, {target, 2});
}

std::vector<std::pair<std::string, std::string>> merge_bytes(const BbpeVocab& v) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& m : v.merges()) out.emplace_back(v.token_bytes(m.left), v.token_bytes(m.right));
  return out;
}

}  // namespace

TEST_CASE("toy corpus learns (a,a) first") {
  WordCounts counts{{"aaab", 2}, {"ab", 1}};
  const auto v = train_bbpe(counts, {300, 2});
  REQUIRE_FALSE(v.merges().empty());
  CHECK(v.token_bytes(v.merges()[0].left) == "a");
  CHECK(v.token_bytes(v.merges()[0].right) == "a");
  CHECK(merge_bytes(v) == oracle::brute_force_bpe({{"aaab", 2}, {"ab", 1}}, 1000));
}

TEST_CASE("training edge cases") {
  CHECK(train_bbpe(WordCounts{{"a", 10}}, {300, 2}).merges().empty());
  CHECK_THROWS_AS(train_bbpe(WordCounts{}, {300, 2}), std::invalid_argument);
  CHECK_THROWS_AS(train_bbpe(WordCounts{{"ab", 2}}, {261, 2}), std::invalid_argument);
  // Hapax pairs are never merged.
  CHECK(train_bbpe(WordCounts{{"abcdef", 1}}, {300, 2}).merges().empty());
  // A pair whose result already exists as a token is skipped.
  const auto v = train_bbpe(WordCounts{{"aaaa", 5}}, {300, 2});
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (!v.is_special(static_cast<TokenId>(i))) {
        CHECK(v.token_bytes(static_cast<TokenId>(i)) != v.token_bytes(static_cast<TokenId>(j)));
      }
    }
  }
}

TEST_CASE("vocabulary invariants") {
  const auto v = small_vocab(400);
  CHECK(v.size() <= 400);
  CHECK(v.size() == static_cast<std::size_t>(kFirstMergeId) + v.merges().size());
  for (std::size_t k = 0; k < v.merges().size(); ++k) {
    const auto& m = v.merges()[k];
    const auto id = static_cast<TokenId>(kFirstMergeId + k);
    CHECK(v.token_bytes(id) == v.token_bytes(m.left) + v.token_bytes(m.right));
    CHECK(v.merge_rank(m.left, m.right) == static_cast<std::int64_t>(k));
  }
  CHECK(v.token_string(kMaskId) == "[MASK]");
  CHECK(v.token_string(BbpeVocab::byte_token(' ')) == "Ġ");
}

TEST_CASE("encode and decode") {
  const auto v = small_vocab();
  CHECK(encode("", v).empty());
  CHECK(decode(std::vector<TokenId>{}, v).empty());
  const std::string text = "مرحبا بالعالم";
  const auto words = encode(text, v);
  REQUIRE(words.size() == 2);
  CHECK(words[1].word_index == 1);
  CHECK(decode_bytes(words[1].token_ids, v) == " بالعالم");
  CHECK(decode(encode_ids(text, v), v) == text);
  CHECK(decode(encode_ids("  a   b ", v), v) == "a b");
  const auto unknown = std::to_string(v.size());
  CHECK_THROWS_WITH(decode(std::vector<TokenId>{static_cast<TokenId>(v.size())}, v),
                    doctest::Contains(unknown.c_str()));
  CHECK_THROWS(decode(std::vector<TokenId>{-1}, v));

  // A split multi-byte character decodes to U+FFFD and is counted.
  const auto r = decode_with_stats(std::vector<TokenId>{BbpeVocab::byte_token(0xD8)}, v);
  CHECK(r.invalid_sequences == 1);
  CHECK(r.text == "\xEF\xBF\xBD");
}

TEST_CASE("round trip over random Unicode and byte noise") {
  const auto v = small_vocab();
  std::mt19937_64 rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_unicode(rng, 30);
    const auto ids = encode_ids(s, v);
    CHECK(decode(ids, v) == whitespace_normalized(s));
    for (auto id : ids) CHECK(id != kUnkId);
  }
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 500; ++i) {
    std::string noise;
    for (int k = 0; k < 40; ++k) noise.push_back(static_cast<char>(byte(rng)));
    const auto ids = encode_ids(noise, v);
    for (auto id : ids) CHECK((id >= kFirstByteId && static_cast<std::size_t>(id) < v.size()));
    CHECK(decode_bytes(ids, v) == whitespace_normalized(noise));
  }
}

TEST_CASE("trainer matches the brute-force oracle") {
  std::mt19937_64 rng(13);
  for (int corpus = 0; corpus < 20; ++corpus) {
    const int alphabet = 2 + static_cast<int>(rng() % 5);
    WordCounts counts;
    std::map<std::string, std::uint64_t> ordered;
    std::string text;
    const int n_words = 50 + static_cast<int>(rng() % 300);
    for (int i = 0; i < n_words; ++i) {
      std::string w;
      for (int k = 0, len = 1 + static_cast<int>(rng() % 6); k < len; ++k) {
        w.push_back(static_cast<char>('a' + rng() % alphabet));
      }
      text += (text.empty() ? "" : " ") + w;
    }
    count_words(text, counts);
    for (const auto& [w, n] : counts) ordered[w] = n;
    const auto v = train_bbpe(counts, {261 + 60, 2});
    CHECK(merge_bytes(v) == oracle::brute_force_bpe(ordered, 60));
  }
}

TEST_CASE("compression is monotone in the number of merges") {
  const auto v = small_vocab(450);
  std::mt19937_64 rng(11);
  std::string corpus;
  for (int i = 0; i < 50; ++i) corpus += testgen::arabic_sentence(rng, 12) + " ";
  std::size_t prev = SIZE_MAX;
  for (std::size_t k = 0; k <= v.merges().size(); k += 7) {
    const auto n = encode_ids(corpus, v.prefix(k)).size();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("training is deterministic and parallel counting agrees") {
  std::mt19937_64 rng(14);
  std::vector<CleanDocument> docs(30);
  for (auto& d : docs) {
    for (int i = 0; i < 5; ++i) {
      d.sentences.push_back(Sentence::from_words(testgen::arabic_words(rng, 9, 4)));
    }
  }
  const auto a = train_bbpe(docs, {500, 2}, 1);
  const auto b = train_bbpe(docs, {500, 2}, 4);
  CHECK(a.merges_text() == b.merges_text());
  CHECK(a.vocab_json() == b.vocab_json());
}

TEST_CASE("save and load reproduce the vocabulary") {
  namespace fs = std::filesystem;
  const auto v = small_vocab();
  const auto dir = fs::temp_directory_path() / "arprep_bbpe_test";
  fs::remove_all(dir);
  v.save(dir);
  const auto w = BbpeVocab::load(dir);
  CHECK(w.merges() == v.merges());
  CHECK(w.merges_text() == v.merges_text());

  std::ifstream mf(dir / "merges.txt");
  std::string header;
  std::getline(mf, header);
  CHECK(header == "#version: 0.2");

  const auto j = nlohmann::json::parse(std::ifstream(dir / "vocab.json"));
  CHECK(j.size() == v.size());
  CHECK(j["[PAD]"] == 0);
  CHECK(j["a"] == BbpeVocab::byte_token('a'));

  // A vocab.json that disagrees with merges.txt is rejected.
  auto bad = j;
  bad["a"] = 0;
  std::ofstream(dir / "vocab.json") << bad.dump();
  CHECK_THROWS(BbpeVocab::load(dir));
  fs::remove_all(dir);

  CHECK_THROWS(BbpeVocab::from_merges_text("#version: 0.2\na\n"));
  CHECK_THROWS(BbpeVocab::from_merges_text("a a\na a\n"));
}

TEST_CASE("printable byte mapping is a bijection") {
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  const auto printable = bytes_to_printable(all);
  CHECK(utf8::length(printable) == 256);
  CHECK(printable_to_bytes(printable) == all);
  CHECK(printable.find(' ') == std::string::npos);
}
