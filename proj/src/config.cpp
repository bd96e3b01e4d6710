#include "arprep/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <openssl/sha.h>

namespace arprep {

unsigned default_workers() {
  if (const char* env = std::getenv("ARPREP_WORKERS")) {
    unsigned v = 0;
    const auto* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec == std::errc() && ptr == end && v > 0) return v;
  }
  return 1;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(value) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(value) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k{
      "input",          "output_dir",         "max_nonarabic_run", "min_words_sentence",
      "min_words_doc",  "arabic_ratio",       "max_punct_run",     "doc_discard_ratio",
      "count_dedup_in_discard", "vocab_size", "mask_prob",         "replace_mask",
      "replace_random", "keep_original",      "max_token_fraction", "dup_factor",
      "max_len",        "min_target_a",       "seed",              "workers",
      "shard_size",     "shard_format"};
  return k;
}

void PipelineConfig::set(std::string_view key_in, std::string_view value_in) {
  const std::string key(trim(key_in));
  const std::string_view value = trim(value_in);
  if (key == "input") {
    inputs.clear();
    std::size_t pos = 0;
    while (pos <= value.size()) {
      auto comma = value.find(',', pos);
      if (comma == std::string_view::npos) comma = value.size();
      const auto item = trim(value.substr(pos, comma - pos));
      if (!item.empty()) inputs.push_back(parse_input_spec(std::string(item)));
      pos = comma + 1;
    }
  } else if (key == "output_dir") {
    output_dir = std::string(value);
  } else if (key == "max_nonarabic_run") {
    filter.max_nonarabic_run = parse_number<std::size_t>(key, value);
  } else if (key == "min_words_sentence") {
    filter.min_words_sentence = parse_number<std::size_t>(key, value);
  } else if (key == "min_words_doc") {
    filter.min_words_doc = parse_number<std::size_t>(key, value);
  } else if (key == "arabic_ratio") {
    filter.arabic_ratio = parse_number<double>(key, value);
  } else if (key == "max_punct_run") {
    filter.max_punct_run = parse_number<std::size_t>(key, value);
  } else if (key == "doc_discard_ratio") {
    filter.doc_discard_ratio = parse_number<double>(key, value);
  } else if (key == "count_dedup_in_discard") {
    filter.count_dedup_in_discard = parse_bool(key, value);
  } else if (key == "vocab_size") {
    vocab_size = parse_number<std::size_t>(key, value);
  } else if (key == "mask_prob") {
    masking.mask_prob = parse_number<double>(key, value);
  } else if (key == "replace_mask") {
    masking.replace_mask = parse_number<double>(key, value);
  } else if (key == "replace_random") {
    masking.replace_random = parse_number<double>(key, value);
  } else if (key == "keep_original") {
    masking.keep_original = parse_number<double>(key, value);
  } else if (key == "max_token_fraction") {
    masking.max_token_fraction = parse_number<double>(key, value);
  } else if (key == "dup_factor") {
    masking.dup_factor = parse_number<std::size_t>(key, value);
  } else if (key == "max_len") {
    max_len = parse_number<std::size_t>(key, value);
  } else if (key == "min_target_a") {
    min_target_a = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "workers") {
    workers = parse_number<unsigned>(key, value);
  } else if (key == "shard_size") {
    shard_size = parse_number<std::size_t>(key, value);
  } else if (key == "shard_format") {
    shard_format = std::string(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string PipelineConfig::serialize() const {
  std::ostringstream out;
  out << "input = ";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (i) out << ", ";
    out << inputs[i].path.string() << '@' << inputs[i].source;
  }
  out << '\n';
  out << "output_dir = " << output_dir.string() << '\n';
  out << "max_nonarabic_run = " << filter.max_nonarabic_run << '\n';
  out << "min_words_sentence = " << filter.min_words_sentence << '\n';
  out << "min_words_doc = " << filter.min_words_doc << '\n';
  out << "arabic_ratio = " << format_double(filter.arabic_ratio) << '\n';
  out << "max_punct_run = " << filter.max_punct_run << '\n';
  out << "doc_discard_ratio = " << format_double(filter.doc_discard_ratio) << '\n';
  out << "count_dedup_in_discard = " << (filter.count_dedup_in_discard ? "true" : "false") << '\n';
  out << "vocab_size = " << vocab_size << '\n';
  out << "mask_prob = " << format_double(masking.mask_prob) << '\n';
  out << "replace_mask = " << format_double(masking.replace_mask) << '\n';
  out << "replace_random = " << format_double(masking.replace_random) << '\n';
  out << "keep_original = " << format_double(masking.keep_original) << '\n';
  out << "max_token_fraction = " << format_double(masking.max_token_fraction) << '\n';
  out << "dup_factor = " << masking.dup_factor << '\n';
  out << "max_len = " << max_len << '\n';
  out << "min_target_a = " << min_target_a << '\n';
  out << "seed = " << seed << '\n';
  out << "workers = " << workers << '\n';
  out << "shard_size = " << shard_size << '\n';
  out << "shard_format = " << shard_format << '\n';
  return out.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

std::string PipelineConfig::hash() const { return sha256_hex(serialize()); }

void PipelineConfig::validate() const {
  try {
    filter.validate();
    masking.validate();
    pair_options().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (vocab_size <= static_cast<std::size_t>(kFirstMergeId)) {
    throw ConfigError("vocab_size: must exceed " + std::to_string(kFirstMergeId));
  }
  if (max_len > 65535) throw ConfigError("max_len: must be <= 65535");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  if (shard_size < 1) throw ConfigError("shard_size: must be >= 1");
  if (shard_format != "jsonl" && shard_format != "bin") {
    throw ConfigError("shard_format: must be jsonl or bin");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

PairOptions PipelineConfig::pair_options() const {
  PairOptions p;
  p.max_len = max_len;
  p.min_target_a = min_target_a;
  return p;
}

}  // namespace arprep
