#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "arprep/corpus_filter.hpp"
#include "arprep/corpus_io.hpp"
#include "arprep/pretrain_gen.hpp"

namespace arprep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ARPREP_WORKERS if set to a positive integer, else 1.
unsigned default_workers();

/// Settings for every pipeline stage. Text form is one "key = value" per
/// line with '#' comments; see keys() for the accepted names.
struct PipelineConfig {
  std::vector<InputSpec> inputs;
  std::filesystem::path output_dir = "out";
  FilterConfig filter;
  std::size_t vocab_size = 64000;
  MaskingPolicy masking;
  std::size_t max_len = 128;
  std::size_t min_target_a = 32;
  std::uint64_t seed = 0;
  unsigned workers = default_workers();
  std::size_t shard_size = 100000;
  std::string shard_format = "jsonl";  // jsonl | bin

  static const std::vector<std::string>& keys();

  // Sets one key from its text value; throws ConfigError on unknown keys or
  // unparseable values.
  void set(std::string_view key, std::string_view value);

  static PipelineConfig parse(std::string_view text);
  static PipelineConfig load(const std::filesystem::path& path);

  // Canonical text: every key in keys() order.
  std::string serialize() const;
  // SHA-256 of serialize(), hex.
  std::string hash() const;

  // Range checks; throws ConfigError naming the key.
  void validate() const;

  PairOptions pair_options() const;
};

std::string sha256_hex(std::string_view data);

}  // namespace arprep
