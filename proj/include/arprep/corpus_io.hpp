#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "arprep/corpus_filter.hpp"

namespace arprep {

struct InputSpec {
  std::filesystem::path path;
  std::string source = "OTHER";  // used when a record carries no "source"
};

// Parses "path" or "path@SOURCE".
InputSpec parse_input_spec(const std::string& text);

enum class InputFormat { kAuto, kJsonl, kPlain };

/// Reads documents from a sequence of files. JSON-lines records are
/// {"id", "source", "text"}; plain-text files separate documents by blank
/// lines. Malformed or duplicate-id records are counted and skipped.
class CorpusReader final : public DocumentSource {
 public:
  explicit CorpusReader(std::vector<InputSpec> inputs, InputFormat format = InputFormat::kAuto);

  std::optional<RawDocument> next() override;
  std::uint64_t malformed() const override { return malformed_; }
  std::uint64_t malformed_bytes() const { return malformed_bytes_; }

 private:
  bool open_next_file();
  std::optional<RawDocument> next_jsonl();
  std::optional<RawDocument> next_plain();
  void check_stream() const;

  std::vector<InputSpec> inputs_;
  InputFormat requested_;
  std::size_t file_index_ = 0;
  std::ifstream in_;
  InputFormat current_ = InputFormat::kJsonl;
  std::uint64_t line_no_ = 0;
  std::uint64_t plain_doc_no_ = 0;
  std::uint64_t next_order_ = 0;
  std::uint64_t malformed_ = 0;
  std::uint64_t malformed_bytes_ = 0;
  std::unordered_set<std::string> seen_ids_;
  bool open_ = false;
};

void write_clean_jsonl(std::ostream& out, const CleanDocument& doc);

// Reads documents written by write_clean_jsonl.
std::vector<CleanDocument> read_clean_jsonl(const std::filesystem::path& path);

}  // namespace arprep
