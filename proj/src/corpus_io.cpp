#include "arprep/corpus_io.hpp"

#include <ostream>
#include <stdexcept>

#include "arprep/normalize.hpp"

namespace arprep {

using nlohmann::json;

InputSpec parse_input_spec(const std::string& text) {
  InputSpec spec;
  const auto at = text.rfind('@');
  if (at != std::string::npos && at + 1 < text.size() && at > 0) {
    spec.path = text.substr(0, at);
    spec.source = text.substr(at + 1);
  } else {
    spec.path = text;
  }
  return spec;
}

CorpusReader::CorpusReader(std::vector<InputSpec> inputs, InputFormat format)
    : inputs_(std::move(inputs)), requested_(format) {}

bool CorpusReader::open_next_file() {
  if (open_) return true;
  if (file_index_ >= inputs_.size()) return false;
  const auto& spec = inputs_[file_index_];
  in_ = std::ifstream(spec.path, std::ios::binary);
  if (!in_) throw std::runtime_error("cannot open input " + spec.path.string());
  current_ = requested_;
  if (current_ == InputFormat::kAuto) {
    const auto ext = spec.path.extension().string();
    current_ = (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? InputFormat::kJsonl
                                                                        : InputFormat::kPlain;
  }
  line_no_ = 0;
  plain_doc_no_ = 0;
  open_ = true;
  return true;
}

void CorpusReader::check_stream() const {
  if (in_.bad()) {
    throw std::runtime_error("read error in " + inputs_[file_index_].path.string() + " at line " +
                             std::to_string(line_no_));
  }
}

std::optional<RawDocument> CorpusReader::next() {
  while (open_next_file()) {
    auto doc = current_ == InputFormat::kJsonl ? next_jsonl() : next_plain();
    if (doc) {
      doc->ingest_order = next_order_++;
      return doc;
    }
    check_stream();
    open_ = false;
    in_.close();
    ++file_index_;
  }
  return std::nullopt;
}

std::optional<RawDocument> CorpusReader::next_jsonl() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    const bool ok = j.is_object() && j.contains("id") && j["id"].is_string() &&
                    j.contains("text") && j["text"].is_string() &&
                    (!j.contains("source") || j["source"].is_string());
    if (!ok || !seen_ids_.insert(j["id"].get<std::string>()).second) {
      ++malformed_;
      malformed_bytes_ += line.size();
      continue;
    }
    RawDocument doc;
    doc.doc_id = j["id"].get<std::string>();
    doc.source = j.contains("source") ? j["source"].get<std::string>()
                                      : inputs_[file_index_].source;
    doc.text = j["text"].get<std::string>();
    return doc;
  }
  check_stream();
  return std::nullopt;
}

std::optional<RawDocument> CorpusReader::next_plain() {
  std::string line;
  std::string text;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (!text.empty()) break;
      continue;
    }
    if (!text.empty()) text.push_back('\n');
    text += line;
  }
  check_stream();
  if (text.empty()) return std::nullopt;
  const auto& spec = inputs_[file_index_];
  RawDocument doc;
  doc.doc_id = spec.path.filename().string() + ":" + std::to_string(plain_doc_no_++);
  doc.source = spec.source;
  doc.text = std::move(text);
  return doc;
}

void write_clean_jsonl(std::ostream& out, const CleanDocument& doc) {
  json sentences = json::array();
  for (const auto& s : doc.sentences) sentences.push_back(s.text);
  const json j = {{"id", doc.doc_id},
                  {"source", doc.source},
                  {"text", doc.text()},
                  {"sentences", std::move(sentences)}};
  out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

std::vector<CleanDocument> read_clean_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<CleanDocument> docs;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("sentences") || !j["sentences"].is_array()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": record has no \"sentences\" array");
    }
    CleanDocument doc;
    doc.doc_id = j.value("id", "");
    doc.source = j.value("source", "OTHER");
    doc.ingest_order = docs.size();
    for (const auto& s : j["sentences"]) {
      auto words = split_words(s.get<std::string>());
      if (words.empty()) continue;
      doc.word_count += words.size();
      doc.sentences.push_back(Sentence::from_words(std::move(words)));
    }
    docs.push_back(std::move(doc));
  }
  if (in.bad()) throw std::runtime_error("read error in " + path.string());
  return docs;
}

}  // namespace arprep
