#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "arprep/bbpe.hpp"
#include "arprep/config.hpp"
#include "arprep/corpus_filter.hpp"
#include "arprep/eval_metrics.hpp"
#include "arprep/harness.hpp"

namespace arprep {

// Stage telemetry goes here as one JSON object per line; nullptr silences it.
void set_log_stream(std::ostream* out);
void log_event(const nlohmann::json& event);

// Raised by a stage; carries the stage name for the structured error.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

nlohmann::json error_json(const std::string& stage, const std::string& message);

// Directory layout under output_dir.
std::filesystem::path clean_dir(const PipelineConfig& cfg);
std::filesystem::path tokenizer_dir(const PipelineConfig& cfg);
std::filesystem::path instances_dir(const PipelineConfig& cfg);

/// Filters cfg.inputs into <dir>/clean.jsonl with stats.json and stats.txt.
FilterStats cmd_clean(const PipelineConfig& cfg, const std::filesystem::path& dir);

/// Trains on clean JSON-lines files and writes merges.txt and vocab.json.
BbpeVocab cmd_train_tokenizer(const std::vector<std::filesystem::path>& clean_files,
                              const std::filesystem::path& out_dir, std::size_t vocab_size,
                              unsigned workers);

/// Tokenizes, pairs and masks clean documents; writes shards and a
/// manifest.json into out_dir. Returns the manifest.
nlohmann::json cmd_gen_instances(const std::vector<std::filesystem::path>& clean_files,
                                 const std::filesystem::path& vocab_dir,
                                 const std::filesystem::path& out_dir, const PipelineConfig& cfg);

struct EvalOptions {
  std::string task;
  std::string metric;  // empty: the task's default
  std::filesystem::path pred;
  std::filesystem::path gold;  // empty: gold values come from the pred records
  std::vector<std::string> labels;  // f1_macro label set; empty: union of gold labels
  bool jaccard_micro = false;
};

/// Joins {"id", "pred"} and {"id", "gold"} records by id and scores them.
/// One file holding {"id", "pred", "gold"} works when `gold` is empty.
/// Returns {"metric", "value", "n"} plus precision/recall for conll_f1.
nlohmann::json cmd_eval(const EvalOptions& opts);

/// Reads run records and returns the aggregate report.
AggregateReport cmd_aggregate(const std::filesystem::path& records, StdMode mode);

struct PrepareResult {
  int exit_code = 0;
  nlohmann::json manifest;
};

/// clean -> train-tokenizer -> gen-instances under cfg.output_dir, with a
/// top-level manifest.json. A failing stage is recorded in the manifest and
/// earlier outputs are left in place.
PrepareResult cmd_prepare(const PipelineConfig& cfg);

}  // namespace arprep
