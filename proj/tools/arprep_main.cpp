// Command-line entry point for the corpus preparation pipeline.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arprep/bbpe.hpp"
#include "arprep/config.hpp"
#include "arprep/harness.hpp"
#include "arprep/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace arprep;

namespace {

// Config-file keys settable from the command line; flags override the file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    if (!inputs.empty()) {
      std::string joined;
      for (const auto& in : inputs) joined += (joined.empty() ? "" : ",") + in;
      cfg.set("input", joined);
    }
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_path, "key = value config file")->check(CLI::ExistingFile);
  f.add(app, "--output-dir", "output_dir", "Output directory");
  f.add(app, "--workers", "workers", "Worker threads (default: $ARPREP_WORKERS or 1)");
  f.add(app, "--seed", "seed", "Random seed");
}

void add_filter_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--input", f.inputs, "Input file, optionally path@SOURCE (repeatable)");
  f.add(app, "--max-nonarabic-run", "max_nonarabic_run", "Longest kept non-Arabic word run");
  f.add(app, "--min-words-sentence", "min_words_sentence", "Minimum words per sentence");
  f.add(app, "--min-words-doc", "min_words_doc", "Minimum words per document");
  f.add(app, "--arabic-ratio", "arabic_ratio", "Minimum Arabic letter ratio");
  f.add(app, "--max-punct-run", "max_punct_run", "Longest allowed punctuation run");
  f.add(app, "--doc-discard-ratio", "doc_discard_ratio", "Maximum rejected sentence fraction");
}

void add_gen_flags(CLI::App* app, ConfigFlags& f) {
  f.add(app, "--dup-factor", "dup_factor", "Masked copies per pair");
  f.add(app, "--max-len", "max_len", "Sequence length in tokens");
  f.add(app, "--mask-prob", "mask_prob", "Word masking rate");
  f.add(app, "--shard-size", "shard_size", "Instances per shard");
  f.add(app, "--shard-format", "shard_format", "jsonl or bin");
}

std::vector<TokenId> parse_ids(const std::string& text) {
  std::vector<TokenId> ids;
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream in(cleaned);
  long long v = 0;
  while (in >> v) ids.push_back(static_cast<TokenId>(v));
  if (!in.eof()) throw std::invalid_argument("token ids must be integers");
  return ids;
}

std::string read_stdin() {
  std::ostringstream ss;
  ss << std::cin.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arabic pre-training corpus preparation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress JSON stage logs");

  ConfigFlags clean_f, train_f, gen_f, prep_f;

  auto* clean = app.add_subcommand("clean", "Normalize, filter and deduplicate raw text");
  add_common(clean, clean_f);
  add_filter_flags(clean, clean_f);

  auto* train = app.add_subcommand("train-tokenizer", "Learn byte-level BPE merges");
  add_common(train, train_f);
  train->add_option("--input", train_f.inputs, "Clean JSON-lines file (repeatable)")->required();
  train_f.add(train, "--vocab-size", "vocab_size", "Target vocabulary size");

  auto* encode = app.add_subcommand("encode", "Encode text with a trained tokenizer");
  std::string vocab_dir, text;
  bool show_tokens = false;
  encode->add_option("--vocab-dir", vocab_dir, "Tokenizer directory")->required();
  encode->add_option("--text", text, "Text to encode (default: stdin)");
  encode->add_flag("--tokens", show_tokens, "Print token strings too");

  auto* decode_cmd = app.add_subcommand("decode", "Decode token ids");
  std::string ids_text;
  decode_cmd->add_option("--vocab-dir", vocab_dir, "Tokenizer directory")->required();
  decode_cmd->add_option("--ids", ids_text, "Ids separated by spaces or commas (default: stdin)");

  auto* gen = app.add_subcommand("gen-instances", "Build masked pre-training instances");
  add_common(gen, gen_f);
  gen->add_option("--input", gen_f.inputs, "Clean JSON-lines file (repeatable)")->required();
  gen->add_option("--vocab-dir", vocab_dir, "Tokenizer directory")->required();
  add_gen_flags(gen, gen_f);

  auto* eval = app.add_subcommand("eval-metrics", "Score predictions against gold labels");
  EvalOptions eval_opts;
  eval->add_option("--task", eval_opts.task, "Benchmark task id");
  eval->add_option("--metric", eval_opts.metric,
                   "accuracy | f1_macro | jaccard | pearson | conll_f1");
  eval->add_option("--pred", eval_opts.pred, "Predictions {id, pred}")->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", eval_opts.gold, "Gold labels {id, gold} (default: the gold field of --pred)")->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_opts.labels, "Label set for f1_macro")->delimiter(',');
  eval->add_flag("--jaccard-micro", eval_opts.jaccard_micro, "Pool Jaccard counts over samples");

  auto* agg = app.add_subcommand("aggregate", "Summarize per-seed fine-tuning runs");
  std::string records_path, out_path, table = "json";
  bool sample_std = false;
  agg->add_option("--records", records_path, "Run records (JSON lines)")->required()->check(CLI::ExistingFile);
  agg->add_option("--table", table, "json | scores | hp")->check(CLI::IsMember({"json", "scores", "hp"}));
  agg->add_flag("--sample-std", sample_std, "Divide by n - 1 instead of n");
  agg->add_option("--out", out_path, "Output file (default: stdout)");

  auto* grid = app.add_subcommand("grid", "Emit the hyper-parameter search job manifest");
  std::vector<std::string> tasks;
  std::string model_id = "model";
  grid->add_option("--task", tasks, "Task id (repeatable; default: all benchmark tasks)");
  grid->add_option("--model", model_id, "Model id");
  grid->add_option("--out", out_path, "Output file (default: stdout)");

  auto* prep = app.add_subcommand("prepare", "Run clean, train-tokenizer and gen-instances");
  add_common(prep, prep_f);
  add_filter_flags(prep, prep_f);
  prep_f.add(prep, "--vocab-size", "vocab_size", "Target vocabulary size");
  add_gen_flags(prep, prep_f);

  CLI11_PARSE(app, argc, argv);
  if (quiet) set_log_stream(nullptr);

  std::string stage = "config";
  try {
    if (clean->parsed()) {
      const auto cfg = clean_f.resolve();
      stage = "clean";
      log_event({{"event", "stage_start"}, {"stage", stage}});
      const auto stats = cmd_clean(cfg, clean_dir(cfg));
      log_event({{"event", "stage_end"}, {"stage", stage}, {"counters", stats.to_json()}});
      std::cout << render_stats_table(stats);
    } else if (train->parsed()) {
      auto f = train_f;
      const auto files = f.inputs;
      f.inputs.clear();
      const auto cfg = f.resolve();
      std::vector<fs::path> paths(files.begin(), files.end());
      stage = "train-tokenizer";
      log_event({{"event", "stage_start"}, {"stage", stage}});
      const auto vocab = cmd_train_tokenizer(paths, tokenizer_dir(cfg), cfg.vocab_size, cfg.workers);
      log_event({{"event", "stage_end"},
                 {"stage", stage},
                 {"counters", {{"vocab_size", vocab.size()}, {"merges", vocab.merges().size()}}}});
    } else if (encode->parsed()) {
      stage = "encode";
      const auto vocab = BbpeVocab::load(vocab_dir);
      if (encode->count("--text") == 0) text = read_stdin();
      const auto ids = encode_ids(text, vocab);
      json out = {{"ids", ids}};
      if (show_tokens) {
        json toks = json::array();
        for (auto id : ids) toks.push_back(vocab.token_string(id));
        out["tokens"] = toks;
      }
      std::cout << out.dump() << '\n';
    } else if (decode_cmd->parsed()) {
      stage = "decode";
      const auto vocab = BbpeVocab::load(vocab_dir);
      if (decode_cmd->count("--ids") == 0) ids_text = read_stdin();
      std::cout << decode(parse_ids(ids_text), vocab) << '\n';
    } else if (gen->parsed()) {
      auto f = gen_f;
      const auto files = f.inputs;
      f.inputs.clear();
      const auto cfg = f.resolve();
      std::vector<fs::path> paths(files.begin(), files.end());
      stage = "gen-instances";
      log_event({{"event", "stage_start"}, {"stage", stage}});
      auto manifest = cmd_gen_instances(paths, vocab_dir, instances_dir(cfg), cfg);
      log_event({{"event", "stage_end"},
                 {"stage", stage},
                 {"counters", {{"pairs", manifest["pairs"]}, {"instances", manifest["generation"]["instances"]}}}});
    } else if (eval->parsed()) {
      stage = "eval-metrics";
      std::cout << cmd_eval(eval_opts).dump() << '\n';
    } else if (agg->parsed()) {
      stage = "aggregate";
      const auto report =
          cmd_aggregate(records_path, sample_std ? StdMode::kSample : StdMode::kPopulation);
      if (table == "scores") {
        write_output(out_path, render_score_table(report));
      } else if (table == "hp") {
        write_output(out_path, render_hp_table(report));
      } else {
        write_output(out_path, report.to_json().dump(2) + "\n");
      }
    } else if (grid->parsed()) {
      stage = "grid";
      if (tasks.empty()) tasks = alue_tasks();
      write_output(out_path, emit_grid_manifest(tasks, model_id).dump(1) + "\n");
    } else if (prep->parsed()) {
      const auto cfg = prep_f.resolve();
      stage = "prepare";
      const auto result = cmd_prepare(cfg);
      if (result.exit_code != 0) {
        std::cerr << error_json(result.manifest.value("failed_stage", stage),
                                "stage failed; see " + (cfg.output_dir / "manifest.json").string())
                         .dump()
                  << '\n';
      }
      return result.exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << error_json(stage, e.what()).dump() << '\n';
    return stage == "config" ? 2 : 1;
  }
  return 0;
}
