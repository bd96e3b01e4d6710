#include "arprep/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "arprep/corpus_io.hpp"
#include "arprep/pretrain_gen.hpp"

namespace arprep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream* g_log = &std::clog;
std::mutex g_log_mu;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  close_checked(out, path);
}

std::vector<CleanDocument> read_all_clean(const std::vector<fs::path>& files) {
  std::vector<CleanDocument> docs;
  for (const auto& f : files) {
    auto part = read_clean_jsonl(f);
    for (auto& d : part) {
      d.ingest_order = docs.size();
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

std::string shard_name(std::size_t index, const std::string& format) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.%s", index, format.c_str());
  return buf;
}

}  // namespace

void set_log_stream(std::ostream* out) {
  std::lock_guard lock(g_log_mu);
  g_log = out;
}

void log_event(const json& event) {
  std::lock_guard lock(g_log_mu);
  if (g_log) *g_log << event.dump() << std::endl;
}

json error_json(const std::string& stage, const std::string& message) {
  return {{"event", "error"}, {"stage", stage}, {"message", message}};
}

fs::path clean_dir(const PipelineConfig& cfg) { return cfg.output_dir / "clean"; }
fs::path tokenizer_dir(const PipelineConfig& cfg) { return cfg.output_dir / "tokenizer"; }
fs::path instances_dir(const PipelineConfig& cfg) { return cfg.output_dir / "instances"; }

FilterStats cmd_clean(const PipelineConfig& cfg, const fs::path& dir) {
  if (cfg.inputs.empty()) throw std::invalid_argument("clean: no input files");
  for (const auto& in : cfg.inputs) {
    if (!fs::exists(in.path)) throw std::runtime_error("input not found: " + in.path.string());
  }
  fs::create_directories(dir);
  const auto out_path = dir / "clean.jsonl";
  auto out = open_out(out_path);

  CorpusReader reader(cfg.inputs);
  CleanOptions opts;
  opts.workers = cfg.workers;
  auto stats = run_corpus_clean(
      reader, [&](const CleanDocument& d) { write_clean_jsonl(out, d); }, cfg.filter, opts);
  close_checked(out, out_path);

  write_text(dir / "stats.json", stats.to_json().dump(2) + "\n");
  write_text(dir / "stats.txt", render_stats_table(stats));
  return stats;
}

BbpeVocab cmd_train_tokenizer(const std::vector<fs::path>& clean_files, const fs::path& out_dir,
                              std::size_t vocab_size, unsigned workers) {
  const auto docs = read_all_clean(clean_files);
  TrainOptions opts;
  opts.target_size = vocab_size;
  auto vocab = train_bbpe(docs, opts, workers);
  fs::create_directories(out_dir);
  vocab.save(out_dir);
  return vocab;
}

json cmd_gen_instances(const std::vector<fs::path>& clean_files, const fs::path& vocab_dir,
                       const fs::path& out_dir, const PipelineConfig& cfg) {
  const auto vocab = BbpeVocab::load(vocab_dir);
  const auto docs = read_all_clean(clean_files);

  std::uint64_t truncated = 0;
  const auto tokenized =
      tokenize_documents(docs, vocab, cfg.max_len - 3, cfg.workers, &truncated);
  PairStats pair_stats;
  const auto pairs =
      build_segment_pairs(tokenized, cfg.pair_options(), cfg.seed, cfg.workers, &pair_stats);
  if (pair_stats.single_document) {
    log_event({{"event", "warning"},
               {"stage", "gen-instances"},
               {"message", "fewer than two usable documents; every pair is is_next"}});
  }
  GenerationStats gen_stats;
  const auto instances = generate_instances(pairs, vocab.size(), cfg.masking, cfg.seed,
                                            cfg.max_len, cfg.workers, &gen_stats);

  fs::create_directories(out_dir);
  json shards = json::array();
  const bool binary = cfg.shard_format == "bin";
  const auto max_len = static_cast<std::uint32_t>(cfg.max_len);
  for (std::size_t begin = 0, index = 0; begin < instances.size() || index == 0; ++index) {
    const std::size_t end = std::min(instances.size(), begin + cfg.shard_size);
    const auto name = shard_name(index, cfg.shard_format);
    const auto path = out_dir / name;
    auto out = open_out(path);
    if (binary) write_binary_header(out, max_len);
    for (std::size_t i = begin; i < end; ++i) {
      if (binary) {
        write_instance_binary(out, instances[i], max_len);
      } else {
        write_instance_jsonl(out, instances[i]);
      }
    }
    close_checked(out, path);
    shards.push_back({{"file", name}, {"instances", end - begin}});
    begin = end;
    if (begin >= instances.size()) break;
  }

  json manifest = {
      {"documents", docs.size()},
      {"pairs", pair_stats.pairs},
      {"is_next", pair_stats.is_next},
      {"truncated_pairs", pair_stats.truncated_pairs},
      {"skipped_sentences", pair_stats.skipped_sentences},
      {"single_document", pair_stats.single_document},
      {"truncated_sentences", truncated},
      {"generation", gen_stats.to_json()},
      {"masking", cfg.masking.to_json()},
      {"max_len", cfg.max_len},
      {"seed", cfg.seed},
      {"vocab_size", vocab.size()},
      {"format", cfg.shard_format},
      {"shards", std::move(shards)},
  };
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

namespace {

std::string label_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

LabelSet label_set(const json& v) {
  LabelSet s;
  if (v.is_array()) {
    for (const auto& x : v) s.insert(label_text(x));
  } else if (!v.is_null()) {
    s.insert(label_text(v));
  }
  return s;
}

std::vector<std::string> tag_sequence(const json& v) {
  if (!v.is_array()) throw std::invalid_argument("conll_f1 expects arrays of tags");
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(label_text(x));
  return out;
}

// id -> value of `field`, preserving file order in `order`.
std::unordered_map<std::string, json> read_field(const fs::path& path, const std::string& field,
                                                 std::vector<std::string>* order) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unordered_map<std::string, json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains(field)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": record needs \"id\" and \"" + field + "\"");
    }
    const auto id = label_text(j["id"]);
    if (!out.emplace(id, j[field]).second) {
      throw std::runtime_error(path.string() + ": duplicate id " + id);
    }
    if (order) order->push_back(id);
  }
  return out;
}

}  // namespace

json cmd_eval(const EvalOptions& opts) {
  std::string metric = opts.metric;
  if (metric.empty()) metric = default_metric(opts.task);
  if (metric.empty()) throw std::invalid_argument("unknown task '" + opts.task + "' and no metric");

  std::vector<std::string> ids;
  const auto preds = read_field(opts.pred, "pred", &ids);
  const auto golds = read_field(opts.gold.empty() ? opts.pred : opts.gold, "gold", nullptr);
  if (preds.size() != golds.size()) {
    throw std::invalid_argument("pred and gold differ in size: " + std::to_string(preds.size()) +
                                " vs " + std::to_string(golds.size()));
  }
  std::vector<std::pair<const json*, const json*>> rows;
  for (const auto& id : ids) {
    const auto g = golds.find(id);
    if (g == golds.end()) throw std::invalid_argument("id " + id + " has no gold record");
    rows.emplace_back(&preds.at(id), &g->second);
  }

  json result = {{"metric", metric}, {"n", rows.size()}};
  if (!opts.task.empty()) result["task"] = opts.task;
  if (metric == "accuracy" || metric == "f1_macro") {
    std::vector<std::string> p, g;
    for (const auto& [pj, gj] : rows) {
      p.push_back(label_text(*pj));
      g.push_back(label_text(*gj));
    }
    if (metric == "accuracy") {
      result["value"] = accuracy(p, g);
    } else {
      std::vector<std::string> labels = opts.labels;
      if (labels.empty()) {
        const std::set<std::string> uniq(g.begin(), g.end());
        labels.assign(uniq.begin(), uniq.end());
      }
      result["value"] = f1_macro(p, g, labels);
    }
  } else if (metric == "jaccard") {
    std::vector<LabelSet> p, g;
    for (const auto& [pj, gj] : rows) {
      p.push_back(label_set(*pj));
      g.push_back(label_set(*gj));
    }
    result["value"] = jaccard_multilabel(
        p, g, opts.jaccard_micro ? JaccardMode::kMicro : JaccardMode::kSampleMean);
  } else if (metric == "pearson") {
    std::vector<double> p, g;
    for (const auto& [pj, gj] : rows) {
      if (!pj->is_number() || !gj->is_number()) {
        throw std::invalid_argument("pearson expects numeric pred and gold");
      }
      p.push_back(pj->get<double>());
      g.push_back(gj->get<double>());
    }
    result["value"] = pearson(p, g);
  } else if (metric == "conll_f1") {
    std::vector<std::vector<std::string>> p, g;
    for (const auto& [pj, gj] : rows) {
      p.push_back(tag_sequence(*pj));
      g.push_back(tag_sequence(*gj));
    }
    const auto s = conll_mention_f1(p, g);
    result["value"] = s.f1;
    result["precision"] = s.precision;
    result["recall"] = s.recall;
  } else {
    throw std::invalid_argument("unknown metric '" + metric + "'");
  }
  return result;
}

AggregateReport cmd_aggregate(const fs::path& records, StdMode mode) {
  std::ifstream in(records, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + records.string());
  const auto runs = read_run_records(in);
  return aggregate_runs(runs, mode);
}

PrepareResult cmd_prepare(const PipelineConfig& cfg) {
  cfg.validate();

  PrepareResult result;
  json stages = json::array();
  json manifest = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}};
  const auto manifest_path = cfg.output_dir / "manifest.json";

  auto finish = [&](int code) {
    manifest["stages"] = stages;
    result.exit_code = code;
    result.manifest = manifest;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (!ec) write_text(manifest_path, manifest.dump(2) + "\n");
    return result;
  };

  auto run_stage = [&](const std::string& name, auto&& body) -> bool {
    log_event({{"event", "stage_start"}, {"stage", name}});
    const auto t0 = std::chrono::steady_clock::now();
    try {
      json counters = body();
      const double ms = elapsed_ms(t0);
      stages.push_back({{"stage", name}, {"status", "completed"}, {"duration_ms", ms}});
      json ev = {{"event", "stage_end"}, {"stage", name}, {"duration_ms", ms}};
      ev["counters"] = std::move(counters);
      log_event(ev);
      return true;
    } catch (const std::exception& e) {
      stages.push_back({{"stage", name},
                        {"status", "failed"},
                        {"duration_ms", elapsed_ms(t0)},
                        {"error", e.what()}});
      manifest["failed_stage"] = name;
      log_event(error_json(name, e.what()));
      return false;
    }
  };

  fs::create_directories(cfg.output_dir);
  const auto clean_file = clean_dir(cfg) / "clean.jsonl";

  if (!run_stage("clean", [&] {
        const auto stats = cmd_clean(cfg, clean_dir(cfg));
        manifest["filter_stats"] = stats.to_json();
        return json{{"input_docs", stats.input_docs},
                    {"output_docs", stats.output_docs},
                    {"input_bytes", stats.input_bytes},
                    {"output_bytes", stats.output_bytes}};
      })) {
    return finish(1);
  }
  if (!run_stage("train-tokenizer", [&] {
        const auto vocab =
            cmd_train_tokenizer({clean_file}, tokenizer_dir(cfg), cfg.vocab_size, cfg.workers);
        manifest["vocab_size"] = vocab.size();
        return json{{"vocab_size", vocab.size()}, {"merges", vocab.merges().size()}};
      })) {
    return finish(1);
  }
  if (!run_stage("gen-instances", [&] {
        auto m = cmd_gen_instances({clean_file}, tokenizer_dir(cfg), instances_dir(cfg), cfg);
        json counters = {{"pairs", m["pairs"]}, {"instances", m["generation"]["instances"]}};
        manifest["instances"] = std::move(m);
        return counters;
      })) {
    return finish(1);
  }
  return finish(0);
}

}  // namespace arprep
