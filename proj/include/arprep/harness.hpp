#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arprep/corpus_filter.hpp"

namespace arprep {

struct HpConfig {
  double learning_rate = 0.0;
  int batch_size = 0;
  double dropout = 0.0;
  auto operator<=>(const HpConfig&) const = default;
};

// Fine-tuning search space; 3 x 5 x 4 = 60 configurations, 5 seeds each.
struct HpGrid {
  std::vector<double> learning_rates{7e-6, 2e-5, 5e-5};
  std::vector<int> batch_sizes{8, 16, 32, 64, 128};
  std::vector<double> dropouts{0.1, 0.2, 0.3, 0.4};
  int epochs = 30;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  // Nested in the order learning rate, batch size, dropout.
  std::vector<HpConfig> configs() const;
};

/// One job per (task, config, seed) in a fixed order.
nlohmann::json emit_grid_manifest(const std::vector<std::string>& tasks,
                                  const std::string& model_id, const HpGrid& grid = {});

struct RunRecord {
  std::string task;
  std::string model;
  HpConfig config;
  std::uint64_t seed = 0;
  double dev_score = 0.0;
};

RunRecord parse_run_record(const nlohmann::json& j);
std::vector<RunRecord> read_run_records(std::istream& in);

struct ConfigSummary {
  std::string task;
  std::string model;
  HpConfig config;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

using TaskModel = std::pair<std::string, std::string>;

struct AggregateReport {
  std::vector<ConfigSummary> groups;  // sorted by (task, model, config)
  std::map<TaskModel, ConfigSummary> best;
  nlohmann::json to_json() const;
};

enum class StdMode { kPopulation, kSample };

/// Mean and standard deviation per (task, model, config). The best config
/// per (task, model) has the highest mean, then the lowest std, then comes
/// first in grid order. Duplicate (task, model, config, seed) is an error.
AggregateReport aggregate_runs(std::span<const RunRecord> records,
                               StdMode mode = StdMode::kPopulation);

// "2e-05" style, matching the usual printing of learning rates.
std::string format_learning_rate(double lr);

// Decimal units with at most one fractional digit below 10: "1.6GB", "475GB".
std::string format_size(std::uint64_t bytes);

// Best batch size / dropout / learning rate per task, one block per model.
std::string render_hp_table(const AggregateReport& report);

// Best-config mean±std per task and model, with the benchmark average when
// all eight tasks are present.
std::string render_score_table(const AggregateReport& report);

// Source / Original / Clean (pct) rows plus a Total row.
std::string render_stats_table(const FilterStats& stats);

}  // namespace arprep
