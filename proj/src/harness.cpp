#include "arprep/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "arprep/eval_metrics.hpp"
#include "arprep/normalize.hpp"

namespace arprep {

std::vector<HpConfig> HpGrid::configs() const {
  std::vector<HpConfig> out;
  for (double lr : learning_rates) {
    for (int bs : batch_sizes) {
      for (double dp : dropouts) out.push_back({lr, bs, dp});
    }
  }
  return out;
}

nlohmann::json emit_grid_manifest(const std::vector<std::string>& tasks,
                                  const std::string& model_id, const HpGrid& grid) {
  if (tasks.empty()) throw std::invalid_argument("grid manifest needs at least one task");
  nlohmann::json jobs = nlohmann::json::array();
  std::size_t index = 0;
  const auto configs = grid.configs();
  for (const auto& task : tasks) {
    for (const auto& c : configs) {
      for (const auto seed : grid.seeds) {
        jobs.push_back({{"index", index++},
                        {"task", task},
                        {"model", model_id},
                        {"lr", c.learning_rate},
                        {"batch", c.batch_size},
                        {"dropout", c.dropout},
                        {"epochs", grid.epochs},
                        {"seed", seed}});
      }
    }
  }
  return jobs;
}

RunRecord parse_run_record(const nlohmann::json& j) {
  RunRecord r;
  r.task = j.at("task").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.config.learning_rate = j.at("lr").get<double>();
  r.config.batch_size = j.at("batch").get<int>();
  r.config.dropout = j.at("dropout").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.dev_score = j.at("dev_score").get<double>();
  return r;
}

std::vector<RunRecord> read_run_records(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_run_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("record line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json AggregateReport::to_json() const {
  auto summary = [](const ConfigSummary& s) {
    return nlohmann::json{{"task", s.task},
                          {"model", s.model},
                          {"lr", s.config.learning_rate},
                          {"batch", s.config.batch_size},
                          {"dropout", s.config.dropout},
                          {"mean", s.mean},
                          {"std", s.std},
                          {"n", s.n}};
  };
  nlohmann::json g = nlohmann::json::array();
  for (const auto& s : groups) g.push_back(summary(s));
  nlohmann::json b = nlohmann::json::array();
  for (const auto& [_, s] : best) b.push_back(summary(s));
  return {{"groups", g}, {"best", b}};
}

AggregateReport aggregate_runs(std::span<const RunRecord> records, StdMode mode) {
  using GroupKey = std::tuple<std::string, std::string, HpConfig>;
  std::map<GroupKey, std::vector<std::pair<std::uint64_t, double>>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.task, r.model, r.config}];
    for (const auto& [seed, _] : g) {
      if (seed == r.seed) {
        throw std::invalid_argument("duplicate run: task " + r.task + ", model " + r.model +
                                    ", lr " + format_learning_rate(r.config.learning_rate) +
                                    ", batch " + std::to_string(r.config.batch_size) +
                                    ", dropout " + std::to_string(r.config.dropout) + ", seed " +
                                    std::to_string(r.seed));
      }
    }
    g.emplace_back(r.seed, r.dev_score);
  }

  AggregateReport report;
  for (auto& [key, scores] : groups) {
    // Summation order fixed by seed so the result ignores record order.
    std::sort(scores.begin(), scores.end());
    ConfigSummary s;
    std::tie(s.task, s.model, s.config) = key;
    s.n = scores.size();
    double sum = 0.0;
    for (const auto& [_, v] : scores) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (const auto& [_, v] : scores) ss += (v - s.mean) * (v - s.mean);
    const std::size_t dof = mode == StdMode::kSample ? s.n - 1 : s.n;
    s.std = dof == 0 ? 0.0 : std::sqrt(ss / static_cast<double>(dof));
    report.groups.push_back(s);
  }
  for (const auto& s : report.groups) {
    const TaskModel key{s.task, s.model};
    auto it = report.best.find(key);
    // Groups arrive in config order, so strict comparisons keep the earliest.
    if (it == report.best.end()) {
      report.best.emplace(key, s);
    } else if (s.mean > it->second.mean || (s.mean == it->second.mean && s.std < it->second.std)) {
      it->second = s;
    }
  }
  return report;
}

std::string format_learning_rate(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lr);
  return buf;
}

std::string format_size(std::uint64_t bytes) {
  static constexpr const char* kUnits[] = {"B", "KB", "MB", "GB", "TB", "PB"};
  double v = static_cast<double>(bytes);
  std::size_t u = 0;
  while (v >= 1000.0 && u + 1 < std::size(kUnits)) {
    v /= 1000.0;
    ++u;
  }
  char buf[32];
  const double tenth = std::round(v * 10.0) / 10.0;
  if (u > 0 && tenth < 10.0 && tenth != std::floor(tenth)) {
    std::snprintf(buf, sizeof buf, "%.1f%s", tenth, kUnits[u]);
  } else {
    std::snprintf(buf, sizeof buf, "%.0f%s", std::round(v), kUnits[u]);
  }
  return buf;
}

namespace {

// Renders rows as left-aligned columns separated by " | ".
std::string render_rows(const std::vector<std::vector<std::string>>& rows,
                        const std::set<std::size_t>& rules_after) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], utf8::length(row[c]));
  }
  std::size_t total = 0;
  for (auto w : width) total += w;
  total += width.empty() ? 0 : 3 * (width.size() - 1);
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < rows[r].size() ? rows[r][c] : "";
      if (c) line += " | ";
      line += cell;
      if (c + 1 < width.size()) line.append(width[c] - utf8::length(cell), ' ');
    }
    out << line << '\n';
    if (rules_after.count(r)) out << std::string(total, '-') << '\n';
  }
  return out.str();
}

std::vector<std::string> task_order(const AggregateReport& report) {
  std::set<std::string> seen;
  for (const auto& [key, _] : report.best) seen.insert(key.first);
  std::vector<std::string> order;
  for (const auto& t : alue_tasks()) {
    if (seen.erase(t)) order.push_back(t);
  }
  order.insert(order.end(), seen.begin(), seen.end());
  return order;
}

std::vector<std::string> model_order(const AggregateReport& report) {
  std::set<std::string> models;
  for (const auto& [key, _] : report.best) models.insert(key.second);
  return {models.begin(), models.end()};
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_hp_table(const AggregateReport& report) {
  const auto tasks = task_order(report);
  std::vector<std::vector<std::string>> rows;
  std::set<std::size_t> rules{0};
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), tasks.begin(), tasks.end());
  rows.push_back(header);
  for (const auto& model : model_order(report)) {
    rows.push_back({model});
    rules.insert(rows.size() - 1);
    std::vector<std::string> bs{"batch size"}, dp{"hidden dropout"}, lr{"learning rate"};
    for (const auto& t : tasks) {
      const auto it = report.best.find({t, model});
      if (it == report.best.end()) {
        bs.push_back("-");
        dp.push_back("-");
        lr.push_back("-");
        continue;
      }
      bs.push_back(std::to_string(it->second.config.batch_size));
      dp.push_back(format_fixed(it->second.config.dropout, 1));
      lr.push_back(format_learning_rate(it->second.config.learning_rate));
    }
    rows.push_back(bs);
    rows.push_back(dp);
    rows.push_back(lr);
    rules.insert(rows.size() - 1);
  }
  return render_rows(rows, rules);
}

std::string render_score_table(const AggregateReport& report) {
  const auto tasks = task_order(report);
  const auto models = model_order(report);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Task"};
  header.insert(header.end(), models.begin(), models.end());
  rows.push_back(header);
  std::set<std::size_t> rules{0};
  for (const auto& t : tasks) {
    std::vector<std::string> row{t};
    for (const auto& m : models) {
      const auto it = report.best.find({t, m});
      row.push_back(it == report.best.end()
                        ? "-"
                        : format_fixed(it->second.mean, 1) + "±" + format_fixed(it->second.std, 1));
    }
    rows.push_back(row);
  }
  bool any_avg = false;
  std::vector<std::string> avg{"Avg."};
  for (const auto& m : models) {
    std::map<std::string, double> scores;
    for (const auto& t : alue_tasks()) {
      const auto it = report.best.find({t, m});
      if (it != report.best.end()) scores[t] = it->second.mean;
    }
    if (scores.size() == alue_tasks().size() && tasks.size() == alue_tasks().size()) {
      avg.push_back(format_fixed(alue_average(scores), 1));
      any_avg = true;
    } else {
      avg.push_back("-");
    }
  }
  if (any_avg) {
    rules.insert(rows.size() - 1);
    rows.push_back(avg);
  }
  return render_rows(rows, rules);
}

std::string render_stats_table(const FilterStats& stats) {
  auto clean_cell = [](std::uint64_t in, std::uint64_t out) {
    const double pct = in == 0 ? 0.0 : 100.0 * static_cast<double>(out) / static_cast<double>(in);
    return format_size(out) + " (" + format_fixed(pct, 0) + "%)";
  };
  std::vector<std::vector<std::string>> rows{{"Source", "Original", "Clean"}};
  std::set<std::size_t> rules{0};
  for (const auto& [src, s] : stats.by_source) {
    rows.push_back({src, format_size(s.input_bytes), clean_cell(s.input_bytes, s.output_bytes)});
  }
  if (!stats.by_source.empty()) {
    rules.insert(rows.size() - 1);
    rows.push_back(
        {"Total", format_size(stats.input_bytes), clean_cell(stats.input_bytes, stats.output_bytes)});
  }
  return render_rows(rows, rules);
}

}  // namespace arprep
