#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace arprep {

// Exact-match fraction. Lengths must match and be non-zero.
double accuracy(std::span<const std::string> preds, std::span<const std::string> golds);

/// Unweighted mean of per-label F1 over `label_set`. Labels with no support
/// and no predictions score 0; an empty precision or recall denominator
/// counts as 0.
double f1_macro(std::span<const std::string> preds, std::span<const std::string> golds,
                std::span<const std::string> label_set);

using LabelSet = std::set<std::string>;

enum class JaccardMode { kSampleMean, kMicro };

// Mean over samples of |P & G| / |P | G|; two empty sets score 1.
double jaccard_multilabel(std::span<const LabelSet> preds, std::span<const LabelSet> golds,
                          JaccardMode mode = JaccardMode::kSampleMean);

// Sample Pearson correlation. Throws on a zero-variance input.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string type;
  auto operator<=>(const EntitySpan&) const = default;
};

/// conlleval chunking for BIO tags. An I-T that does not continue a chunk of
/// type T opens a new one.
std::vector<EntitySpan> decode_bio(std::span<const std::string> tags);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

/// Micro-averaged mention-level P/R/F1; a span counts only on exact
/// start, end and type match.
PrfScore conll_mention_f1(std::span<const std::vector<std::string>> pred_seqs,
                          std::span<const std::vector<std::string>> gold_seqs);

// MQ2Q, MDD, SVREG, SEC, FID, OOLD, XNLI, OHSD.
const std::vector<std::string>& alue_tasks();

// Arithmetic mean of exactly the eight benchmark tasks.
double alue_average(const std::map<std::string, double>& task_scores);

// Metric named for a task ("accuracy", "f1_macro", "jaccard", "pearson",
// "conll_f1"), or empty if the task is unknown.
std::string default_metric(const std::string& task);

}  // namespace arprep
