#include "arprep/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arprep {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " predictions vs " + std::to_string(b) + " gold)");
  }
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double accuracy(std::span<const std::string> preds, std::span<const std::string> golds) {
  check_lengths(preds.size(), golds.size(), "accuracy");
  if (preds.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == golds[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double f1_macro(std::span<const std::string> preds, std::span<const std::string> golds,
                std::span<const std::string> label_set) {
  check_lengths(preds.size(), golds.size(), "f1_macro");
  if (label_set.empty()) throw std::invalid_argument("f1_macro: empty label set");
  std::map<std::string, std::size_t> index;
  for (const auto& l : label_set) index.emplace(l, index.size());
  auto lookup = [&](const std::string& l) {
    const auto it = index.find(l);
    if (it == index.end()) throw std::invalid_argument("f1_macro: label '" + l + "' not in label set");
    return it->second;
  };
  std::vector<double> tp(index.size()), fp(index.size()), fn(index.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto p = lookup(preds[i]);
    const auto g = lookup(golds[i]);
    if (p == g) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[g] += 1;
    }
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    const double prec = safe_div(tp[k], tp[k] + fp[k]);
    const double rec = safe_div(tp[k], tp[k] + fn[k]);
    sum += safe_div(2 * prec * rec, prec + rec);
  }
  return sum / static_cast<double>(index.size());
}

double jaccard_multilabel(std::span<const LabelSet> preds, std::span<const LabelSet> golds,
                          JaccardMode mode) {
  check_lengths(preds.size(), golds.size(), "jaccard");
  if (preds.empty()) throw std::invalid_argument("jaccard: empty input");
  double sum = 0.0;
  std::size_t inter_total = 0;
  std::size_t union_total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t inter = 0;
    for (const auto& l : preds[i]) inter += golds[i].count(l);
    const std::size_t uni = preds[i].size() + golds[i].size() - inter;
    sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    inter_total += inter;
    union_total += uni;
  }
  if (mode == JaccardMode::kMicro) {
    return union_total == 0 ? 1.0
                            : static_cast<double>(inter_total) / static_cast<double>(union_total);
  }
  return sum / static_cast<double>(preds.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_lengths(xs.size(), ys.size(), "pearson");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("pearson: predictions have zero variance");
  if (syy == 0.0) throw std::invalid_argument("pearson: gold values have zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

struct Tag {
  char prefix;  // 'O', 'B' or 'I'
  std::string type;
};

Tag parse_tag(const std::string& tag) {
  if (tag == "O") return {'O', ""};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    return {tag[0], tag.substr(2)};
  }
  throw std::invalid_argument("unknown tag '" + tag + "'");
}

}  // namespace

std::vector<EntitySpan> decode_bio(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan cur;
  Tag prev{'O', ""};
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag t = parse_tag(tags[i]);
    // conlleval endOfChunk / startOfChunk for the IOB2 subset.
    const bool ends = open && (t.prefix == 'O' || t.prefix == 'B' || t.type != prev.type);
    if (ends) {
      cur.end = i - 1;
      spans.push_back(cur);
      open = false;
    }
    const bool starts = t.prefix == 'B' || (t.prefix == 'I' && (prev.prefix == 'O' || t.type != prev.type));
    if (starts) {
      cur = {i, i, t.type};
      open = true;
    }
    prev = t;
  }
  if (open) {
    cur.end = tags.size() - 1;
    spans.push_back(cur);
  }
  return spans;
}

PrfScore conll_mention_f1(std::span<const std::vector<std::string>> pred_seqs,
                          std::span<const std::vector<std::string>> gold_seqs) {
  check_lengths(pred_seqs.size(), gold_seqs.size(), "conll_mention_f1");
  PrfScore s;
  for (std::size_t k = 0; k < pred_seqs.size(); ++k) {
    if (pred_seqs[k].size() != gold_seqs[k].size()) {
      throw std::invalid_argument("conll_mention_f1: sequence " + std::to_string(k) +
                                  " has " + std::to_string(pred_seqs[k].size()) +
                                  " predicted tags vs " + std::to_string(gold_seqs[k].size()) +
                                  " gold tags");
    }
    const auto p = decode_bio(pred_seqs[k]);
    const auto g = decode_bio(gold_seqs[k]);
    s.predicted += p.size();
    s.gold += g.size();
    // Both lists are sorted by start and non-overlapping.
    std::size_t i = 0, j = 0;
    while (i < p.size() && j < g.size()) {
      if (p[i] == g[j]) {
        ++s.correct;
        ++i;
        ++j;
      } else if (p[i] < g[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  s.precision = safe_div(static_cast<double>(s.correct), static_cast<double>(s.predicted));
  s.recall = safe_div(static_cast<double>(s.correct), static_cast<double>(s.gold));
  s.f1 = safe_div(2 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

const std::vector<std::string>& alue_tasks() {
  static const std::vector<std::string> tasks{"MQ2Q", "MDD", "SVREG", "SEC",
                                              "FID",  "OOLD", "XNLI", "OHSD"};
  return tasks;
}

double alue_average(const std::map<std::string, double>& task_scores) {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& t : alue_tasks()) {
    if (!task_scores.count(t)) missing.push_back(t);
  }
  for (const auto& [t, _] : task_scores) {
    if (std::find(alue_tasks().begin(), alue_tasks().end(), t) == alue_tasks().end()) {
      extra.push_back(t);
    }
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "alue_average:";
    auto list = [&](const char* label, const std::vector<std::string>& v) {
      if (v.empty()) return;
      msg += std::string(" ") + label + " [";
      for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : "") + v[i];
      msg += "]";
    };
    list("missing", missing);
    list("unexpected", extra);
    throw std::invalid_argument(msg);
  }
  double sum = 0.0;
  for (const auto& t : alue_tasks()) sum += task_scores.at(t);
  return sum / static_cast<double>(alue_tasks().size());
}

std::string default_metric(const std::string& task) {
  if (task == "XNLI") return "accuracy";
  if (task == "SEC") return "jaccard";
  if (task == "SVREG") return "pearson";
  if (task == "MQ2Q" || task == "MDD" || task == "FID" || task == "OOLD" || task == "OHSD") {
    return "f1_macro";
  }
  if (task == "NER" || task == "ANERCORP") return "conll_f1";
  return "";
}

}  // namespace arprep
