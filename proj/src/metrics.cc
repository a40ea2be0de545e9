/*
 * Copyright 2026 The imrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "imrec/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace imrec {

namespace {

void check_window(Index n) {
  if (n < 1) {
    throw ValidationError("metric window n must be >= 1, got " +
                          std::to_string(n));
  }
}

void check_nonempty(const RankSet& r, const char* metric) {
  if (r.size() == 0) {
    throw ValidationError(std::string(metric) + " needs a non-empty rank set");
  }
}

inline double discount(Index position) {
  return 1.0 / std::log2(static_cast<double>(position) + 1.0);
}

Index hits_within(const RankSet& r, Index n) {
  const auto& ranks = r.ranks();
  return std::upper_bound(ranks.begin(), ranks.end(), n) - ranks.begin();
}

std::string format_value(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

}  // namespace

RankSet::RankSet(std::vector<Index> ranks, Index catalog_size)
    : ranks_(std::move(ranks)), catalog_size_(catalog_size) {
  if (catalog_size_ < 0) {
    throw ValidationError("catalog size must be non-negative");
  }
  std::sort(ranks_.begin(), ranks_.end());
  for (std::size_t k = 0; k < ranks_.size(); ++k) {
    if (ranks_[k] < 1 || ranks_[k] > catalog_size_) {
      throw ValidationError("rank " + std::to_string(ranks_[k]) +
                            " outside [1," + std::to_string(catalog_size_) +
                            "]");
    }
    if (k > 0 && ranks_[k] == ranks_[k - 1]) {
      throw ValidationError("duplicate rank " + std::to_string(ranks_[k]));
    }
  }
}

RankSet ranks_in_scores(const Vector& scores, std::span<const Index> relevant,
                        std::span<const Index> excluded) {
  if (relevant.empty()) {
    throw ValidationError("relevant item set is empty");
  }
  const Index num_items = scores.size();
  std::vector<char> mask(static_cast<std::size_t>(num_items), 0);
  Index excluded_count = 0;
  for (Index j : excluded) {
    if (j < 0 || j >= num_items) {
      throw IndexError("excluded item " + std::to_string(j) + " out of range");
    }
    if (!mask[j]) ++excluded_count;
    mask[j] = 1;
  }
  std::vector<Index> order;
  order.reserve(num_items - excluded_count);
  for (Index i = 0; i < num_items; ++i) {
    if (!mask[i]) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  std::vector<Index> position(static_cast<std::size_t>(num_items), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    position[order[k]] = static_cast<Index>(k) + 1;
  }
  std::vector<Index> ranks;
  ranks.reserve(relevant.size());
  for (Index i : relevant) {
    if (i < 0 || i >= num_items) {
      throw IndexError("relevant item " + std::to_string(i) + " out of range");
    }
    if (mask[i]) {
      throw ValidationError("relevant item " + std::to_string(i) +
                            " is also excluded");
    }
    ranks.push_back(position[i]);
  }
  return RankSet(std::move(ranks), num_items - excluded_count);
}

RankSet ranks_of_relevant(const FactorModel& model, Index context,
                          std::span<const Index> relevant,
                          std::span<const Index> excluded) {
  return ranks_in_scores(score_all(model, context), relevant, excluded);
}

double precision_at(const RankSet& r, Index n) {
  check_window(n);
  return static_cast<double>(hits_within(r, n)) / static_cast<double>(n);
}

double recall_at(const RankSet& r, Index n) {
  check_window(n);
  check_nonempty(r, "recall");
  return static_cast<double>(hits_within(r, n)) /
         static_cast<double>(r.size());
}

double average_precision_at(const RankSet& r, Index n) {
  check_window(n);
  check_nonempty(r, "average precision");
  double sum = 0.0;
  Index hits = 0;
  for (Index rank : r.ranks()) {
    if (rank > n) break;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return sum / static_cast<double>(std::min(r.size(), n));
}

double ndcg_at(const RankSet& r, Index n) {
  check_window(n);
  check_nonempty(r, "ndcg");
  double dcg = 0.0;
  for (Index rank : r.ranks()) {
    if (rank > n) break;
    dcg += discount(rank);
  }
  double ideal = 0.0;
  const Index top = std::min(r.size(), n);
  for (Index k = 1; k <= top; ++k) ideal += discount(k);
  return dcg / ideal;
}

double auc(const RankSet& r) {
  const Index k = r.size();
  const Index total = r.catalog_size();
  if (k == 0 || k >= total) {
    throw ValidationError("AUC needs 1 <= |R| < catalog size (|R|=" +
                          std::to_string(k) + ", catalog " +
                          std::to_string(total) + ")");
  }
  // The j-th relevant rank (0-based) beats every irrelevant rank below it:
  // (total - rank) positions below, of which k - 1 - j are relevant.
  double correct = 0.0;
  for (Index j = 0; j < k; ++j) {
    correct += static_cast<double>((total - r.ranks()[j]) - (k - 1 - j));
  }
  return correct / (static_cast<double>(k) * static_cast<double>(total - k));
}

MetricKind parse_metric(const std::string& name) {
  if (name == "precision" || name == "prec") return MetricKind::kPrecision;
  if (name == "recall") return MetricKind::kRecall;
  if (name == "ap" || name == "map") return MetricKind::kAveragePrecision;
  if (name == "ndcg") return MetricKind::kNdcg;
  if (name == "auc") return MetricKind::kAuc;
  throw ValidationError("unknown metric '" + name +
                        "' (expected precision, recall, ap, ndcg or auc)");
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPrecision: return "precision";
    case MetricKind::kRecall: return "recall";
    case MetricKind::kAveragePrecision: return "ap";
    case MetricKind::kNdcg: return "ndcg";
    case MetricKind::kAuc: return "auc";
  }
  return "unknown";
}

double compute_metric(MetricKind kind, const RankSet& r, Index n) {
  switch (kind) {
    case MetricKind::kPrecision: return precision_at(r, n);
    case MetricKind::kRecall: return recall_at(r, n);
    case MetricKind::kAveragePrecision: return average_precision_at(r, n);
    case MetricKind::kNdcg: return ndcg_at(r, n);
    case MetricKind::kAuc: return auc(r);
  }
  throw ValidationError("unknown metric kind");
}

double metric_at_rank(MetricKind kind, Index rank, Index n,
                      Index catalog_size) {
  if (kind == MetricKind::kAuc && catalog_size < 2) return 0.0;
  return compute_metric(kind, RankSet({rank}, catalog_size), n);
}

double MetricReport::get(const std::string& label) const {
  for (const auto& [name, value] : values) {
    if (name == label) return value;
  }
  throw ValidationError("report has no metric '" + label + "'");
}

std::string MetricReport::to_table() const {
  std::string out;
  for (const auto& [name, value] : values) {
    out += name + "\t" + format_value(value) + "\n";
  }
  return out;
}

std::string MetricReport::to_csv() const {
  std::string out = "metric,value\n";
  for (const auto& [name, value] : values) {
    out += name + "," + format_value(value) + "\n";
  }
  return out;
}

MetricReport evaluate_model(const FactorModel& model, const Dataset& train,
                            const Dataset& test,
                            std::span<const MetricKind> metrics, Index n,
                            bool filter_train) {
  check_window(n);
  if (test.empty()) {
    throw ValidationError("test set is empty");
  }
  if (test.num_items() != model.num_items() ||
      test.num_contexts() > model.num_contexts()) {
    throw ValidationError("test data dimensions do not match the model");
  }
  if (filter_train && (train.num_items() != test.num_items() ||
                       train.num_contexts() != test.num_contexts())) {
    throw ValidationError("train and test dimensions differ");
  }
  std::vector<double> sums(metrics.size(), 0.0);
  std::vector<Index> counts(metrics.size(), 0);
  MetricReport report;
  for (Index c = 0; c < test.num_contexts(); ++c) {
    const auto relevant = test.item_ids_of(c);
    if (relevant.empty()) continue;
    std::vector<Index> excluded;
    if (filter_train) {
      // A held-out item that also appears in train stays a candidate.
      for (Index i : train.item_ids_of(c)) {
        if (!std::binary_search(relevant.begin(), relevant.end(), i)) {
          excluded.push_back(i);
        }
      }
    }
    const RankSet r = ranks_of_relevant(model, c, relevant, excluded);
    ++report.contexts_evaluated;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      if (metrics[m] == MetricKind::kAuc && r.size() >= r.catalog_size()) {
        continue;
      }
      sums[m] += compute_metric(metrics[m], r, n);
      ++counts[m];
    }
  }
  if (report.contexts_evaluated == 0) {
    throw ValidationError("no test context has relevant items");
  }
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const std::string label = metrics[m] == MetricKind::kAuc
                                  ? "auc"
                                  : metric_name(metrics[m]) + "@" +
                                        std::to_string(n);
    const double mean =
        counts[m] > 0 ? sums[m] / static_cast<double>(counts[m])
                      : std::numeric_limits<double>::quiet_NaN();
    report.values.emplace_back(label, mean);
  }
  return report;
}

MetricReport evaluate_model(const FactorModel& model, const Dataset& train,
                            const Dataset& test,
                            const std::vector<std::string>& metric_names,
                            Index n, bool filter_train) {
  std::vector<MetricKind> kinds;
  for (const auto& name : metric_names) kinds.push_back(parse_metric(name));
  return evaluate_model(model, train, test, kinds, n, filter_train);
}

}  // namespace imrec
