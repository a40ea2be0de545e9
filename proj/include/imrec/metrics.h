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

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imrec/dataset.h"
#include "imrec/model.h"

namespace imrec {

// Ranks R of the relevant items of one context, over a catalog of
// `catalog_size` candidates.
class RankSet {
 public:
  RankSet(std::vector<Index> ranks, Index catalog_size);

  // Ascending, distinct, each in [1, catalog_size].
  const std::vector<Index>& ranks() const { return ranks_; }
  Index catalog_size() const { return catalog_size_; }
  Index size() const { return static_cast<Index>(ranks_.size()); }

 private:
  std::vector<Index> ranks_;
  Index catalog_size_;
};

RankSet ranks_of_relevant(const FactorModel& model, Index context,
                          std::span<const Index> relevant,
                          std::span<const Index> excluded = {});
RankSet ranks_in_scores(const Vector& scores, std::span<const Index> relevant,
                        std::span<const Index> excluded = {});

double precision_at(const RankSet& r, Index n);
double recall_at(const RankSet& r, Index n);
double average_precision_at(const RankSet& r, Index n);
double ndcg_at(const RankSet& r, Index n);
double auc(const RankSet& r);

enum class MetricKind { kPrecision, kRecall, kAveragePrecision, kNdcg, kAuc };

// Accepts "precision"/"prec", "recall", "ap"/"map", "ndcg", "auc".
MetricKind parse_metric(const std::string& name);
std::string metric_name(MetricKind kind);
double compute_metric(MetricKind kind, const RankSet& r, Index n);

// Metric value when the single item at `rank` is the only relevant one.
// Pairwise LambdaRank-style weights use |M(r_i) - M(r_j)|.
double metric_at_rank(MetricKind kind, Index rank, Index n, Index catalog_size);

struct MetricReport {
  // (label, mean value), e.g. ("recall@10", 0.42), in request order.
  std::vector<std::pair<std::string, double>> values;
  Index contexts_evaluated = 0;

  double get(const std::string& label) const;
  // "metric<TAB>value" per line.
  std::string to_table() const;
  std::string to_csv() const;
};

// Scores every context of `test` with relevant items and macro-averages the
// requested metrics in context-id order. With `filter_train` the train
// positives of a context are removed from its candidate set.
MetricReport evaluate_model(const FactorModel& model, const Dataset& train,
                            const Dataset& test,
                            std::span<const MetricKind> metrics, Index n,
                            bool filter_train = true);
MetricReport evaluate_model(const FactorModel& model, const Dataset& train,
                            const Dataset& test,
                            const std::vector<std::string>& metric_names,
                            Index n, bool filter_train = true);

}  // namespace imrec
