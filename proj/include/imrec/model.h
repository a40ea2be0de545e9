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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imrec/linalg.h"

namespace imrec {

// Matrix factorization scorer: y(c,i) = <w_c, h_i> with one embedding row per
// context (W) and per item (H).
struct FactorModel {
  RowMatrix W;
  RowMatrix H;

  Index dims() const { return W.cols(); }
  Index num_contexts() const { return W.rows(); }
  Index num_items() const { return H.rows(); }

  bool operator==(const FactorModel& other) const;
};

// Item ids in descending score order; ties go to the smaller id.
struct RankedList {
  std::vector<Index> items;
  std::vector<double> scores;
};

// 0.1 / sqrt(d), keeping initial scores around 1e-2.
double default_init_sigma(Index dims);

// Entries i.i.d. Normal(0, sigma^2); W is filled before H, both row-major.
FactorModel init_model(Index num_contexts, Index num_items, Index dims,
                       std::uint64_t seed, double sigma);

double score(const FactorModel& model, Index context, Index item);
Vector score_all(const FactorModel& model, Index context);
// Scores of every item against an arbitrary context embedding.
Vector score_embedding(const FactorModel& model, const Vector& embedding);

// 1-based rank of `item` among the non-excluded items.
Index rank_of(const FactorModel& model, Index context, Index item,
              std::span<const Index> excluded = {});
Index rank_in_scores(const Vector& scores, Index item,
                     std::span<const Index> excluded = {});

// Bounded-heap selection of the best min(n, |candidates|) items.
RankedList top_n(const FactorModel& model, Index context, Index n,
                 std::span<const Index> excluded = {});
RankedList top_n_of_scores(const Vector& scores, Index n,
                           std::span<const Index> excluded = {});

struct FoldInObservation {
  Index item = 0;
  double alpha = 1.0;
  double label = 1.0;
};

// Least-squares embedding of a new context against fixed items:
// (sum alpha h h^T + alpha0 G^I + lambda Id)^-1 (sum alpha y h).
Vector fold_in_context(const FactorModel& model,
                       std::span<const FoldInObservation> history,
                       double alpha0, double lambda,
                       const SquareMatrix& gram_item);

// Binary model file: "IMFR1\n", "<contexts> <items> <dims>\n", then W rows
// and H rows as little-endian float64, row-major.
void persist(const FactorModel& model, const std::string& path);
FactorModel restore(const std::string& path);

std::string serialize_model(const FactorModel& model);
FactorModel deserialize_model(const std::string& bytes);

}  // namespace imrec
