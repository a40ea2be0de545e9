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
#include <utility>
#include <vector>

#include "imrec/error.h"

namespace imrec {

// One observed (context, item) pair with its label y(c,i) and weight
// alpha(c,i).
struct Interaction {
  Index context_id = 0;
  Index item_id = 0;
  double label = 1.0;
  double weight = 1.0;
};

// The observation set S held in both context-major and item-major form.
//
// Interactions are stored sorted by (context_id, item_id) with duplicates
// collapsed, so items_of(c) is a contiguous slice. The item-major view keeps
// indices into interactions() so callers can look up labels and weights.
// A Dataset is immutable once constructed.
class Dataset {
 public:
  Dataset() = default;

  // Validates ids and weights, then merges duplicate (c,i) pairs: weights
  // are summed and labels averaged by weight.
  Dataset(Index num_contexts, Index num_items,
          std::vector<Interaction> interactions);

  Index num_contexts() const { return num_contexts_; }
  Index num_items() const { return num_items_; }
  Index size() const { return static_cast<Index>(interactions_.size()); }
  bool empty() const { return interactions_.empty(); }

  std::span<const Interaction> interactions() const { return interactions_; }

  // I_c, sorted by item id.
  std::span<const Interaction> items_of(Index context) const;
  // Position of the first interaction of `context` inside interactions().
  Index context_offset(Index context) const;
  Index context_degree(Index context) const;

  // C_i as context ids (ascending) and as indices into interactions().
  std::span<const Index> contexts_of(Index item) const;
  std::span<const Index> interactions_of_item(Index item) const;
  Index item_degree(Index item) const;

  // Binary search inside I_c.
  bool contains(Index context, Index item) const;

  // Sorted item ids of I_c.
  std::vector<Index> item_ids_of(Index context) const;

 private:
  void check_context(Index context) const;
  void check_item(Index item) const;

  Index num_contexts_ = 0;
  Index num_items_ = 0;
  std::vector<Interaction> interactions_;
  std::vector<Index> context_offsets_{0};
  std::vector<Index> item_offsets_{0};
  std::vector<Index> item_contexts_;
  std::vector<Index> item_interactions_;
};

// Reads `context<TAB>item[<TAB>label[<TAB>weight]]` lines. Lines starting
// with '#' are comments, except a `#dims <contexts> <items>` directive which
// fixes the id space. Without it the dimensions are 1 + the largest id seen.
Dataset load_interactions(const std::string& path);
Dataset parse_interactions(const std::string& text);

// Moves k uniformly chosen interactions of every context with more than k
// interactions into the test set. Deterministic given `seed`.
std::pair<Dataset, Dataset> leave_k_out_split(const Dataset& dataset, Index k,
                                              std::uint64_t seed);

struct PopularityTable {
  std::vector<double> counts;
  double beta = 1.0;
  std::vector<double> probs;

  // probs[i] = counts[i]^beta / sum_j counts[j]^beta with 0^0 := 1.
  static PopularityTable from_counts(std::vector<double> counts, double beta);
};

// Popularity |C_i|^beta over the items of `dataset`.
PopularityTable popularity_distribution(const Dataset& dataset, double beta);

}  // namespace imrec
