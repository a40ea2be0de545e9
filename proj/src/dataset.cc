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

#include "imrec/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace imrec {

namespace {

std::string pair_name(Index c, Index i) {
  return "(" + std::to_string(c) + "," + std::to_string(i) + ")";
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto result = std::from_chars(first, last, out);
  return result.ec == std::errc() && result.ptr == last;
}

}  // namespace

Dataset::Dataset(Index num_contexts, Index num_items,
                 std::vector<Interaction> interactions)
    : num_contexts_(num_contexts), num_items_(num_items) {
  if (num_contexts < 0 || num_items < 0) {
    throw ValidationError("dataset dimensions must be non-negative");
  }
  for (const auto& x : interactions) {
    if (x.context_id < 0 || x.context_id >= num_contexts ||
        x.item_id < 0 || x.item_id >= num_items) {
      throw ValidationError("interaction " + pair_name(x.context_id, x.item_id) +
                            " outside dims " + std::to_string(num_contexts) +
                            "x" + std::to_string(num_items));
    }
    if (!(x.weight >= 0.0) || !std::isfinite(x.weight)) {
      throw ValidationError("interaction " + pair_name(x.context_id, x.item_id) +
                            " has invalid weight " + std::to_string(x.weight));
    }
    if (!std::isfinite(x.label)) {
      throw ValidationError("interaction " + pair_name(x.context_id, x.item_id) +
                            " has non-finite label");
    }
  }

  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return a.context_id != b.context_id
                                ? a.context_id < b.context_id
                                : a.item_id < b.item_id;
                   });

  // Collapse duplicates: weights add, labels are weight-averaged (plain mean
  // when every duplicate carries zero weight).
  for (std::size_t k = 0; k < interactions.size();) {
    std::size_t end = k + 1;
    while (end < interactions.size() &&
           interactions[end].context_id == interactions[k].context_id &&
           interactions[end].item_id == interactions[k].item_id) {
      ++end;
    }
    Interaction merged = interactions[k];
    if (end - k > 1) {
      double weight_sum = 0.0;
      double weighted_labels = 0.0;
      double label_sum = 0.0;
      for (std::size_t r = k; r < end; ++r) {
        weight_sum += interactions[r].weight;
        weighted_labels += interactions[r].weight * interactions[r].label;
        label_sum += interactions[r].label;
      }
      merged.weight = weight_sum;
      merged.label = weight_sum > 0.0
                         ? weighted_labels / weight_sum
                         : label_sum / static_cast<double>(end - k);
    }
    interactions_.push_back(merged);
    k = end;
  }

  context_offsets_.assign(static_cast<std::size_t>(num_contexts_) + 1, 0);
  std::vector<Index> item_counts(static_cast<std::size_t>(num_items_), 0);
  for (const auto& x : interactions_) {
    ++context_offsets_[x.context_id + 1];
    ++item_counts[x.item_id];
  }
  std::partial_sum(context_offsets_.begin(), context_offsets_.end(),
                   context_offsets_.begin());

  item_offsets_.assign(static_cast<std::size_t>(num_items_) + 1, 0);
  for (Index i = 0; i < num_items_; ++i) {
    item_offsets_[i + 1] = item_offsets_[i] + item_counts[i];
  }
  item_contexts_.resize(interactions_.size());
  item_interactions_.resize(interactions_.size());
  std::vector<Index> cursor(item_offsets_.begin(), item_offsets_.end() - 1);
  // Context-major traversal keeps each C_i sorted by context id.
  for (std::size_t k = 0; k < interactions_.size(); ++k) {
    const Index slot = cursor[interactions_[k].item_id]++;
    item_contexts_[slot] = interactions_[k].context_id;
    item_interactions_[slot] = static_cast<Index>(k);
  }
}

void Dataset::check_context(Index context) const {
  if (context < 0 || context >= num_contexts_) {
    throw IndexError("context id " + std::to_string(context) +
                     " out of range [0," + std::to_string(num_contexts_) + ")");
  }
}

void Dataset::check_item(Index item) const {
  if (item < 0 || item >= num_items_) {
    throw IndexError("item id " + std::to_string(item) + " out of range [0," +
                     std::to_string(num_items_) + ")");
  }
}

std::span<const Interaction> Dataset::items_of(Index context) const {
  check_context(context);
  const Index begin = context_offsets_[context];
  const Index end = context_offsets_[context + 1];
  return std::span<const Interaction>(interactions_).subspan(begin, end - begin);
}

Index Dataset::context_offset(Index context) const {
  check_context(context);
  return context_offsets_[context];
}

Index Dataset::context_degree(Index context) const {
  check_context(context);
  return context_offsets_[context + 1] - context_offsets_[context];
}

std::span<const Index> Dataset::contexts_of(Index item) const {
  check_item(item);
  const Index begin = item_offsets_[item];
  return std::span<const Index>(item_contexts_)
      .subspan(begin, item_offsets_[item + 1] - begin);
}

std::span<const Index> Dataset::interactions_of_item(Index item) const {
  check_item(item);
  const Index begin = item_offsets_[item];
  return std::span<const Index>(item_interactions_)
      .subspan(begin, item_offsets_[item + 1] - begin);
}

Index Dataset::item_degree(Index item) const {
  check_item(item);
  return item_offsets_[item + 1] - item_offsets_[item];
}

bool Dataset::contains(Index context, Index item) const {
  const auto row = items_of(context);
  const auto it = std::lower_bound(
      row.begin(), row.end(), item,
      [](const Interaction& x, Index id) { return x.item_id < id; });
  return it != row.end() && it->item_id == item;
}

std::vector<Index> Dataset::item_ids_of(Index context) const {
  std::vector<Index> ids;
  for (const auto& x : items_of(context)) ids.push_back(x.item_id);
  return ids;
}

Dataset parse_interactions(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Interaction> rows;
  Index line_no = 0;
  Index declared_contexts = -1;
  Index declared_items = -1;
  Index max_context = -1;
  Index max_item = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#dims", 0) == 0) {
        std::istringstream dims(line.substr(5));
        std::string extra;
        if (!(dims >> declared_contexts >> declared_items) || (dims >> extra) ||
            declared_contexts < 0 || declared_items < 0) {
          throw ParseError("line " + std::to_string(line_no) +
                           ": malformed #dims directive");
        }
      }
      continue;
    }
    const auto fields = split_fields(line, '\t');
    if (fields.size() < 2 || fields.size() > 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 2-4 " +
                       "tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    Interaction x;
    long long c = 0;
    long long i = 0;
    if (!parse_number(fields[0], c) || !parse_number(fields[1], i)) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": ids must be integers");
    }
    if (fields.size() >= 3 && !parse_number(fields[2], x.label)) {
      throw ParseError("line " + std::to_string(line_no) + ": bad label");
    }
    if (fields.size() == 4 && !parse_number(fields[3], x.weight)) {
      throw ParseError("line " + std::to_string(line_no) + ": bad weight");
    }
    if (c < 0 || i < 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative id");
    }
    if (x.weight < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative weight");
    }
    x.context_id = static_cast<Index>(c);
    x.item_id = static_cast<Index>(i);
    if (declared_contexts >= 0 &&
        (x.context_id >= declared_contexts || x.item_id >= declared_items)) {
      throw ValidationError("line " + std::to_string(line_no) + ": id " +
                            pair_name(x.context_id, x.item_id) +
                            " exceeds declared dims");
    }
    max_context = std::max(max_context, x.context_id);
    max_item = std::max(max_item, x.item_id);
    rows.push_back(x);
  }
  const Index num_contexts =
      declared_contexts >= 0 ? declared_contexts : max_context + 1;
  const Index num_items = declared_items >= 0 ? declared_items : max_item + 1;
  return Dataset(num_contexts, num_items, std::move(rows));
}

Dataset load_interactions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open interaction file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_interactions(buffer.str());
}

std::pair<Dataset, Dataset> leave_k_out_split(const Dataset& dataset, Index k,
                                              std::uint64_t seed) {
  if (k < 1) {
    throw ValidationError("leave-k-out requires k >= 1, got " +
                          std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  std::vector<Interaction> train;
  std::vector<Interaction> test;
  for (Index c = 0; c < dataset.num_contexts(); ++c) {
    const auto row = dataset.items_of(c);
    const Index n = static_cast<Index>(row.size());
    if (n <= k) {
      train.insert(train.end(), row.begin(), row.end());
      continue;
    }
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first k slots form a uniform k-subset.
    for (Index s = 0; s < k; ++s) {
      std::uniform_int_distribution<Index> pick(s, n - 1);
      std::swap(order[s], order[pick(rng)]);
    }
    std::vector<char> held_out(n, 0);
    for (Index s = 0; s < k; ++s) held_out[order[s]] = 1;
    for (Index r = 0; r < n; ++r) {
      (held_out[r] ? test : train).push_back(row[r]);
    }
  }
  return {Dataset(dataset.num_contexts(), dataset.num_items(), std::move(train)),
          Dataset(dataset.num_contexts(), dataset.num_items(), std::move(test))};
}

PopularityTable PopularityTable::from_counts(std::vector<double> counts,
                                             double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ValidationError("popularity exponent beta must be finite and >= 0");
  }
  if (counts.empty()) {
    throw ValidationError("popularity table needs at least one item");
  }
  PopularityTable table;
  table.beta = beta;
  table.probs.resize(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0.0) {
      throw ValidationError("negative popularity count");
    }
    const double mass = beta == 0.0 ? 1.0
                        : counts[i] == 0.0 ? 0.0
                                           : std::pow(counts[i], beta);
    table.probs[i] = mass;
    total += mass;
  }
  if (!(total > 0.0)) {
    throw ValidationError(
        "all item counts are zero; no popularity distribution exists");
  }
  for (double& p : table.probs) p /= total;
  table.counts = std::move(counts);
  return table;
}

PopularityTable popularity_distribution(const Dataset& dataset, double beta) {
  std::vector<double> counts(static_cast<std::size_t>(dataset.num_items()));
  for (Index i = 0; i < dataset.num_items(); ++i) {
    counts[i] = static_cast<double>(dataset.item_degree(i));
  }
  return PopularityTable::from_counts(std::move(counts), beta);
}

}  // namespace imrec
