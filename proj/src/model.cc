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

#include "imrec/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

namespace imrec {

namespace {

constexpr char kMagic[] = "IMFR1\n";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

void check_context(const FactorModel& model, Index context) {
  if (context < 0 || context >= model.num_contexts()) {
    throw IndexError("context id " + std::to_string(context) +
                     " out of range [0," +
                     std::to_string(model.num_contexts()) + ")");
  }
}

void check_item(Index num_items, Index item) {
  if (item < 0 || item >= num_items) {
    throw IndexError("item id " + std::to_string(item) + " out of range [0," +
                     std::to_string(num_items) + ")");
  }
}

std::vector<char> exclusion_mask(Index num_items,
                                 std::span<const Index> excluded) {
  std::vector<char> mask(static_cast<std::size_t>(num_items), 0);
  for (Index j : excluded) {
    check_item(num_items, j);
    mask[j] = 1;
  }
  return mask;
}

// Strict "ranks ahead of" order: higher score first, then smaller id.
inline bool ahead(double score_a, Index a, double score_b, Index b) {
  return score_a > score_b || (score_a == score_b && a < b);
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) {
    out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

}  // namespace

bool FactorModel::operator==(const FactorModel& other) const {
  if (W.rows() != other.W.rows() || W.cols() != other.W.cols() ||
      H.rows() != other.H.rows() || H.cols() != other.H.cols()) {
    return false;
  }
  const auto same_bits = [](const RowMatrix& a, const RowMatrix& b) {
    return a.size() == 0 ||
           std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
  };
  return same_bits(W, other.W) && same_bits(H, other.H);
}

double default_init_sigma(Index dims) {
  return 0.1 / std::sqrt(static_cast<double>(dims));
}

FactorModel init_model(Index num_contexts, Index num_items, Index dims,
                       std::uint64_t seed, double sigma) {
  if (dims <= 0) {
    throw ValidationError("embedding dimension must be >= 1, got " +
                          std::to_string(dims));
  }
  if (num_contexts < 0 || num_items < 0) {
    throw ValidationError("model dimensions must be non-negative");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("init sigma must be finite and >= 0");
  }
  FactorModel model;
  model.W = RowMatrix::Zero(num_contexts, dims);
  model.H = RowMatrix::Zero(num_items, dims);
  if (sigma == 0.0) return model;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Index k = 0; k < model.W.size(); ++k) model.W.data()[k] = normal(rng);
  for (Index k = 0; k < model.H.size(); ++k) model.H.data()[k] = normal(rng);
  return model;
}

double score(const FactorModel& model, Index context, Index item) {
  check_context(model, context);
  check_item(model.num_items(), item);
  return model.W.row(context).dot(model.H.row(item));
}

Vector score_all(const FactorModel& model, Index context) {
  check_context(model, context);
  return score_embedding(model, model.W.row(context).transpose());
}

Vector score_embedding(const FactorModel& model, const Vector& embedding) {
  if (embedding.size() != model.dims()) {
    throw ValidationError("embedding has dimension " +
                          std::to_string(embedding.size()) + ", model has " +
                          std::to_string(model.dims()));
  }
  Vector scores(model.num_items());
  // Per-row dot products so score_all matches score() bit for bit.
  for (Index i = 0; i < model.num_items(); ++i) {
    scores[i] = embedding.dot(model.H.row(i).transpose());
  }
  return scores;
}

Index rank_in_scores(const Vector& scores, Index item,
                     std::span<const Index> excluded) {
  const Index n = scores.size();
  check_item(n, item);
  const auto mask = exclusion_mask(n, excluded);
  if (mask[item]) {
    throw ValidationError("item " + std::to_string(item) +
                          " is excluded and has no rank");
  }
  Index rank = 1;
  const double s = scores[item];
  for (Index j = 0; j < n; ++j) {
    if (!mask[j] && ahead(scores[j], j, s, item)) ++rank;
  }
  return rank;
}

Index rank_of(const FactorModel& model, Index context, Index item,
              std::span<const Index> excluded) {
  check_item(model.num_items(), item);
  return rank_in_scores(score_all(model, context), item, excluded);
}

RankedList top_n_of_scores(const Vector& scores, Index n,
                           std::span<const Index> excluded) {
  if (n < 1) {
    throw ValidationError("top-n requires n >= 1, got " + std::to_string(n));
  }
  const auto mask = exclusion_mask(scores.size(), excluded);
  struct Entry {
    double score;
    Index item;
  };
  const auto better = [](const Entry& a, const Entry& b) {
    return ahead(a.score, a.item, b.score, b.item);
  };
  // Heap top is the weakest kept entry.
  std::priority_queue<Entry, std::vector<Entry>, decltype(better)> heap(better);
  for (Index i = 0; i < scores.size(); ++i) {
    if (mask[i]) continue;
    const Entry e{scores[i], i};
    if (static_cast<Index>(heap.size()) < n) {
      heap.push(e);
    } else if (better(e, heap.top())) {
      heap.pop();
      heap.push(e);
    }
  }
  RankedList out;
  out.items.resize(heap.size());
  out.scores.resize(heap.size());
  for (std::size_t k = heap.size(); k-- > 0;) {
    out.items[k] = heap.top().item;
    out.scores[k] = heap.top().score;
    heap.pop();
  }
  return out;
}

RankedList top_n(const FactorModel& model, Index context, Index n,
                 std::span<const Index> excluded) {
  return top_n_of_scores(score_all(model, context), n, excluded);
}

Vector fold_in_context(const FactorModel& model,
                       std::span<const FoldInObservation> history,
                       double alpha0, double lambda,
                       const SquareMatrix& gram_item) {
  const Index d = model.dims();
  if (gram_item.rows() != d || gram_item.cols() != d) {
    throw ValidationError("item Gramian must be " + std::to_string(d) + "x" +
                          std::to_string(d));
  }
  if (alpha0 < 0.0 || lambda < 0.0) {
    throw ValidationError("fold-in requires alpha0 >= 0 and lambda >= 0");
  }
  SquareMatrix a = alpha0 * gram_item;
  a.diagonal().array() += lambda;
  Vector b = Vector::Zero(d);
  for (const auto& obs : history) {
    check_item(model.num_items(), obs.item);
    const Vector h = model.H.row(obs.item).transpose();
    add_outer(a, h, obs.alpha);
    b += obs.alpha * obs.label * h;
  }
  return solve_spd(a, b);
}

std::string serialize_model(const FactorModel& model) {
  std::string out(kMagic, kMagicSize);
  out += std::to_string(model.num_contexts()) + " " +
         std::to_string(model.num_items()) + " " +
         std::to_string(model.dims()) + "\n";
  out.reserve(out.size() + 8 * (model.W.size() + model.H.size()));
  for (const RowMatrix* m : {&model.W, &model.H}) {
    for (Index k = 0; k < m->size(); ++k) {
      put_u64_le(out, std::bit_cast<std::uint64_t>(m->data()[k]));
    }
  }
  return out;
}

FactorModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < kMagicSize ||
      bytes.compare(0, kMagicSize, kMagic, kMagicSize) != 0) {
    throw FormatError("bad magic: not an IMFR1 model file");
  }
  const std::size_t eol = bytes.find('\n', kMagicSize);
  if (eol == std::string::npos) {
    throw FormatError("missing header line at byte offset " +
                      std::to_string(kMagicSize));
  }
  std::istringstream header(bytes.substr(kMagicSize, eol - kMagicSize));
  long long contexts = -1, items = -1, dims = -1;
  std::string extra;
  if (!(header >> contexts >> items >> dims) || (header >> extra) ||
      contexts < 0 || items < 0 || dims < 1) {
    throw FormatError("malformed header line at byte offset " +
                      std::to_string(kMagicSize));
  }
  const std::size_t payload = eol + 1;
  const std::size_t count =
      static_cast<std::size_t>((contexts + items) * dims);
  const std::size_t expected = payload + 8 * count;
  if (bytes.size() < expected) {
    const std::size_t complete = (bytes.size() - payload) / 8;
    throw FormatError("truncated payload: expected " +
                      std::to_string(expected) + " bytes, file ends at byte " +
                      "offset " + std::to_string(bytes.size()) +
                      " (value " + std::to_string(complete) + " of " +
                      std::to_string(count) + " incomplete)");
  }
  if (bytes.size() > expected) {
    throw FormatError("trailing data after byte offset " +
                      std::to_string(expected));
  }
  FactorModel model;
  model.W.resize(contexts, dims);
  model.H.resize(items, dims);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + payload;
  for (RowMatrix* m : {&model.W, &model.H}) {
    for (Index k = 0; k < m->size(); ++k, p += 8) {
      m->data()[k] = std::bit_cast<double>(get_u64_le(p));
    }
  }
  return model;
}

void persist(const FactorModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write model file '" + path + "'");
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("failed writing model file '" + path + "'");
}

FactorModel restore(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace imrec
