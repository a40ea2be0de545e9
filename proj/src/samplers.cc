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

#include "imrec/samplers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace imrec {

namespace {

double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

void check_model_context(const FactorModel& model, Index context) {
  if (context < 0 || context >= model.num_contexts()) {
    throw IndexError("context id " + std::to_string(context) +
                     " out of range");
  }
}

// Draws an index with probability proportional to non-negative `weights`.
Index draw_weighted(Rng& rng, std::span<const double> weights, double total) {
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  Index last = -1;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last = static_cast<Index>(k);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "uniform") return SamplerKind::kUniform;
  if (name == "popularity") return SamplerKind::kPopularity;
  if (name == "in_batch" || name == "in-batch") return SamplerKind::kInBatch;
  if (name == "warp") return SamplerKind::kWarp;
  if (name == "adaptive") return SamplerKind::kAdaptive;
  if (name == "kernel") return SamplerKind::kKernel;
  if (name == "two_pass" || name == "two-pass") return SamplerKind::kTwoPass;
  throw ValidationError("unknown sampler '" + name + "'");
}

std::string sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kUniform: return "uniform";
    case SamplerKind::kPopularity: return "popularity";
    case SamplerKind::kInBatch: return "in_batch";
    case SamplerKind::kWarp: return "warp";
    case SamplerKind::kAdaptive: return "adaptive";
    case SamplerKind::kKernel: return "kernel";
    case SamplerKind::kTwoPass: return "two_pass";
  }
  return "unknown";
}

void validate_sampler_config(const SamplerConfig& config) {
  if (config.m < 1) throw ValidationError("sampler needs m >= 1");
  if (!(config.beta >= 0.0)) throw ValidationError("beta must be >= 0");
  if (!(config.gamma_adaptive > 0.0)) {
    throw ValidationError("adaptive gamma must be > 0");
  }
  if (config.warp_max_trials < 0) {
    throw ValidationError("warp max trials must be >= 0 (0 = |I|)");
  }
  if (!(config.lambda0 >= 0.0)) throw ValidationError("lambda0 must be >= 0");
  if (config.kind == SamplerKind::kKernel && !(config.lambda0 > 0.0)) {
    throw ValidationError("kernel sampler needs lambda0 > 0");
  }
  if (config.kind == SamplerKind::kTwoPass && config.two_pass_candidates != 0 &&
      config.two_pass_candidates <= config.m) {
    throw ValidationError("two-pass sampler needs M > m");
  }
  if (config.refresh_every < 0) {
    throw ValidationError("refresh interval must be >= 0");
  }
}

Index two_pass_candidate_count(const SamplerConfig& config, Index num_items) {
  if (config.two_pass_candidates > 0) return config.two_pass_candidates;
  const Index guess = static_cast<Index>(
      std::ceil(0.05 * static_cast<double>(num_items)));
  return std::min(num_items, std::max(guess, config.m + 1));
}

Index uniform_sample(Rng& rng, Index num_items) {
  if (num_items < 1) throw ValidationError("cannot sample from an empty catalog");
  return std::uniform_int_distribution<Index>(0, num_items - 1)(rng);
}

double uniform_probability(Index num_items) {
  return 1.0 / static_cast<double>(num_items);
}

PopularitySampler::PopularitySampler(PopularityTable table)
    : table_(std::move(table)) {
  cdf_.resize(table_.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table_.probs.size(); ++i) {
    acc += table_.probs[i];
    cdf_[i] = acc;
    if (table_.probs[i] > 0.0) {
      last_positive_ = static_cast<Index>(i);
      ++support_size_;
    }
  }
  if (support_size_ == 0) {
    throw ValidationError("popularity table has no positive mass");
  }
}

Index PopularitySampler::sample(Rng& rng) const {
  const double u = uniform01(rng) * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const Index item = static_cast<Index>(it - cdf_.begin());
  // Only reachable through rounding at the top of the CDF.
  return item > last_positive_ ? last_positive_ : item;
}

std::vector<std::vector<Index>> in_batch_negatives(
    std::span<const Positive> batch) {
  if (batch.size() < 2) {
    throw ValidationError("in-batch negatives need a batch of at least 2");
  }
  std::vector<std::vector<Index>> out(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out[k].reserve(batch.size() - 1);
    for (std::size_t o = 0; o < batch.size(); ++o) {
      if (o != k) out[k].push_back(batch[o].item);
    }
  }
  return out;
}

Index warp_rank_estimate(Index num_items, Index trials, bool literal_formula) {
  if (trials < 1) return 0;
  return literal_formula ? (trials - 1) / num_items : (num_items - 1) / trials;
}

WarpDraw warp_sample(Rng& rng, const FactorModel& model, Index context,
                     Index positive, const SamplerConfig& config,
                     std::span<const Index> observed) {
  const Index num_items = model.num_items();
  const Index max_trials =
      config.warp_max_trials > 0 ? config.warp_max_trials : num_items;
  const auto w = model.W.row(context);
  const double positive_score = score(model, context, positive);
  WarpDraw draw;
  while (draw.trials < max_trials) {
    ++draw.trials;
    const Index j = uniform_sample(rng, num_items);
    if (std::binary_search(observed.begin(), observed.end(), j)) continue;
    if (w.dot(model.H.row(j)) + config.warp_margin > positive_score) {
      draw.item = j;
      break;
    }
  }
  draw.rank_estimate = warp_rank_estimate(num_items, draw.trials,
                                          config.warp_literal_rank_formula);
  return draw;
}

double warp_penalty(Index rank_estimate) {
  if (rank_estimate < 0) {
    throw ValidationError("rank estimate must be >= 0");
  }
  if (rank_estimate == 0) return 1.0;
  double sum = 0.0;
  for (Index l = 1; l <= rank_estimate; ++l) sum += 1.0 / static_cast<double>(l);
  return sum;
}

AdaptiveState rebuild_adaptive_state(const FactorModel& model) {
  AdaptiveState state;
  const Index n = model.num_items();
  const Index d = model.dims();
  state.sorted_items.resize(d);
  state.sigma.resize(d);
  for (Index f = 0; f < d; ++f) {
    auto& order = state.sorted_items[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    const auto column = model.H.col(f);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      return column[a] > column[b] || (column[a] == column[b] && a < b);
    });
    if (n == 0) {
      state.sigma[f] = 0.0;
      continue;
    }
    const double mean = column.mean();
    double var = 0.0;
    for (Index i = 0; i < n; ++i) var += (column[i] - mean) * (column[i] - mean);
    state.sigma[f] = std::sqrt(var / static_cast<double>(n));
  }
  return state;
}

Index truncated_rank_sample(Rng& rng, Index n, double gamma) {
  if (n < 1) throw ValidationError("rank sampling needs n >= 1");
  const double u = uniform01(rng);
  double r;
  if (std::isinf(gamma)) {
    r = std::floor(u * static_cast<double>(n)) + 1.0;
  } else {
    // F(r) = (1 - rho^r) / (1 - rho^n), rho = exp(-1/gamma).
    const double tail_mass = -std::expm1(-static_cast<double>(n) / gamma);
    r = std::floor(-gamma * std::log1p(-u * tail_mass)) + 1.0;
  }
  return std::clamp(static_cast<Index>(r), Index{1}, n);
}

double truncated_rank_probability(Index r, Index n, double gamma) {
  if (r < 1 || r > n) return 0.0;
  if (std::isinf(gamma)) return 1.0 / static_cast<double>(n);
  const double step = -std::expm1(-1.0 / gamma);
  const double tail_mass = -std::expm1(-static_cast<double>(n) / gamma);
  return std::exp(-static_cast<double>(r - 1) / gamma) * step / tail_mass;
}

namespace {

std::vector<double> dimension_weights(const FactorModel& model, Index context,
                                      const AdaptiveState& state,
                                      double& total) {
  const Index d = model.dims();
  std::vector<double> weights(d);
  total = 0.0;
  for (Index f = 0; f < d; ++f) {
    weights[f] = std::abs(model.W(context, f)) * state.sigma[f];
    total += weights[f];
  }
  return weights;
}

}  // namespace

Index adaptive_rank_sample(Rng& rng, const FactorModel& model, Index context,
                           AdaptiveState& state, const SamplerConfig& config) {
  check_model_context(model, context);
  if (static_cast<Index>(state.sorted_items.size()) != model.dims()) {
    throw ValidationError("adaptive state does not match the model");
  }
  ++state.stale_counter;
  double total = 0.0;
  const auto weights = dimension_weights(model, context, state, total);
  const Index n = model.num_items();
  if (!(total > 0.0)) return uniform_sample(rng, n);
  const Index f = draw_weighted(rng, weights, total);
  const Index r = truncated_rank_sample(rng, n, config.gamma_adaptive);
  const auto& order = state.sorted_items[f];
  return model.W(context, f) > 0.0 ? order[r - 1] : order[n - r];
}

std::vector<double> adaptive_distribution(const FactorModel& model,
                                          Index context,
                                          const AdaptiveState& state,
                                          double gamma) {
  check_model_context(model, context);
  const Index n = model.num_items();
  std::vector<double> probs(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  const auto weights = dimension_weights(model, context, state, total);
  if (!(total > 0.0)) {
    std::fill(probs.begin(), probs.end(), uniform_probability(n));
    return probs;
  }
  for (Index f = 0; f < model.dims(); ++f) {
    if (weights[f] <= 0.0) continue;
    const double pf = weights[f] / total;
    const auto& order = state.sorted_items[f];
    const bool descending = model.W(context, f) > 0.0;
    for (Index r = 1; r <= n; ++r) {
      const Index item = descending ? order[r - 1] : order[n - r];
      probs[item] += pf * truncated_rank_probability(r, n, gamma);
    }
  }
  return probs;
}

Vector kernel_feature_map(const Eigen::Ref<const Vector>& x, double lambda0) {
  const Index d = x.size();
  Vector out(d * d + 1);
  out[0] = std::sqrt(lambda0);
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < d; ++b) out[1 + a * d + b] = x[a] * x[b];
  }
  return out;
}

KernelTree build_kernel_tree(const FactorModel& model, double lambda0) {
  if (!(lambda0 >= 0.0)) throw ValidationError("lambda0 must be >= 0");
  KernelTree tree;
  const Index n = model.num_items();
  if (n < 1) throw ValidationError("kernel tree needs at least one item");
  const Index d = model.dims();
  tree.feature_dims = d * d + 1;
  tree.lambda0 = lambda0;
  tree.num_items = n;
  tree.leaf_of_item.assign(n, -1);
  const Index max_nodes = 2 * n - 1;
  tree.node_sums = RowMatrix::Zero(max_nodes, tree.feature_dims);
  tree.left.reserve(max_nodes);
  tree.right.reserve(max_nodes);
  tree.begin.reserve(max_nodes);
  tree.end.reserve(max_nodes);

  // Nodes are allocated in pre-order; sums are filled bottom-up.
  struct Frame {
    Index node;
    bool expanded;
  };
  const auto allocate = [&](Index lo, Index hi) {
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.begin.push_back(lo);
    tree.end.push_back(hi);
    return static_cast<Index>(tree.left.size()) - 1;
  };
  std::vector<Frame> stack{{allocate(0, n), false}};
  while (!stack.empty()) {
    Frame frame = stack.back();
    stack.pop_back();
    const Index node = frame.node;
    const Index lo = tree.begin[node];
    const Index hi = tree.end[node];
    if (hi - lo == 1) {
      tree.node_sums.row(node) =
          kernel_feature_map(model.H.row(lo).transpose(), lambda0).transpose();
      tree.leaf_of_item[lo] = node;
      continue;
    }
    if (frame.expanded) {
      tree.node_sums.row(node) = tree.node_sums.row(tree.left[node]) +
                                 tree.node_sums.row(tree.right[node]);
      continue;
    }
    const Index mid = lo + (hi - lo) / 2;
    const Index l = allocate(lo, mid);
    const Index r = allocate(mid, hi);
    tree.left[node] = l;
    tree.right[node] = r;
    stack.push_back({node, true});
    stack.push_back({r, false});
    stack.push_back({l, false});
  }
  return tree;
}

Index kernel_sample(Rng& rng, const KernelTree& tree,
                    const Eigen::Ref<const Vector>& context_embedding) {
  const Vector phi = kernel_feature_map(context_embedding, tree.lambda0);
  if (phi.size() != tree.feature_dims) {
    throw ValidationError("context embedding does not match the kernel tree");
  }
  Index node = tree.root();
  while (!tree.is_leaf(node)) {
    const Index l = tree.left[node];
    const Index r = tree.right[node];
    double mass_l = std::max(0.0, tree.node_sums.row(l).dot(phi));
    double mass_r = std::max(0.0, tree.node_sums.row(r).dot(phi));
    if (!(mass_l + mass_r > 0.0)) {
      // No kernel mass: fall back to item counts, i.e. uniform over items.
      mass_l = static_cast<double>(tree.end[l] - tree.begin[l]);
      mass_r = static_cast<double>(tree.end[r] - tree.begin[r]);
    }
    node = uniform01(rng) * (mass_l + mass_r) < mass_l ? l : r;
  }
  return tree.begin[node];
}

Index kernel_sample(Rng& rng, const KernelTree& tree, const FactorModel& model,
                    Index context) {
  check_model_context(model, context);
  return kernel_sample(rng, tree, model.W.row(context).transpose());
}

double kernel_probability(const KernelTree& tree,
                          const Eigen::Ref<const Vector>& context_embedding,
                          Index item) {
  if (item < 0 || item >= tree.num_items) {
    throw IndexError("item id " + std::to_string(item) + " out of range");
  }
  const Vector phi = kernel_feature_map(context_embedding, tree.lambda0);
  const double total = std::max(0.0, tree.node_sums.row(tree.root()).dot(phi));
  if (!(total > 0.0)) return uniform_probability(tree.num_items);
  const double mass =
      std::max(0.0, tree.node_sums.row(tree.leaf_of_item[item]).dot(phi));
  return mass / total;
}

std::vector<double> kernel_distribution(const FactorModel& model, Index context,
                                        double lambda0) {
  const Vector scores = score_all(model, context);
  std::vector<double> probs(static_cast<std::size_t>(scores.size()));
  double total = 0.0;
  for (Index j = 0; j < scores.size(); ++j) {
    probs[j] = lambda0 + scores[j] * scores[j];
    total += probs[j];
  }
  if (!(total > 0.0)) {
    std::fill(probs.begin(), probs.end(), uniform_probability(scores.size()));
    return probs;
  }
  for (double& p : probs) p /= total;
  return probs;
}

std::vector<std::vector<SampledNegative>> two_pass_sample(
    Rng& rng, const FactorModel& model, std::span<const Index> contexts,
    const PopularitySampler& popularity, const SamplerConfig& config) {
  const Index num_items = model.num_items();
  if (popularity.num_items() != num_items) {
    throw ValidationError("popularity table does not match the model");
  }
  const Index big_m = two_pass_candidate_count(config, num_items);
  if (big_m > num_items) {
    throw ValidationError("two-pass first stage M=" + std::to_string(big_m) +
                          " exceeds |I|=" + std::to_string(num_items));
  }
  if (big_m > popularity.support_size()) {
    throw ValidationError("two-pass first stage M=" + std::to_string(big_m) +
                          " exceeds the number of items with positive mass");
  }
  if (config.m > big_m) {
    throw ValidationError("two-pass sampler needs m <= M");
  }

  std::vector<Index> candidates;
  candidates.reserve(big_m);
  if (big_m == popularity.support_size()) {
    for (Index j = 0; j < num_items; ++j) {
      if (popularity.probability(j) > 0.0) candidates.push_back(j);
    }
  } else {
    std::vector<char> taken(static_cast<std::size_t>(num_items), 0);
    while (static_cast<Index>(candidates.size()) < big_m) {
      const Index j = popularity.sample(rng);
      if (taken[j]) continue;
      taken[j] = 1;
      candidates.push_back(j);
    }
  }

  std::vector<std::vector<SampledNegative>> out;
  out.reserve(contexts.size());
  std::vector<std::pair<double, Index>> scored(candidates.size());
  for (Index c : contexts) {
    check_model_context(model, c);
    const auto w = model.W.row(c);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      scored[k] = {w.dot(model.H.row(candidates[k])), candidates[k]};
    }
    std::partial_sort(scored.begin(), scored.begin() + config.m, scored.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first ||
                               (a.first == b.first && a.second < b.second);
                      });
    std::vector<SampledNegative> kept;
    kept.reserve(config.m);
    for (Index k = 0; k < config.m; ++k) {
      kept.push_back({scored[k].second, popularity.probability(scored[k].second)});
    }
    out.push_back(std::move(kept));
  }
  return out;
}

SampledSoftmaxTerms sampled_softmax_terms(double positive_score,
                                          std::span<const double> negative_scores,
                                          std::span<const double> q, Index m) {
  if (m < 1) throw ValidationError("sampled softmax needs m >= 1");
  if (negative_scores.size() != q.size() ||
      static_cast<Index>(q.size()) != m) {
    throw ValidationError("sampled softmax expects m negatives with m q values");
  }
  std::vector<double> logits;
  logits.reserve(q.size() + 1);
  logits.push_back(positive_score);
  for (std::size_t l = 0; l < q.size(); ++l) {
    if (!(q[l] > 0.0)) {
      throw ValidationError("sampling probability q must be > 0, got " +
                            std::to_string(q[l]));
    }
    logits.push_back(negative_scores[l] -
                     std::log(static_cast<double>(m) * q[l]));
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  SampledSoftmaxTerms terms;
  terms.weights.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    terms.weights[k] = std::exp(logits[k] - top);
    sum += terms.weights[k];
  }
  for (double& w : terms.weights) w /= sum;
  terms.loss = top + std::log(sum) - positive_score;
  return terms;
}

double sampled_softmax_loss(double positive_score,
                            std::span<const double> negative_scores,
                            std::span<const double> q, Index m) {
  return sampled_softmax_terms(positive_score, negative_scores, q, m).loss;
}

}  // namespace imrec
