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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "imrec/dataset.h"
#include "imrec/model.h"

namespace imrec {

using Rng = std::mt19937_64;

enum class SamplerKind {
  kUniform,
  kPopularity,
  kInBatch,
  kWarp,
  kAdaptive,
  kKernel,
  kTwoPass,
};

SamplerKind parse_sampler_kind(const std::string& name);
std::string sampler_kind_name(SamplerKind kind);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kUniform;
  // Negatives per positive.
  Index m = 1;
  // Popularity squashing exponent.
  double beta = 1.0;
  // Rank temperature of the adaptive sampler, p(r) ~ exp(-r / gamma).
  double gamma_adaptive = 10.0;
  // 0 means |I|.
  Index warp_max_trials = 0;
  double warp_margin = 1.0;
  // Use floor((trials - 1) / |I|) as the rank estimate instead of
  // floor((|I| - 1) / trials).
  bool warp_literal_rank_formula = false;
  // First-stage size of the two-pass sampler; 0 means
  // clamp(ceil(0.05 |I|), m + 1, |I|).
  Index two_pass_candidates = 0;
  // Additive constant of the quadratic kernel.
  double lambda0 = 1.0;
  // Draws between rebuilds of AdaptiveState / KernelTree; 0 means |S|.
  Index refresh_every = 0;
};

void validate_sampler_config(const SamplerConfig& config);
Index two_pass_candidate_count(const SamplerConfig& config, Index num_items);

// ---------------------------------------------------------------------------
// Uniform and popularity.

Index uniform_sample(Rng& rng, Index num_items);
double uniform_probability(Index num_items);

// Inverse-CDF sampler over a PopularityTable; zero-mass items are never
// drawn.
class PopularitySampler {
 public:
  explicit PopularitySampler(PopularityTable table);

  Index sample(Rng& rng) const;
  double probability(Index item) const { return table_.probs[item]; }
  Index num_items() const { return static_cast<Index>(table_.probs.size()); }
  Index support_size() const { return support_size_; }
  const PopularityTable& table() const { return table_; }

 private:
  PopularityTable table_;
  std::vector<double> cdf_;
  Index last_positive_ = 0;
  Index support_size_ = 0;
};

// ---------------------------------------------------------------------------
// In-batch negatives.

struct Positive {
  Index context = 0;
  Index item = 0;
};

// For example k, the items of every other example in the batch.
std::vector<std::vector<Index>> in_batch_negatives(
    std::span<const Positive> batch);

// ---------------------------------------------------------------------------
// WARP rejection sampling.

struct WarpDraw {
  std::optional<Index> item;
  Index trials = 0;
  Index rank_estimate = 0;
};

Index warp_rank_estimate(Index num_items, Index trials, bool literal_formula);

// Draws uniform candidates until y(c,j) + margin > y(c,i). Candidates listed
// in `observed` (sorted item ids, typically I_c) are counted as trials but
// never accepted.
WarpDraw warp_sample(Rng& rng, const FactorModel& model, Index context,
                     Index positive, const SamplerConfig& config,
                     std::span<const Index> observed = {});

// Harmonic penalty sum_{l=1..k} 1/l, with penalty(0) = 1.
double warp_penalty(Index rank_estimate);

// ---------------------------------------------------------------------------
// Adaptive rank-based sampling for dot-product models.

struct AdaptiveState {
  // sorted_items[f]: item ids by H(., f) descending, ties by ascending id.
  std::vector<std::vector<Index>> sorted_items;
  // Population standard deviation of each column of H.
  std::vector<double> sigma;
  Index stale_counter = 0;
};

AdaptiveState rebuild_adaptive_state(const FactorModel& model);

// Rank r in {1..n} with p(r) ~ exp(-r / gamma), by closed-form inverse CDF.
// gamma = +inf gives the uniform law.
Index truncated_rank_sample(Rng& rng, Index n, double gamma);
double truncated_rank_probability(Index r, Index n, double gamma);

// Picks dimension f with probability ~ |w_{c,f}| sigma_f, then the r-th
// largest item of that dimension (r-th smallest when w_{c,f} < 0). Falls
// back to a uniform draw when every dimension weight is zero.
Index adaptive_rank_sample(Rng& rng, const FactorModel& model, Index context,
                           AdaptiveState& state, const SamplerConfig& config);

// Exact item distribution induced by adaptive_rank_sample.
std::vector<double> adaptive_distribution(const FactorModel& model,
                                          Index context,
                                          const AdaptiveState& state,
                                          double gamma);

// ---------------------------------------------------------------------------
// Kernel-based sampling, q(j|c) ~ lambda0 + y(c,j)^2.

// pi(x) = (sqrt(lambda0), vec(x x^T)), so <pi(u), pi(v)> = lambda0 + <u,v>^2.
Vector kernel_feature_map(const Eigen::Ref<const Vector>& x, double lambda0);

// Balanced binary tree over items; each node stores the sum of pi(h_j) over
// the items of its subtree.
struct KernelTree {
  Index feature_dims = 0;  // d^2 + 1
  double lambda0 = 1.0;
  Index num_items = 0;
  RowMatrix node_sums;
  std::vector<Index> left;   // -1 for leaves
  std::vector<Index> right;  // -1 for leaves
  std::vector<Index> begin;  // item range [begin, end) per node
  std::vector<Index> end;
  std::vector<Index> leaf_of_item;

  Index root() const { return 0; }
  bool is_leaf(Index node) const { return left[node] < 0; }
};

KernelTree build_kernel_tree(const FactorModel& model, double lambda0);

Index kernel_sample(Rng& rng, const KernelTree& tree,
                    const Eigen::Ref<const Vector>& context_embedding);
Index kernel_sample(Rng& rng, const KernelTree& tree, const FactorModel& model,
                    Index context);

// q(j|c) under the tree's snapshot of H, in O(D).
double kernel_probability(const KernelTree& tree,
                          const Eigen::Ref<const Vector>& context_embedding,
                          Index item);

// (lambda0 + y(c,j)^2) / sum_k (lambda0 + y(c,k)^2) by direct enumeration.
std::vector<double> kernel_distribution(const FactorModel& model, Index context,
                                        double lambda0);

// ---------------------------------------------------------------------------
// Two-pass sampler.

struct SampledNegative {
  Index item = 0;
  double q = 0.0;
};

// Draws M distinct items by popularity, then keeps the m best scoring of
// them per context (ties by id). q is the first-stage popularity
// probability of the kept item.
std::vector<std::vector<SampledNegative>> two_pass_sample(
    Rng& rng, const FactorModel& model, std::span<const Index> contexts,
    const PopularitySampler& popularity, const SamplerConfig& config);

// ---------------------------------------------------------------------------
// Sampled softmax with the log(m q) correction.

struct SampledSoftmaxTerms {
  double loss = 0.0;
  // Softmax weights over {positive, negatives...} of the corrected logits;
  // dloss/dy_i = weights[0] - 1 and dloss/dy_{j_l} = weights[l + 1].
  std::vector<double> weights;
};

SampledSoftmaxTerms sampled_softmax_terms(double positive_score,
                                          std::span<const double> negative_scores,
                                          std::span<const double> q, Index m);

double sampled_softmax_loss(double positive_score,
                            std::span<const double> negative_scores,
                            std::span<const double> q, Index m);

}  // namespace imrec
