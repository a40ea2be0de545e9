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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imrec/dataset.h"
#include "imrec/losses.h"
#include "imrec/metrics.h"
#include "imrec/model.h"
#include "imrec/samplers.h"

namespace imrec {

enum class WeightingKind { kConstant, kLambdaRank, kWarpPenalty };

WeightingKind parse_weighting_kind(const std::string& name);
std::string weighting_kind_name(WeightingKind kind);

struct WeightingConfig {
  WeightingKind kind = WeightingKind::kConstant;
  // Metric and window used by lambda_rank weights.
  MetricKind metric = MetricKind::kNdcg;
  Index n = 10;
};

struct TrainConfig {
  double eta = 0.05;
  Index epochs = 10;
  std::uint64_t seed = 1;
  LossConfig loss;
  SamplerConfig sampler;
  WeightingConfig weighting;
  Index batch_size = 1;
  // Gradient weight of each sampled negative in pointwise SGD.
  double negative_weight = 1.0;
  // Resample negatives that are observed positives of the context.
  bool avoid_observed_negatives = true;
  // in_batch only: sum the gradients of a whole batch before applying them.
  bool fused_batch = false;
};

struct EpochStats {
  double loss_estimate = 0.0;
  Index steps = 0;
  Index skipped = 0;
};

// Gradient of one SGD step. Item rows are unique; the regularizer is
// applied once to every touched row.
struct StepGradient {
  double loss = 0.0;
  Vector context_grad;
  std::vector<std::pair<Index, Vector>> item_grads;
};

// weight * l(y_hat(c,i), label) + lambda (|w_c|^2 + |h_i|^2).
StepGradient pointwise_step(const FactorModel& model, Index context, Index item,
                            double label, double weight, LossKind kind,
                            double lambda);

// weight * l(y_hat(c,i) - y_hat(c,j), 1) + lambda (|w_c|^2 + |h_i|^2 + |h_j|^2).
StepGradient pairwise_step(const FactorModel& model, Index context,
                           Index positive, Index negative, double weight,
                           LossKind kind, double lambda);

// Corrected sampled softmax over nu-scaled scores plus the touched-row
// regularizer.
StepGradient sampled_softmax_step(const FactorModel& model, Index context,
                                  Index positive,
                                  std::span<const Index> negatives,
                                  std::span<const double> q, double lambda,
                                  double nu = 1.0);

// theta <- theta - eta * grad on the touched rows. Throws NumericError when
// the gradient is not finite.
void apply_step(FactorModel& model, Index context, const StepGradient& grad,
                double eta, Index step_index);

// Random state and sampler structures shared by the epochs of one run.
class SgdState {
 public:
  SgdState(const FactorModel& model, const Dataset& train,
           const TrainConfig& config);

  Rng& rng() { return rng_; }
  const PopularitySampler* popularity() const {
    return popularity_ ? &*popularity_ : nullptr;
  }
  AdaptiveState* adaptive() { return adaptive_ ? &*adaptive_ : nullptr; }
  const KernelTree* kernel() const { return kernel_ ? &*kernel_ : nullptr; }

  // Rebuilds the adaptive / kernel snapshots once `refresh_every` draws
  // have been made against them.
  void maybe_refresh(const FactorModel& model);
  void count_draw() { ++draws_since_refresh_; }

  Index refresh_every() const { return refresh_every_; }

 private:
  Rng rng_;
  SamplerConfig sampler_;
  std::optional<PopularitySampler> popularity_;
  std::optional<AdaptiveState> adaptive_;
  std::optional<KernelTree> kernel_;
  Index refresh_every_ = 1;
  Index draws_since_refresh_ = 0;
};

// Pointwise SGD: per shuffled positive, one positive step followed by m
// negative steps (uniform, popularity or in-batch negatives).
EpochStats sgd_pointwise_epoch(FactorModel& model, const Dataset& train,
                               const TrainConfig& config, SgdState& state);

// Pairwise SGD: BPR (constant weight), LambdaRank-style metric-difference
// weights, or WARP rank-penalty weights.
EpochStats sgd_pairwise_epoch(FactorModel& model, const Dataset& train,
                              const TrainConfig& config, SgdState& state);

// Sampled softmax SGD with uniform, popularity, kernel or two-pass
// negatives.
EpochStats sgd_sampled_softmax_epoch(FactorModel& model, const Dataset& train,
                                     const TrainConfig& config,
                                     SgdState& state);

}  // namespace imrec
