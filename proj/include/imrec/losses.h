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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "imrec/dataset.h"
#include "imrec/model.h"

namespace imrec {

enum class LossKind { kSquare, kLogistic, kHinge };

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::kSquare;
  // Weight of every unobserved (c,i) pair.
  double alpha0 = 0.0;
  // L2 strength: lambda * (|W|^2 + |H|^2).
  double lambda = 0.0;
  // Softmax inverse temperature.
  double nu = 1.0;
};

// l(y_hat, y) and dl/dy_hat. Hinge uses the subgradient 0 at the kink.
double elementwise_loss(LossKind kind, double prediction, double label);
double elementwise_loss_derivative(LossKind kind, double prediction,
                                   double label);

// Label assigned to unobserved pairs: 0 for square loss, -1 otherwise.
double negative_label(LossKind kind);

// lambda * (|W|_F^2 + |H|_F^2).
double l2_penalty(const FactorModel& model, double lambda);

// Full enumeration over C x I. `weights` overrides the positive weights
// alpha(c,i) (aligned with dataset.interactions()); empty means use
// Interaction::weight.
double pointwise_loss_naive(const FactorModel& model, const Dataset& dataset,
                            const LossConfig& config,
                            std::span<const double> weights = {});

struct ModelGradient {
  RowMatrix W;
  RowMatrix H;
};

// Analytic gradient of pointwise_loss_naive, by the same full enumeration.
ModelGradient pointwise_loss_naive_gradient(
    const FactorModel& model, const Dataset& dataset, const LossConfig& config,
    std::span<const double> weights = {});

// alpha(c, i, j) for a positive (c,i) and any item j.
using PairWeight = std::function<double(Index, Index, Index)>;

struct PairwiseOptions {
  // Skip j with (c,j) in S, the textual reading of the pairwise loss. Off by
  // default so that the sum runs over all of I.
  bool exclude_observed = false;
  // Unset means alpha == 1.
  PairWeight weight;
};

double pairwise_loss_naive(const FactorModel& model, const Dataset& dataset,
                           const LossConfig& config,
                           const PairwiseOptions& options = {});

// -sum_S [nu y(c,i) - log sum_j exp(nu y(c,j))] + lambda |theta|^2.
double softmax_loss_naive(const FactorModel& model, const Dataset& dataset,
                          const LossConfig& config);

// Max-shifted log(sum exp(values)).
double log_sum_exp(std::span<const double> values);

struct TransformedObservation {
  Index context_id = 0;
  Index item_id = 0;
  double alpha_tilde = 0.0;
  double y_tilde = 0.0;
};

// Rewrites each positive as (alpha - alpha0, y alpha / (alpha - alpha0)) so
// that negatives enter only through alpha0 and the Gramians. Output is
// aligned with dataset.interactions().
std::vector<TransformedObservation> transform_observations(
    const Dataset& dataset, const LossConfig& config,
    std::span<const double> weights = {});

struct GramianPair {
  SquareMatrix gram_context;
  SquareMatrix gram_item;
  Vector item_sum;
  // gram_context rows weighted by |I_c| (pairwise square loss variant).
  bool context_weighted = false;
};

GramianPair compute_gramians(const FactorModel& model, const Dataset& dataset,
                             bool weighted = false);

// sum alpha~ (y_hat - y~)^2 + alpha0 <G^C, G^I> + lambda |theta|^2.
double pointwise_square_loss_fast(
    const FactorModel& model,
    std::span<const TransformedObservation> transformed,
    const LossConfig& config, const GramianPair& grams);

// Pairwise square loss with alpha == 1 via the weighted Gramian and the item
// sum z: sum_S |I|(y_hat - 1)^2 + <G^C_w, G^I> - 2 sum_S (y_hat - 1)<w_c, z>,
// plus lambda |theta|^2.
double pairwise_square_loss_fast(const FactorModel& model,
                                 const Dataset& dataset,
                                 const GramianPair& grams, double lambda = 0.0);

}  // namespace imrec
