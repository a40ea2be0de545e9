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
#include <vector>

#include "imrec/dataset.h"
#include "imrec/linalg.h"
#include "imrec/losses.h"
#include "imrec/model.h"
#include "imrec/samplers.h"
#include "imrec/sgd.h"

namespace imrec {

// One transformed observation seen from a block: `partner` is the row of
// the opposite factor matrix.
struct BlockObservation {
  Index partner = 0;
  double alpha_tilde = 0.0;
  double y_tilde = 0.0;
};

std::vector<BlockObservation> context_block(
    const Dataset& dataset, std::span<const TransformedObservation> transformed,
    Index context);
std::vector<BlockObservation> item_block(
    const Dataset& dataset, std::span<const TransformedObservation> transformed,
    Index item);

// Normal equations of one block of the transformed objective:
// A = sum alpha~ p p^T + alpha0 G + lambda Id, b = sum alpha~ y~ p.
SquareMatrix block_matrix(const RowMatrix& partners,
                          std::span<const BlockObservation> obs, double alpha0,
                          double lambda, const SquareMatrix& gram_partner);
Vector block_rhs(const RowMatrix& partners,
                 std::span<const BlockObservation> obs);

// A^-1 b. Throws NumericError with a condition estimate when A is singular.
Vector solve_block(const RowMatrix& partners,
                   std::span<const BlockObservation> obs, double alpha0,
                   double lambda, const SquareMatrix& gram_partner);

// d/d(row) of the transformed objective, i.e. 2 (A row - b).
Vector block_gradient(const Eigen::Ref<const Vector>& row,
                      const RowMatrix& partners,
                      std::span<const BlockObservation> obs, double alpha0,
                      double lambda, const SquareMatrix& gram_partner);

struct IalsOptions {
  int threads = 1;
};

// Solves every context block against the current items, or every item block
// against the current contexts.
void ials_context_pass(FactorModel& model, const Dataset& train,
                       std::span<const TransformedObservation> transformed,
                       const LossConfig& config,
                       const IalsOptions& options = {});
void ials_item_pass(FactorModel& model, const Dataset& train,
                    std::span<const TransformedObservation> transformed,
                    const LossConfig& config, const IalsOptions& options = {});

// One context pass then one item pass. Returns the exact transformed loss.
double ials_epoch(FactorModel& model, const Dataset& train,
                  const LossConfig& config,
                  std::span<const double> weights = {},
                  const IalsOptions& options = {});

// ---------------------------------------------------------------------------
// SGD with Gramian estimates.

struct GramianEstimate {
  SquareMatrix est_context;
  SquareMatrix est_item;
};

enum class GramianSide { kContext, kItem };

GramianEstimate exact_gramian_estimate(const FactorModel& model);
GramianEstimate zero_gramian_estimate(Index dims);

// G <- (1 - eta/fan) G + (eta/fan) population x x^T.
void gramian_estimate_update(GramianEstimate& est, GramianSide side,
                             const Eigen::Ref<const Vector>& embedding,
                             Index fan_out, Index population, double eta);

struct SgdGramianConfig {
  double eta = 0.01;
  double gramian_eta = 0.1;
  LossConfig loss;
  bool update_model = true;
  bool update_estimates = true;
  // Uses alpha0/|I_c| instead of 2 alpha0/|I_c| on the Gramian term.
  bool literal_gradient = false;
  // Iterations per epoch; 0 means |S|.
  Index steps = 0;
};

struct GramianStepGradient {
  Vector context_grad;
  Vector item_grad;
};

// Per-example gradient with the estimates held constant. Averaged over
// uniform draws from S it equals the full gradient of the transformed
// objective divided by |S|.
GramianStepGradient sgd_gramian_step_gradient(
    const FactorModel& model, const TransformedObservation& obs,
    Index context_degree, Index item_degree, const GramianEstimate& est,
    const SgdGramianConfig& config);

// Returns the exact transformed loss after the epoch in loss_estimate.
EpochStats sgd_gramian_epoch(FactorModel& model, const Dataset& train,
                             std::span<const TransformedObservation> transformed,
                             const SgdGramianConfig& config,
                             GramianEstimate& est, Rng& rng);

// ---------------------------------------------------------------------------
// Pairwise square loss by alternating exact block solves.

// Context blocks are independent given H; item blocks are coupled through
// the item sum and are solved in id order, each against the latest values.
// Returns pairwise_square_loss_fast after the epoch.
double ials_pairwise_epoch(FactorModel& model, const Dataset& train,
                           const LossConfig& config,
                           const IalsOptions& options = {});

}  // namespace imrec
