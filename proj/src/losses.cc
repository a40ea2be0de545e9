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

#include "imrec/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imrec {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_weights(const Dataset& dataset, std::span<const double> weights) {
  if (!weights.empty() && static_cast<Index>(weights.size()) != dataset.size()) {
    throw ValidationError("weights must align with the dataset interactions");
  }
}

void check_shapes(const FactorModel& model, const Dataset& dataset) {
  if (model.num_contexts() != dataset.num_contexts() ||
      model.num_items() != dataset.num_items()) {
    throw ValidationError("model is " + std::to_string(model.num_contexts()) +
                          "x" + std::to_string(model.num_items()) +
                          " but dataset is " +
                          std::to_string(dataset.num_contexts()) + "x" +
                          std::to_string(dataset.num_items()));
  }
}

double weight_of(const Dataset& dataset, std::span<const double> weights,
                 Index k) {
  return weights.empty() ? dataset.interactions()[k].weight : weights[k];
}

// Visits every (c, i) of C x I in context-major order with its weight and
// label under the pointwise formulation.
template <typename Visit>
void for_each_pointwise_pair(const FactorModel& model, const Dataset& dataset,
                             const LossConfig& config,
                             std::span<const double> weights, Visit&& visit) {
  const double neg_label = negative_label(config.kind);
  std::vector<double> alpha(static_cast<std::size_t>(dataset.num_items()));
  std::vector<double> label(alpha.size());
  for (Index c = 0; c < dataset.num_contexts(); ++c) {
    std::fill(alpha.begin(), alpha.end(), config.alpha0);
    std::fill(label.begin(), label.end(), neg_label);
    const Index offset = dataset.context_offset(c);
    const auto row = dataset.items_of(c);
    for (std::size_t k = 0; k < row.size(); ++k) {
      alpha[row[k].item_id] =
          weight_of(dataset, weights, offset + static_cast<Index>(k));
      label[row[k].item_id] = row[k].label;
    }
    const Vector scores = score_all(model, c);
    for (Index i = 0; i < dataset.num_items(); ++i) {
      visit(c, i, scores[i], alpha[i], label[i]);
    }
  }
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "square") return LossKind::kSquare;
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "hinge") return LossKind::kHinge;
  throw ValidationError("unknown loss '" + name +
                        "' (expected square, logistic or hinge)");
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kSquare: return "square";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kHinge: return "hinge";
  }
  return "unknown";
}

double elementwise_loss(LossKind kind, double prediction, double label) {
  switch (kind) {
    case LossKind::kSquare: {
      const double r = prediction - label;
      return r * r;
    }
    case LossKind::kLogistic:
      return softplus(-label * prediction);
    case LossKind::kHinge:
      return std::max(0.0, 1.0 - label * prediction);
  }
  throw ValidationError("unknown loss kind");
}

double elementwise_loss_derivative(LossKind kind, double prediction,
                                   double label) {
  switch (kind) {
    case LossKind::kSquare:
      return 2.0 * (prediction - label);
    case LossKind::kLogistic:
      return -label * sigmoid(-label * prediction);
    case LossKind::kHinge:
      return 1.0 - label * prediction > 0.0 ? -label : 0.0;
  }
  throw ValidationError("unknown loss kind");
}

double negative_label(LossKind kind) {
  return kind == LossKind::kSquare ? 0.0 : -1.0;
}

double l2_penalty(const FactorModel& model, double lambda) {
  if (lambda == 0.0) return 0.0;
  return lambda * (model.W.squaredNorm() + model.H.squaredNorm());
}

double pointwise_loss_naive(const FactorModel& model, const Dataset& dataset,
                            const LossConfig& config,
                            std::span<const double> weights) {
  check_shapes(model, dataset);
  check_weights(dataset, weights);
  double total = 0.0;
  for_each_pointwise_pair(
      model, dataset, config, weights,
      [&](Index, Index, double y_hat, double alpha, double y) {
        if (alpha != 0.0) total += alpha * elementwise_loss(config.kind, y_hat, y);
      });
  return total + l2_penalty(model, config.lambda);
}

ModelGradient pointwise_loss_naive_gradient(const FactorModel& model,
                                            const Dataset& dataset,
                                            const LossConfig& config,
                                            std::span<const double> weights) {
  check_shapes(model, dataset);
  check_weights(dataset, weights);
  ModelGradient grad{2.0 * config.lambda * model.W,
                     2.0 * config.lambda * model.H};
  for_each_pointwise_pair(
      model, dataset, config, weights,
      [&](Index c, Index i, double y_hat, double alpha, double y) {
        const double g =
            alpha * elementwise_loss_derivative(config.kind, y_hat, y);
        if (g == 0.0) return;
        grad.W.row(c) += g * model.H.row(i);
        grad.H.row(i) += g * model.W.row(c);
      });
  return grad;
}

double pairwise_loss_naive(const FactorModel& model, const Dataset& dataset,
                           const LossConfig& config,
                           const PairwiseOptions& options) {
  check_shapes(model, dataset);
  double total = 0.0;
  for (Index c = 0; c < dataset.num_contexts(); ++c) {
    const auto row = dataset.items_of(c);
    if (row.empty()) continue;
    const Vector scores = score_all(model, c);
    for (const auto& pos : row) {
      for (Index j = 0; j < dataset.num_items(); ++j) {
        if (options.exclude_observed && dataset.contains(c, j)) continue;
        const double alpha =
            options.weight ? options.weight(c, pos.item_id, j) : 1.0;
        if (alpha == 0.0) continue;
        total += alpha * elementwise_loss(config.kind,
                                          scores[pos.item_id] - scores[j], 1.0);
      }
    }
  }
  return total + l2_penalty(model, config.lambda);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double softmax_loss_naive(const FactorModel& model, const Dataset& dataset,
                          const LossConfig& config) {
  check_shapes(model, dataset);
  if (!(config.nu > 0.0)) {
    throw ValidationError("softmax temperature nu must be > 0");
  }
  double total = 0.0;
  std::vector<double> logits(static_cast<std::size_t>(dataset.num_items()));
  for (Index c = 0; c < dataset.num_contexts(); ++c) {
    const auto row = dataset.items_of(c);
    if (row.empty()) continue;
    const Vector scores = score_all(model, c);
    for (Index j = 0; j < dataset.num_items(); ++j) {
      logits[j] = config.nu * scores[j];
    }
    const double log_partition = log_sum_exp(logits);
    for (const auto& pos : row) {
      total -= logits[pos.item_id] - log_partition;
    }
  }
  return total + l2_penalty(model, config.lambda);
}

std::vector<TransformedObservation> transform_observations(
    const Dataset& dataset, const LossConfig& config,
    std::span<const double> weights) {
  check_weights(dataset, weights);
  std::vector<TransformedObservation> out;
  out.reserve(static_cast<std::size_t>(dataset.size()));
  const auto rows = dataset.interactions();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double alpha = weight_of(dataset, weights, static_cast<Index>(k));
    if (!(alpha > config.alpha0)) {
      throw ValidationError(
          "positive (" + std::to_string(rows[k].context_id) + ", " +
          std::to_string(rows[k].item_id) + ") has weight " +
          std::to_string(alpha) + " <= alpha0 " + std::to_string(config.alpha0));
    }
    const double alpha_tilde = alpha - config.alpha0;
    out.push_back({rows[k].context_id, rows[k].item_id, alpha_tilde,
                   rows[k].label * alpha / alpha_tilde});
  }
  return out;
}

GramianPair compute_gramians(const FactorModel& model, const Dataset& dataset,
                             bool weighted) {
  check_shapes(model, dataset);
  GramianPair grams;
  std::vector<double> scales;
  if (weighted) {
    scales.resize(static_cast<std::size_t>(dataset.num_contexts()));
    for (Index c = 0; c < dataset.num_contexts(); ++c) {
      scales[c] = static_cast<double>(dataset.context_degree(c));
    }
  }
  grams.gram_context = gram_of_rows(model.W, scales);
  grams.gram_item = gram_of_rows(model.H);
  grams.item_sum = Vector::Zero(model.dims());
  for (Index i = 0; i < model.num_items(); ++i) {
    grams.item_sum += model.H.row(i).transpose();
  }
  grams.context_weighted = weighted;
  return grams;
}

double pointwise_square_loss_fast(
    const FactorModel& model,
    std::span<const TransformedObservation> transformed,
    const LossConfig& config, const GramianPair& grams) {
  if (config.kind != LossKind::kSquare) {
    throw ValidationError("the Gramian loss form requires square loss, got " +
                          loss_kind_name(config.kind));
  }
  if (grams.context_weighted) {
    throw ValidationError("pointwise Gramian loss needs unweighted Gramians");
  }
  double total = 0.0;
  for (const auto& obs : transformed) {
    const double r = score(model, obs.context_id, obs.item_id) - obs.y_tilde;
    total += obs.alpha_tilde * r * r;
  }
  total += config.alpha0 * frobenius_dot(grams.gram_context, grams.gram_item);
  return total + l2_penalty(model, config.lambda);
}

double pairwise_square_loss_fast(const FactorModel& model,
                                 const Dataset& dataset,
                                 const GramianPair& grams, double lambda) {
  check_shapes(model, dataset);
  if (!grams.context_weighted) {
    throw ValidationError(
        "pairwise square loss needs the |I_c|-weighted context Gramian");
  }
  const double num_items = static_cast<double>(dataset.num_items());
  double positive_part = 0.0;
  double correction = 0.0;
  for (Index c = 0; c < dataset.num_contexts(); ++c) {
    const auto row = dataset.items_of(c);
    if (row.empty()) continue;
    const double context_dot_z = model.W.row(c).dot(grams.item_sum);
    for (const auto& pos : row) {
      const double r = score(model, c, pos.item_id) - 1.0;
      positive_part += r * r;
      correction += r * context_dot_z;
    }
  }
  return num_items * positive_part +
         frobenius_dot(grams.gram_context, grams.gram_item) -
         2.0 * correction + l2_penalty(model, lambda);
}

}  // namespace imrec
