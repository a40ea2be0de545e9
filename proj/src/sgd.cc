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

#include "imrec/sgd.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace imrec {

namespace {

constexpr int kMaxNegativeAttempts = 32;

void add_item_grad(StepGradient& grad, Index item, const Vector& g) {
  for (auto& [id, acc] : grad.item_grads) {
    if (id == item) {
      acc += g;
      return;
    }
  }
  grad.item_grads.emplace_back(item, g);
}

void add_touched_regularizer(const FactorModel& model, Index context,
                             double lambda, StepGradient& grad) {
  if (lambda == 0.0) return;
  grad.loss += lambda * model.W.row(context).squaredNorm();
  grad.context_grad += 2.0 * lambda * model.W.row(context).transpose();
  for (auto& [item, g] : grad.item_grads) {
    grad.loss += lambda * model.H.row(item).squaredNorm();
    g += 2.0 * lambda * model.H.row(item).transpose();
  }
}

std::vector<Index> shuffled_positions(Index n, Rng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void check_train_shape(const FactorModel& model, const Dataset& train) {
  if (model.num_contexts() != train.num_contexts() ||
      model.num_items() != train.num_items()) {
    throw ValidationError("model shape does not match the training data");
  }
  if (train.empty()) throw ValidationError("training data is empty");
}

void check_common(const TrainConfig& config) {
  if (!(config.eta >= 0.0) || !std::isfinite(config.eta)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  if (config.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (config.batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (config.loss.lambda < 0.0) throw ValidationError("lambda must be >= 0");
  validate_sampler_config(config.sampler);
}

// One negative for context c from a context-independent or adaptive
// sampler, avoiding observed positives when configured.
std::optional<Index> draw_negative(const FactorModel& model,
                                   const Dataset& train,
                                   const TrainConfig& config, SgdState& state,
                                   Index context) {
  for (int attempt = 0; attempt < kMaxNegativeAttempts; ++attempt) {
    Index j = 0;
    switch (config.sampler.kind) {
      case SamplerKind::kUniform:
        j = uniform_sample(state.rng(), model.num_items());
        break;
      case SamplerKind::kPopularity:
        j = state.popularity()->sample(state.rng());
        break;
      case SamplerKind::kAdaptive:
        j = adaptive_rank_sample(state.rng(), model, context, *state.adaptive(),
                                 config.sampler);
        state.count_draw();
        break;
      default:
        throw ValidationError("sampler " +
                              sampler_kind_name(config.sampler.kind) +
                              " cannot draw single negatives here");
    }
    if (!config.avoid_observed_negatives || !train.contains(context, j)) {
      return j;
    }
  }
  return std::nullopt;
}

}  // namespace

WeightingKind parse_weighting_kind(const std::string& name) {
  if (name == "constant") return WeightingKind::kConstant;
  if (name == "lambda_rank" || name == "lambda-rank") {
    return WeightingKind::kLambdaRank;
  }
  if (name == "warp_penalty" || name == "warp-penalty" || name == "warp") {
    return WeightingKind::kWarpPenalty;
  }
  throw ValidationError("unknown weighting '" + name + "'");
}

std::string weighting_kind_name(WeightingKind kind) {
  switch (kind) {
    case WeightingKind::kConstant: return "constant";
    case WeightingKind::kLambdaRank: return "lambda_rank";
    case WeightingKind::kWarpPenalty: return "warp_penalty";
  }
  return "unknown";
}

StepGradient pointwise_step(const FactorModel& model, Index context, Index item,
                            double label, double weight, LossKind kind,
                            double lambda) {
  const double y_hat = score(model, context, item);
  const double g = weight * elementwise_loss_derivative(kind, y_hat, label);
  StepGradient grad;
  grad.loss = weight * elementwise_loss(kind, y_hat, label);
  grad.context_grad = g * model.H.row(item).transpose();
  add_item_grad(grad, item, g * model.W.row(context).transpose());
  add_touched_regularizer(model, context, lambda, grad);
  return grad;
}

StepGradient pairwise_step(const FactorModel& model, Index context,
                           Index positive, Index negative, double weight,
                           LossKind kind, double lambda) {
  const double diff =
      score(model, context, positive) - score(model, context, negative);
  const double g = weight * elementwise_loss_derivative(kind, diff, 1.0);
  StepGradient grad;
  grad.loss = weight * elementwise_loss(kind, diff, 1.0);
  grad.context_grad =
      g * (model.H.row(positive) - model.H.row(negative)).transpose();
  const Vector w = model.W.row(context).transpose();
  add_item_grad(grad, positive, g * w);
  add_item_grad(grad, negative, -g * w);
  add_touched_regularizer(model, context, lambda, grad);
  return grad;
}

StepGradient sampled_softmax_step(const FactorModel& model, Index context,
                                  Index positive,
                                  std::span<const Index> negatives,
                                  std::span<const double> q, double lambda,
                                  double nu) {
  std::vector<double> negative_scores(negatives.size());
  for (std::size_t l = 0; l < negatives.size(); ++l) {
    negative_scores[l] = nu * score(model, context, negatives[l]);
  }
  const auto terms =
      sampled_softmax_terms(nu * score(model, context, positive),
                            negative_scores, q,
                            static_cast<Index>(negatives.size()));
  StepGradient grad;
  grad.loss = terms.loss;
  const Vector w = model.W.row(context).transpose();
  const double g_pos = nu * (terms.weights[0] - 1.0);
  grad.context_grad = g_pos * model.H.row(positive).transpose();
  add_item_grad(grad, positive, g_pos * w);
  for (std::size_t l = 0; l < negatives.size(); ++l) {
    const double g = nu * terms.weights[l + 1];
    grad.context_grad += g * model.H.row(negatives[l]).transpose();
    add_item_grad(grad, negatives[l], g * w);
  }
  add_touched_regularizer(model, context, lambda, grad);
  return grad;
}

void apply_step(FactorModel& model, Index context, const StepGradient& grad,
                double eta, Index step_index) {
  bool finite = grad.context_grad.allFinite() && std::isfinite(grad.loss);
  for (const auto& [item, g] : grad.item_grads) finite = finite && g.allFinite();
  if (!finite) {
    std::ostringstream msg;
    msg << "non-finite gradient at step " << step_index << " (context "
        << context << ", items";
    for (const auto& [item, g] : grad.item_grads) {
      msg << " " << item << " score=" << score(model, context, item);
    }
    msg << ", step loss " << grad.loss << ")";
    throw NumericError(msg.str());
  }
  if (eta == 0.0) return;
  model.W.row(context) -= eta * grad.context_grad.transpose();
  for (const auto& [item, g] : grad.item_grads) {
    model.H.row(item) -= eta * g.transpose();
  }
}

SgdState::SgdState(const FactorModel& model, const Dataset& train,
                   const TrainConfig& config)
    : rng_(config.seed), sampler_(config.sampler) {
  validate_sampler_config(sampler_);
  refresh_every_ =
      sampler_.refresh_every > 0 ? sampler_.refresh_every
                                 : std::max<Index>(1, train.size());
  if (sampler_.kind == SamplerKind::kPopularity ||
      sampler_.kind == SamplerKind::kTwoPass) {
    popularity_.emplace(popularity_distribution(train, sampler_.beta));
  }
  if (sampler_.kind == SamplerKind::kAdaptive) {
    adaptive_ = rebuild_adaptive_state(model);
  }
  if (sampler_.kind == SamplerKind::kKernel) {
    kernel_ = build_kernel_tree(model, sampler_.lambda0);
  }
}

void SgdState::maybe_refresh(const FactorModel& model) {
  if (draws_since_refresh_ < refresh_every_) return;
  draws_since_refresh_ = 0;
  if (adaptive_) adaptive_ = rebuild_adaptive_state(model);
  if (kernel_) kernel_ = build_kernel_tree(model, sampler_.lambda0);
}

EpochStats sgd_pointwise_epoch(FactorModel& model, const Dataset& train,
                               const TrainConfig& config, SgdState& state) {
  check_common(config);
  check_train_shape(model, train);
  const SamplerKind kind = config.sampler.kind;
  if (kind != SamplerKind::kUniform && kind != SamplerKind::kPopularity &&
      kind != SamplerKind::kInBatch) {
    throw ValidationError("pointwise SGD supports uniform, popularity and "
                          "in_batch samplers, got " + sampler_kind_name(kind));
  }
  const LossKind loss = config.loss.kind;
  const double lambda = config.loss.lambda;
  const double neg_label = negative_label(loss);
  const auto rows = train.interactions();
  const auto order = shuffled_positions(train.size(), state.rng());

  EpochStats stats;
  double loss_sum = 0.0;
  Index step = 0;

  if (kind != SamplerKind::kInBatch) {
    for (Index k : order) {
      const Interaction& x = rows[k];
      auto grad = pointwise_step(model, x.context_id, x.item_id, x.label,
                                 x.weight, loss, lambda);
      loss_sum += grad.loss;
      apply_step(model, x.context_id, grad, config.eta, step++);
      for (Index l = 0; l < config.sampler.m; ++l) {
        const auto j = draw_negative(model, train, config, state, x.context_id);
        if (!j) {
          ++stats.skipped;
          continue;
        }
        grad = pointwise_step(model, x.context_id, *j, neg_label,
                              config.negative_weight, loss, lambda);
        loss_sum += grad.loss;
        apply_step(model, x.context_id, grad, config.eta, step++);
      }
    }
    stats.steps = step;
    stats.loss_estimate = loss_sum / static_cast<double>(train.size());
    return stats;
  }

  if (config.batch_size < 2) {
    throw ValidationError("in_batch sampling needs batch size >= 2");
  }
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(
        order.size(), start + static_cast<std::size_t>(config.batch_size));
    if (end - start < 2) {
      // A trailing singleton has no in-batch negatives; positive step only.
      const Interaction& x = rows[order[start]];
      auto grad = pointwise_step(model, x.context_id, x.item_id, x.label,
                                 x.weight, loss, lambda);
      loss_sum += grad.loss;
      apply_step(model, x.context_id, grad, config.eta, step++);
      continue;
    }
    std::vector<Positive> batch;
    for (std::size_t b = start; b < end; ++b) {
      batch.push_back({rows[order[b]].context_id, rows[order[b]].item_id});
    }
    const auto negatives = in_batch_negatives(batch);

    if (!config.fused_batch) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Interaction& x = rows[order[start + b]];
        auto grad = pointwise_step(model, x.context_id, x.item_id, x.label,
                                   x.weight, loss, lambda);
        loss_sum += grad.loss;
        apply_step(model, x.context_id, grad, config.eta, step++);
        for (Index j : negatives[b]) {
          if (config.avoid_observed_negatives && train.contains(x.context_id, j)) {
            ++stats.skipped;
            continue;
          }
          grad = pointwise_step(model, x.context_id, j, neg_label,
                                config.negative_weight, loss, lambda);
          loss_sum += grad.loss;
          apply_step(model, x.context_id, grad, config.eta, step++);
        }
      }
      continue;
    }

    // Fused mode: every gradient of the batch is taken at the same
    // parameters and applied at once.
    RowMatrix dw = RowMatrix::Zero(model.num_contexts(), model.dims());
    std::vector<std::pair<Index, Vector>> dh;
    std::vector<Index> touched_contexts;
    const auto accumulate = [&](Index c, const StepGradient& g) {
      if (!g.context_grad.allFinite()) {
        throw NumericError("non-finite gradient in fused batch at step " +
                           std::to_string(step));
      }
      if (dw.row(c).isZero(0.0) && g.context_grad.size()) {
        touched_contexts.push_back(c);
      }
      dw.row(c) += g.context_grad.transpose();
      for (const auto& [item, v] : g.item_grads) {
        if (!v.allFinite()) {
          throw NumericError("non-finite gradient in fused batch at step " +
                             std::to_string(step));
        }
        dh.emplace_back(item, v);
      }
      ++step;
    };
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Interaction& x = rows[order[start + b]];
      auto grad = pointwise_step(model, x.context_id, x.item_id, x.label,
                                 x.weight, loss, lambda);
      loss_sum += grad.loss;
      accumulate(x.context_id, grad);
      for (Index j : negatives[b]) {
        if (config.avoid_observed_negatives && train.contains(x.context_id, j)) {
          ++stats.skipped;
          continue;
        }
        grad = pointwise_step(model, x.context_id, j, neg_label,
                              config.negative_weight, loss, lambda);
        loss_sum += grad.loss;
        accumulate(x.context_id, grad);
      }
    }
    model.W -= config.eta * dw;
    for (const auto& [item, v] : dh) model.H.row(item) -= config.eta * v.transpose();
  }
  stats.steps = step;
  stats.loss_estimate = loss_sum / static_cast<double>(train.size());
  return stats;
}

EpochStats sgd_pairwise_epoch(FactorModel& model, const Dataset& train,
                              const TrainConfig& config, SgdState& state) {
  check_common(config);
  check_train_shape(model, train);
  const SamplerKind kind = config.sampler.kind;
  if (kind != SamplerKind::kUniform && kind != SamplerKind::kPopularity &&
      kind != SamplerKind::kWarp && kind != SamplerKind::kAdaptive) {
    throw ValidationError("pairwise SGD supports uniform, popularity, warp "
                          "and adaptive samplers, got " +
                          sampler_kind_name(kind));
  }
  const WeightingKind weighting = config.weighting.kind;
  if (weighting == WeightingKind::kWarpPenalty) {
    if (kind != SamplerKind::kWarp) {
      throw ValidationError("warp_penalty weighting requires the warp sampler");
    }
    if (config.loss.kind != LossKind::kHinge) {
      throw ValidationError("warp_penalty weighting requires hinge loss");
    }
  }
  if (weighting == WeightingKind::kLambdaRank && config.weighting.n < 1) {
    throw ValidationError("lambda_rank weighting needs n >= 1");
  }

  const auto rows = train.interactions();
  const auto order = shuffled_positions(train.size(), state.rng());
  EpochStats stats;
  double loss_sum = 0.0;
  Index step = 0;
  for (Index k : order) {
    const Interaction& x = rows[k];
    const Index c = x.context_id;
    std::optional<Index> j;
    Index rank_estimate = 0;
    if (kind == SamplerKind::kWarp) {
      const auto observed = config.avoid_observed_negatives
                                ? train.item_ids_of(c)
                                : std::vector<Index>{};
      const WarpDraw draw =
          warp_sample(state.rng(), model, c, x.item_id, config.sampler, observed);
      j = draw.item;
      rank_estimate = draw.rank_estimate;
    } else {
      j = draw_negative(model, train, config, state, c);
    }
    if (!j) {
      ++stats.skipped;
      continue;
    }

    double weight = 1.0;
    if (weighting == WeightingKind::kLambdaRank) {
      const Vector scores = score_all(model, c);
      const Index n_items = model.num_items();
      const Index r_i = rank_in_scores(scores, x.item_id);
      const Index r_j = rank_in_scores(scores, *j);
      weight = std::abs(
          metric_at_rank(config.weighting.metric, r_i, config.weighting.n,
                         n_items) -
          metric_at_rank(config.weighting.metric, r_j, config.weighting.n,
                         n_items));
    } else if (weighting == WeightingKind::kWarpPenalty) {
      weight = warp_penalty(rank_estimate);
    }

    const auto grad = pairwise_step(model, c, x.item_id, *j, weight,
                                    config.loss.kind, config.loss.lambda);
    loss_sum += grad.loss;
    apply_step(model, c, grad, config.eta, step++);
    state.maybe_refresh(model);
  }
  stats.steps = step;
  stats.loss_estimate = loss_sum / static_cast<double>(train.size());
  return stats;
}

EpochStats sgd_sampled_softmax_epoch(FactorModel& model, const Dataset& train,
                                     const TrainConfig& config,
                                     SgdState& state) {
  check_common(config);
  check_train_shape(model, train);
  const SamplerKind kind = config.sampler.kind;
  if (kind != SamplerKind::kUniform && kind != SamplerKind::kPopularity &&
      kind != SamplerKind::kKernel && kind != SamplerKind::kTwoPass) {
    throw ValidationError("sampled softmax supports uniform, popularity, "
                          "kernel and two_pass samplers, got " +
                          sampler_kind_name(kind));
  }
  if (!(config.loss.nu > 0.0)) throw ValidationError("nu must be > 0");
  const Index m = config.sampler.m;
  const auto rows = train.interactions();
  const auto order = shuffled_positions(train.size(), state.rng());
  EpochStats stats;
  double loss_sum = 0.0;
  Index step = 0;
  std::vector<Index> negatives(static_cast<std::size_t>(m));
  std::vector<double> q(static_cast<std::size_t>(m));

  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(
        order.size(), start + static_cast<std::size_t>(config.batch_size));
    std::vector<std::vector<SampledNegative>> two_pass;
    if (kind == SamplerKind::kTwoPass) {
      std::vector<Index> contexts;
      for (std::size_t b = start; b < end; ++b) {
        contexts.push_back(rows[order[b]].context_id);
      }
      two_pass = two_pass_sample(state.rng(), model, contexts,
                                 *state.popularity(), config.sampler);
    }
    for (std::size_t b = start; b < end; ++b) {
      const Interaction& x = rows[order[b]];
      const Index c = x.context_id;
      for (Index l = 0; l < m; ++l) {
        switch (kind) {
          case SamplerKind::kUniform:
            negatives[l] = uniform_sample(state.rng(), model.num_items());
            q[l] = uniform_probability(model.num_items());
            break;
          case SamplerKind::kPopularity:
            negatives[l] = state.popularity()->sample(state.rng());
            q[l] = state.popularity()->probability(negatives[l]);
            break;
          case SamplerKind::kKernel: {
            const Vector w = model.W.row(c).transpose();
            negatives[l] = kernel_sample(state.rng(), *state.kernel(), w);
            q[l] = kernel_probability(*state.kernel(), w, negatives[l]);
            break;
          }
          default:
            negatives[l] = two_pass[b - start][l].item;
            q[l] = two_pass[b - start][l].q;
            break;
        }
        if (!(q[l] > 0.0)) {
          throw NumericError("sampler returned q <= 0 for item " +
                             std::to_string(negatives[l]));
        }
      }
      const auto grad = sampled_softmax_step(model, c, x.item_id, negatives, q,
                                             config.loss.lambda,
                                             config.loss.nu);
      loss_sum += grad.loss;
      apply_step(model, c, grad, config.eta, step++);
      if (kind == SamplerKind::kKernel) {
        state.count_draw();
        state.maybe_refresh(model);
      }
    }
  }
  stats.steps = step;
  stats.loss_estimate = loss_sum / static_cast<double>(train.size());
  return stats;
}

}  // namespace imrec
