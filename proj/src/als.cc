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

#include "imrec/als.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace imrec {

namespace {

// Runs fn(k) for k in [0, n), split into contiguous chunks over `threads`
// workers. Each fn(k) must only write state owned by k.
template <typename Fn>
void parallel_for(Index n, int threads, Fn fn) {
  const Index workers =
      std::clamp<Index>(static_cast<Index>(threads), 1, std::max<Index>(1, n));
  if (workers == 1) {
    for (Index k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        const Index end = std::min(n, (t + 1) * chunk);
        for (Index k = t * chunk; k < end; ++k) fn(k);
      } catch (...) {
        failures[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

void check_square(const LossConfig& config) {
  if (config.kind != LossKind::kSquare) {
    throw ValidationError("Gramian solvers require square loss, got " +
                          loss_kind_name(config.kind));
  }
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("alternating solvers need a finite lambda > 0");
  }
}

void check_shape(const FactorModel& model, const Dataset& train) {
  if (model.num_contexts() != train.num_contexts() ||
      model.num_items() != train.num_items()) {
    throw ValidationError("model shape does not match the training data");
  }
}

void check_transformed(const Dataset& train,
                       std::span<const TransformedObservation> transformed) {
  if (static_cast<Index>(transformed.size()) != train.size()) {
    throw ValidationError("transformed observations are not aligned with the "
                          "training data");
  }
}

}  // namespace

std::vector<BlockObservation> context_block(
    const Dataset& dataset, std::span<const TransformedObservation> transformed,
    Index context) {
  check_transformed(dataset, transformed);
  const Index begin = dataset.context_offset(context);
  const Index n = dataset.context_degree(context);
  std::vector<BlockObservation> obs;
  obs.reserve(static_cast<std::size_t>(n));
  for (Index k = begin; k < begin + n; ++k) {
    const auto& t = transformed[static_cast<std::size_t>(k)];
    obs.push_back({t.item_id, t.alpha_tilde, t.y_tilde});
  }
  return obs;
}

std::vector<BlockObservation> item_block(
    const Dataset& dataset, std::span<const TransformedObservation> transformed,
    Index item) {
  check_transformed(dataset, transformed);
  std::vector<BlockObservation> obs;
  for (Index k : dataset.interactions_of_item(item)) {
    const auto& t = transformed[static_cast<std::size_t>(k)];
    obs.push_back({t.context_id, t.alpha_tilde, t.y_tilde});
  }
  return obs;
}

SquareMatrix block_matrix(const RowMatrix& partners,
                          std::span<const BlockObservation> obs, double alpha0,
                          double lambda, const SquareMatrix& gram_partner) {
  const Index d = partners.cols();
  if (gram_partner.rows() != d || gram_partner.cols() != d) {
    throw ValidationError("Gramian size does not match the embedding size");
  }
  SquareMatrix a = alpha0 * gram_partner;
  for (const auto& o : obs) {
    if (o.partner < 0 || o.partner >= partners.rows()) {
      throw IndexError("block partner " + std::to_string(o.partner) +
                       " out of range");
    }
    add_outer(a, partners.row(o.partner).transpose(), o.alpha_tilde);
  }
  a.diagonal().array() += lambda;
  return a;
}

Vector block_rhs(const RowMatrix& partners,
                 std::span<const BlockObservation> obs) {
  Vector b = Vector::Zero(partners.cols());
  for (const auto& o : obs) {
    b += (o.alpha_tilde * o.y_tilde) * partners.row(o.partner).transpose();
  }
  return b;
}

Vector solve_block(const RowMatrix& partners,
                   std::span<const BlockObservation> obs, double alpha0,
                   double lambda, const SquareMatrix& gram_partner) {
  return solve_spd(block_matrix(partners, obs, alpha0, lambda, gram_partner),
                   block_rhs(partners, obs));
}

Vector block_gradient(const Eigen::Ref<const Vector>& row,
                      const RowMatrix& partners,
                      std::span<const BlockObservation> obs, double alpha0,
                      double lambda, const SquareMatrix& gram_partner) {
  const SquareMatrix a =
      block_matrix(partners, obs, alpha0, lambda, gram_partner);
  return 2.0 * (a * row - block_rhs(partners, obs));
}

void ials_context_pass(FactorModel& model, const Dataset& train,
                       std::span<const TransformedObservation> transformed,
                       const LossConfig& config, const IalsOptions& options) {
  check_shape(model, train);
  check_transformed(train, transformed);
  const SquareMatrix gram_item = gram_of_rows(model.H);
  parallel_for(model.num_contexts(), options.threads, [&](Index c) {
    const auto obs = context_block(train, transformed, c);
    model.W.row(c) =
        solve_block(model.H, obs, config.alpha0, config.lambda, gram_item)
            .transpose();
  });
}

void ials_item_pass(FactorModel& model, const Dataset& train,
                    std::span<const TransformedObservation> transformed,
                    const LossConfig& config, const IalsOptions& options) {
  check_shape(model, train);
  check_transformed(train, transformed);
  const SquareMatrix gram_context = gram_of_rows(model.W);
  parallel_for(model.num_items(), options.threads, [&](Index i) {
    const auto obs = item_block(train, transformed, i);
    model.H.row(i) =
        solve_block(model.W, obs, config.alpha0, config.lambda, gram_context)
            .transpose();
  });
}

double ials_epoch(FactorModel& model, const Dataset& train,
                  const LossConfig& config, std::span<const double> weights,
                  const IalsOptions& options) {
  check_square(config);
  check_lambda(config.lambda);
  check_shape(model, train);
  const auto transformed = transform_observations(train, config, weights);
  ials_context_pass(model, train, transformed, config, options);
  ials_item_pass(model, train, transformed, config, options);
  const auto grams = compute_gramians(model, train);
  return pointwise_square_loss_fast(model, transformed, config, grams);
}

GramianEstimate exact_gramian_estimate(const FactorModel& model) {
  return {gram_of_rows(model.W), gram_of_rows(model.H)};
}

GramianEstimate zero_gramian_estimate(Index dims) {
  return {SquareMatrix::Zero(dims, dims), SquareMatrix::Zero(dims, dims)};
}

void gramian_estimate_update(GramianEstimate& est, GramianSide side,
                             const Eigen::Ref<const Vector>& embedding,
                             Index fan_out, Index population, double eta) {
  if (fan_out < 1) throw ValidationError("fan_out must be >= 1");
  if (population < 1) throw ValidationError("population must be >= 1");
  if (!(eta >= 0.0)) throw ValidationError("Gramian eta must be >= 0");
  const double mix = eta / static_cast<double>(fan_out);
  if (mix > 1.0) {
    throw ValidationError("Gramian step eta/fan_out = " + std::to_string(mix) +
                          " exceeds 1");
  }
  SquareMatrix& g =
      side == GramianSide::kContext ? est.est_context : est.est_item;
  if (g.rows() != embedding.size() || g.cols() != embedding.size()) {
    throw ValidationError("embedding size does not match the estimate");
  }
  if (mix == 0.0) return;
  g *= 1.0 - mix;
  add_outer(g, embedding, mix * static_cast<double>(population));
}

GramianStepGradient sgd_gramian_step_gradient(
    const FactorModel& model, const TransformedObservation& obs,
    Index context_degree, Index item_degree, const GramianEstimate& est,
    const SgdGramianConfig& config) {
  if (context_degree < 1 || item_degree < 1) {
    throw ValidationError("observation degrees must be >= 1");
  }
  const auto w = model.W.row(obs.context_id).transpose();
  const auto h = model.H.row(obs.item_id).transpose();
  const double residual = w.dot(h) - obs.y_tilde;
  const double gram_scale = config.literal_gradient ? 1.0 : 2.0;
  const double inv_c = 1.0 / static_cast<double>(context_degree);
  const double inv_i = 1.0 / static_cast<double>(item_degree);
  const double a0 = config.loss.alpha0;
  const double lambda = config.loss.lambda;
  GramianStepGradient grad;
  grad.context_grad = 2.0 * obs.alpha_tilde * residual * h +
                      (gram_scale * a0 * inv_c) * (est.est_item * w) +
                      (2.0 * lambda * inv_c) * w;
  grad.item_grad = 2.0 * obs.alpha_tilde * residual * w +
                   (gram_scale * a0 * inv_i) * (est.est_context * h) +
                   (2.0 * lambda * inv_i) * h;
  return grad;
}

EpochStats sgd_gramian_epoch(FactorModel& model, const Dataset& train,
                             std::span<const TransformedObservation> transformed,
                             const SgdGramianConfig& config,
                             GramianEstimate& est, Rng& rng) {
  check_square(config.loss);
  check_shape(model, train);
  check_transformed(train, transformed);
  if (train.empty()) throw ValidationError("training data is empty");
  if (!(config.eta >= 0.0) || !std::isfinite(config.eta)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  const Index d = model.dims();
  if (est.est_context.rows() != d || est.est_item.rows() != d) {
    throw ValidationError("Gramian estimate size does not match the model");
  }
  const Index steps = config.steps > 0 ? config.steps : train.size();
  const auto rows = train.interactions();
  std::uniform_int_distribution<Index> pick(0, train.size() - 1);
  EpochStats stats;
  for (Index t = 0; t < steps; ++t) {
    const auto& obs = transformed[static_cast<std::size_t>(pick(rng))];
    if (config.update_model && config.eta != 0.0) {
      const auto grad = sgd_gramian_step_gradient(
          model, obs, train.context_degree(obs.context_id),
          train.item_degree(obs.item_id), est, config);
      if (!grad.context_grad.allFinite() || !grad.item_grad.allFinite()) {
        throw NumericError("non-finite gradient at step " + std::to_string(t) +
                           " (context " + std::to_string(obs.context_id) +
                           ", item " + std::to_string(obs.item_id) + ")");
      }
      model.W.row(obs.context_id) -= config.eta * grad.context_grad.transpose();
      model.H.row(obs.item_id) -= config.eta * grad.item_grad.transpose();
    }
    const Interaction& x = rows[static_cast<std::size_t>(pick(rng))];
    if (config.update_estimates) {
      gramian_estimate_update(est, GramianSide::kContext,
                              model.W.row(x.context_id).transpose(),
                              train.context_degree(x.context_id),
                              model.num_contexts(), config.gramian_eta);
      gramian_estimate_update(est, GramianSide::kItem,
                              model.H.row(x.item_id).transpose(),
                              train.item_degree(x.item_id), model.num_items(),
                              config.gramian_eta);
    }
    ++stats.steps;
  }
  stats.loss_estimate = pointwise_square_loss_fast(
      model, transformed, config.loss, compute_gramians(model, train));
  return stats;
}

double ials_pairwise_epoch(FactorModel& model, const Dataset& train,
                           const LossConfig& config,
                           const IalsOptions& options) {
  check_square(config);
  check_lambda(config.lambda);
  check_shape(model, train);
  const Index d = model.dims();
  const double num_items = static_cast<double>(model.num_items());
  const double lambda = config.lambda;

  // Context pass against fixed H.
  {
    const SquareMatrix gram_item = gram_of_rows(model.H);
    const Vector z = model.H.colwise().sum().transpose();
    parallel_for(model.num_contexts(), options.threads, [&](Index c) {
      const auto row = train.items_of(c);
      const double n_c = static_cast<double>(row.size());
      SquareMatrix a = SquareMatrix::Zero(d, d);
      Vector s = Vector::Zero(d);
      for (const auto& x : row) {
        const auto h = model.H.row(x.item_id).transpose();
        add_outer(a, h);
        s += h;
      }
      a *= num_items;
      a += n_c * gram_item;
      a -= s * z.transpose() + z * s.transpose();
      a.diagonal().array() += lambda;
      const Vector b = num_items * s - n_c * z;
      model.W.row(c) = solve_spd(a, b).transpose();
    });
  }

  // Item pass, Gauss-Seidel in id order.
  {
    std::vector<double> degree_weights(static_cast<std::size_t>(model.num_contexts()));
    for (Index c = 0; c < model.num_contexts(); ++c) {
      degree_weights[static_cast<std::size_t>(c)] =
          static_cast<double>(train.context_degree(c));
    }
    const SquareMatrix gram_context_w = gram_of_rows(model.W, degree_weights);
    Vector z = model.H.colwise().sum().transpose();
    std::vector<double> r(static_cast<std::size_t>(model.num_contexts()), 0.0);
    Vector u = Vector::Zero(d);
    for (Index c = 0; c < model.num_contexts(); ++c) {
      double rc = 0.0;
      for (const auto& x : train.items_of(c)) {
        rc += score(model, c, x.item_id) - 1.0;
      }
      r[static_cast<std::size_t>(c)] = rc;
      u += rc * model.W.row(c).transpose();
    }
    for (Index k = 0; k < model.num_items(); ++k) {
      const Vector h_old = model.H.row(k).transpose();
      const Vector z_minus = z - h_old;
      SquareMatrix a = SquareMatrix::Zero(d, d);
      Vector b = u;
      const auto contexts = train.contexts_of(k);
      for (Index c : contexts) {
        const auto w = model.W.row(c).transpose();
        add_outer(a, w);
        b += (w.dot(z_minus) + num_items - 1.0 - (w.dot(h_old) - 1.0)) * w;
      }
      a *= num_items - 2.0;
      a += gram_context_w;
      a.diagonal().array() += lambda;
      const Vector h_new = solve_spd(a, b);
      const Vector delta = h_new - h_old;
      model.H.row(k) = h_new.transpose();
      z += delta;
      for (Index c : contexts) {
        const auto w = model.W.row(c).transpose();
        const double dr = w.dot(delta);
        r[static_cast<std::size_t>(c)] += dr;
        u += dr * w;
      }
    }
  }
  const auto grams = compute_gramians(model, train, true);
  return pairwise_square_loss_fast(model, train, grams, lambda);
}

}  // namespace imrec
