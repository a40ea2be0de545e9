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

#include "imrec/cli.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "imrec/als.h"
#include "imrec/dataset.h"
#include "imrec/error.h"
#include "imrec/losses.h"
#include "imrec/metrics.h"
#include "imrec/model.h"
#include "imrec/samplers.h"
#include "imrec/sgd.h"

namespace imrec {

namespace {

// Keeps the training RNG stream apart from the initializer stream.
constexpr std::uint64_t kTrainSeedMix = 0x9E3779B97F4A7C15ULL;

struct UsageError : Error {
  using Error::Error;
};

struct TrainOptions {
  std::string data;
  std::string model_in;
  std::string model_out;
  std::string solver = "ials";
  std::string loss = "auto";
  std::string sampler = "auto";
  std::string weighting = "constant";
  std::string lambda_rank_metric = "ndcg";
  std::string split = "none";
  Index dims = 8;
  Index epochs = 10;
  Index m = 1;
  Index warp_max_trials = 0;
  Index candidates = 0;
  Index refresh_every = 0;
  Index batch_size = 1;
  Index lambda_rank_n = 10;
  Index k = 1;
  double eta = 0.05;
  double alpha0 = 0.1;
  double lambda = 1e-3;
  double nu = 1.0;
  double beta = 1.0;
  double gamma = 10.0;
  double warp_margin = 1.0;
  double lambda0 = 1.0;
  double negative_weight = 1.0;
  double gramian_eta = 0.1;
  double init_sigma = -1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  bool warp_literal = false;
  bool fused_batch = false;
  bool allow_observed_negatives = false;
  bool literal_gramian_gradient = false;
  bool zero_gramian_init = false;
};

struct EvaluateOptions {
  std::string model;
  std::string data;
  std::string test;
  std::string split = "auto";
  std::string metrics = "precision,recall,ap,ndcg,auc";
  std::string format = "table";
  Index n = 10;
  Index k = 1;
  std::uint64_t seed = 1;
  bool no_filter = false;
};

struct RecommendOptions {
  std::string model;
  std::string data;
  std::string history;
  Index context = 0;
  Index n = 10;
  double alpha = 1.0;
  double alpha0 = 0.1;
  double lambda = 1e-3;
  bool exclude_seen = false;
};

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    parts.push_back(item.substr(b, e - b + 1));
  }
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Widens the id space of `ds` to the model's when the file declares fewer.
Dataset conform(const Dataset& ds, Index num_contexts, Index num_items,
                const std::string& what) {
  if (ds.num_contexts() == num_contexts && ds.num_items() == num_items) {
    return ds;
  }
  if (ds.num_contexts() > num_contexts || ds.num_items() > num_items) {
    throw ValidationError(what + " has " + std::to_string(ds.num_contexts()) +
                          " contexts x " + std::to_string(ds.num_items()) +
                          " items, more than the model's " +
                          std::to_string(num_contexts) + " x " +
                          std::to_string(num_items));
  }
  const auto rows = ds.interactions();
  return Dataset(num_contexts, num_items,
                 std::vector<Interaction>(rows.begin(), rows.end()));
}

// Merges `key=value` lines of a config file into args for options the user
// did not pass explicitly.
void inject_config(CLI::App& app, std::vector<std::string>& args) {
  std::optional<std::string> path;
  std::vector<std::string> kept;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw UsageError("--config needs a path");
      path = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
    } else {
      kept.push_back(args[k]);
    }
  }
  args = std::move(kept);
  if (!path) return;
  if (args.empty()) throw UsageError("--config given without a command");
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) throw UsageError("unknown command '" + args[0] + "'");

  std::ifstream in(*path);
  if (!in) throw ValidationError("cannot open config file '" + *path + "'");
  const auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*path + ":" + std::to_string(line_no) +
                       ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) {
      throw UsageError(*path + ":" + std::to_string(line_no) +
                       ": unknown option '" + key + "' for " + args[0]);
    }
    if (given(flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes") {
        extra.push_back(flag);
      } else if (!(value == "false" || value == "0" || value == "no")) {
        throw UsageError(*path + ":" + std::to_string(line_no) + ": flag '" +
                         key + "' takes true or false");
      }
    } else {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

LossKind resolve_loss(const TrainOptions& o) {
  if (o.loss != "auto") return parse_loss_kind(o.loss);
  if (o.solver == "sgd-pairwise") {
    return o.weighting == "warp_penalty" || o.weighting == "warp"
               ? LossKind::kHinge
               : LossKind::kLogistic;
  }
  if (o.solver == "sgd-pointwise") return LossKind::kLogistic;
  return LossKind::kSquare;
}

SamplerKind resolve_sampler(const TrainOptions& o) {
  if (o.sampler != "auto") return parse_sampler_kind(o.sampler);
  if (o.solver == "sgd-pairwise" &&
      (o.weighting == "warp_penalty" || o.weighting == "warp")) {
    return SamplerKind::kWarp;
  }
  return SamplerKind::kUniform;
}

TrainConfig make_train_config(const TrainOptions& o) {
  TrainConfig c;
  c.eta = o.eta;
  c.epochs = o.epochs;
  c.seed = o.seed ^ kTrainSeedMix;
  c.loss.kind = resolve_loss(o);
  c.loss.alpha0 = o.alpha0;
  c.loss.lambda = o.lambda;
  c.loss.nu = o.nu;
  c.sampler.kind = resolve_sampler(o);
  c.sampler.m = o.m;
  c.sampler.beta = o.beta;
  c.sampler.gamma_adaptive = o.gamma;
  c.sampler.warp_max_trials = o.warp_max_trials;
  c.sampler.warp_margin = o.warp_margin;
  c.sampler.warp_literal_rank_formula = o.warp_literal;
  c.sampler.two_pass_candidates = o.candidates;
  c.sampler.lambda0 = o.lambda0;
  c.sampler.refresh_every = o.refresh_every;
  c.weighting.kind = parse_weighting_kind(o.weighting);
  c.weighting.metric = parse_metric(o.lambda_rank_metric);
  c.weighting.n = o.lambda_rank_n;
  c.batch_size = o.batch_size;
  c.negative_weight = o.negative_weight;
  c.avoid_observed_negatives = !o.allow_observed_negatives;
  c.fused_batch = o.fused_batch;
  return c;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  static const std::vector<std::string> kSolvers = {
      "sgd-pointwise", "sgd-pairwise", "sgd-ssm",
      "ials",          "ials-pairwise", "sgd-gramian"};
  if (std::find(kSolvers.begin(), kSolvers.end(), o.solver) == kSolvers.end()) {
    throw UsageError("unknown solver '" + o.solver + "'");
  }
  if (o.epochs < 1) throw UsageError("--epochs must be >= 1");
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  const TrainConfig config = make_train_config(o);

  Dataset data = load_interactions(o.data);
  FactorModel model;
  if (!o.model_in.empty()) {
    model = restore(o.model_in);
    data = conform(data, model.num_contexts(), model.num_items(), o.data);
  } else {
    const double sigma =
        o.init_sigma >= 0.0 ? o.init_sigma : default_init_sigma(o.dims);
    model = init_model(data.num_contexts(), data.num_items(), o.dims, o.seed,
                       sigma);
  }
  Dataset train = data;
  if (o.split == "leave-k-out") {
    train = leave_k_out_split(data, o.k, o.seed).first;
  } else if (o.split != "none") {
    throw UsageError("unknown split '" + o.split + "'");
  }

  const auto start = std::chrono::steady_clock::now();
  const auto progress = [&](Index epoch, double loss) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    out << epoch << '\t' << std::setprecision(10) << loss << '\t' << ms
        << '\n';
    out.flush();
  };

  const IalsOptions ials_options{o.threads};
  if (o.solver == "ials") {
    for (Index e = 1; e <= o.epochs; ++e) {
      progress(e, ials_epoch(model, train, config.loss, {}, ials_options));
    }
  } else if (o.solver == "ials-pairwise") {
    for (Index e = 1; e <= o.epochs; ++e) {
      progress(e, ials_pairwise_epoch(model, train, config.loss, ials_options));
    }
  } else if (o.solver == "sgd-gramian") {
    SgdGramianConfig gc;
    gc.eta = o.eta;
    gc.gramian_eta = o.gramian_eta;
    gc.loss = config.loss;
    gc.literal_gradient = o.literal_gramian_gradient;
    const auto transformed = transform_observations(train, gc.loss);
    GramianEstimate est = o.zero_gramian_init
                              ? zero_gramian_estimate(model.dims())
                              : exact_gramian_estimate(model);
    Rng rng(config.seed);
    for (Index e = 1; e <= o.epochs; ++e) {
      progress(e, sgd_gramian_epoch(model, train, transformed, gc, est, rng)
                      .loss_estimate);
    }
  } else {
    SgdState state(model, train, config);
    for (Index e = 1; e <= o.epochs; ++e) {
      EpochStats stats;
      if (o.solver == "sgd-pointwise") {
        stats = sgd_pointwise_epoch(model, train, config, state);
      } else if (o.solver == "sgd-pairwise") {
        stats = sgd_pairwise_epoch(model, train, config, state);
      } else {
        stats = sgd_sampled_softmax_epoch(model, train, config, state);
      }
      progress(e, stats.loss_estimate);
    }
  }
  persist(model, o.model_out);
  return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const FactorModel model = restore(o.model);
  const Index nc = model.num_contexts();
  const Index ni = model.num_items();
  std::string split = o.split;
  if (split == "auto") split = o.test.empty() ? "leave-k-out" : "none";

  Dataset train(nc, ni, {});
  Dataset test;
  if (!o.test.empty()) {
    if (split != "none") {
      throw UsageError("--split cannot be combined with --test");
    }
    test = conform(load_interactions(o.test), nc, ni, o.test);
    if (!o.data.empty()) {
      train = conform(load_interactions(o.data), nc, ni, o.data);
    }
  } else {
    if (o.data.empty()) throw UsageError("evaluate needs --data or --test");
    const Dataset data = conform(load_interactions(o.data), nc, ni, o.data);
    if (split == "leave-k-out") {
      auto parts = leave_k_out_split(data, o.k, o.seed);
      train = std::move(parts.first);
      test = std::move(parts.second);
    } else if (split == "none") {
      test = data;
    } else {
      throw UsageError("unknown split '" + split + "'");
    }
  }
  const auto names = split_list(o.metrics, ',');
  if (names.empty()) throw UsageError("--metrics is empty");
  std::vector<MetricKind> kinds;
  for (const auto& name : names) kinds.push_back(parse_metric(name));
  const MetricReport report =
      evaluate_model(model, train, test, kinds, o.n, !o.no_filter);
  if (o.format == "table") {
    out << report.to_table();
  } else if (o.format == "csv") {
    out << report.to_csv();
  } else {
    throw UsageError("unknown format '" + o.format + "'");
  }
  return kExitOk;
}

int cmd_recommend(const RecommendOptions& o, std::ostream& out) {
  const FactorModel model = restore(o.model);
  Vector scores;
  std::vector<Index> excluded;
  if (!o.history.empty()) {
    std::vector<FoldInObservation> history;
    for (const auto& token : split_list(o.history, ',')) {
      Index item = -1;
      const auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), item);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw UsageError("--history: '" + token + "' is not an item id");
      }
      if (item < 0 || item >= model.num_items()) {
        throw IndexError("--history: item " + token + " is outside [0, " +
                         std::to_string(model.num_items()) + ")");
      }
      history.push_back({item, o.alpha, 1.0});
      excluded.push_back(item);
    }
    if (history.empty()) throw UsageError("--history is empty");
    const Vector emb = fold_in_context(model, history, o.alpha0, o.lambda,
                                       gram_of_rows(model.H));
    scores = score_embedding(model, emb);
    if (!o.exclude_seen) excluded.clear();
  } else {
    if (o.context < 0 || o.context >= model.num_contexts()) {
      throw IndexError("context " + std::to_string(o.context) +
                       " is outside [0, " +
                       std::to_string(model.num_contexts()) +
                       ") and no --history was given");
    }
    scores = score_all(model, o.context);
    if (o.exclude_seen) {
      if (o.data.empty()) throw UsageError("--exclude-seen needs --data");
      const Dataset data = conform(load_interactions(o.data),
                                   model.num_contexts(), model.num_items(),
                                   o.data);
      excluded = data.item_ids_of(o.context);
    }
  }
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
  const RankedList list = top_n_of_scores(scores, o.n, excluded);
  out << std::setprecision(10);
  for (std::size_t r = 0; r < list.items.size(); ++r) {
    out << r + 1 << '\t' << list.items[r] << '\t' << list.scores[r] << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Implicit-feedback recommender training and retrieval", "imrec"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  TrainOptions t;
  auto* train = app.add_subcommand("train", "Train a model and persist it");
  train->add_option("--data", t.data, "Training interactions (TSV)")
      ->required();
  train->add_option("--model-out", t.model_out, "Where to write the model")
      ->required();
  train->add_option("--model-in", t.model_in,
                    "Start from a persisted model instead of a random one");
  train->add_option("--solver", t.solver,
                    "sgd-pointwise, sgd-pairwise, sgd-ssm, ials, "
                    "ials-pairwise or sgd-gramian");
  train->add_option("--dims", t.dims, "Embedding size");
  train->add_option("--epochs", t.epochs, "Number of epochs");
  train->add_option("--eta", t.eta, "SGD learning rate");
  train->add_option("--seed", t.seed, "Seed for init, sampling and split");
  train->add_option("--loss", t.loss,
                    "square, logistic, hinge or auto (square for the "
                    "Gramian solvers, logistic for SGD, hinge with WARP)");
  train->add_option("--alpha0", t.alpha0, "Weight of unobserved pairs");
  train->add_option("--lambda", t.lambda, "L2 regularization");
  train->add_option("--nu", t.nu, "Softmax temperature scale");
  train->add_option("--sampler", t.sampler,
                    "uniform, popularity, in_batch, warp, adaptive, kernel, "
                    "two_pass or auto");
  train->add_option("--m", t.m, "Negatives per positive");
  train->add_option("--beta", t.beta, "Popularity exponent");
  train->add_option("--gamma", t.gamma, "Adaptive sampler rank temperature");
  train->add_option("--warp-max-trials", t.warp_max_trials,
                    "WARP trial budget, 0 for |I|");
  train->add_option("--warp-margin", t.warp_margin, "WARP margin");
  train->add_flag("--warp-literal-rank", t.warp_literal,
                  "Use floor((trials - 1) / |I|) as WARP rank estimate");
  train->add_option("--candidates", t.candidates,
                    "Two-pass first-stage size M, 0 for auto");
  train->add_option("--lambda0", t.lambda0, "Kernel sampler constant");
  train->add_option("--refresh-every", t.refresh_every,
                    "Draws between sampler index rebuilds, 0 for |S|");
  train->add_option("--weighting", t.weighting,
                    "constant, lambda_rank or warp_penalty");
  train->add_option("--lambda-rank-metric", t.lambda_rank_metric,
                    "Metric for lambda_rank weights");
  train->add_option("--lambda-rank-n", t.lambda_rank_n,
                    "Cutoff for lambda_rank weights");
  train->add_option("--batch-size", t.batch_size, "Examples per batch");
  train->add_option("--negative-weight", t.negative_weight,
                    "Weight of sampled negatives in pointwise SGD");
  train->add_flag("--fused-batch", t.fused_batch,
                  "Apply in_batch gradients once per batch");
  train->add_flag("--allow-observed-negatives", t.allow_observed_negatives,
                  "Keep sampled negatives that are observed positives");
  train->add_option("--gramian-eta", t.gramian_eta,
                    "Step size of the Gramian estimates");
  train->add_flag("--literal-gramian-gradient", t.literal_gramian_gradient,
                  "Use alpha0/|I_c| instead of 2 alpha0/|I_c|");
  train->add_flag("--zero-gramian-init", t.zero_gramian_init,
                  "Start Gramian estimates at zero");
  train->add_option("--init-sigma", t.init_sigma,
                    "Init standard deviation, negative for 0.1/sqrt(dims)");
  train->add_option("--threads", t.threads, "Worker threads (ials only)");
  train->add_option("--split", t.split, "none or leave-k-out");
  train->add_option("--k", t.k, "Held-out interactions per context");

  EvaluateOptions e;
  auto* evaluate = app.add_subcommand("evaluate", "Report ranking metrics");
  evaluate->add_option("--model", e.model, "Persisted model")->required();
  evaluate->add_option("--data", e.data,
                       "Interactions; split into train/test unless --test");
  evaluate->add_option("--test", e.test, "Held-out interactions");
  evaluate->add_option("--split", e.split,
                       "auto, none or leave-k-out (auto: leave-k-out "
                       "without --test)");
  evaluate->add_option("--k", e.k, "Held-out interactions per context");
  evaluate->add_option("--seed", e.seed, "Split seed");
  evaluate->add_option("--metrics", e.metrics, "Comma-separated metrics");
  evaluate->add_option("--n", e.n, "Cutoff");
  evaluate->add_option("--format", e.format, "table or csv");
  evaluate->add_flag("--no-filter", e.no_filter,
                     "Keep training positives in the ranking");

  RecommendOptions r;
  auto* recommend = app.add_subcommand("recommend", "Print top-n items");
  recommend->add_option("--model", r.model, "Persisted model")->required();
  recommend->add_option("--context", r.context, "Context id");
  recommend->add_option("--history", r.history,
                        "Comma-separated item ids to fold in");
  recommend->add_option("--n", r.n, "Number of items");
  recommend->add_option("--data", r.data, "Interactions for --exclude-seen");
  recommend->add_flag("--exclude-seen", r.exclude_seen,
                      "Skip items the context already has");
  recommend->add_option("--alpha", r.alpha, "Fold-in weight of history items");
  recommend->add_option("--alpha0", r.alpha0, "Fold-in weight of the rest");
  recommend->add_option("--lambda", r.lambda, "Fold-in regularization");

  try {
    std::vector<std::string> args = raw_args;
    inject_config(app, args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }

  try {
    if (train->parsed()) return cmd_train(t, out);
    if (evaluate->parsed()) return cmd_evaluate(e, out);
    return cmd_recommend(r, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << '\n';
    return kExitNumeric;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run_cli(args, out, err);
}

}  // namespace imrec
