/**
 * Copyright 2026 The SSHT Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Source training, source-free adaptation and the ablation runner.
//
// adapt() only ever sees an AdaptationView: the labeled target shots, the
// unlabeled target inputs and the test split. Source samples and the labels
// of the unlabeled split are not part of that type.

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ssht/diffnet.hpp"
#include "ssht/metrics.hpp"
#include "ssht/model_io.hpp"
#include "ssht/objectives.hpp"
#include "ssht/rng.hpp"
#include "ssht/synthdata.hpp"

namespace ssht {

enum class Method { kCdl, kCdlNoCl, kCdlNoDl, kSPlusT, kEnt };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kCdl: return "cdl";
    case Method::kCdlNoCl: return "cdl_no_cl";
    case Method::kCdlNoDl: return "cdl_no_dl";
    case Method::kSPlusT: return "s_plus_t";
    case Method::kEnt: return "ent";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kCdl, Method::kCdlNoCl, Method::kCdlNoDl, Method::kSPlusT, Method::kEnt})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown method '" + s + "'");
}

enum class LabeledAug { kNone, kWeak };

inline std::string to_string(LabeledAug a) { return a == LabeledAug::kNone ? "none" : "weak"; }

inline LabeledAug parse_labeled_aug(const std::string& s) {
  if (s == "none") return LabeledAug::kNone;
  if (s == "weak") return LabeledAug::kWeak;
  throw ValidationError("unknown labeled augmentation '" + s + "'");
}

struct AdaptConfig {
  Method method = Method::kCdl;
  double tau = 0.8;
  double lambda_u = 2.5;
  double lambda_d = 1.0;
  SgdConfig sgd{};
  /// 0 selects min(|D^x|, unlabeled_batch).
  std::size_t labeled_batch = 0;
  std::size_t unlabeled_batch = 48;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  bool freeze_classifier = false;
  LabeledAug labeled_aug = LabeledAug::kWeak;
  /// Unset selects default_augment_policy() for the task geometry.
  std::optional<AugmentPolicy> augment;
  std::size_t diversity_batch = 48;
  std::size_t diversity_batches = 50;

  void validate() const {
    SSHT_REQUIRE(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1], got ", tau);
    SSHT_REQUIRE(lambda_u >= 0.0 && lambda_d >= 0.0, "lambda_u and lambda_d must be >= 0");
    SSHT_REQUIRE(epochs >= 1, "epochs must be at least 1");
    SSHT_REQUIRE(unlabeled_batch >= 1, "unlabeled_batch must be at least 1");
    if (augment) augment->validate();
  }

  bool uses_unlabeled() const { return method != Method::kSPlusT; }
  bool uses_strong() const { return method == Method::kCdl || method == Method::kCdlNoCl || method == Method::kCdlNoDl; }
  bool uses_consistency() const { return method == Method::kCdl || method == Method::kCdlNoDl; }
  bool uses_diversity() const { return method == Method::kCdl || method == Method::kCdlNoCl; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double l_c = 0.0;
  double l_u = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  double mask_rate = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double diversity_ratio = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct PassCounts {
  std::size_t labeled = 0;
  std::size_t unlabeled_weak = 0;
  std::size_t unlabeled_strong = 0;

  friend bool operator==(const PassCounts&, const PassCounts&) = default;
};

struct RunReport {
  AdaptConfig config;
  AugmentPolicy augment;  // resolved policy actually used
  std::vector<EpochRecord> epochs;
  Evaluation final_eval;
  PassCounts passes;
  std::string model_fingerprint;
  std::string status = "ok";
  std::size_t log_clamps = 0;

  bool ok() const { return status == "ok"; }
};

/// FNV-1a over the serialized model, as 16 hex digits.
inline std::string model_fingerprint(const Network& net) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize(net)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream oss;
  oss << std::hex;
  oss.width(16);
  oss.fill('0');
  oss << h;
  return oss.str();
}

// Source training.

struct SourceTrainConfig {
  std::size_t epochs = 40;
  std::size_t batch = 32;
  SgdConfig sgd{0.01, 0.9, true, 0.0005};
  std::uint64_t seed = 0;
};

/// Trains on 90% of D^s with the classification loss and keeps the epoch
/// with the best accuracy on the held-out 10%.
inline Network train_source(const DomainTask& task, const NetworkSpec& spec,
                            const SourceTrainConfig& cfg) {
  SSHT_REQUIRE(spec.input_dim == task.spec().input_dim && spec.num_classes == task.spec().num_classes,
               "train_source: network spec does not match task dimensions");
  SSHT_REQUIRE(cfg.epochs >= 1 && cfg.batch >= 1, "train_source: epochs and batch must be >= 1");
  const LabeledSet& source = task.source_labeled();
  SSHT_REQUIRE(source.size() >= 10, "train_source: need at least 10 source samples");

  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng = make_rng(cfg.seed, Stream::kSplit, 1);
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t n_val = source.size() / 10;
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const LabeledSet val = gather(source, val_idx);

  Network net = init_network(spec, cfg.seed);
  SgdState state = SgdState::for_network(net, cfg.sgd);
  Rng batch_rng = make_rng(cfg.seed, Stream::kBatching, 1);

  Network best = net;
  double best_acc = -1.0;
  std::size_t best_epoch = 0;
  const std::size_t batch = std::min(cfg.batch, train_idx.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), batch_rng);
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::size_t end = std::min(start + batch, train_idx.size());
      const std::span<const std::size_t> idx(train_idx.data() + start, end - start);
      const LabeledSet b = gather(source, idx);
      const Tape tape = forward_tape(net, b.x);
      const LossValue loss = classification_loss(softmax_rows(tape.logits), b.y);
      if (!std::isfinite(loss.value))
        throw NumericalError(detail::concat("train_source: non-finite loss at epoch ", epoch));
      sgd_step(net, backward(net, tape, loss.logit_grads.at(Pass::kLabeledWeak)), state);
    }
    const double acc = evaluate(net, val).accuracy;
    if (acc > best_acc) {
      best_acc = acc;
      best = net;
      best_epoch = epoch;
    }
  }
  std::ostringstream acc_str;
  acc_str.precision(17);
  acc_str << best_acc;
  best.info["source_val_accuracy"] = acc_str.str();
  best.info["source_best_epoch"] = std::to_string(best_epoch);
  best.info["source_task_seed"] = std::to_string(task.seed());
  return best;
}

// Adaptation.

struct AdaptResult {
  RunReport report;
  Network model;
};

namespace detail {

inline double mask_rate_of(const Matrix& probs_weak, double tau) {
  std::size_t selected = 0;
  for (std::size_t i = 0; i < probs_weak.rows(); ++i) {
    auto r = probs_weak.row(i);
    selected += *std::max_element(r.begin(), r.end()) > tau;
  }
  return static_cast<double>(selected) / static_cast<double>(probs_weak.rows());
}

inline GradientSet accumulate_backward(const Network& net, const LossValue& loss,
                                       const std::map<Pass, const Tape*>& tapes) {
  GradientSet total = GradientSet::zeros_like(net);
  for (const auto& [pass, g] : loss.logit_grads) total += backward(net, *tapes.at(pass), g);
  return total;
}

}  // namespace detail

/// Source-free adaptation of `source_model` on the target side of a task.
inline AdaptResult adapt(const Network& source_model, const AdaptationView& view,
                         const AdaptConfig& config) {
  config.validate();
  source_model.validate();
  SSHT_REQUIRE(source_model.spec.input_dim == view.spec.input_dim,
               "adapt: model input_dim ", source_model.spec.input_dim, " != task input_dim ",
               view.spec.input_dim);
  SSHT_REQUIRE(source_model.spec.num_classes == view.spec.num_classes, "adapt: model has ",
               source_model.spec.num_classes, " classes, task has ", view.spec.num_classes);

  const AugmentPolicy policy = config.augment.value_or(default_augment_policy(view.spec));
  policy.validate();

  RunReport report;
  report.config = config;
  report.augment = policy;

  const std::size_t labeled_batch = config.labeled_batch == 0
                                        ? std::min(view.labeled.size(), config.unlabeled_batch)
                                        : config.labeled_batch;
  report.config.labeled_batch = labeled_batch;
  BatchSampler sampler(view.labeled.size(), view.unlabeled.rows(), labeled_batch,
                       config.unlabeled_batch, make_rng(config.seed, Stream::kBatching));
  Rng labeled_rng = make_rng(config.seed, Stream::kLabeledAug);
  Rng weak_rng = make_rng(config.seed, Stream::kWeakAug);
  Rng strong_rng = make_rng(config.seed, Stream::kStrongAug);

  Network net = source_model;
  net.info["adapted_method"] = to_string(config.method);
  net.info["adapt_seed"] = std::to_string(config.seed);
  SgdState state = SgdState::for_network(net, config.sgd);
  if (config.freeze_classifier) {
    state.trainable.assign(net.params.size(), true);
    for (std::size_t t = 0; t < net.params.size(); ++t)
      if (net.is_classifier_param(t)) state.trainable[t] = false;
  }

  const double w_u = config.uses_consistency() || config.method == Method::kEnt ? config.lambda_u : 0.0;
  const double w_d = config.uses_diversity() ? config.lambda_d : 0.0;
  const std::size_t steps = sampler.steps_per_epoch();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const Network epoch_start = net;
    bool aborted = false;
    for (std::size_t step = 0; step < steps; ++step) {
      const BatchIndices b = sampler.next();
      const LabeledSet lab = gather(view.labeled, b.labeled);
      const Matrix xl = config.labeled_aug == LabeledAug::kWeak
                            ? weak_augment_batch(lab.x, policy, labeled_rng)
                            : lab.x;
      const Tape tape_l = forward_tape(net, xl);
      ++report.passes.labeled;
      const LossValue l_c = classification_loss(softmax_rows(tape_l.logits), lab.y);
      std::map<Pass, const Tape*> tapes{{Pass::kLabeledWeak, &tape_l}};

      LossValue l_u, l_d;
      double mask_rate = 0.0;
      Tape tape_w, tape_s;
      if (config.uses_unlabeled()) {
        const Matrix xu = gather_rows(view.unlabeled, b.unlabeled);
        tape_w = forward_tape(net, weak_augment_batch(xu, policy, weak_rng));
        ++report.passes.unlabeled_weak;
        tapes.emplace(Pass::kUnlabeledWeak, &tape_w);
        const Matrix p_w = softmax_rows(tape_w.logits);
        mask_rate = detail::mask_rate_of(p_w, config.tau);
        if (config.uses_strong()) {
          tape_s = forward_tape(net, strong_augment_batch(xu, policy, strong_rng));
          ++report.passes.unlabeled_strong;
          tapes.emplace(Pass::kUnlabeledStrong, &tape_s);
          const Matrix p_s = softmax_rows(tape_s.logits);
          if (config.uses_consistency()) l_u = consistency_loss(p_w, p_s, config.tau).loss;
          if (config.uses_diversity()) l_d = diversity_loss(p_w, p_s);
        } else {
          l_u = entropy_loss(p_w);
        }
      }

      const LossValue total = combine({{&l_c, 1.0}, {&l_u, w_u}, {&l_d, w_d}});
      report.log_clamps += total.clamped;
      if (!std::isfinite(total.value)) {
        report.status = detail::concat("aborted: non-finite loss at epoch ", epoch, " step ", step);
        aborted = true;
        break;
      }
      try {
        sgd_step(net, detail::accumulate_backward(net, total, tapes), state);
      } catch (const NumericalError& e) {
        report.status = std::string("aborted: ") + e.what();
        aborted = true;
        break;
      }
      rec.l_c += l_c.value;
      rec.l_u += l_u.value;
      rec.l_d += l_d.value;
      rec.total += total.value;
      rec.mask_rate += mask_rate;
    }
    if (aborted) {
      net = epoch_start;
      break;
    }
    const double n = static_cast<double>(steps);
    rec.l_c /= n;
    rec.l_u /= n;
    rec.l_d /= n;
    rec.total /= n;
    rec.mask_rate /= n;
    rec.train_accuracy = evaluate(net, view.labeled).accuracy;
    rec.test_accuracy = evaluate(net, view.test).accuracy;
    Rng eval_rng = make_rng(config.seed, Stream::kEval, epoch);
    rec.diversity_ratio =
        aggregate_diversity(net, view.test.x, view.test.y,
                            std::min(config.diversity_batch, view.test.size()),
                            config.diversity_batches, eval_rng);
    report.epochs.push_back(rec);
  }

  report.final_eval = evaluate(net, view.test);
  report.model_fingerprint = model_fingerprint(net);
  return {std::move(report), std::move(net)};
}

inline AdaptResult adapt(const Network& source_model, const DomainTask& task,
                         const AdaptConfig& config) {
  return adapt(source_model, task.adaptation_view(), config);
}

// Ablations.

struct AblationCell {
  Method method = Method::kCdl;
  std::uint64_t seed = 0;
  std::optional<RunReport> report;
  std::string error;
  double final_accuracy = 0.0;
  /// Mean diversity ratio on D^u (private labels, evaluation only).
  double diversity_ratio = 0.0;
  /// Recall of the rarest source class on the target test split.
  double minority_recall = 0.0;
  double majority_recall = 0.0;

  bool ok() const { return report && report->ok() && error.empty(); }
};

struct MethodSummary {
  Method method = Method::kCdl;
  std::size_t runs = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_diversity = 0.0;
  double std_diversity = 0.0;
  double mean_minority_recall = 0.0;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  std::vector<MethodSummary> summary;

  const MethodSummary& of(Method m) const {
    for (const auto& s : summary)
      if (s.method == m) return s;
    throw ValidationError("method " + to_string(m) + " not in ablation table");
  }
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

inline AblationCell run_cell(const DomainTask& task, const Network& model, AdaptConfig cfg,
                             Method method, std::uint64_t seed) {
  AblationCell cell;
  cell.method = method;
  cell.seed = seed;
  cfg.method = method;
  cfg.seed = seed;
  try {
    AdaptResult r = adapt(model, task, cfg);
    cell.final_accuracy = r.report.final_eval.accuracy;
    cell.minority_recall = r.report.final_eval.per_class_accuracy.back();
    cell.majority_recall = r.report.final_eval.per_class_accuracy.front();
    Rng div_rng = make_rng(seed, Stream::kEval, 0);
    cell.diversity_ratio = aggregate_diversity(r.model, task, std::min(cfg.diversity_batch, task.sizes().unlabeled),
                                               cfg.diversity_batches, div_rng);
    cell.report = std::move(r.report);
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

inline void summarize(AblationTable& table, const std::vector<Method>& methods) {
  for (Method m : methods) {
    if (std::any_of(table.summary.begin(), table.summary.end(),
                    [m](const MethodSummary& s) { return s.method == m; }))
      continue;
    std::vector<double> acc, div, minority;
    for (const auto& c : table.cells)
      if (c.method == m && c.ok()) {
        acc.push_back(c.final_accuracy);
        div.push_back(c.diversity_ratio);
        minority.push_back(c.minority_recall);
      }
    MethodSummary s;
    s.method = m;
    s.runs = acc.size();
    std::tie(s.mean_accuracy, s.std_accuracy) = mean_std(acc);
    std::tie(s.mean_diversity, s.std_diversity) = mean_std(div);
    s.mean_minority_recall = mean_std(minority).first;
    table.summary.push_back(s);
  }
}

}  // namespace detail

/// Every (method, seed) cell adapts the same source model. Cells are
/// independent; `jobs` > 1 runs them concurrently, results keep input order.
inline AblationTable run_ablation_suite(const DomainTask& task, const Network& model,
                                        const AdaptConfig& base, const std::vector<Method>& methods,
                                        const std::vector<std::uint64_t>& seeds,
                                        std::size_t jobs = 1) {
  SSHT_REQUIRE(!methods.empty() && !seeds.empty(), "ablation needs at least one method and seed");
  std::vector<std::pair<Method, std::uint64_t>> work;
  for (Method m : methods)
    for (auto s : seeds) work.emplace_back(m, s);

  AblationTable table;
  table.cells.resize(work.size());
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < work.size(); start += jobs) {
    const std::size_t end = std::min(start + jobs, work.size());
    if (jobs == 1) {
      table.cells[start] = detail::run_cell(task, model, base, work[start].first, work[start].second);
      continue;
    }
    std::vector<std::future<AblationCell>> futures;
    for (std::size_t i = start; i < end; ++i)
      futures.push_back(std::async(std::launch::async, detail::run_cell, std::cref(task),
                                   std::cref(model), base, work[i].first, work[i].second));
    for (std::size_t i = start; i < end; ++i) table.cells[i] = futures[i - start].get();
  }

  detail::summarize(table, methods);
  return table;
}

/// Paired-seed study: seed s generates its own task, trains its own source
/// model and adapts it with every method, all from seed s.
inline AblationTable run_paired_study(const DomainShiftSpec& spec, const TaskSizes& sizes,
                                      const NetworkSpec& net_spec, const SourceTrainConfig& source_cfg,
                                      const AdaptConfig& base, const std::vector<Method>& methods,
                                      const std::vector<std::uint64_t>& seeds,
                                      std::size_t jobs = 1) {
  SSHT_REQUIRE(!methods.empty() && !seeds.empty(), "study needs at least one method and seed");
  const auto one_seed = [&](std::uint64_t seed) {
    const DomainTask task = generate_task(spec, sizes, seed);
    SourceTrainConfig cfg = source_cfg;
    cfg.seed = seed;
    const Network model = train_source(task, net_spec, cfg);
    return run_ablation_suite(task, model, base, methods, {seed});
  };
  std::vector<AblationTable> per_seed(seeds.size());
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < seeds.size(); start += jobs) {
    const std::size_t end = std::min(start + jobs, seeds.size());
    std::vector<std::future<AblationTable>> futures;
    for (std::size_t i = start; i < end; ++i)
      futures.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                   one_seed, seeds[i]));
    for (std::size_t i = start; i < end; ++i) per_seed[i] = futures[i - start].get();
  }
  // Method-major order, matching run_ablation_suite.
  AblationTable table;
  for (Method m : methods)
    for (const auto& t : per_seed)
      for (const auto& c : t.cells)
        if (c.method == m) table.cells.push_back(c);
  detail::summarize(table, methods);
  return table;
}

}  // namespace ssht
