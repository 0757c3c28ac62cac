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

// Command-line front end. cli_main() is the whole program; tools/ssht.cpp
// only forwards argv to it.
//
// Exit codes: 0 success, 1 runtime or file error, 2 usage error,
// 3 self-check failure.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssht/data_io.hpp"
#include "ssht/gradcheck.hpp"
#include "ssht/metrics.hpp"
#include "ssht/model_io.hpp"
#include "ssht/pipeline.hpp"
#include "ssht/propcheck.hpp"
#include "ssht/report.hpp"

namespace ssht {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitCheckFailed = 3 };

namespace cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct TaskFlags {
  DomainShiftSpec spec;
  TaskSizes sizes;
  std::string geometry = to_string(DomainShiftSpec{}.geometry);
  double rotation_deg = 30.0;
  std::vector<double> translation;

  void add(CLI::App* app) {
    app->add_option("--num-classes", spec.num_classes, "Number of classes C")->capture_default_str();
    app->add_option("--input-dim", spec.input_dim, "Input dimension")->capture_default_str();
    app->add_option("--geometry", geometry, "gaussian_ring or two_moons_multi")->capture_default_str();
    app->add_option("--ring-radius", spec.ring_radius, "Radius of the class layout")->capture_default_str();
    app->add_option("--rotation-deg", rotation_deg, "Target rotation in degrees")->capture_default_str();
    app->add_option("--translation", translation, "Target translation (input_dim values)")
        ->delimiter(',');
    app->add_option("--shift-scale", spec.shift_scale, "Target scale")->capture_default_str();
    app->add_option("--imbalance", spec.source_imbalance_ratio, "Source majority:minority ratio")
        ->capture_default_str();
    app->add_option("--noise", spec.noise_std, "Per-coordinate noise std")->capture_default_str();
    app->add_option("--source-size", sizes.source, "Source samples")->capture_default_str();
    app->add_option("--shots", sizes.shots, "Labeled target samples per class")->capture_default_str();
    app->add_option("--unlabeled", sizes.unlabeled, "Unlabeled target samples")->capture_default_str();
    app->add_option("--test", sizes.test, "Target test samples")->capture_default_str();
  }

  void resolve() {
    spec.geometry = parse_geometry(geometry);
    spec.shift_rotation = rotation_deg * std::numbers::pi / 180.0;
    if (!translation.empty()) {
      spec.shift_translation = translation;
    } else {
      spec.shift_translation.assign(spec.input_dim, 0.0);
      spec.shift_translation[0] = 0.5;
      if (spec.input_dim > 1) spec.shift_translation[1] = -0.5;
    }
    spec.validate();
  }
};

struct NetFlags {
  NetworkSpec spec;
  std::string hidden = "64,64";
  std::string activation = "tanh";
  SourceTrainConfig train;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "Hidden widths, comma separated")->capture_default_str();
    app->add_option("--feature-dim", spec.feature_dim, "Feature width")->capture_default_str();
    app->add_option("--activation", activation, "tanh or relu")->capture_default_str();
    app->add_option("--epochs", train.epochs, "Source training epochs")->capture_default_str();
    app->add_option("--batch", train.batch, "Source batch size")->capture_default_str();
    app->add_option("--lr", train.sgd.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--momentum", train.sgd.momentum, "Momentum")->capture_default_str();
    app->add_option("--weight-decay", train.sgd.weight_decay, "Weight decay")->capture_default_str();
  }

  void resolve(const DomainShiftSpec& task) {
    spec.hidden_dims.clear();
    for (const auto& h : split_list(hidden)) spec.hidden_dims.push_back(std::stoul(h));
    spec.activation = parse_activation(activation);
    spec.input_dim = task.input_dim;
    spec.num_classes = task.num_classes;
    spec.validate();
  }
};

struct AdaptFlags {
  AdaptConfig cfg;
  std::string method = "cdl";
  std::string labeled_aug = "weak";
  bool no_nesterov = false;

  void add(CLI::App* app, bool with_method) {
    if (with_method)
      app->add_option("--method", method, "cdl, cdl_no_cl, cdl_no_dl, s_plus_t or ent")
          ->capture_default_str();
    app->add_option("--tau", cfg.tau, "Confidence threshold")->capture_default_str();
    app->add_option("--lambda-u", cfg.lambda_u, "Consistency (or entropy) weight")->capture_default_str();
    app->add_option("--lambda-d", cfg.lambda_d, "Diversity weight")->capture_default_str();
    app->add_option("--lr", cfg.sgd.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--momentum", cfg.sgd.momentum, "Momentum")->capture_default_str();
    app->add_flag("--no-nesterov", no_nesterov, "Plain momentum instead of Nesterov");
    app->add_option("--weight-decay", cfg.sgd.weight_decay, "Weight decay")->capture_default_str();
    app->add_option("--labeled-batch", cfg.labeled_batch, "Labeled batch (0 = min(|D^x|, B_u))")
        ->capture_default_str();
    app->add_option("--unlabeled-batch", cfg.unlabeled_batch, "Unlabeled batch")->capture_default_str();
    app->add_option("--epochs", cfg.epochs, "Adaptation epochs")->capture_default_str();
    app->add_flag("--freeze-classifier", cfg.freeze_classifier, "Keep the classifier fixed");
    app->add_option("--labeled-aug", labeled_aug, "none or weak")->capture_default_str();
    app->add_option("--diversity-batch", cfg.diversity_batch, "Diversity batch size")
        ->capture_default_str();
    app->add_option("--diversity-batches", cfg.diversity_batches, "Diversity batches")
        ->capture_default_str();
  }

  void resolve() {
    cfg.method = parse_method(method);
    cfg.labeled_aug = parse_labeled_aug(labeled_aug);
    cfg.sgd.nesterov = !no_nesterov;
    cfg.validate();
  }
};

inline std::vector<Method> parse_methods(const std::string& s) {
  std::vector<Method> out;
  for (const auto& m : split_list(s)) out.push_back(parse_method(m));
  if (out.empty()) throw ValidationError("--methods is empty");
  return out;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& v : split_list(s)) {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw ValidationError("bad seed '" + v + "'");
    out.push_back(n);
  }
  if (out.empty()) throw ValidationError("--seeds is empty");
  return out;
}

inline void print_suites(const std::vector<SuiteResult>& suites, std::ostream& out) {
  for (const auto& s : suites) {
    out << (s.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << s.name
        << " max_err=" << std::setprecision(3) << std::scientific << s.max_error
        << " tol=" << s.tolerance << std::defaultfloat << " checks=" << s.checks;
    if (!s.note.empty()) out << "  (" << s.note << ")";
    out << "\n";
  }
}

inline void print_table(const AblationTable& t, std::ostream& out) {
  out << "method       runs  mean_acc  std_acc   diversity  minority_recall\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& s : t.summary)
    out << std::left << std::setw(12) << to_string(s.method) << " " << std::setw(5) << s.runs
        << " " << std::setw(9) << s.mean_accuracy << " " << std::setw(9) << s.std_accuracy << " "
        << std::setw(10) << s.mean_diversity << " " << s.mean_minority_recall << "\n";
  out << std::defaultfloat;
}

inline std::filesystem::path summary_path(const std::filesystem::path& table_csv) {
  auto p = table_csv;
  p.replace_extension(".summary.csv");
  return p;
}

}  // namespace cli

/// Runs the tool. `out` receives results, `err` diagnostics.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Source-free semi-supervised adaptation on synthetic shifted domains", "ssht"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a source/target task file");
  cli::TaskFlags gen_task;
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  gen_task.add(gen);
  gen->add_option("--out", gen_out, "Output data file")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();

  // train-source
  auto* train = app.add_subcommand("train-source", "Train the source model on D^s");
  cli::NetFlags train_net;
  std::string train_data, train_out;
  std::uint64_t train_seed = 0;
  train_net.add(train);
  train->add_option("--data", train_data, "Data file")->required();
  train->add_option("--out", train_out, "Output model file")->required();
  train->add_option("--seed", train_seed, "Seed")->required();

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt a source model without source data");
  cli::AdaptFlags adapt_flags;
  std::string adapt_model, adapt_data, adapt_out, adapt_report;
  adapt_flags.add(adapt_cmd, true);
  adapt_cmd->add_option("--model", adapt_model, "Source model file")->required();
  adapt_cmd->add_option("--data", adapt_data, "Data file")->required();
  adapt_cmd->add_option("--out", adapt_out, "Output model file")->required();
  adapt_cmd->add_option("--report", adapt_report, "Report file (CSV sidecar alongside)")->required();
  adapt_cmd->add_option("--seed", adapt_flags.cfg.seed, "Seed")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a model on the target test split");
  std::string eval_model, eval_data, eval_out;
  std::uint64_t eval_seed = 0;
  std::size_t eval_div_batch = 48, eval_div_batches = 50;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "Data file")->required();
  eval_cmd->add_option("--out", eval_out, "Optional JSON metrics file");
  eval_cmd->add_option("--diversity-seed", eval_seed, "Seed for diversity batches")
      ->capture_default_str();
  eval_cmd->add_option("--diversity-batch", eval_div_batch, "Diversity batch size")
      ->capture_default_str();
  eval_cmd->add_option("--diversity-batches", eval_div_batches, "Diversity batches")
      ->capture_default_str();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run every method over every seed");
  cli::AdaptFlags ablate_flags;
  cli::TaskFlags ablate_task;
  cli::NetFlags ablate_net;
  std::string ablate_model, ablate_data, ablate_out, ablate_methods = "cdl,cdl_no_cl,cdl_no_dl,s_plus_t,ent";
  std::string ablate_seeds;
  std::size_t ablate_jobs = 1;
  bool paired = false;
  ablate_flags.add(ablate, false);
  ablate->add_option("--model", ablate_model, "Source model file (shared by all cells)");
  ablate->add_option("--data", ablate_data, "Data file");
  ablate->add_option("--out", ablate_out, "Output CSV (summary beside it)")->required();
  ablate->add_option("--methods", ablate_methods, "Comma-separated methods")->capture_default_str();
  ablate->add_option("--seed,--seeds", ablate_seeds, "Comma-separated seeds")->required();
  ablate->add_option("--jobs", ablate_jobs, "Concurrent cells")->capture_default_str();
  ablate->add_flag("--paired", paired,
                   "Each seed generates its own task and source model (task flags apply; "
                   "--data, if given, supplies the task spec)");
  ablate_task.add(ablate);
  ablate->add_option("--hidden", ablate_net.hidden, "Hidden widths (paired)")->capture_default_str();
  ablate->add_option("--feature-dim", ablate_net.spec.feature_dim, "Feature width (paired)")
      ->capture_default_str();
  ablate->add_option("--source-epochs", ablate_net.train.epochs, "Source epochs (paired)")
      ->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  bool gc_props = false;
  std::uint64_t gc_seed = GradcheckOptions{}.seed;
  gc->add_flag("--with-properties", gc_props, "Also run the SVD, nuclear-norm and masking suites");
  gc->add_option("--seed", gc_seed, "Seed for random instances")->capture_default_str();

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  // Flag values are checked before any file is touched; failures are usage errors.
  const auto usage_checked = [&](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      throw cli::UsageError(e.what());
    } catch (const std::invalid_argument& e) {
      throw cli::UsageError(std::string("bad value: ") + e.what());
    }
  };

  try {
    if (*version) {
      out << "ssht " << kVersion << "\n";
      return kExitOk;
    }

    if (*gen) {
      usage_checked([&] {
        gen_task.resolve();
        SSHT_REQUIRE(gen_task.sizes.shots >= 1, "--shots must be at least 1");
        const std::size_t n_labeled = gen_task.sizes.shots * gen_task.spec.num_classes;
        SSHT_REQUIRE(gen_task.sizes.unlabeled >= 20 * n_labeled, "--unlabeled (",
                     gen_task.sizes.unlabeled, ") must be at least 20x the labeled set (",
                     n_labeled, ")");
      });
      const DomainTask task = generate_task(gen_task.spec, gen_task.sizes, gen_seed);
      save_task(task, gen_out);
      out << "wrote " << gen_out << ": " << task.sizes().source << " source, "
          << task.target_labeled().size() << " labeled, " << task.unlabeled_inputs().rows()
          << " unlabeled, " << task.target_test().size() << " test\n";
      return kExitOk;
    }

    if (*train) {
      DomainTask task = load_task(train_data);
      usage_checked([&] { train_net.resolve(task.spec()); });
      train_net.train.seed = train_seed;
      const Network net = train_source(task, train_net.spec, train_net.train);
      save_model(net, train_out);
      out << "wrote " << train_out << ": source validation accuracy "
          << net.info.at("source_val_accuracy") << " (epoch " << net.info.at("source_best_epoch")
          << "), target test accuracy " << format_double(evaluate(net, task.target_test()).accuracy)
          << "\n";
      return kExitOk;
    }

    if (*adapt_cmd) {
      usage_checked([&] { adapt_flags.resolve(); });
      const Network model = load_model(adapt_model);
      const DomainTask task = load_task(adapt_data);
      const AdaptResult r = adapt(model, task, adapt_flags.cfg);
      save_model(r.model, adapt_out);
      write_report(r.report, adapt_report);
      out << "method " << to_string(r.report.config.method) << ", status " << r.report.status
          << ", final test accuracy " << format_double(r.report.final_eval.accuracy) << "\n";
      if (!r.report.ok()) {
        err << "ssht: adaptation " << r.report.status << "\n";
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      const Network model = load_model(eval_model);
      const DomainTask task = load_task(eval_data);
      const Evaluation e = evaluate(model, task.target_test());
      Rng rng = make_rng(eval_seed, Stream::kEval, 0);
      const double div = aggregate_diversity(
          model, task, std::min(eval_div_batch, task.sizes().unlabeled), eval_div_batches, rng);
      out << "test accuracy " << format_double(e.accuracy) << "\n";
      out << "per-class recall";
      for (double a : e.per_class_accuracy) out << " " << format_double(a);
      out << "\nunlabeled diversity ratio " << format_double(div) << "\n";
      if (!eval_out.empty()) {
        const nlohmann::json doc = {{"accuracy", e.accuracy},
                                    {"per_class_accuracy", e.per_class_accuracy},
                                    {"confusion", e.confusion},
                                    {"unlabeled_diversity_ratio", div}};
        write_file_atomic(eval_out, doc.dump(1) + "\n");
      }
      return kExitOk;
    }

    if (*ablate) {
      std::vector<Method> methods;
      std::vector<std::uint64_t> seeds;
      usage_checked([&] {
        ablate_flags.resolve();
        methods = cli::parse_methods(ablate_methods);
        seeds = cli::parse_seeds(ablate_seeds);
        if (!paired && (ablate_model.empty() || ablate_data.empty()))
          throw ValidationError("ablate needs --model and --data, or --paired");
        if (paired && !ablate_model.empty())
          throw ValidationError("--paired trains its own source models; drop --model");
        if (paired && ablate_data.empty()) ablate_task.resolve();
      });
      AblationTable table;
      if (paired) {
        DomainShiftSpec spec = ablate_task.spec;
        TaskSizes sizes = ablate_task.sizes;
        if (!ablate_data.empty()) {
          const DomainTask t = load_task(ablate_data);
          spec = t.spec();
          sizes = t.sizes();
        }
        usage_checked([&] { ablate_net.resolve(spec); });
        table = run_paired_study(spec, sizes, ablate_net.spec, ablate_net.train, ablate_flags.cfg,
                                 methods, seeds, ablate_jobs);
      } else {
        const Network model = load_model(ablate_model);
        const DomainTask task = load_task(ablate_data);
        table = run_ablation_suite(task, model, ablate_flags.cfg, methods, seeds, ablate_jobs);
      }
      write_file_atomic(ablate_out, ablation_csv(table));
      write_file_atomic(cli::summary_path(ablate_out), ablation_summary_csv(table));
      cli::print_table(table, out);
      std::size_t failed = 0;
      for (const auto& c : table.cells) failed += !c.ok();
      if (failed > 0) {
        err << "ssht: " << failed << " ablation cells did not finish cleanly\n";
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (*gc) {
      GradcheckOptions opt;
      opt.seed = gc_seed;
      auto suites = run_gradient_suites(opt);
      if (gc_props) {
        suites.push_back(check_svd_suite(gc_seed + 1));
        suites.push_back(check_nuclear_norm_suite(1000, gc_seed + 2));
        suites.push_back(check_masking_suite(gc_seed + 3));
      }
      cli::print_suites(suites, out);
      const bool ok = std::all_of(suites.begin(), suites.end(),
                                  [](const SuiteResult& s) { return s.passed; });
      return ok ? kExitOk : kExitCheckFailed;
    }
  } catch (const cli::UsageError& e) {
    err << "ssht: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "ssht: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ssht
