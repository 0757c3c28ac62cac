#include <gtest/gtest.h>

#include "ssht/model_io.hpp"
#include "ssht/pipeline.hpp"
#include "test_support.hpp"

namespace ssht {
namespace {

using testing::small_config;
using testing::small_model;
using testing::small_net;
using testing::small_sizes;
using testing::small_task;

TEST(TrainSource, Deterministic) {
  SourceTrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 2;
  const Network a = train_source(small_task(), small_net(), cfg);
  const Network b = train_source(small_task(), small_net(), cfg);
  EXPECT_EQ(serialize(a), serialize(b));
}

TEST(TrainSource, LearnsUnshiftedBalancedRing) {
  DomainShiftSpec spec;
  spec.geometry = ClassGeometry::kGaussianRing;
  spec.noise_std = 0.5;
  spec.shift_rotation = 0.0;
  spec.shift_translation = {0.0, 0.0};
  spec.shift_scale = 1.0;
  spec.source_imbalance_ratio = 1.0;
  const DomainTask task = generate_task(spec, TaskSizes{1000, 1, 80, 400}, 3);
  SourceTrainConfig cfg;
  cfg.seed = 3;
  const Network net = train_source(task, small_net(), cfg);
  EXPECT_GE(evaluate(net, task.target_test()).accuracy, 0.95);
}

TEST(TrainSource, ImbalanceHurtsMinority) {
  // No covariate shift, so only the source class imbalance separates classes.
  DomainShiftSpec spec;
  spec.shift_rotation = 0.0;
  spec.shift_translation = {0.0, 0.0};
  spec.shift_scale = 1.0;
  const DomainTask task = generate_task(spec, TaskSizes{2000, 1, 80, 1000}, 4);
  SourceTrainConfig cfg;
  cfg.seed = 4;
  const auto e = evaluate(train_source(task, small_net(), cfg), task.target_test());
  EXPECT_LT(e.per_class_accuracy.back(), e.per_class_accuracy.front());
}

TEST(TrainSource, ReadsSourceOnly) {
  const DomainTask task = generate_task(DomainShiftSpec{}, small_sizes(), 5);
  SourceTrainConfig cfg;
  cfg.epochs = 1;
  (void)train_source(task, small_net(), cfg);
  EXPECT_EQ(task.access_log().source_reads, 1u);
  EXPECT_EQ(task.access_log().unlabeled_label_reads, 0u);
}

TEST(Adapt, SourcePlusTargetSkipsUnlabeledPasses) {
  const auto r = adapt(small_model(), small_task(), small_config(Method::kSPlusT)).report;
  ASSERT_TRUE(r.ok()) << r.status;
  EXPECT_EQ(r.passes.unlabeled_weak, 0u);
  EXPECT_EQ(r.passes.unlabeled_strong, 0u);
  EXPECT_EQ(r.passes.labeled, 3u * 5u);  // 160 / 32 steps per epoch
}

TEST(Adapt, PassCountsPerMethod) {
  const auto ent = adapt(small_model(), small_task(), small_config(Method::kEnt)).report;
  EXPECT_EQ(ent.passes.unlabeled_weak, 15u);
  EXPECT_EQ(ent.passes.unlabeled_strong, 0u);
  const auto cdl = adapt(small_model(), small_task(), small_config(Method::kCdl)).report;
  EXPECT_EQ(cdl.passes.unlabeled_weak, 15u);
  EXPECT_EQ(cdl.passes.unlabeled_strong, 15u);
}

TEST(Adapt, NeverReadsSourceOrPrivateLabels) {
  const DomainTask& task = small_task();
  (void)small_model();
  for (Method m : {Method::kCdl, Method::kCdlNoDl, Method::kCdlNoCl, Method::kSPlusT, Method::kEnt}) {
    task.reset_access_log();
    (void)adapt(small_model(), task, small_config(m));
    EXPECT_EQ(task.access_log().source_reads, 0u) << to_string(m);
    EXPECT_EQ(task.access_log().unlabeled_label_reads, 0u) << to_string(m);
  }
}

TEST(Adapt, HighThresholdMasksAlmostEverything) {
  AdaptConfig cfg = small_config(Method::kCdlNoDl);
  cfg.tau = 0.9999;
  cfg.epochs = 1;
  const auto r = adapt(small_model(), small_task(), cfg).report;
  ASSERT_EQ(r.epochs.size(), 1u);
  EXPECT_LT(r.epochs[0].mask_rate, 0.2);
  EXPECT_LT(r.epochs[0].l_u, 0.05);
}

TEST(Adapt, FreezeClassifierKeepsHead) {
  AdaptConfig cfg = small_config(Method::kCdl);
  cfg.freeze_classifier = true;
  const Network& src = small_model();
  const Network out = adapt(src, small_task(), cfg).model;
  for (std::size_t t = 0; t < src.params.size(); ++t) {
    if (src.is_classifier_param(t))
      EXPECT_EQ(out.params[t], src.params[t]) << src.param_name(t);
    else
      EXPECT_NE(out.params[t], src.params[t]) << src.param_name(t);
  }
}

TEST(Adapt, RejectsDimensionMismatch) {
  NetworkSpec spec = small_net();
  spec.num_classes = 3;
  EXPECT_THROW(adapt(init_network(spec, 1), small_task(), small_config(Method::kCdl)),
               ValidationError);
  spec = small_net();
  spec.input_dim = 3;
  EXPECT_THROW(adapt(init_network(spec, 1), small_task(), small_config(Method::kCdl)),
               ValidationError);
}

TEST(Adapt, RejectsBadConfig) {
  AdaptConfig cfg = small_config(Method::kCdl);
  cfg.tau = 0.0;
  EXPECT_THROW(adapt(small_model(), small_task(), cfg), ValidationError);
  cfg = small_config(Method::kCdl);
  cfg.labeled_batch = 100;
  EXPECT_THROW(adapt(small_model(), small_task(), cfg), ValidationError);
}

TEST(Adapt, BitExactAcrossRuns) {
  const auto a = adapt(small_model(), small_task(), small_config(Method::kCdl, 4));
  const auto b = adapt(small_model(), small_task(), small_config(Method::kCdl, 4));
  EXPECT_EQ(serialize(a.model), serialize(b.model));
  EXPECT_EQ(a.report.model_fingerprint, b.report.model_fingerprint);
  const auto c = adapt(small_model(), small_task(), small_config(Method::kCdl, 5));
  EXPECT_NE(a.report.model_fingerprint, c.report.model_fingerprint);
}

TEST(Adapt, ZeroWeightsReduceToSourcePlusTarget) {
  AdaptConfig cdl = small_config(Method::kCdl);
  cdl.lambda_u = 0.0;
  cdl.lambda_d = 0.0;
  const auto a = adapt(small_model(), small_task(), cdl);
  const auto b = adapt(small_model(), small_task(), small_config(Method::kSPlusT));
  for (std::size_t t = 0; t < a.model.params.size(); ++t)
    EXPECT_LT(max_abs_diff(a.model.params[t], b.model.params[t]), 1e-12);
  EXPECT_EQ(a.report.final_eval.accuracy, b.report.final_eval.accuracy);
}

TEST(Adapt, ReportsLabeledBatchResolution) {
  const auto r = adapt(small_model(), small_task(), small_config(Method::kCdl)).report;
  EXPECT_EQ(r.config.labeled_batch, 8u);  // min(|D^x| = 8, 32)
  EXPECT_EQ(r.epochs.size(), 3u);
  for (const auto& e : r.epochs) {
    EXPECT_GE(e.mask_rate, 0.0);
    EXPECT_LE(e.mask_rate, 1.0);
    EXPECT_GT(e.diversity_ratio, 0.0);
  }
}

TEST(Ablation, SingleCellMatchesDirectAdapt) {
  const AdaptConfig base = small_config(Method::kCdl);
  const auto t = run_ablation_suite(small_task(), small_model(), base, {Method::kCdlNoCl}, {9});
  ASSERT_EQ(t.cells.size(), 1u);
  ASSERT_TRUE(t.cells[0].ok());
  AdaptConfig direct = base;
  direct.method = Method::kCdlNoCl;
  direct.seed = 9;
  const auto r = adapt(small_model(), small_task(), direct).report;
  EXPECT_EQ(t.cells[0].report->model_fingerprint, r.model_fingerprint);
  EXPECT_EQ(t.cells[0].final_accuracy, r.final_eval.accuracy);
  EXPECT_EQ(t.of(Method::kCdlNoCl).runs, 1u);
}

TEST(Ablation, DuplicateMethodRowsIdentical) {
  const auto t = run_ablation_suite(small_task(), small_model(), small_config(Method::kCdl),
                                    {Method::kCdl, Method::kCdl}, {1});
  ASSERT_EQ(t.cells.size(), 2u);
  EXPECT_EQ(t.cells[0].report->model_fingerprint, t.cells[1].report->model_fingerprint);
  EXPECT_EQ(t.summary.size(), 1u);
}

TEST(Ablation, ParallelMatchesSerial) {
  const std::vector<Method> methods{Method::kCdl, Method::kSPlusT};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto a = run_ablation_suite(small_task(), small_model(), small_config(Method::kCdl),
                                    methods, seeds, 1);
  const auto b = run_ablation_suite(small_task(), small_model(), small_config(Method::kCdl),
                                    methods, seeds, 4);
  ASSERT_EQ(a.cells.size(), 6u);
  ASSERT_EQ(b.cells.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.cells[i].method, b.cells[i].method);
    EXPECT_EQ(a.cells[i].seed, b.cells[i].seed);
    EXPECT_EQ(a.cells[i].report->model_fingerprint, b.cells[i].report->model_fingerprint);
    EXPECT_EQ(a.cells[i].diversity_ratio, b.cells[i].diversity_ratio);
  }
  EXPECT_EQ(a.cells[0].method, Method::kCdl);
  EXPECT_EQ(a.cells[3].method, Method::kSPlusT);
}

TEST(Ablation, SummaryStatistics) {
  const auto t = run_ablation_suite(small_task(), small_model(), small_config(Method::kCdl),
                                    {Method::kSPlusT}, {1, 2, 3});
  const auto& s = t.of(Method::kSPlusT);
  EXPECT_EQ(s.runs, 3u);
  double mean = 0.0;
  for (const auto& c : t.cells) mean += c.final_accuracy / 3.0;
  EXPECT_NEAR(s.mean_accuracy, mean, 1e-15);
  EXPECT_THROW(t.of(Method::kEnt), ValidationError);
}

TEST(PairedStudy, ParallelMatchesSerial) {
  SourceTrainConfig src;
  src.epochs = 3;
  const auto run = [&](std::size_t jobs) {
    return run_paired_study(DomainShiftSpec{}, small_sizes(), small_net(), src,
                            small_config(Method::kCdl), {Method::kCdl, Method::kSPlusT}, {1, 2},
                            jobs);
  };
  const auto a = run(1), b = run(2);
  ASSERT_EQ(a.cells.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(a.cells[i].report->model_fingerprint, b.cells[i].report->model_fingerprint);
  EXPECT_EQ(a.cells[1].method, Method::kCdl);
  EXPECT_EQ(a.cells[1].seed, 2u);
}

TEST(Parsing, MethodsAndAugmentation) {
  EXPECT_EQ(parse_method("cdl_no_dl"), Method::kCdlNoDl);
  EXPECT_THROW(parse_method("bogus_method"), ValidationError);
  EXPECT_EQ(parse_labeled_aug("none"), LabeledAug::kNone);
  EXPECT_THROW(parse_labeled_aug("strong"), ValidationError);
}

}  // namespace
}  // namespace ssht
