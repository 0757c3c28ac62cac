#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ssht/data_io.hpp"
#include "ssht/synthdata.hpp"

namespace ssht {
namespace {

DomainShiftSpec ring_spec() {
  DomainShiftSpec s;
  s.geometry = ClassGeometry::kGaussianRing;
  s.noise_std = 0.5;
  return s;
}

DomainShiftSpec unshifted(DomainShiftSpec s) {
  s.shift_rotation = 0.0;
  s.shift_translation.assign(s.input_dim, 0.0);
  s.shift_scale = 1.0;
  s.source_imbalance_ratio = 1.0;
  return s;
}

TEST(DomainShiftSpec, Validation) {
  DomainShiftSpec s;
  EXPECT_NO_THROW(s.validate());
  s.source_imbalance_ratio = 0.5;
  EXPECT_THROW(s.validate(), ValidationError);
  s = DomainShiftSpec{};
  s.noise_std = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = DomainShiftSpec{};
  s.shift_translation = {1.0};
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(DomainShiftSpec, ImbalanceSchedule) {
  const DomainShiftSpec s;
  EXPECT_DOUBLE_EQ(s.source_class_weight(0), 1.0);
  EXPECT_NEAR(s.source_class_weight(3), 0.1, 1e-15);
  EXPECT_NEAR(s.source_class_weight(1), std::pow(10.0, -1.0 / 3.0), 1e-15);
}

TEST(GenerateTask, SplitContract) {
  const DomainTask t = generate_task(DomainShiftSpec{}, TaskSizes{}, 1);
  const LabeledSet dx = t.target_labeled();
  ASSERT_EQ(dx.size(), 12u);
  std::vector<int> per_class(4, 0);
  for (int y : dx.y) ++per_class[y];
  EXPECT_EQ(per_class, (std::vector<int>{3, 3, 3, 3}));
  EXPECT_EQ(t.unlabeled_indices().size(), 1000u);
  EXPECT_EQ(t.test_indices().size(), 1000u);
  std::set<std::size_t> all;
  for (const auto* v : {&t.labeled_indices(), &t.unlabeled_indices(), &t.test_indices()})
    all.insert(v->begin(), v->end());
  EXPECT_EQ(all.size(), 2012u);
}

TEST(GenerateTask, DisjointForManySeeds) {
  TaskSizes sizes{200, 2, 200, 100};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DomainTask t = generate_task(ring_spec(), sizes, seed);
    std::set<std::size_t> all;
    for (const auto* v : {&t.labeled_indices(), &t.unlabeled_indices(), &t.test_indices()})
      all.insert(v->begin(), v->end());
    EXPECT_EQ(all.size(), 8u + 200u + 100u);
  }
}

TEST(GenerateTask, InfeasibleSizes) {
  EXPECT_THROW(generate_task(DomainShiftSpec{}, TaskSizes{100, 3, 100, 100}, 1), ValidationError);
  EXPECT_THROW(generate_task(DomainShiftSpec{}, TaskSizes{100, 0, 1000, 100}, 1), ValidationError);
}

TEST(GenerateTask, DeterministicPerSeed) {
  const auto a = serialize_task(generate_task(DomainShiftSpec{}, TaskSizes{}, 4));
  const auto b = serialize_task(generate_task(DomainShiftSpec{}, TaskSizes{}, 4));
  const auto c = serialize_task(generate_task(DomainShiftSpec{}, TaskSizes{}, 5));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(GenerateTask, SourceProportionsFollowImbalance) {
  const TaskSizes sizes{10000, 1, 80, 4};
  const DomainTask t = generate_task(DomainShiftSpec{}, sizes, 9);
  std::vector<double> count(4, 0.0);
  for (int y : t.raw_source().y) ++count[y];
  double z = 0.0;
  for (std::size_t c = 0; c < 4; ++c) z += t.spec().source_class_weight(c);
  for (std::size_t c = 0; c < 4; ++c) {
    const double p = t.spec().source_class_weight(c) / z;
    const double sigma = std::sqrt(10000.0 * p * (1 - p));
    EXPECT_NEAR(count[c], 10000.0 * p, 3.0 * sigma) << "class " << c;
  }
}

TEST(GenerateTask, NoShiftMeansSourceAndTargetAgree) {
  // Two-sample mean check per coordinate, pooled over 10 seeds.
  for (const auto& base : {ring_spec(), DomainShiftSpec{}}) {
    const DomainShiftSpec spec = unshifted(base);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const DomainTask t = generate_task(spec, TaskSizes{2000, 1, 1000, 1000}, seed);
      // Source is class-balanced here (rho = 1) but drawn multinomially; compare
      // per class so class-count noise does not enter.
      for (int c = 0; c < 4; ++c) {
        for (std::size_t d = 0; d < 2; ++d) {
          double s1 = 0, s2 = 0, q1 = 0, q2 = 0, n1 = 0, n2 = 0;
          const auto& src = t.raw_source();
          for (std::size_t i = 0; i < src.size(); ++i)
            if (src.y[i] == c) {
              s1 += src.x(i, d);
              q1 += src.x(i, d) * src.x(i, d);
              ++n1;
            }
          const auto& tgt = t.raw_target();
          for (std::size_t i = 0; i < tgt.size(); ++i)
            if (tgt.y[i] == c) {
              s2 += tgt.x(i, d);
              q2 += tgt.x(i, d) * tgt.x(i, d);
              ++n2;
            }
          const double m1 = s1 / n1, m2 = s2 / n2;
          const double v1 = q1 / n1 - m1 * m1, v2 = q2 / n2 - m2 * m2;
          // 4 sigma: 80 comparisons per geometry.
          EXPECT_LT(std::abs(m1 - m2), 4.0 * std::sqrt(v1 / n1 + v2 / n2))
              << "seed " << seed << " class " << c << " dim " << d;
        }
      }
    }
  }
}

TEST(GenerateTask, ShiftMovesTargetMeans) {
  const DomainShiftSpec spec = ring_spec();
  const auto means = target_class_means(spec);
  const DomainTask t = generate_task(spec, TaskSizes{200, 1, 4000, 100}, 2);
  const LabeledSet& tgt = t.raw_target();
  for (int c = 0; c < 4; ++c) {
    double sx = 0, sy = 0, n = 0;
    for (std::size_t i = 0; i < tgt.size(); ++i)
      if (tgt.y[i] == c) {
        sx += tgt.x(i, 0);
        sy += tgt.x(i, 1);
        ++n;
      }
    EXPECT_NEAR(sx / n, means[c][0], 4 * 0.5 / std::sqrt(n));
    EXPECT_NEAR(sy / n, means[c][1], 4 * 0.5 / std::sqrt(n));
  }
}

TEST(AccessLog, CountsSourceAndPrivateLabelReads) {
  const DomainTask t = generate_task(DomainShiftSpec{}, TaskSizes{}, 1);
  EXPECT_EQ(t.access_log().source_reads, 0u);
  (void)t.adaptation_view();
  (void)t.target_labeled();
  (void)t.unlabeled_inputs();
  EXPECT_EQ(t.access_log().source_reads, 0u);
  EXPECT_EQ(t.access_log().unlabeled_label_reads, 0u);
  (void)t.source_labeled();
  (void)t.unlabeled_labels();
  EXPECT_EQ(t.access_log().source_reads, 1u);
  EXPECT_EQ(t.access_log().unlabeled_label_reads, 1u);
  t.reset_access_log();
  EXPECT_EQ(t.access_log().source_reads, 0u);
}

TEST(DomainTask, RejectsOverlappingSplits) {
  const DomainTask t = generate_task(DomainShiftSpec{}, TaskSizes{}, 1);
  auto unl = t.unlabeled_indices();
  unl[0] = t.labeled_indices()[0];
  EXPECT_THROW(DomainTask(t.spec(), t.sizes(), 1, t.raw_source(), t.raw_target(),
                          t.labeled_indices(), unl, t.test_indices()),
               ValidationError);
}

TEST(DataIo, RoundTripIsByteIdentical) {
  const DomainTask t = generate_task(DomainShiftSpec{}, TaskSizes{300, 2, 200, 50}, 3);
  const std::string bytes = serialize_task(t);
  const DomainTask back = deserialize_task(bytes);
  EXPECT_EQ(serialize_task(back), bytes);
  EXPECT_EQ(back.raw_target().x, t.raw_target().x);
  EXPECT_EQ(back.spec(), t.spec());
}

TEST(DataIo, CorruptFilesAreParseErrors) {
  const DomainTask t = generate_task(DomainShiftSpec{}, TaskSizes{300, 2, 200, 50}, 3);
  auto doc = nlohmann::json::parse(serialize_task(t));
  doc["format"] = "ssht-data/0";
  EXPECT_THROW(deserialize_task(doc.dump()), ParseError);
  doc = nlohmann::json::parse(serialize_task(t));
  doc["splits"]["test"][0] = doc["splits"]["labeled"][0];
  EXPECT_THROW(deserialize_task(doc.dump()), ParseError);
  doc = nlohmann::json::parse(serialize_task(t));
  doc["source"]["x"]["rows"] = 301;
  EXPECT_THROW(deserialize_task(doc.dump()), ParseError);
}

TEST(WeakAugment, IdentityWithoutNoiseOrFlip) {
  AugmentPolicy p;
  Rng rng(1);
  const std::vector<double> x{0.3, -2.0};
  EXPECT_EQ(weak_augment(x, p, rng), x);
}

TEST(WeakAugment, DeterministicGivenRngState) {
  const AugmentPolicy p = default_augment_policy(ring_spec());
  Rng a(5), b(5);
  const std::vector<double> x{1.0, 2.0};
  EXPECT_EQ(weak_augment(x, p, a), weak_augment(x, p, b));
}

TEST(WeakAugment, UnbiasedJitter) {
  AugmentPolicy p = default_augment_policy(ring_spec());
  p.weak_flip = false;
  const std::vector<double> x{1.0, -0.5};
  double s0 = 0, s1 = 0;
  const int n = 100000;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng = make_rng(seed, Stream::kWeakAug);
    for (int i = 0; i < n / 10; ++i) {
      const auto y = weak_augment(x, p, rng);
      s0 += y[0];
      s1 += y[1];
    }
  }
  const double se = p.weak_noise_std / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(s0 / n, x[0], 4 * se);
  EXPECT_NEAR(s1 / n, x[1], 4 * se);
}

TEST(WeakAugment, FlipOnlyForMirrorSymmetricGeometry) {
  EXPECT_FALSE(default_augment_policy(ring_spec()).weak_flip);  // 30 degree rotation breaks symmetry
  EXPECT_FALSE(default_augment_policy(DomainShiftSpec{}).weak_flip);
  DomainShiftSpec sym = unshifted(ring_spec());
  sym.num_classes = 2;  // means at (+-R, 0)
  sym.shift_translation = {0.7, 0.0};
  EXPECT_TRUE(default_augment_policy(sym).weak_flip);
}

TEST(WeakAugment, KeepsNearestMeanAssignment) {
  // Points drawn at the target class means; weak jitter must keep >= 99%
  // of them nearest their own mean.
  const DomainShiftSpec spec = ring_spec();
  const AugmentPolicy p = default_augment_policy(spec);
  const auto means = target_class_means(spec);
  Rng rng = make_rng(8, Stream::kWeakAug);
  const DomainTask t = generate_task(spec, TaskSizes{200, 1, 4000, 100}, 8);
  const LabeledSet& tgt = t.raw_target();
  const auto nearest = [&](std::span<const double> x) {
    int best = 0;
    double bd = 1e300;
    for (std::size_t c = 0; c < means.size(); ++c) {
      const double d = std::hypot(x[0] - means[c][0], x[1] - means[c][1]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(c);
      }
    }
    return best;
  };
  std::size_t kept = 0, total = 0;
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    const int before = nearest(tgt.x.row(i));
    const auto y = weak_augment(tgt.x.row(i), p, rng);
    kept += nearest(y) == before;
    ++total;
  }
  EXPECT_GE(static_cast<double>(kept) / total, 0.99);
}

TEST(StrongAugment, ForcedTransforms) {
  AugmentPolicy p;
  p.strong_pool = {StrongOp::kJitter};
  p.strong_num_ops = 3;
  Rng rng(2);
  const std::vector<double> x{1.0, 1.0};
  EXPECT_EQ(strong_augment(x, p, rng), x);
  p.strong_pool = {StrongOp::kScale};
  p.strong_num_ops = 1;
  p.scale_lo = p.scale_hi = 2.0;
  EXPECT_EQ(strong_augment(x, p, rng), (std::vector<double>{2.0, 2.0}));
  p.strong_pool = {StrongOp::kCoordinateDropout};
  const auto d = strong_augment(x, p, rng);
  EXPECT_EQ((d[0] == 0.0) + (d[1] == 0.0), 1);
  p.strong_pool = {StrongOp::kRotate};
  p.rotate_max = 0.3;
  const auto r = strong_augment(x, p, rng);
  EXPECT_NEAR(std::hypot(r[0], r[1]), std::sqrt(2.0), 1e-12);
}

TEST(StrongAugment, PerturbsMoreThanWeak) {
  for (const auto& spec : {DomainShiftSpec{}, ring_spec()}) {
    const AugmentPolicy p = default_augment_policy(spec);
    Rng wr = make_rng(1, Stream::kWeakAug), sr = make_rng(1, Stream::kStrongAug);
    const std::vector<double> x{2.0, -1.0};
    double dw = 0, ds = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto w = weak_augment(x, p, wr), s = strong_augment(x, p, sr);
      dw += std::hypot(w[0] - x[0], w[1] - x[1]);
      ds += std::hypot(s[0] - x[0], s[1] - x[1]);
    }
    EXPECT_GT(ds, dw);
  }
}

TEST(AugmentPolicy, Validation) {
  AugmentPolicy p = default_augment_policy(DomainShiftSpec{});
  EXPECT_NO_THROW(p.validate());
  p.strong_noise_std = p.weak_noise_std / 2;
  EXPECT_THROW(p.validate(), ValidationError);
  p = default_augment_policy(DomainShiftSpec{});
  p.scale_lo = 1.2;
  EXPECT_THROW(p.validate(), ValidationError);
  p = default_augment_policy(DomainShiftSpec{});
  p.strong_pool.clear();
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(BatchSampler, FullBatchCoversEachSampleOnce) {
  BatchSampler s(12, 100, 12, 100, Rng(1));
  EXPECT_EQ(s.steps_per_epoch(), 1u);
  auto b = s.next();
  std::set<std::size_t> seen(b.unlabeled.begin(), b.unlabeled.end());
  EXPECT_EQ(seen.size(), 100u);
}

TEST(BatchSampler, EachUnlabeledOncePerEpoch) {
  BatchSampler s(12, 1000, 12, 48, Rng(2));
  ASSERT_EQ(s.steps_per_epoch(), 21u);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<int> count(1000, 0);
    for (std::size_t k = 0; k < s.steps_per_epoch(); ++k) {
      const auto b = s.next();
      EXPECT_EQ(b.epoch, static_cast<std::size_t>(epoch));
      EXPECT_EQ(b.labeled.size(), 12u);
      for (auto i : b.unlabeled) ++count[i];
    }
    for (int c : count) EXPECT_EQ(c, 1);
  }
}

TEST(BatchSampler, DeterministicAndReshuffled) {
  BatchSampler a(12, 50, 4, 50, Rng(3)), b(12, 50, 4, 50, Rng(3));
  const auto a1 = a.next(), a2 = a.next();
  const auto b1 = b.next(), b2 = b.next();
  EXPECT_EQ(a1.unlabeled, b1.unlabeled);
  EXPECT_EQ(a2.unlabeled, b2.unlabeled);
  EXPECT_EQ(a1.labeled, b1.labeled);
  EXPECT_NE(a1.unlabeled, a2.unlabeled);
}

TEST(BatchSampler, RejectsOversizedBatches) {
  EXPECT_THROW(BatchSampler(12, 50, 13, 10, Rng(1)), ValidationError);
  EXPECT_THROW(BatchSampler(12, 50, 4, 51, Rng(1)), ValidationError);
}

TEST(Rng, StreamsAreIndependent) {
  Rng a = make_rng(1, Stream::kWeakAug), b = make_rng(1, Stream::kStrongAug);
  EXPECT_NE(a(), b());
  Rng c = make_rng(1, Stream::kWeakAug);
  (void)make_rng(1, Stream::kStrongAug)();
  Rng d = make_rng(1, Stream::kWeakAug);
  EXPECT_EQ(c(), d());
}

}  // namespace
}  // namespace ssht
