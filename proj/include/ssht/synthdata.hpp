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

// Synthetic source/target domain pairs.
//
// Each class has a clean generator in the plane (first two input
// coordinates); samples add isotropic Gaussian noise. The target domain
// applies scale * rotation + translation to the clean points, and the source
// domain draws class c with weight rho^(-c / (C - 1)).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssht/error.hpp"
#include "ssht/linalg.hpp"
#include "ssht/rng.hpp"

namespace ssht {

enum class ClassGeometry { kGaussianRing, kTwoMoonsMulti };

inline std::string to_string(ClassGeometry g) {
  return g == ClassGeometry::kGaussianRing ? "gaussian_ring" : "two_moons_multi";
}

inline ClassGeometry parse_geometry(const std::string& s) {
  if (s == "gaussian_ring") return ClassGeometry::kGaussianRing;
  if (s == "two_moons_multi") return ClassGeometry::kTwoMoonsMulti;
  throw ValidationError("unknown class geometry '" + s + "'");
}

struct DomainShiftSpec {
  std::size_t num_classes = 4;
  std::size_t input_dim = 2;
  ClassGeometry geometry = ClassGeometry::kTwoMoonsMulti;
  double ring_radius = 3.0;
  double shift_rotation = std::numbers::pi / 6.0;
  std::vector<double> shift_translation{0.5, -0.5};
  double shift_scale = 1.1;
  double source_imbalance_ratio = 10.0;
  double noise_std = 0.3;

  void validate() const {
    SSHT_REQUIRE(num_classes >= 2, "num_classes must be at least 2");
    SSHT_REQUIRE(input_dim >= 2, "input_dim must be at least 2 (classes live in the plane)");
    SSHT_REQUIRE(ring_radius > 0.0, "ring_radius must be positive");
    SSHT_REQUIRE(shift_translation.size() == input_dim, "shift_translation has ",
                 shift_translation.size(), " entries, input_dim is ", input_dim);
    SSHT_REQUIRE(shift_scale > 0.0, "shift_scale must be positive");
    SSHT_REQUIRE(source_imbalance_ratio >= 1.0, "imbalance ratio must be >= 1");
    SSHT_REQUIRE(noise_std > 0.0, "noise_std must be positive");
    SSHT_REQUIRE(std::isfinite(shift_rotation), "shift_rotation must be finite");
  }

  /// Unnormalized sampling weight of class c in the source domain.
  double source_class_weight(std::size_t c) const {
    return std::pow(source_imbalance_ratio,
                    -static_cast<double>(c) / static_cast<double>(num_classes - 1));
  }

  /// Closest approach of adjacent classes: neighboring means on the ring,
  /// or the inner tips of neighboring crescents.
  double class_separation() const {
    const double chord = 2.0 * std::sin(std::numbers::pi / static_cast<double>(num_classes));
    return geometry == ClassGeometry::kGaussianRing ? ring_radius * chord
                                                    : 0.3 * ring_radius * chord;
  }

  friend bool operator==(const DomainShiftSpec&, const DomainShiftSpec&) = default;
};

struct TaskSizes {
  std::size_t source = 2000;
  std::size_t shots = 3;
  std::size_t unlabeled = 1000;
  std::size_t test = 1000;

  friend bool operator==(const TaskSizes&, const TaskSizes&) = default;
};

struct LabeledSet {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

/// Gathers rows of `x` (and labels) at `idx`.
inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

inline LabeledSet gather(const LabeledSet& s, std::span<const std::size_t> idx) {
  LabeledSet out{gather_rows(s.x, idx), {}};
  out.y.reserve(idx.size());
  for (auto i : idx) out.y.push_back(s.y[i]);
  return out;
}

/// Read counters for the splits the adaptation step must never touch.
struct AccessLog {
  std::atomic<std::size_t> source_reads{0};
  std::atomic<std::size_t> unlabeled_label_reads{0};
};

/// What the adaptation step may see: few labeled target samples, unlabeled
/// target inputs without labels, and the held-out test split for reporting.
struct AdaptationView {
  DomainShiftSpec spec;
  LabeledSet labeled;
  Matrix unlabeled;
  LabeledSet test;
};

/// A generated source/target pair. Target samples live in one pool; the
/// labeled, unlabeled and test splits are disjoint index lists into it.
class DomainTask {
 public:
  DomainTask() = default;
  DomainTask(DomainShiftSpec spec, TaskSizes sizes, std::uint64_t seed, LabeledSet source,
             LabeledSet target, std::vector<std::size_t> labeled_idx,
             std::vector<std::size_t> unlabeled_idx, std::vector<std::size_t> test_idx)
      : spec_(std::move(spec)),
        sizes_(sizes),
        seed_(seed),
        source_(std::move(source)),
        target_(std::move(target)),
        labeled_idx_(std::move(labeled_idx)),
        unlabeled_idx_(std::move(unlabeled_idx)),
        test_idx_(std::move(test_idx)) {
    validate();
  }

  const DomainShiftSpec& spec() const { return spec_; }
  const TaskSizes& sizes() const { return sizes_; }
  std::uint64_t seed() const { return seed_; }

  /// D^s. Counted: only source training and export should call this.
  const LabeledSet& source_labeled() const {
    ++log_->source_reads;
    return source_;
  }

  LabeledSet target_labeled() const { return gather(target_, labeled_idx_); }
  Matrix unlabeled_inputs() const { return gather_rows(target_.x, unlabeled_idx_); }
  LabeledSet target_test() const { return gather(target_, test_idx_); }

  /// D^u labels. Counted: evaluation-only.
  std::vector<int> unlabeled_labels() const {
    ++log_->unlabeled_label_reads;
    std::vector<int> y;
    y.reserve(unlabeled_idx_.size());
    for (auto i : unlabeled_idx_) y.push_back(target_.y[i]);
    return y;
  }

  AdaptationView adaptation_view() const {
    return {spec_, target_labeled(), unlabeled_inputs(), target_test()};
  }

  const std::vector<std::size_t>& labeled_indices() const { return labeled_idx_; }
  const std::vector<std::size_t>& unlabeled_indices() const { return unlabeled_idx_; }
  const std::vector<std::size_t>& test_indices() const { return test_idx_; }

  /// Raw pool access for serialization; bypasses the read counters.
  const LabeledSet& raw_source() const { return source_; }
  const LabeledSet& raw_target() const { return target_; }

  const AccessLog& access_log() const { return *log_; }
  void reset_access_log() const {
    log_->source_reads = 0;
    log_->unlabeled_label_reads = 0;
  }

 private:
  void validate() const {
    spec_.validate();
    SSHT_REQUIRE(source_.x.rows() == source_.y.size(), "source inputs/labels differ in length");
    SSHT_REQUIRE(target_.x.rows() == target_.y.size(), "target inputs/labels differ in length");
    SSHT_REQUIRE(source_.x.cols() == spec_.input_dim && target_.x.cols() == spec_.input_dim,
                 "sample width differs from input_dim");
    const auto check_labels = [&](const std::vector<int>& y) {
      for (int c : y)
        SSHT_REQUIRE(c >= 0 && static_cast<std::size_t>(c) < spec_.num_classes, "label ", c,
                     " out of range");
    };
    check_labels(source_.y);
    check_labels(target_.y);
    std::vector<int> owner(target_.y.size(), -1);
    const std::vector<std::size_t>* splits[] = {&labeled_idx_, &unlabeled_idx_, &test_idx_};
    for (int s = 0; s < 3; ++s)
      for (auto i : *splits[s]) {
        SSHT_REQUIRE(i < owner.size(), "split index ", i, " out of range");
        SSHT_REQUIRE(owner[i] == -1, "target sample ", i, " appears in more than one split");
        owner[i] = s;
      }
  }

  DomainShiftSpec spec_;
  TaskSizes sizes_;
  std::uint64_t seed_ = 0;
  LabeledSet source_;
  LabeledSet target_;
  std::vector<std::size_t> labeled_idx_;
  std::vector<std::size_t> unlabeled_idx_;
  std::vector<std::size_t> test_idx_;
  std::shared_ptr<AccessLog> log_ = std::make_shared<AccessLog>();
};

namespace detail {

/// Noise-free point of class c; `rng` supplies the position along a moon.
inline std::vector<double> clean_point(const DomainShiftSpec& spec, int c, Rng& rng) {
  const double C = static_cast<double>(spec.num_classes);
  const double phi = 2.0 * std::numbers::pi * c / C;
  std::vector<double> p(spec.input_dim, 0.0);
  if (spec.geometry == ClassGeometry::kGaussianRing) {
    p[0] = spec.ring_radius * std::cos(phi);
    p[1] = spec.ring_radius * std::sin(phi);
    return p;
  }
  // Interleaved crescents: class c winds half a turn outward from angle
  // phi_c, its radius growing linearly from 0.3 R to 2 R, so neighbors
  // interleave along every ray.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = u(rng);
  const double angle = phi + t * std::numbers::pi;
  const double radius = spec.ring_radius * (0.3 + 1.7 * t);
  p[0] = radius * std::cos(angle);
  p[1] = radius * std::sin(angle);
  return p;
}

inline void apply_shift(const DomainShiftSpec& spec, std::vector<double>& p) {
  const double c = std::cos(spec.shift_rotation);
  const double s = std::sin(spec.shift_rotation);
  const double x0 = p[0];
  const double x1 = p[1];
  p[0] = c * x0 - s * x1;
  p[1] = s * x0 + c * x1;
  for (std::size_t d = 0; d < p.size(); ++d) p[d] = spec.shift_scale * p[d] + spec.shift_translation[d];
}

inline std::vector<double> draw_sample(const DomainShiftSpec& spec, int c, bool target, Rng& rng) {
  auto p = clean_point(spec, c, rng);
  if (target) apply_shift(spec, p);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  for (double& v : p) v += noise(rng);
  return p;
}

inline LabeledSet to_set(const std::vector<std::vector<double>>& xs, std::vector<int> ys) {
  return {Matrix::from_rows(xs), std::move(ys)};
}

}  // namespace detail

/// Class means of the target domain (clean ring points after the shift).
inline std::vector<std::vector<double>> target_class_means(const DomainShiftSpec& spec) {
  std::vector<std::vector<double>> means;
  DomainShiftSpec ring = spec;
  ring.geometry = ClassGeometry::kGaussianRing;
  Rng unused(0);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto p = detail::clean_point(ring, static_cast<int>(c), unused);
    detail::apply_shift(spec, p);
    means.push_back(std::move(p));
  }
  return means;
}

/// True when mirroring the second coordinate maps every target class onto
/// itself (ring geometry with all class means on the first axis).
inline bool mirror_symmetric(const DomainShiftSpec& spec) {
  if (spec.geometry != ClassGeometry::kGaussianRing) return false;
  for (const auto& m : target_class_means(spec))
    if (std::abs(m[1]) > 1e-9 * spec.ring_radius) return false;
  return true;
}

inline DomainTask generate_task(const DomainShiftSpec& spec, const TaskSizes& sizes,
                                std::uint64_t seed) {
  spec.validate();
  const std::size_t C = spec.num_classes;
  SSHT_REQUIRE(sizes.source > 0 && sizes.shots > 0 && sizes.unlabeled > 0 && sizes.test > 0,
               "all task sizes must be positive");
  const std::size_t n_labeled = sizes.shots * C;
  SSHT_REQUIRE(sizes.unlabeled >= 20 * n_labeled, "unlabeled set (", sizes.unlabeled,
               ") must be at least 20x the labeled set (", n_labeled, ")");

  Rng rng = make_rng(seed, Stream::kData);

  std::vector<double> weights(C);
  for (std::size_t c = 0; c < C; ++c) weights[c] = spec.source_class_weight(c);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::vector<std::vector<double>> sx;
  std::vector<int> sy;
  for (std::size_t i = 0; i < sizes.source; ++i) {
    const int c = pick(rng);
    sx.push_back(detail::draw_sample(spec, c, false, rng));
    sy.push_back(c);
  }

  // Balanced target pool: labeled (shots per class), unlabeled, test.
  const std::size_t counts[3] = {n_labeled, sizes.unlabeled, sizes.test};
  std::vector<std::vector<double>> tx;
  std::vector<int> ty;
  std::vector<int> split_of;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < counts[s]; ++i) {
      const int c = static_cast<int>(i % C);
      tx.push_back(detail::draw_sample(spec, c, true, rng));
      ty.push_back(c);
      split_of.push_back(s);
    }

  std::vector<std::size_t> perm(tx.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng split_rng = make_rng(seed, Stream::kSplit);
  std::shuffle(perm.begin(), perm.end(), split_rng);

  std::vector<std::vector<double>> px(tx.size());
  std::vector<int> py(tx.size());
  std::vector<std::size_t> idx[3];
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    const std::size_t orig = perm[pos];
    px[pos] = tx[orig];
    py[pos] = ty[orig];
    idx[split_of[orig]].push_back(pos);
  }

  return DomainTask(spec, sizes, seed, detail::to_set(sx, std::move(sy)),
                    detail::to_set(px, std::move(py)), std::move(idx[0]), std::move(idx[1]),
                    std::move(idx[2]));
}

// Augmentation.

enum class StrongOp { kJitter, kRotate, kScale, kCoordinateDropout };

inline std::string to_string(StrongOp op) {
  switch (op) {
    case StrongOp::kJitter: return "jitter";
    case StrongOp::kRotate: return "rotate";
    case StrongOp::kScale: return "scale";
    case StrongOp::kCoordinateDropout: return "coordinate_dropout";
  }
  return "?";
}

struct AugmentPolicy {
  double weak_noise_std = 0.0;
  bool weak_flip = false;
  double strong_noise_std = 0.0;
  int strong_num_ops = 2;
  std::vector<StrongOp> strong_pool{StrongOp::kJitter, StrongOp::kRotate, StrongOp::kScale,
                                    StrongOp::kCoordinateDropout};
  double rotate_max = 0.0;
  double scale_lo = 1.0;
  double scale_hi = 1.0;

  void validate() const {
    SSHT_REQUIRE(weak_noise_std >= 0.0, "weak_noise_std must be non-negative");
    SSHT_REQUIRE(strong_noise_std >= weak_noise_std, "strong_noise_std must be >= weak_noise_std");
    SSHT_REQUIRE(strong_num_ops >= 1, "strong_num_ops must be at least 1");
    SSHT_REQUIRE(!strong_pool.empty(), "strong_pool must be non-empty");
    SSHT_REQUIRE(rotate_max >= 0.0, "rotate_max must be non-negative");
    SSHT_REQUIRE(scale_lo > 0.0 && scale_lo <= 1.0 && 1.0 <= scale_hi,
                 "scale_range must satisfy 0 < lo <= 1 <= hi");
  }
};

/// Defaults scaled to the task geometry. The strong pool stays local
/// (small rotations and rescalings about the origin): large global moves
/// change labels on winding geometries. coordinate_dropout is opt-in.
inline AugmentPolicy default_augment_policy(const DomainShiftSpec& spec) {
  AugmentPolicy p;
  p.weak_noise_std = 0.1 * spec.class_separation();
  p.weak_flip = mirror_symmetric(spec);
  p.strong_noise_std = 0.2 * spec.class_separation();
  p.strong_num_ops = 2;
  p.strong_pool = {StrongOp::kJitter, StrongOp::kRotate, StrongOp::kScale};
  p.rotate_max = 0.05;
  p.scale_lo = 0.95;
  p.scale_hi = 1.05;
  return p;
}

/// Translation analog (Gaussian jitter) plus an optional axis mirror.
inline std::vector<double> weak_augment(std::span<const double> x, const AugmentPolicy& policy,
                                        Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (policy.weak_flip) {
    std::bernoulli_distribution coin(0.5);
    if (coin(rng) && out.size() >= 2) out[1] = -out[1];
  }
  if (policy.weak_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, policy.weak_noise_std);
    for (double& v : out) v += noise(rng);
  }
  return out;
}

inline void apply_strong_op(StrongOp op, std::vector<double>& x, const AugmentPolicy& policy,
                            Rng& rng) {
  switch (op) {
    case StrongOp::kJitter: {
      if (policy.strong_noise_std <= 0.0) return;
      std::normal_distribution<double> noise(0.0, policy.strong_noise_std);
      for (double& v : x) v += noise(rng);
      return;
    }
    case StrongOp::kRotate: {
      std::uniform_real_distribution<double> angle(-policy.rotate_max, policy.rotate_max);
      const double a = angle(rng);
      const double c = std::cos(a), s = std::sin(a);
      const double x0 = x[0], x1 = x[1];
      x[0] = c * x0 - s * x1;
      x[1] = s * x0 + c * x1;
      return;
    }
    case StrongOp::kScale: {
      const double s = policy.scale_lo == policy.scale_hi
                           ? policy.scale_lo
                           : std::uniform_real_distribution<double>(policy.scale_lo,
                                                                    policy.scale_hi)(rng);
      for (double& v : x) v *= s;
      return;
    }
    case StrongOp::kCoordinateDropout: {
      std::uniform_int_distribution<std::size_t> coord(0, x.size() - 1);
      x[coord(rng)] = 0.0;
      return;
    }
  }
}

/// RandAugment analog: strong_num_ops transforms drawn uniformly (with
/// replacement) from strong_pool, applied in draw order.
inline std::vector<double> strong_augment(std::span<const double> x, const AugmentPolicy& policy,
                                          Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  std::uniform_int_distribution<std::size_t> pick(0, policy.strong_pool.size() - 1);
  for (int i = 0; i < policy.strong_num_ops; ++i)
    apply_strong_op(policy.strong_pool[pick(rng)], out, policy, rng);
  return out;
}

template <typename Fn>
Matrix augment_rows(const Matrix& x, const AugmentPolicy& policy, Rng& rng, Fn&& fn) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto a = fn(x.row(i), policy, rng);
    std::copy(a.begin(), a.end(), out.row(i).begin());
  }
  return out;
}

inline Matrix weak_augment_batch(const Matrix& x, const AugmentPolicy& p, Rng& rng) {
  return augment_rows(x, p, rng, [](auto row, const auto& pol, Rng& r) {
    return weak_augment(row, pol, r);
  });
}

inline Matrix strong_augment_batch(const Matrix& x, const AugmentPolicy& p, Rng& rng) {
  return augment_rows(x, p, rng, [](auto row, const auto& pol, Rng& r) {
    return strong_augment(row, pol, r);
  });
}

// Batching.

struct BatchIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::size_t epoch = 0;
};

/// Paired batch stream: labeled indices drawn with replacement, unlabeled
/// indices from a fresh permutation each epoch (last batch may be short).
class BatchSampler {
 public:
  BatchSampler(std::size_t num_labeled, std::size_t num_unlabeled, std::size_t labeled_batch,
               std::size_t unlabeled_batch, Rng rng)
      : num_labeled_(num_labeled),
        num_unlabeled_(num_unlabeled),
        labeled_batch_(labeled_batch),
        unlabeled_batch_(unlabeled_batch),
        rng_(std::move(rng)),
        perm_(num_unlabeled) {
    SSHT_REQUIRE(num_labeled > 0 && num_unlabeled > 0, "sampler needs non-empty sets");
    SSHT_REQUIRE(labeled_batch >= 1 && labeled_batch <= num_labeled, "labeled batch ",
                 labeled_batch, " must be in [1, ", num_labeled, "]");
    SSHT_REQUIRE(unlabeled_batch >= 1 && unlabeled_batch <= num_unlabeled, "unlabeled batch ",
                 unlabeled_batch, " must be in [1, ", num_unlabeled, "]");
  }

  std::size_t steps_per_epoch() const {
    return (num_unlabeled_ + unlabeled_batch_ - 1) / unlabeled_batch_;
  }

  BatchIndices next() {
    if (cursor_ == 0 || cursor_ >= num_unlabeled_) {
      if (cursor_ >= num_unlabeled_) ++epoch_;
      std::iota(perm_.begin(), perm_.end(), std::size_t{0});
      std::shuffle(perm_.begin(), perm_.end(), rng_);
      cursor_ = 0;
    }
    BatchIndices b;
    b.epoch = epoch_;
    std::uniform_int_distribution<std::size_t> pick(0, num_labeled_ - 1);
    for (std::size_t i = 0; i < labeled_batch_; ++i) b.labeled.push_back(pick(rng_));
    const std::size_t end = std::min(cursor_ + unlabeled_batch_, num_unlabeled_);
    b.unlabeled.assign(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                       perm_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return b;
  }

 private:
  std::size_t num_labeled_, num_unlabeled_, labeled_batch_, unlabeled_batch_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace ssht
