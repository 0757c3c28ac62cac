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

// Training objectives over softmax outputs. Every loss returns its value and
// its gradient with respect to the logits of each forward pass it depends on,
// ready for diffnet's backward().
//
//   classification  L_c = mean_i -log p(x_i)[y_i]
//   consistency     L_u = mean_i 1(max p(u_w,i) > tau) * -log p(u_s,i)[argmax p(u_w,i)]
//   diversity       L_d = -(||P_w||_* + ||P_s||_*) / B
//   total           L   = L_c + lambda_u L_u + lambda_d L_d

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ssht/diffnet.hpp"
#include "ssht/error.hpp"
#include "ssht/linalg.hpp"

namespace ssht {

/// Identity of a forward pass within one training step.
enum class Pass { kLabeledWeak, kUnlabeledWeak, kUnlabeledStrong };

inline std::string to_string(Pass p) {
  switch (p) {
    case Pass::kLabeledWeak: return "labeled-weak";
    case Pass::kUnlabeledWeak: return "unlabeled-weak";
    case Pass::kUnlabeledStrong: return "unlabeled-strong";
  }
  return "?";
}

struct LossValue {
  double value = 0.0;
  std::map<Pass, Matrix> logit_grads;
  /// Number of log(p) evaluations clamped at kLogFloor.
  std::size_t clamped = 0;
};

inline constexpr double kLogFloor = 1e-12;

namespace detail {

inline void check_distribution_rows(const Matrix& p, const char* what) {
  SSHT_REQUIRE(!p.empty(), what, ": empty probability matrix");
  SSHT_REQUIRE(p.all_finite(), what, ": non-finite probabilities");
}

inline double clamped_log(double p, std::size_t& clamped) {
  if (p < kLogFloor) {
    ++clamped;
    return std::log(kLogFloor);
  }
  return std::log(p);
}

}  // namespace detail

inline LossValue classification_loss(const Matrix& probs, const std::vector<int>& labels,
                                     Pass pass = Pass::kLabeledWeak) {
  detail::check_distribution_rows(probs, "classification_loss");
  SSHT_REQUIRE(labels.size() == probs.rows(), "classification_loss: ", labels.size(),
               " labels for ", probs.rows(), " rows");
  const double B = static_cast<double>(probs.rows());
  LossValue out;
  Matrix g = probs;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const int y = labels[i];
    SSHT_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < probs.cols(), "label ", y,
                 " out of range for ", probs.cols(), " classes");
    out.value -= detail::clamped_log(probs(i, y), out.clamped);
    g(i, y) -= 1.0;
  }
  out.value /= B;
  g *= 1.0 / B;
  out.logit_grads.emplace(pass, std::move(g));
  return out;
}

struct ConsistencyResult {
  LossValue loss;
  double mask_rate = 0.0;
};

/// Pseudo-labels come from the weak view and are treated as constants, so
/// only the strong pass receives a gradient. Masked rows count toward B.
inline ConsistencyResult consistency_loss(const Matrix& probs_weak, const Matrix& probs_strong,
                                          double tau) {
  detail::check_distribution_rows(probs_weak, "consistency_loss");
  detail::check_distribution_rows(probs_strong, "consistency_loss");
  SSHT_REQUIRE(probs_weak.same_shape(probs_strong), "consistency_loss: weak is ",
               probs_weak.rows(), "x", probs_weak.cols(), ", strong is ", probs_strong.rows(),
               "x", probs_strong.cols());
  SSHT_REQUIRE(tau >= 0.0 && tau <= 1.0, "consistency_loss: tau must be in [0, 1], got ", tau);
  const double B = static_cast<double>(probs_weak.rows());
  ConsistencyResult out;
  Matrix g(probs_strong.rows(), probs_strong.cols());
  std::size_t selected = 0;
  const auto pseudo = argmax_rows(probs_weak);
  for (std::size_t i = 0; i < probs_weak.rows(); ++i) {
    const int y = pseudo[i];
    if (!(probs_weak(i, y) > tau)) continue;
    ++selected;
    out.loss.value -= detail::clamped_log(probs_strong(i, y), out.loss.clamped);
    auto gi = g.row(i);
    auto si = probs_strong.row(i);
    for (std::size_t j = 0; j < gi.size(); ++j) gi[j] = si[j] / B;
    gi[y] -= 1.0 / B;
  }
  out.loss.value /= B;
  out.mask_rate = static_cast<double>(selected) / B;
  out.loss.logit_grads.emplace(Pass::kUnlabeledStrong, std::move(g));
  return out;
}

/// Negative batch nuclear norm of both views, divided by B.
inline LossValue diversity_loss(const Matrix& probs_weak, const Matrix& probs_strong,
                                double rank_tol = 1e-8) {
  detail::check_distribution_rows(probs_weak, "diversity_loss");
  detail::check_distribution_rows(probs_strong, "diversity_loss");
  SSHT_REQUIRE(probs_weak.same_shape(probs_strong), "diversity_loss: shape mismatch");
  const double B = static_cast<double>(probs_weak.rows());
  LossValue out;
  out.value = -(nuclear_norm(probs_weak) + nuclear_norm(probs_strong)) / B;
  out.logit_grads.emplace(
      Pass::kUnlabeledWeak,
      softmax_backward(probs_weak, (-1.0 / B) * nuclear_norm_subgradient(probs_weak, rank_tol)));
  out.logit_grads.emplace(
      Pass::kUnlabeledStrong,
      softmax_backward(probs_strong,
                       (-1.0 / B) * nuclear_norm_subgradient(probs_strong, rank_tol)));
  return out;
}

/// Mean Shannon entropy of the rows (0 log 0 = 0).
inline LossValue entropy_loss(const Matrix& probs, Pass pass = Pass::kUnlabeledWeak) {
  detail::check_distribution_rows(probs, "entropy_loss");
  const double B = static_cast<double>(probs.rows());
  LossValue out;
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto p = probs.row(i);
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
    out.value += h;
    // dH/dz_j = -p_j (log p_j + H)
    for (std::size_t j = 0; j < p.size(); ++j)
      g(i, j) = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) / B : 0.0;
  }
  out.value /= B;
  out.logit_grads.emplace(pass, std::move(g));
  return out;
}

/// Weighted sum; gradients of the same pass are added.
inline LossValue combine(std::initializer_list<std::pair<const LossValue*, double>> terms) {
  LossValue out;
  for (const auto& [term, weight] : terms) {
    out.value += weight * term->value;
    out.clamped += term->clamped;
    for (const auto& [pass, g] : term->logit_grads) {
      auto it = out.logit_grads.find(pass);
      if (it == out.logit_grads.end())
        out.logit_grads.emplace(pass, weight * g);
      else
        it->second.add_scaled(g, weight);
    }
  }
  return out;
}

inline LossValue total_loss(const LossValue& l_c, const LossValue& l_u, const LossValue& l_d,
                            double lambda_u, double lambda_d) {
  return combine({{&l_c, 1.0}, {&l_u, lambda_u}, {&l_d, lambda_d}});
}

}  // namespace ssht
