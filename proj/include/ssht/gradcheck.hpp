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

// Central finite-difference checks of every analytic gradient in the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ssht/diffnet.hpp"
#include "ssht/linalg.hpp"
#include "ssht/objectives.hpp"
#include "ssht/rng.hpp"

namespace ssht {

struct SuiteResult {
  SuiteResult() = default;
  explicit SuiteResult(std::string n) : name(std::move(n)) {}

  std::string name;
  std::size_t instances = 0;
  std::size_t checks = 0;
  std::size_t skipped = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  bool passed = true;
  std::string note;
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor, so entries whose true value is ~0 are compared
  /// absolutely instead of amplifying rounding noise.
  double floor = 1e-6;
  std::size_t instances = 20;
  /// Diversity instances with singular gaps below gap_tol * sigma_1 are skipped.
  double gap_tol = 1e-3;
  std::uint64_t seed = 20260101;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

class SuiteTimer {
 public:
  explicit SuiteTimer(SuiteResult& r) : r_(r), start_(std::chrono::steady_clock::now()) {}
  ~SuiteTimer() {
    r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    r_.passed = r_.passed && r_.max_error <= r_.tolerance;
  }

 private:
  SuiteResult& r_;
  std::chrono::steady_clock::time_point start_;
};

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Compares `analytic` against central differences of f over every entry of `x`.
inline void check_entries(Matrix& x, const Matrix& analytic, const std::function<double()>& f,
                          const GradcheckOptions& opt, SuiteResult& r) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double& xi = x.data()[i];
    const double saved = xi;
    xi = saved + opt.step;
    const double fp = f();
    xi = saved - opt.step;
    const double fm = f();
    xi = saved;
    const double numeric = (fp - fm) / (2.0 * opt.step);
    r.max_error = std::max(r.max_error, relative_error(analytic.data()[i], numeric, opt.floor));
    ++r.checks;
  }
}

inline bool well_separated(const Matrix& p, double gap_tol) {
  const auto s = svd(p).sigma;
  const double cut = gap_tol * s.front();
  if (s.back() <= cut) return false;
  for (std::size_t k = 0; k + 1 < s.size(); ++k)
    if (s[k] - s[k + 1] <= cut) return false;
  return true;
}

inline NetworkSpec random_small_spec(Rng& rng) {
  NetworkSpec s;
  s.input_dim = uniform_size(rng, 2, 4);
  s.hidden_dims.assign(uniform_size(rng, 1, 2), 0);
  for (auto& h : s.hidden_dims) h = uniform_size(rng, 3, 8);
  s.feature_dim = uniform_size(rng, 3, 6);
  s.num_classes = uniform_size(rng, 2, 5);
  s.activation = Activation::kTanh;
  return s;
}

}  // namespace detail

/// Backward of a linear functional sum(G .* logits) against finite differences
/// over every parameter entry. The first instance uses the default architecture.
inline SuiteResult check_network_gradients(const GradcheckOptions& opt = {}) {
  SuiteResult r{"network parameters"};
  r.tolerance = opt.tolerance;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kInit, 1);
  for (std::size_t inst = 0; inst < opt.instances; ++inst) {
    const NetworkSpec spec = inst == 0 ? NetworkSpec{} : detail::random_small_spec(rng);
    Network net = init_network(spec, opt.seed + inst);
    // Non-zero biases so every bias path is exercised.
    for (std::size_t l = 0; l < net.num_layers(); ++l)
      net.params[2 * l + 1] = detail::random_matrix(1, net.params[2 * l + 1].cols(), rng, 0.1);
    const std::size_t B = detail::uniform_size(rng, 2, 8);
    const Matrix x = detail::random_matrix(B, spec.input_dim, rng);
    const Matrix g = detail::random_matrix(B, spec.num_classes, rng);
    const GradientSet grads = backward(net, x, g);
    const auto f = [&] {
      const Matrix z = forward(net, x).logits;
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += g.data()[i] * z.data()[i];
      return s;
    };
    for (std::size_t t = 0; t < net.params.size(); ++t)
      detail::check_entries(net.params[t], grads.grads[t], f, opt, r);
    ++r.instances;
  }
  return r;
}

namespace detail {

// Shared driver for losses of one pass: f(z) = loss(softmax(z)).
inline SuiteResult check_single_pass_loss(
    const std::string& name, const GradcheckOptions& opt, std::uint64_t sub,
    const std::function<LossValue(const Matrix& probs, Rng& rng, std::size_t inst)>& loss,
    Pass pass) {
  SuiteResult r{name};
  r.tolerance = opt.tolerance;
  SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kEval, sub);
  for (std::size_t inst = 0; inst < opt.instances; ++inst) {
    const std::size_t B = uniform_size(rng, 1, 10);
    const std::size_t C = uniform_size(rng, 2, 6);
    Matrix z = random_matrix(B, C, rng, 2.0);
    Rng inst_rng = rng;  // same labels (or other randomness) on every evaluation
    const LossValue lv = loss(softmax_rows(z), inst_rng, inst);
    const auto f = [&] {
      Rng again = rng;
      return loss(softmax_rows(z), again, inst).value;
    };
    check_entries(z, lv.logit_grads.at(pass), f, opt, r);
    rng = inst_rng;
    ++r.instances;
  }
  return r;
}

}  // namespace detail

inline SuiteResult check_classification_loss(const GradcheckOptions& opt = {}) {
  return detail::check_single_pass_loss(
      "classification loss", opt, 2,
      [](const Matrix& p, Rng& rng, std::size_t) {
        std::vector<int> y(p.rows());
        std::uniform_int_distribution<int> d(0, static_cast<int>(p.cols()) - 1);
        for (int& v : y) v = d(rng);
        return classification_loss(p, y);
      },
      Pass::kLabeledWeak);
}

inline SuiteResult check_entropy_loss(const GradcheckOptions& opt = {}) {
  return detail::check_single_pass_loss(
      "entropy loss", opt, 3,
      [](const Matrix& p, Rng&, std::size_t) { return entropy_loss(p); }, Pass::kUnlabeledWeak);
}

/// Gradient with respect to the strong-view logits; the weak view is fixed.
inline SuiteResult check_consistency_loss(const GradcheckOptions& opt = {}) {
  SuiteResult r{"consistency loss"};
  r.tolerance = opt.tolerance;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kEval, 4);
  std::size_t detached_violations = 0;
  for (std::size_t inst = 0; inst < opt.instances; ++inst) {
    const std::size_t B = detail::uniform_size(rng, 2, 12);
    const std::size_t C = detail::uniform_size(rng, 2, 6);
    const Matrix pw = softmax_rows(detail::random_matrix(B, C, rng, 3.0));
    Matrix zs = detail::random_matrix(B, C, rng, 2.0);
    const double tau = std::uniform_real_distribution<double>(0.3, 0.9)(rng);
    const auto res = consistency_loss(pw, softmax_rows(zs), tau);
    detached_violations += res.loss.logit_grads.count(Pass::kUnlabeledWeak);
    detail::check_entries(
        zs, res.loss.logit_grads.at(Pass::kUnlabeledStrong),
        [&] { return consistency_loss(pw, softmax_rows(zs), tau).loss.value; }, opt, r);
    ++r.instances;
  }
  if (detached_violations > 0) {
    r.passed = false;
    r.note = "weak pass received a gradient";
  }
  return r;
}

/// Both views, through softmax. Near-degenerate spectra are skipped and counted.
inline SuiteResult check_diversity_loss(const GradcheckOptions& opt = {}) {
  SuiteResult r{"diversity loss"};
  r.tolerance = opt.tolerance;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kEval, 5);
  for (std::size_t attempt = 0; r.instances < opt.instances && attempt < 50 * opt.instances;
       ++attempt) {
    const std::size_t B = detail::uniform_size(rng, 1, 10);
    const std::size_t C = detail::uniform_size(rng, 2, 6);
    Matrix zw = detail::random_matrix(B, C, rng, 2.0);
    Matrix zs = detail::random_matrix(B, C, rng, 2.0);
    if (!detail::well_separated(softmax_rows(zw), opt.gap_tol) ||
        !detail::well_separated(softmax_rows(zs), opt.gap_tol)) {
      ++r.skipped;
      continue;
    }
    const LossValue lv = diversity_loss(softmax_rows(zw), softmax_rows(zs));
    const auto f = [&] { return diversity_loss(softmax_rows(zw), softmax_rows(zs)).value; };
    detail::check_entries(zw, lv.logit_grads.at(Pass::kUnlabeledWeak), f, opt, r);
    detail::check_entries(zs, lv.logit_grads.at(Pass::kUnlabeledStrong), f, opt, r);
    ++r.instances;
  }
  if (r.instances < opt.instances) {
    r.passed = false;
    r.note = "too few well-separated instances";
  } else {
    r.note = std::to_string(r.skipped) + " near-degenerate instances skipped";
  }
  return r;
}

/// Subgradient of the nuclear norm on well-conditioned 8x5 matrices.
inline SuiteResult check_nuclear_norm_subgradient(const GradcheckOptions& opt = {}) {
  SuiteResult r{"nuclear norm subgradient"};
  r.tolerance = opt.tolerance;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kEval, 6);
  for (std::size_t attempt = 0; r.instances < opt.instances && attempt < 50 * opt.instances;
       ++attempt) {
    Matrix a = detail::random_matrix(8, 5, rng);
    if (!detail::well_separated(a, opt.gap_tol)) {
      ++r.skipped;
      continue;
    }
    const Matrix g = nuclear_norm_subgradient(a);
    detail::check_entries(a, g, [&] { return nuclear_norm(a); }, opt, r);
    ++r.instances;
  }
  if (r.skipped > 0) r.note = std::to_string(r.skipped) + " near-degenerate instances skipped";
  return r;
}

/// Total objective of one CDL step, differentiated through the full network
/// over three passes (labeled, unlabeled weak, unlabeled strong). Instances
/// where a weak confidence sits within 1e-3 of tau are redrawn: the mask is
/// piecewise constant and a perturbation must not cross it.
inline SuiteResult check_total_loss(const GradcheckOptions& opt = {}) {
  SuiteResult r{"total loss through network"};
  r.tolerance = opt.tolerance;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(opt.seed, Stream::kEval, 7);
  const double lambda_u = 2.5, lambda_d = 1.0;
  const std::size_t wanted = std::max<std::size_t>(1, opt.instances / 4);
  for (std::size_t attempt = 0; r.instances < wanted && attempt < 50 * wanted; ++attempt) {
    const NetworkSpec spec = detail::random_small_spec(rng);
    Network net = init_network(spec, opt.seed + 100 + attempt);
    for (std::size_t l = 0; l < net.num_layers(); ++l)
      net.params[2 * l + 1] = detail::random_matrix(1, net.params[2 * l + 1].cols(), rng, 0.3);
    const std::size_t bl = detail::uniform_size(rng, 2, 6), bu = detail::uniform_size(rng, 3, 8);
    const Matrix xl = detail::random_matrix(bl, spec.input_dim, rng, 2.0);
    const Matrix uw = detail::random_matrix(bu, spec.input_dim, rng, 2.0);
    const Matrix us = uw + detail::random_matrix(bu, spec.input_dim, rng, 0.3);
    std::vector<int> yl(bl);
    for (int& v : yl) v = static_cast<int>(detail::uniform_size(rng, 0, spec.num_classes - 1));

    const Matrix pw = softmax_rows(forward(net, uw).logits);
    double tau = 0.0;
    {
      // Threshold at the median weak confidence, nudged away from every row.
      std::vector<double> conf;
      for (std::size_t i = 0; i < pw.rows(); ++i) {
        const auto row = pw.row(i);
        conf.push_back(*std::max_element(row.begin(), row.end()));
      }
      std::sort(conf.begin(), conf.end());
      tau = conf[conf.size() / 2] - 1e-6;
      bool clear = true;
      for (double c : conf) clear = clear && std::abs(c - tau) > 1e-3;
      if (!clear) {
        tau = (conf.front() + conf.back()) / 2.0;
        clear = true;
        for (double c : conf) clear = clear && std::abs(c - tau) > 1e-3;
      }
      if (!clear) {
        ++r.skipped;
        continue;
      }
    }
    const Matrix ps = softmax_rows(forward(net, us).logits);
    if (!detail::well_separated(pw, opt.gap_tol) || !detail::well_separated(ps, opt.gap_tol)) {
      ++r.skipped;
      continue;
    }

    const auto loss_at = [&](const Network& n) {
      const Matrix pl = softmax_rows(forward(n, xl).logits);
      const Matrix w = softmax_rows(forward(n, uw).logits);
      const Matrix s = softmax_rows(forward(n, us).logits);
      const LossValue lc = classification_loss(pl, yl);
      const LossValue lu = consistency_loss(w, s, tau).loss;
      const LossValue ld = diversity_loss(w, s);
      return total_loss(lc, lu, ld, lambda_u, lambda_d);
    };
    const LossValue total = loss_at(net);
    GradientSet grads = GradientSet::zeros_like(net);
    const std::pair<Pass, const Matrix*> passes[] = {
        {Pass::kLabeledWeak, &xl}, {Pass::kUnlabeledWeak, &uw}, {Pass::kUnlabeledStrong, &us}};
    for (const auto& [pass, x] : passes) {
      auto it = total.logit_grads.find(pass);
      if (it != total.logit_grads.end()) grads += backward(net, *x, it->second);
    }
    for (std::size_t t = 0; t < net.params.size(); ++t)
      detail::check_entries(net.params[t], grads.grads[t], [&] { return loss_at(net).value; }, opt,
                            r);
    ++r.instances;
  }
  if (r.instances < wanted) {
    r.passed = false;
    r.note = "too few usable instances";
  } else if (r.skipped > 0) {
    r.note = std::to_string(r.skipped) + " instances redrawn";
  }
  return r;
}

inline std::vector<SuiteResult> run_gradient_suites(const GradcheckOptions& opt = {}) {
  return {check_network_gradients(opt),  check_classification_loss(opt),
          check_consistency_loss(opt),   check_diversity_loss(opt),
          check_entropy_loss(opt),       check_nuclear_norm_subgradient(opt),
          check_total_loss(opt)};
}

}  // namespace ssht
