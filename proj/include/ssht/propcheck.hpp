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

// Property suites for the SVD, the nuclear norm and confidence masking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <tuple>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ssht/gradcheck.hpp"
#include "ssht/linalg.hpp"
#include "ssht/objectives.hpp"

namespace ssht {

/// Orthogonal n x n factor of a random Gaussian matrix (modified Gram-Schmidt).
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q = detail::random_matrix(n, n, rng);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += q(i, k) * q(i, j);
      for (std::size_t i = 0; i < n; ++i) q(i, j) -= d * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

/// The first k columns of a random orthogonal m x m matrix.
inline Matrix random_orthonormal_columns(std::size_t m, std::size_t k, Rng& rng) {
  const Matrix q = random_orthogonal(m, rng);
  Matrix out(m, k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = q(i, j);
  return out;
}

struct SvdCheck {
  double orthonormality = 0.0;     // max of |UᵀU - I| and |VᵀV - I|
  double reconstruction = 0.0;     // |A - U S Vᵀ|_max / (1 + |A|_max)
  bool ordered = true;
};

inline SvdCheck check_svd_invariants(const Matrix& a, const SvdResult& s) {
  SvdCheck c;
  const std::size_t k = s.sigma.size();
  const Matrix uu = matmul_tn(s.u, s.u), vv = matmul_tn(s.v, s.v);
  c.orthonormality = std::max(max_abs_diff(uu, Matrix::identity(k)),
                              max_abs_diff(vv, Matrix::identity(k)));
  Matrix us = s.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) us(i, j) *= s.sigma[j];
  c.reconstruction = max_abs_diff(a, matmul_nt(us, s.v)) / (1.0 + max_abs(a));
  for (std::size_t j = 0; j < k; ++j) {
    if (s.sigma[j] < 0.0) c.ordered = false;
    if (j + 1 < k && s.sigma[j] < s.sigma[j + 1]) c.ordered = false;
  }
  return c;
}

/// Random, rank-deficient and repeated-spectrum matrices up to 128x128.
inline SuiteResult check_svd_suite(std::uint64_t seed = 20260102) {
  SuiteResult r{"svd"};
  r.tolerance = 1.0;  // errors are reported as multiples of their limits
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(seed, Stream::kEval, 10);
  const double orth_tol = 1e-10, recon_tol = 1e-8;
  const auto record = [&](const Matrix& a, const std::vector<double>* expected_sigma) {
    const SvdResult s = svd(a);
    const SvdCheck c = check_svd_invariants(a, s);
    double e = std::max(c.orthonormality / orth_tol, c.reconstruction / recon_tol);
    if (!c.ordered) e = std::max(e, 2.0);
    if (expected_sigma) {
      double dev = 0.0;
      for (std::size_t j = 0; j < s.sigma.size(); ++j)
        dev = std::max(dev, std::abs(s.sigma[j] - (*expected_sigma)[j]));
      e = std::max(e, dev / (recon_tol * (1.0 + (*expected_sigma)[0])));
    }
    r.max_error = std::max(r.max_error, e);
    ++r.checks;
    ++r.instances;
  };

  const std::pair<std::size_t, std::size_t> shapes[] = {
      {1, 1}, {1, 9}, {9, 1}, {2, 2}, {5, 3},   {3, 5},   {16, 16},  {48, 4},
      {4, 48}, {32, 20}, {20, 32}, {64, 48}, {96, 126}, {126, 96}, {128, 128}};
  for (const auto& [m, n] : shapes) record(detail::random_matrix(m, n, rng), nullptr);

  // Rank-deficient products A = L R with inner dimension below min(m, n).
  const std::tuple<std::size_t, std::size_t, std::size_t> low_rank[] = {
      {6, 4, 1}, {10, 8, 3}, {32, 32, 5}, {64, 40, 20}, {40, 64, 20}, {128, 128, 64}};
  for (const auto& [m, n, rank] : low_rank)
    record(matmul(detail::random_matrix(m, rank, rng), detail::random_matrix(rank, n, rng)),
           nullptr);
  record(Matrix(7, 5), nullptr);
  {
    Matrix dup(6, 4);  // identical columns
    for (std::size_t i = 0; i < 6; ++i) {
      const double v = static_cast<double>(i) - 2.5;
      for (std::size_t j = 0; j < 4; ++j) dup(i, j) = v;
    }
    record(dup, nullptr);
  }

  // Prescribed spectra with repeated values: A = U diag(s) Vᵀ.
  const std::vector<std::vector<double>> spectra = {
      {2, 2, 1}, {3, 3, 3, 3}, {5, 5, 2, 2, 0}, {1, 1, 1, 1, 1, 1, 1, 1},
      {4, 4, 4, 1, 1, 0, 0, 0}};
  const std::size_t extra_rows[] = {0, 3, 1, 8, 24};
  for (std::size_t t = 0; t < spectra.size(); ++t) {
    const auto& sg = spectra[t];
    const std::size_t k = sg.size(), m = k + extra_rows[t];
    Matrix u = random_orthonormal_columns(m, k, rng);
    const Matrix v = random_orthogonal(k, rng);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) u(i, j) *= sg[j];
    const Matrix a = matmul_nt(u, v);
    record(a, &sg);
    record(transpose(a), &sg);
  }
  {
    // 128 x 128 with a 64-fold repeated singular value.
    std::vector<double> sg(128);
    for (std::size_t j = 0; j < 128; ++j) sg[j] = j < 64 ? 10.0 : 1.0 / static_cast<double>(j);
    Matrix u = random_orthogonal(128, rng);
    const Matrix v = random_orthogonal(128, rng);
    for (std::size_t i = 0; i < 128; ++i)
      for (std::size_t j = 0; j < 128; ++j) u(i, j) *= sg[j];
    record(matmul_nt(u, v), &sg);
  }
  r.note = "errors in units of the orthonormality (1e-10) / reconstruction (1e-8) limits";
  return r;
}

/// Weak compositions of n into k parts.
inline std::vector<std::vector<std::size_t>> compositions(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur(k, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == k) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      cur[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, n);
  return out;
}

/// One-hot matrix with counts[c] rows of class c.
inline Matrix one_hot_rows(const std::vector<std::size_t>& counts) {
  const std::size_t B = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  Matrix m(B, counts.size());
  std::size_t row = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) m(row++, c) = 1.0;
  return m;
}

/// Closed form on one-hot batches, scale homogeneity, permutation and
/// orthogonal invariance, and the Frobenius bound chain.
inline SuiteResult check_nuclear_norm_suite(std::size_t random_matrices = 1000,
                                            std::uint64_t seed = 20260103) {
  SuiteResult r{"nuclear norm oracles"};
  r.tolerance = 1.0;
  detail::SuiteTimer timer(r);
  const auto bump = [&](double err, double limit) {
    r.max_error = std::max(r.max_error, err / limit);
    ++r.checks;
  };

  const auto comps = compositions(4, 4);
  for (const auto& counts : comps) {
    double expected = 0.0;
    for (auto n : counts) expected += std::sqrt(static_cast<double>(n));
    bump(std::abs(nuclear_norm(one_hot_rows(counts)) - expected), 1e-8);
  }

  Rng rng = make_rng(seed, Stream::kEval, 11);
  for (std::size_t t = 0; t < random_matrices; ++t) {
    const std::size_t m = detail::uniform_size(rng, 1, 12), n = detail::uniform_size(rng, 1, 12);
    const Matrix a = detail::random_matrix(m, n, rng);
    const double nn = nuclear_norm(a);
    const double rel = std::max(nn, 1e-300);
    for (double c : {-2.0, 0.5, 10.0})
      bump(std::abs(nuclear_norm(c * a) - std::abs(c) * nn) / (std::abs(c) * rel), 1e-10);

    std::vector<std::size_t> pr(m), pc(n);
    std::iota(pr.begin(), pr.end(), std::size_t{0});
    std::iota(pc.begin(), pc.end(), std::size_t{0});
    std::shuffle(pr.begin(), pr.end(), rng);
    std::shuffle(pc.begin(), pc.end(), rng);
    Matrix perm(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) perm(i, j) = a(pr[i], pc[j]);
    bump(std::abs(nuclear_norm(perm) - nn) / rel, 1e-10);

    bump(std::abs(nuclear_norm(matmul(random_orthogonal(m, rng), a)) - nn) / rel, 1e-8);

    const double fro = frobenius_norm(a);
    const double slack = 1e-12 * (1.0 + fro);
    const double upper = std::sqrt(static_cast<double>(std::min(m, n))) * fro;
    // Violations map above 1; satisfied bounds contribute 0.
    bump(std::max(0.0, fro - nn - slack) + std::max(0.0, nn - upper - slack), 1e-300);
    r.instances = t + 1;
  }
  r.note = std::to_string(comps.size()) + " one-hot compositions; errors in units of each limit";
  return r;
}

/// Mask rate is non-increasing in tau, and fully sub-threshold batches give
/// exactly zero loss and gradient.
inline SuiteResult check_masking_suite(std::uint64_t seed = 20260104) {
  SuiteResult r{"confidence masking"};
  r.tolerance = 0.0;
  detail::SuiteTimer timer(r);
  Rng rng = make_rng(seed, Stream::kEval, 12);
  std::size_t violations = 0;
  for (std::size_t t = 0; t < 20; ++t) {
    const std::size_t B = detail::uniform_size(rng, 8, 64), C = detail::uniform_size(rng, 2, 8);
    const double temp = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    const Matrix pw = softmax_rows(detail::random_matrix(B, C, rng, temp));
    const Matrix ps = softmax_rows(detail::random_matrix(B, C, rng, temp));
    double prev = 2.0;
    for (int k = 0; k < 100; ++k) {
      const double tau = 0.01 * k;
      const double rate = consistency_loss(pw, ps, tau).mask_rate;
      violations += rate > prev;
      prev = rate;
      ++r.checks;
    }
    double top = 0.0;
    for (double v : pw.values()) top = std::max(top, v);
    if (top < 1.0) {
      const auto sub = consistency_loss(pw, ps, std::nextafter(top, 1.0));
      violations += sub.loss.value != 0.0 || sub.mask_rate != 0.0 ||
                    max_abs(sub.loss.logit_grads.at(Pass::kUnlabeledStrong)) != 0.0;
      ++r.checks;
    }
    ++r.instances;
  }
  r.max_error = static_cast<double>(violations);
  r.note = "violations counted";
  return r;
}

}  // namespace ssht
