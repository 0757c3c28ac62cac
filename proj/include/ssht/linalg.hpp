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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ssht/error.hpp"

namespace ssht {

/// Dense row-major matrix of doubles.
///
/// A default-constructed matrix is empty (0x0) and acts as a placeholder;
/// every other matrix has positive dimensions.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    SSHT_REQUIRE(rows > 0 && cols > 0, "matrix dimensions must be positive, got ",
                 rows, "x", cols);
  }

  /// Takes ownership of row-major `data`; rejects length mismatch and NaN/Inf.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    SSHT_REQUIRE(rows > 0 && cols > 0, "matrix dimensions must be positive, got ",
                 rows, "x", cols);
    SSHT_REQUIRE(data_.size() == rows * cols, "matrix data has ", data_.size(),
                 " entries, expected ", rows * cols);
    SSHT_REQUIRE(all_finite(), "matrix ", rows, "x", cols, " has non-finite entries");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    SSHT_REQUIRE(!rows.empty() && !rows.front().empty(), "from_rows needs a non-empty matrix");
    std::vector<double> data;
    data.reserve(rows.size() * rows.front().size());
    for (const auto& r : rows) {
      SSHT_REQUIRE(r.size() == rows.front().size(), "ragged rows in from_rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), rows.front().size(), std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    SSHT_REQUIRE(same_shape(o), "shape mismatch in +=: ", rows_, "x", cols_, " vs ", o.rows_,
                 "x", o.cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * o
  Matrix& add_scaled(const Matrix& o, double s) {
    SSHT_REQUIRE(same_shape(o), "shape mismatch in add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(double s, Matrix m) {
  m *= s;
  return m;
}

inline Matrix operator+(Matrix a, const Matrix& b) {
  a += b;
  return a;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  SSHT_REQUIRE(a.cols() == b.rows(), "matmul shape mismatch: ", a.rows(), "x", a.cols(), " * ",
               b.rows(), "x", b.cols());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// aᵀ * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  SSHT_REQUIRE(a.rows() == b.rows(), "matmul_tn shape mismatch: ", a.rows(), "x", a.cols(),
               "ᵀ * ", b.rows(), "x", b.cols());
  Matrix c(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ar = a.row(r);
    auto br = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double v = ar[i];
      if (v == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += v * br[j];
    }
  }
  return c;
}

/// a * bᵀ without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  SSHT_REQUIRE(a.cols() == b.cols(), "matmul_nt shape mismatch: ", a.rows(), "x", a.cols(),
               " * ", b.rows(), "x", b.cols(), "ᵀ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline double max_abs(const Matrix& a) noexcept {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  SSHT_REQUIRE(a.same_shape(b), "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline double frobenius_norm(const Matrix& a) {
  SSHT_REQUIRE(a.all_finite(), "frobenius_norm: non-finite entries");
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

struct SvdResult {
  Matrix u;                   // rows x k, orthonormal columns
  std::vector<double> sigma;  // k values, non-increasing, non-negative
  Matrix v;                   // cols x k, orthonormal columns
};

struct SvdOptions {
  int max_sweeps = 60;
  double tolerance = 1e-12;  // relative off-diagonal threshold
};

namespace detail {

using Column = std::vector<double>;

inline double dot(const Column& a, const Column& b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Fills basis[first..] with unit vectors orthogonal to basis[0..first).
inline void complete_basis(std::vector<Column>& basis, std::size_t first) {
  const std::size_t dim = basis.front().size();
  for (std::size_t j = first; j < basis.size(); ++j) {
    Column best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < dim; ++e) {
      Column c(dim, 0.0);
      c[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < j; ++i) {
          const double proj = dot(basis[i], c);
          for (std::size_t r = 0; r < dim; ++r) c[r] -= proj * basis[i][r];
        }
      }
      const double n = std::sqrt(dot(c, c));
      if (n > best_norm) {
        best_norm = n;
        best = std::move(c);
      }
    }
    for (double& x : best) x /= best_norm;
    basis[j] = std::move(best);
  }
}

// One-sided (Hestenes) Jacobi on a tall matrix given as columns.
inline SvdResult jacobi_svd_tall(const Matrix& a, const SvdOptions& opt) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<Column> w(n, Column(m));
  std::vector<Column> v(n, Column(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) w[j][i] = a(i, j);
    v[j][j] = 1.0;
  }

  const double frob = frobenius_norm(a);
  const double eps = std::numeric_limits<double>::epsilon();
  const double negligible = (eps * frob) * (eps * frob);

  bool converged = false;
  for (int sweep = 0; sweep < opt.max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w[p], w[p]);
        const double beta = dot(w[q], w[q]);
        if (alpha <= negligible || beta <= negligible) continue;
        const double gamma = dot(w[p], w[q]);
        if (std::abs(gamma) <= opt.tolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w[p][i];
          w[p][i] = c * wp - s * w[q][i];
          w[q][i] = s * wp + c * w[q][i];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          v[p][i] = c * vp - s * v[q][i];
          v[q][i] = s * vp + c * v[q][i];
        }
      }
    }
  }
  if (!converged)
    throw NumericalError(concat("svd: one-sided Jacobi did not converge within ", opt.max_sweeps,
                                " sweeps for a ", a.rows(), "x", a.cols(), " matrix"));

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(w[j], w[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double sigma_max = norms[order.front()];
  const double null_tol = static_cast<double>(std::max(m, n)) * eps * sigma_max;

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  std::vector<Column> ucols(n, Column(m, 0.0));
  std::size_t rank = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = norms[j];
    if (norms[j] > null_tol && sigma_max > 0.0) {
      for (std::size_t i = 0; i < m; ++i) ucols[k][i] = w[j][i] / norms[j];
      rank = k + 1;
    }
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j][i];
  }
  if (rank < n) complete_basis(ucols, rank);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = ucols[k][i];
  return out;
}

}  // namespace detail

/// Thin SVD by one-sided Jacobi rotations. k = min(rows, cols).
inline SvdResult svd(const Matrix& a, const SvdOptions& opt = {}) {
  SSHT_REQUIRE(!a.empty(), "svd of an empty matrix");
  SSHT_REQUIRE(a.all_finite(), "svd: ", a.rows(), "x", a.cols(), " matrix has non-finite entries");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a, opt);
  SvdResult t = detail::jacobi_svd_tall(transpose(a), opt);
  return SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

/// Sum of singular values.
inline double nuclear_norm(const Matrix& a) {
  const SvdResult s = svd(a);
  double total = 0.0;
  for (double x : s.sigma) total += x;
  return total;
}

/// U_r V_rᵀ over singular triples with sigma > rank_tol * sigma_max.
///
/// A member of the subdifferential of the nuclear norm at `a`; equals the
/// gradient wherever `a` has full rank and distinct singular values.
inline Matrix nuclear_norm_subgradient(const Matrix& a, double rank_tol = 1e-8) {
  SSHT_REQUIRE(rank_tol > 0.0, "rank_tol must be positive");
  const SvdResult s = svd(a);
  Matrix g(a.rows(), a.cols());
  if (s.sigma.front() <= 0.0) return g;
  const double cut = rank_tol * s.sigma.front();
  for (std::size_t k = 0; k < s.sigma.size() && s.sigma[k] > cut; ++k)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double uik = s.u(i, k);
      for (std::size_t j = 0; j < a.cols(); ++j) g(i, j) += uik * s.v(j, k);
    }
  return g;
}

}  // namespace ssht
