#pragma once

// Minimal dense linear algebra for the fit engine. Problems here are tiny
// (a dozen parameters at most), so plain O(n^3) routines are plenty.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace zplkit {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// J^T J for a residual Jacobian.
inline Matrix normal_matrix(const Matrix& j) {
  Matrix m(j.cols, j.cols);
  for (std::size_t p = 0; p < j.cols; ++p)
    for (std::size_t q = p; q < j.cols; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < j.rows; ++i) s += j(i, p) * j(i, q);
      m(p, q) = s;
      m(q, p) = s;
    }
  return m;
}

// J^T r.
inline std::vector<double> mul_transposed(const Matrix& j, const std::vector<double>& r) {
  std::vector<double> out(j.cols, 0.0);
  for (std::size_t i = 0; i < j.rows; ++i)
    for (std::size_t p = 0; p < j.cols; ++p) out[p] += j(i, p) * r[i];
  return out;
}

// Solves A x = b for symmetric positive definite A by Cholesky.
// Returns false if the factorization breaks down.
inline bool cholesky_solve(Matrix a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = a.rows;
  if (n != a.cols || b.size() != n) throw std::invalid_argument("cholesky_solve: shape mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    double d = a(k, k);
    for (std::size_t p = 0; p < k; ++p) d -= a(k, p) * a(k, p);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double l = std::sqrt(d);
    a(k, k) = l;
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = a(i, k);
      for (std::size_t p = 0; p < k; ++p) s -= a(i, p) * a(k, p);
      a(i, k) = s / l;
    }
  }
  // forward then backward substitution, L L^T x = b
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= a(i, p) * b[p];
    b[i] = s / a(i, i);
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t p = ii + 1; p < n; ++p) s -= a(p, ii) * x[p];
    x[ii] = s / a(ii, ii);
  }
  return true;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix: A = V diag(w) V^T.
// Good to machine precision for the small matrices used here.
inline void jacobi_eigh(Matrix a, std::vector<double>& w, Matrix& v) {
  const std::size_t n = a.rows;
  if (n != a.cols) throw std::invalid_argument("jacobi_eigh: matrix must be square");
  v = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
  }
  w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i] = a(i, i);
}

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix via Jacobi.
// Eigenvalues below tol_rel * max_eigenvalue are treated as zero;
// rank_deficient reports whether any were dropped.
inline Matrix pseudo_inverse_sym(const Matrix& a, bool& rank_deficient,
                                 double tol_rel = 1e-12) {
  std::vector<double> w;
  Matrix v;
  jacobi_eigh(a, w, v);
  double wmax = 0.0;
  for (double x : w) wmax = std::max(wmax, std::abs(x));
  const double tol = tol_rel * wmax;
  rank_deficient = false;
  const std::size_t n = a.rows;
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(w[k] > tol)) {
      rank_deficient = true;
      continue;
    }
    const double inv = 1.0 / w[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) += v(i, k) * inv * v(j, k);
  }
  return out;
}

}  // namespace zplkit
