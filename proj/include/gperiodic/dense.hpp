#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gperiodic/error.hpp"

namespace gperiodic {

/// Small row-major square matrix used for Ritz problems and dense fallbacks.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(int n, double fill = 0.0) : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {}

  int dimension() const noexcept { return n_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

 private:
  int n_ = 0;
  std::vector<double> a_;
};

struct DenseEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column j belongs to values[j]
};

/// Cyclic Jacobi rotations. Accurate to a few ulps of ||A|| and unconditionally
/// convergent; cost is fine for the n <= ~200 matrices it is used on.
inline DenseEigen symmetric_eigen(DenseMatrix a, int max_sweeps = 100) {
  const int n = a.dimension();
  DenseMatrix v(n);
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= 1e-32 * total || off == 0.0) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
  DenseEigen out;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors = DenseMatrix(n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
inline DenseMatrix cholesky(const DenseMatrix& a) {
  const int n = a.dimension();
  DenseMatrix l(n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw ValidationError("matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Generalized problem A x = lambda B x with B symmetric positive definite.
/// Eigenvectors are B-orthonormal.
inline DenseEigen generalized_symmetric_eigen(const DenseMatrix& a, const DenseMatrix& b) {
  const int n = a.dimension();
  const DenseMatrix l = cholesky(b);
  // C = L^{-1} A L^{-T}
  DenseMatrix y(n);  // y = L^{-1} A
  for (int col = 0; col < n; ++col)
    for (int i = 0; i < n; ++i) {
      double s = a(i, col);
      for (int k = 0; k < i; ++k) s -= l(i, k) * y(k, col);
      y(i, col) = s / l(i, i);
    }
  DenseMatrix c(n);
  for (int row = 0; row < n; ++row)
    for (int i = 0; i < n; ++i) {
      double s = y(row, i);
      for (int k = 0; k < i; ++k) s -= l(i, k) * c(row, k);
      c(row, i) = s / l(i, i);
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) c(i, j) = c(j, i) = 0.5 * (c(i, j) + c(j, i));
  DenseEigen e = symmetric_eigen(c);
  // x = L^{-T} z
  for (int col = 0; col < n; ++col)
    for (int i = n - 1; i >= 0; --i) {
      double s = e.vectors(i, col);
      for (int k = i + 1; k < n; ++k) s -= l(k, i) * e.vectors(k, col);
      e.vectors(i, col) = s / l(i, i);
    }
  return e;
}

}  // namespace gperiodic
