#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gperiodic/error.hpp"

namespace gperiodic {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Square sparse matrix in compressed-row form. Column indices are sorted
/// within each row and duplicates are summed at construction.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  static CsrMatrix from_triplets(int n, std::span<const Triplet> entries) {
    if (n < 0) throw ValidationError("negative matrix dimension");
    std::vector<Triplet> sorted(entries.begin(), entries.end());
    for (const auto& t : sorted) {
      if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
        throw ValidationError("triplet index out of range");
    }
    std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.n_ = n;
    m.row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t k = 0; k < sorted.size();) {
      std::size_t e = k;
      double sum = 0.0;
      while (e < sorted.size() && sorted[e].row == sorted[k].row && sorted[e].col == sorted[k].col) {
        sum += sorted[e].value;
        ++e;
      }
      m.cols_.push_back(sorted[k].col);
      m.vals_.push_back(sum);
      ++m.row_ptr_[static_cast<std::size_t>(sorted[k].row) + 1];
      k = e;
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  static CsrMatrix diagonal(std::span<const double> d) {
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({static_cast<int>(i), static_cast<int>(i), d[i]});
    return from_triplets(static_cast<int>(d.size()), t);
  }

  static CsrMatrix identity(int n) { return diagonal(std::vector<double>(static_cast<std::size_t>(n), 1.0)); }

  int dimension() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return vals_.size(); }
  std::span<const int> row_ptr() const noexcept { return row_ptr_; }
  std::span<const int> cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return vals_; }

  double at(int i, int j) const {
    auto b = cols_.begin() + row_ptr_[i];
    auto e = cols_.begin() + row_ptr_[i + 1];
    auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(n_));
    multiply(x, y);
    return y;
  }

  double quadratic_form(std::span<const double> x) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += x[i] * vals_[k] * x[cols_[k]];
    return s;
  }

  double bilinear_form(std::span<const double> x, std::span<const double> y) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += x[i] * vals_[k] * y[cols_[k]];
    return s;
  }

  std::vector<double> diagonal_values() const {
    std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
    for (int i = 0; i < n_; ++i) d[i] = at(i, i);
    return d;
  }

  bool is_diagonal() const {
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        if (cols_[k] != i && vals_[k] != 0.0) return false;
    return true;
  }

  /// Exact structural and numerical symmetry up to `tol` (absolute).
  bool is_symmetric(double tol = 0.0) const {
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        if (std::abs(vals_[k] - at(cols_[k], i)) > tol) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
  }

  /// D A D for a diagonal D given by its entries.
  CsrMatrix scaled_symmetric(std::span<const double> d) const {
    CsrMatrix m = *this;
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) m.vals_[k] *= d[i] * d[cols_[k]];
    return m;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(vals_.size());
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({i, cols_[k], vals_[k]});
    return t;
  }

 private:
  int n_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

/// Symmetric stiffness/mass pair of a generalized eigenproblem K u = lambda M u.
struct SparseOperator {
  CsrMatrix stiffness;
  CsrMatrix mass;

  int dimension() const noexcept { return stiffness.dimension(); }

  /// Checks symmetry, positive mass diagonal and (on random probes) that the
  /// stiffness form is not negative. Throws ValidationError.
  void validate(bool require_psd_stiffness = true, std::uint64_t seed = 7) const {
    if (stiffness.dimension() != mass.dimension()) throw ValidationError("stiffness/mass dimension mismatch");
    const double ks = std::max(1.0, stiffness.max_abs());
    const double ms = std::max(1.0, mass.max_abs());
    if (!stiffness.is_symmetric(1e-14 * ks)) throw ValidationError("stiffness is not symmetric");
    if (!mass.is_symmetric(1e-14 * ms)) throw ValidationError("mass is not symmetric");
    for (double d : mass.diagonal_values())
      if (!(d > 0.0)) throw ValidationError("mass diagonal entry is not positive");
    if (!require_psd_stiffness) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> u(static_cast<std::size_t>(dimension()));
    for (int probe = 0; probe < 4; ++probe) {
      double norm2 = 0.0;
      for (auto& x : u) {
        x = nd(rng);
        norm2 += x * x;
      }
      if (stiffness.quadratic_form(u) < -1e-10 * ks * norm2)
        throw ValidationError("stiffness form is negative on a probe vector");
    }
  }
};

/// LDL^T factorization of A - shift*B with a greedy minimum-degree
/// elimination order, computed by right-looking elimination on a dynamic
/// sparsity pattern. No pivoting: intended for symmetric matrices that are
/// definite, or for inertia counting near a regular shift.
class SparseLdlt {
 public:
  SparseLdlt(const CsrMatrix& a, const CsrMatrix* b = nullptr, double shift = 0.0) { factor(a, b, shift); }

  int dimension() const noexcept { return n_; }
  int negative_pivots() const noexcept { return negative_; }
  int tiny_pivots() const noexcept { return tiny_; }
  bool positive_definite() const noexcept { return negative_ == 0 && tiny_ == 0; }
  std::size_t factor_nonzeros() const noexcept { return lval_.size(); }

  void solve(std::span<const double> rhs, std::span<double> x) const {
    std::vector<double> y(rhs.begin(), rhs.end());
    for (int s = 0; s < n_; ++s) {
      const int p = order_[s];
      const double yp = y[p];
      for (int k = lptr_[s]; k < lptr_[s + 1]; ++k) y[lrow_[k]] -= lval_[k] * yp;
    }
    for (int s = 0; s < n_; ++s) y[order_[s]] /= pivot_[s];
    for (int s = n_ - 1; s >= 0; --s) {
      const int p = order_[s];
      double v = y[p];
      for (int k = lptr_[s]; k < lptr_[s + 1]; ++k) v -= lval_[k] * y[lrow_[k]];
      y[p] = v;
    }
    std::copy(y.begin(), y.end(), x.begin());
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    std::vector<double> x(rhs.size());
    solve(rhs, x);
    return x;
  }

 private:
  void factor(const CsrMatrix& a, const CsrMatrix* b, double shift) {
    n_ = a.dimension();
    if (b != nullptr && b->dimension() != n_) throw ValidationError("LDLT: operand dimension mismatch");
    std::vector<double> diag(static_cast<std::size_t>(n_), 0.0);
    std::vector<std::vector<int>> nbr(static_cast<std::size_t>(n_));
    std::vector<std::vector<double>> val(static_cast<std::size_t>(n_));
    auto add = [&](const CsrMatrix& m, double scale) {
      const auto rp = m.row_ptr();
      const auto cs = m.cols();
      const auto vs = m.values();
      for (int i = 0; i < n_; ++i) {
        for (int k = rp[i]; k < rp[i + 1]; ++k) {
          const int j = cs[k];
          const double v = scale * vs[k];
          if (j == i) {
            diag[i] += v;
            continue;
          }
          auto& row = nbr[i];
          auto it = std::find(row.begin(), row.end(), j);
          if (it == row.end()) {
            row.push_back(j);
            val[i].push_back(v);
          } else {
            val[i][static_cast<std::size_t>(it - row.begin())] += v;
          }
        }
      }
    };
    add(a, 1.0);
    if (b != nullptr && shift != 0.0) add(*b, -shift);

    double scale = 0.0;
    for (double d : diag) scale = std::max(scale, std::abs(d));
    if (scale == 0.0) scale = 1.0;
    const double tiny = 1e-14 * scale;

    using Entry = std::pair<int, int>;  // (degree, vertex)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (int i = 0; i < n_; ++i) queue.push({static_cast<int>(nbr[i].size()), i});

    std::vector<char> done(static_cast<std::size_t>(n_), 0);
    std::vector<int> pos(static_cast<std::size_t>(n_), -1);
    order_.clear();
    pivot_.clear();
    lptr_.assign(1, 0);
    lrow_.clear();
    lval_.clear();
    negative_ = 0;
    tiny_ = 0;

    while (!queue.empty()) {
      auto [deg, p] = queue.top();
      queue.pop();
      if (done[p] || deg != static_cast<int>(nbr[p].size())) continue;
      done[p] = 1;
      double d = diag[p];
      if (std::abs(d) <= tiny) {
        ++tiny_;
        d = d < 0.0 ? -tiny : tiny;
      } else if (d < 0.0) {
        ++negative_;
      }
      order_.push_back(p);
      pivot_.push_back(d);
      const auto& pn = nbr[p];
      const auto& pv = val[p];
      for (std::size_t a_i = 0; a_i < pn.size(); ++a_i) {
        lrow_.push_back(pn[a_i]);
        lval_.push_back(pv[a_i] / d);
      }
      lptr_.push_back(static_cast<int>(lrow_.size()));

      for (std::size_t a_i = 0; a_i < pn.size(); ++a_i) {
        const int i = pn[a_i];
        auto& row = nbr[i];
        auto& rv = val[i];
        // drop p from row i
        for (std::size_t k = 0; k < row.size(); ++k) {
          if (row[k] == p) {
            row[k] = row.back();
            rv[k] = rv.back();
            row.pop_back();
            rv.pop_back();
            break;
          }
        }
        for (std::size_t k = 0; k < row.size(); ++k) pos[row[k]] = static_cast<int>(k);
        const double lip = pv[a_i] / d;
        diag[i] -= lip * pv[a_i];
        for (std::size_t b_j = 0; b_j < pn.size(); ++b_j) {
          const int j = pn[b_j];
          if (j == i) continue;
          const double upd = lip * pv[b_j];
          if (pos[j] >= 0) {
            rv[static_cast<std::size_t>(pos[j])] -= upd;
          } else {
            pos[j] = static_cast<int>(row.size());
            row.push_back(j);
            rv.push_back(-upd);
          }
        }
        for (int j : row) pos[j] = -1;
        queue.push({static_cast<int>(row.size()), i});
      }
      nbr[p].clear();
      nbr[p].shrink_to_fit();
      val[p].clear();
      val[p].shrink_to_fit();
    }
  }

  int n_ = 0;
  int negative_ = 0;
  int tiny_ = 0;
  std::vector<int> order_;
  std::vector<double> pivot_;
  std::vector<int> lptr_;
  std::vector<int> lrow_;
  std::vector<double> lval_;
};

// Matrix Market coordinate format (real, symmetric: lower triangle stored).

inline void write_matrix_market(std::ostream& out, const CsrMatrix& m, const std::string& comment = {}) {
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  if (!comment.empty()) out << "% " << comment << "\n";
  std::size_t count = 0;
  const auto rp = m.row_ptr();
  const auto cs = m.cols();
  for (int i = 0; i < m.dimension(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k)
      if (cs[k] <= i) ++count;
  out << m.dimension() << " " << m.dimension() << " " << count << "\n";
  out.precision(17);
  const auto vs = m.values();
  for (int i = 0; i < m.dimension(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k)
      if (cs[k] <= i) out << i + 1 << " " << cs[k] + 1 << " " << vs[k] << "\n";
}

inline CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream", 1);
  ++lineno;
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
    throw ParseError("unsupported Matrix Market banner", lineno);
  if (field != "real" && field != "integer") throw ParseError("only real/integer fields supported", lineno);
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream header(line);
  int rows = 0, cols = 0;
  std::size_t nnz = 0;
  if (!(header >> rows >> cols >> nnz) || rows != cols) throw ParseError("bad size line", lineno);
  std::vector<Triplet> t;
  t.reserve(symmetric ? 2 * nnz : nnz);
  for (std::size_t e = 0; e < nnz; ++e) {
    if (!std::getline(in, line)) throw ParseError("unexpected end of entries", lineno + 1);
    ++lineno;
    std::istringstream is(line);
    int i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v)) throw ParseError("bad entry", lineno);
    if (i < 1 || j < 1 || i > rows || j > rows) throw ParseError("entry index out of range", lineno);
    t.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) t.push_back({j - 1, i - 1, v});
  }
  return CsrMatrix::from_triplets(rows, t);
}

}  // namespace gperiodic
