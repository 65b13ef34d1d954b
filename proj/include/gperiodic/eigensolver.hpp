#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gperiodic/dense.hpp"
#include "gperiodic/error.hpp"
#include "gperiodic/sparse.hpp"

namespace gperiodic {

struct EigenOptions {
  int count = 1;
  double tol = 1e-9;         // relative residual target, see EigenPair::residual
  int max_restarts = 60;
  std::uint64_t seed = 42;
  int krylov_dim = 0;        // 0 = automatic
  // A number known not to exceed the smallest eigenvalue. The shift is placed
  // just below it, so convergence is fast when the bound is tight.
  std::optional<double> lower_bound;
  int dense_threshold = 64;  // problems this small are solved densely
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  // mass-orthonormal, original coordinates
  // ||K u - value M u|| / (max(1,|value|) ||M u||), computed after the
  // symmetric scaling D = diag(M)^{-1/2}.
  double residual = 0.0;
};

struct EigenResult {
  std::vector<EigenPair> pairs;
  bool converged = false;
  int restarts = 0;
  int factorizations = 0;
  long operator_applications = 0;
  double max_residual = 0.0;
  double shift = 0.0;
};

/// Number of eigenvalues of K u = lambda M u strictly below x (Sylvester inertia).
inline int count_eigenvalues_below(const SparseOperator& op, double x) {
  SparseLdlt f(op.stiffness, &op.mass, x);
  return f.negative_pivots();
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Scaled problem: Ks = D K D, Ms = D M D with D = diag(M)^{-1/2}.
struct Scaled {
  CsrMatrix k;
  CsrMatrix m;
  std::vector<double> d;
  bool mass_diagonal = false;
  std::vector<double> mdiag;

  std::vector<double> mass_apply(std::span<const double> x) const {
    if (mass_diagonal) {
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = mdiag[i] * x[i];
      return y;
    }
    return m * x;
  }

  double residual(std::span<const double> y, double lambda) const {
    auto ky = k * y;
    auto my = mass_apply(y);
    double r2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = ky[i] - lambda * my[i];
      r2 += r * r;
    }
    const double mn = norm(my);
    return std::sqrt(r2) / (std::max(1.0, std::abs(lambda)) * (mn > 0.0 ? mn : 1.0));
  }

  double rayleigh(std::span<const double> y) const {
    return k.quadratic_form(y) / dot(y, mass_apply(y));
  }
};

inline Scaled make_scaled(const SparseOperator& op) {
  Scaled s;
  auto md = op.mass.diagonal_values();
  s.d.resize(md.size());
  for (std::size_t i = 0; i < md.size(); ++i) {
    if (!(md[i] > 0.0)) throw ValidationError("mass diagonal entry is not positive");
    s.d[i] = 1.0 / std::sqrt(md[i]);
  }
  s.k = op.stiffness.scaled_symmetric(s.d);
  s.m = op.mass.scaled_symmetric(s.d);
  s.mass_diagonal = s.m.is_diagonal();
  s.mdiag = s.m.diagonal_values();
  return s;
}

inline EigenResult dense_path(const SparseOperator& op, const Scaled& s, const EigenOptions& opt) {
  const int n = op.dimension();
  DenseMatrix a(n), b(n);
  for (const auto& t : s.k.triplets()) a(t.row, t.col) = t.value;
  for (const auto& t : s.m.triplets()) b(t.row, t.col) = t.value;
  DenseEigen e = generalized_symmetric_eigen(a, b);
  EigenResult r;
  r.converged = true;
  const int k = std::min(opt.count, n);
  for (int j = 0; j < k; ++j) {
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[i] = e.vectors(i, j);
    const double nm = std::sqrt(dot(y, s.mass_apply(y)));
    for (auto& v : y) v /= nm;
    EigenPair p;
    p.value = s.rayleigh(y);
    p.residual = s.residual(y, p.value);
    p.vector.resize(y.size());
    for (int i = 0; i < n; ++i) p.vector[i] = s.d[i] * y[i];
    r.max_residual = std::max(r.max_residual, p.residual);
    r.pairs.push_back(std::move(p));
  }
  // Jacobi is backward stable; residuals at round-off are accepted.
  r.converged = r.max_residual <= std::max(opt.tol, 1e-11);
  return r;
}

}  // namespace detail

/// Smallest eigenpairs of K u = lambda M u (K symmetric, M symmetric positive
/// definite). Shift-invert Lanczos in the M-inner product with full
/// reorthogonalisation, locking of converged Ritz pairs, explicit restarts,
/// and a final inertia count proving that no eigenvalue below the largest
/// returned one was skipped.
inline EigenResult smallest_eigenpairs(const SparseOperator& op, const EigenOptions& opt = {}) {
  const int n = op.dimension();
  if (opt.count < 1) throw ValidationError("eigenpair count must be at least 1");
  if (n == 0) throw ValidationError("empty operator");
  if (opt.count > n) throw ValidationError("more eigenpairs requested than the dimension");
  if (op.mass.dimension() != n) throw ValidationError("stiffness/mass dimension mismatch");
  const detail::Scaled s = detail::make_scaled(op);
  if (n <= opt.dense_threshold) return detail::dense_path(op, s, opt);

  EigenResult res;
  double mean_diag = 0.0;
  for (double x : s.k.diagonal_values()) mean_diag += std::abs(x);
  mean_diag = std::max(mean_diag / n, 1e-300);

  // Shift below the spectrum, confirmed by inertia.
  double lb = opt.lower_bound.value_or(0.0);
  double gap = opt.lower_bound ? 1e-6 * std::max(1.0, std::abs(lb)) : 1e-6 * std::max(1.0, mean_diag);
  double sigma = lb - gap;
  std::optional<SparseLdlt> fact;
  for (int attempt = 0;; ++attempt) {
    fact.emplace(s.k, &s.m, sigma);
    ++res.factorizations;
    if (fact->negative_pivots() == 0 && fact->tiny_pivots() == 0) break;
    if (attempt > 60) throw SolverError("could not place shift below the spectrum", 0.0);
    gap *= 4.0;
    sigma = lb - gap;
  }
  res.shift = sigma;

  const int m_dim = std::min(n, opt.krylov_dim > 0 ? opt.krylov_dim : std::max(2 * opt.count + 20, 40));
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;

  std::vector<std::vector<double>> locked;  // scaled coordinates, M-orthonormal
  std::vector<double> locked_val, locked_res;

  auto m_orthogonalize = [&](std::vector<double>& w, const std::vector<std::vector<double>>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
      auto mw = s.mass_apply(w);
      for (const auto& q : basis) detail::axpy(-detail::dot(q, mw), q, w);
    }
  };
  auto m_normalize = [&](std::vector<double>& w) {
    const double nm = std::sqrt(std::max(0.0, detail::dot(w, s.mass_apply(w))));
    if (nm > 0.0)
      for (auto& x : w) x /= nm;
    return nm;
  };
  auto random_vector = [&]() {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = normal(rng);
    return v;
  };

  const int target = opt.count;
  int extra = 0;  // eigenvalues known to be missing below the wanted ones
  std::vector<double> start = random_vector();
  double best_unconverged = 0.0;

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    res.restarts = restart;
    // Lanczos build
    std::vector<std::vector<double>> q;
    m_orthogonalize(start, locked);
    if (m_normalize(start) == 0.0) {
      start = random_vector();
      m_orthogonalize(start, locked);
      m_normalize(start);
    }
    q.push_back(start);
    std::vector<double> alpha, beta;
    const int room = std::min(m_dim, n - static_cast<int>(locked.size()));
    for (int j = 0; j < room; ++j) {
      auto w = fact->solve(s.mass_apply(q[j]));
      ++res.operator_applications;
      const double a = detail::dot(w, s.mass_apply(q[j]));
      alpha.push_back(a);
      m_orthogonalize(w, locked);
      m_orthogonalize(w, q);
      if (j + 1 == room) break;
      const double b = std::sqrt(std::max(0.0, detail::dot(w, s.mass_apply(w))));
      if (b <= 1e-13 * std::abs(a)) break;  // invariant subspace
      beta.push_back(b);
      for (auto& x : w) x /= b;
      q.push_back(std::move(w));
    }
    const int m = static_cast<int>(alpha.size());
    DenseMatrix t(m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    DenseEigen te = symmetric_eigen(t);
    // largest theta <-> smallest lambda
    const int need = target + extra - static_cast<int>(locked.size());
    const int examine = std::min(m, need);
    std::vector<double> restart_vec(static_cast<std::size_t>(n), 0.0);
    int unconverged_used = 0;
    best_unconverged = 0.0;
    for (int idx = 0; idx < examine; ++idx) {
      const int col = m - 1 - idx;
      if (te.values[col] <= 0.0) break;
      std::vector<double> y(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < m; ++i) detail::axpy(te.vectors(i, col), q[i], y);
      m_orthogonalize(y, locked);
      if (m_normalize(y) == 0.0) continue;
      const double rho = s.rayleigh(y);
      const double r = s.residual(y, rho);
      if (r <= opt.tol) {
        locked.push_back(y);
        locked_val.push_back(rho);
        locked_res.push_back(r);
      } else {
        detail::axpy(1.0, y, restart_vec);
        ++unconverged_used;
        best_unconverged = std::max(best_unconverged, r);
      }
    }

    if (static_cast<int>(locked.size()) >= target + extra) {
      // Certify with inertia: every eigenvalue below the largest wanted one
      // must be locked. On failure, unlock everything above the first gap in
      // the certified prefix and search again.
      std::vector<std::size_t> order(locked.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return locked_val[a] < locked_val[b]; });
      auto probe_at = [&](double v) { return v + std::max(10.0 * opt.tol * std::max(1.0, std::abs(v)), 1e-12 * mean_diag); };
      int missing = 0;
      auto missing_below = [&](double probe) {
        SparseLdlt check(s.k, &s.m, probe);
        ++res.factorizations;
        const long have = std::count_if(locked_val.begin(), locked_val.end(), [&](double v) { return v < probe; });
        missing = static_cast<int>(check.negative_pivots() - have);
        return missing > 0;
      };
      if (!missing_below(probe_at(locked_val[order[static_cast<std::size_t>(opt.count) - 1]]))) {
        res.converged = true;
        break;
      }
      double cut = probe_at(locked_val[order[static_cast<std::size_t>(opt.count) - 1]]);
      int cut_missing = missing;
      for (int j = 0; j + 1 < opt.count; ++j) {
        const double probe = probe_at(locked_val[order[j]]);
        if (missing_below(probe)) {
          cut = probe;
          cut_missing = missing;
          break;
        }
      }
      std::vector<std::vector<double>> keep;
      std::vector<double> keep_val, keep_res;
      for (std::size_t i = 0; i < locked.size(); ++i) {
        if (locked_val[i] < cut) {
          keep.push_back(std::move(locked[i]));
          keep_val.push_back(locked_val[i]);
          keep_res.push_back(locked_res[i]);
        }
      }
      locked = std::move(keep);
      locked_val = std::move(keep_val);
      locked_res = std::move(keep_res);
      extra = std::max(0, static_cast<int>(locked.size()) + cut_missing - target);
      start = random_vector();
      continue;
    }
    if (unconverged_used == 0) {
      start = random_vector();
    } else {
      start = restart_vec;
      auto noise = random_vector();
      const double scale = 1e-3 * detail::norm(start) / std::max(detail::norm(noise), 1e-300);
      detail::axpy(scale, noise, start);
    }
  }

  // Assemble output (smallest `count` among locked plus, if unconverged, best effort).
  std::vector<int> order(locked.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return locked_val[a] < locked_val[b]; });
  for (int i = 0; i < std::min<int>(opt.count, static_cast<int>(order.size())); ++i) {
    EigenPair p;
    p.value = locked_val[order[i]];
    p.residual = locked_res[order[i]];
    p.vector.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) p.vector[j] = s.d[j] * locked[order[i]][j];
    res.max_residual = std::max(res.max_residual, p.residual);
    res.pairs.push_back(std::move(p));
  }
  if (!res.converged) res.max_residual = std::max(res.max_residual, best_unconverged);
  return res;
}

/// Convenience wrapper that throws SolverError when the solver did not converge.
inline EigenResult smallest_eigenpairs_or_throw(const SparseOperator& op, const EigenOptions& opt = {}) {
  EigenResult r = smallest_eigenpairs(op, opt);
  if (!r.converged || static_cast<int>(r.pairs.size()) < opt.count)
    throw SolverError("eigensolver did not converge", r.max_residual);
  return r;
}

}  // namespace gperiodic
