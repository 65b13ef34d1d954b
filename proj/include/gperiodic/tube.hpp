#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "gperiodic/error.hpp"
#include "gperiodic/sparse.hpp"
#include "json.hpp"

namespace gperiodic {

/// Volume element data on a transition tube in Fermi coordinates: the
/// density is theta^{n-1}(x, r) dx dr, with x sampled across the transition
/// zone alpha and r in [0, R].
class TubeProfile {
 public:
  static TubeProfile create(int n, double R, double vol_alpha, int nx, int nr, std::vector<double> theta) {
    if (n < 2) throw ValidationError("tube dimension n must be at least 2");
    if (!(R > 0.0)) throw ValidationError("tube width R must be positive");
    if (!(vol_alpha > 0.0)) throw ValidationError("Vol(alpha) must be positive");
    if (nx < 1 || nr < 2) throw ValidationError("tube grid needs nx >= 1 and nr >= 2");
    if (theta.size() != static_cast<std::size_t>(nx) * nr) throw ValidationError("theta sample count mismatch");
    for (double v : theta)
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("theta must be positive and finite");
    for (int i = 0; i < nx; ++i)
      if (std::abs(theta[static_cast<std::size_t>(i) * nr] - 1.0) > 1e-12)
        throw ValidationError("theta(x, 0) must equal 1");
    TubeProfile t;
    t.n_ = n;
    t.R_ = R;
    t.vol_ = vol_alpha;
    t.nx_ = nx;
    t.nr_ = nr;
    t.theta_ = std::move(theta);
    return t;
  }

  /// Samples f(x, r) with x in [0, vol_alpha] (single sample at x = 0 when nx = 1).
  static TubeProfile from_function(int n, double R, double vol_alpha, int nx, int nr,
                                   const std::function<double(double, double)>& f) {
    if (nx < 1 || nr < 2) throw ValidationError("tube grid needs nx >= 1 and nr >= 2");
    std::vector<double> th(static_cast<std::size_t>(nx) * nr);
    const double dx = nx > 1 ? vol_alpha / (nx - 1) : 0.0;
    const double dr = R / (nr - 1);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nr; ++j) th[static_cast<std::size_t>(i) * nr + j] = f(i * dx, j * dr);
    return create(n, R, vol_alpha, nx, nr, std::move(th));
  }

  int n() const noexcept { return n_; }
  double R() const noexcept { return R_; }
  double vol_alpha() const noexcept { return vol_; }
  int nx() const noexcept { return nx_; }
  int nr() const noexcept { return nr_; }
  double dr() const noexcept { return R_ / (nr_ - 1); }
  double dx() const noexcept { return nx_ > 1 ? vol_ / (nx_ - 1) : vol_; }
  double theta(int i, int j) const { return theta_[static_cast<std::size_t>(i) * nr_ + j]; }
  const std::vector<double>& samples() const noexcept { return theta_; }

  /// Quadrature weights across alpha; they sum to Vol(alpha).
  std::vector<double> x_weights() const {
    if (nx_ == 1) return {vol_};
    std::vector<double> w(static_cast<std::size_t>(nx_), dx());
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
  }

 private:
  int n_ = 2;
  double R_ = 1.0;
  double vol_ = 1.0;
  int nx_ = 1;
  int nr_ = 2;
  std::vector<double> theta_;
};

inline TubeProfile tube_from_json(const nlohmann::json& j) {
  try {
    return TubeProfile::create(j.at("n").get<int>(), j.at("R").get<double>(), j.at("vol_alpha").get<double>(),
                               j.at("nx").get<int>(), j.at("nr").get<int>(), j.at("theta").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("tube profile: ") + e.what());
  }
}

inline nlohmann::json tube_to_json(const TubeProfile& t) {
  return {{"n", t.n()}, {"R", t.R()}, {"vol_alpha", t.vol_alpha()}, {"nx", t.nx()}, {"nr", t.nr()}, {"theta", t.samples()}};
}

struct TubeDerived {
  int n = 2;
  double R = 1.0;
  double dr = 1.0;
  double vol_alpha = 1.0;
  std::vector<double> theta_inf;
  std::vector<double> theta_inf_logderiv;  // min over x of d/dr log theta
  std::vector<double> beta;                // nx * nr, row-major like theta
  double kappa = 0.0;
  std::vector<double> V;
  std::vector<double> U_inf;
};

namespace detail {

// d/dr log theta on the grid: central differences inside, second-order
// one-sided at the ends (first order when nr = 2).
inline std::vector<double> log_derivative(const TubeProfile& t) {
  const int nx = t.nx(), nr = t.nr();
  const double h = t.dr();
  std::vector<double> out(static_cast<std::size_t>(nx) * nr);
  for (int i = 0; i < nx; ++i) {
    auto lg = [&](int j) { return std::log(t.theta(i, j)); };
    double* o = out.data() + static_cast<std::size_t>(i) * nr;
    if (nr == 2) {
      o[0] = o[1] = (lg(1) - lg(0)) / h;
      continue;
    }
    o[0] = (-3.0 * lg(0) + 4.0 * lg(1) - lg(2)) / (2.0 * h);
    o[nr - 1] = (3.0 * lg(nr - 1) - 4.0 * lg(nr - 2) + lg(nr - 3)) / (2.0 * h);
    for (int j = 1; j + 1 < nr; ++j) o[j] = (lg(j + 1) - lg(j - 1)) / (2.0 * h);
  }
  return out;
}

inline void radial_derivatives(const std::vector<double>& u, double h, std::vector<double>& d1, std::vector<double>& d2) {
  const int nr = static_cast<int>(u.size());
  d1.assign(u.size(), 0.0);
  d2.assign(u.size(), 0.0);
  for (int j = 1; j + 1 < nr; ++j) {
    d1[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
    d2[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h);
  }
  d1[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  d1[nr - 1] = (3.0 * u[nr - 1] - 4.0 * u[nr - 2] + u[nr - 3]) / (2.0 * h);
  if (nr >= 4) {
    d2[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h);
    d2[nr - 1] = (2.0 * u[nr - 1] - 5.0 * u[nr - 2] + 4.0 * u[nr - 3] - u[nr - 4]) / (h * h);
  } else {
    d2[0] = d2[nr - 1] = d2[1];
  }
}

}  // namespace detail

/// Laplacian of f = u(r) on the tube: -u'' - (n-1) (theta'/theta)(x, r) u'.
/// Returns an nx * nr row-major field.
inline std::vector<double> radial_laplacian_apply(const TubeProfile& t, const std::vector<double>& u) {
  if (t.nr() < 3) throw ValidationError("radial Laplacian needs at least 3 radial samples");
  if (static_cast<int>(u.size()) != t.nr()) throw ValidationError("radial function size mismatch");
  std::vector<double> d1, d2;
  detail::radial_derivatives(u, t.dr(), d1, d2);
  const auto L = detail::log_derivative(t);
  std::vector<double> out(L.size());
  for (int i = 0; i < t.nx(); ++i)
    for (int j = 0; j < t.nr(); ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * t.nr() + j;
      out[k] = -d2[j] - (t.n() - 1) * L[k] * d1[j];
    }
  return out;
}

/// theta_inf with log theta_inf(r_{j+1}) - log theta_inf(r_j) equal to the
/// smallest increment of log theta over x. Equals theta when theta does not
/// depend on x, and makes theta_inf/theta nonincreasing sample by sample.
inline std::vector<double> compute_theta_inf(const TubeProfile& t) {
  std::vector<double> out(static_cast<std::size_t>(t.nr()));
  double acc = 0.0;
  out[0] = 1.0;
  for (int j = 0; j + 1 < t.nr(); ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t.nx(); ++i) m = std::min(m, std::log(t.theta(i, j + 1)) - std::log(t.theta(i, j)));
    acc += m;
    out[j + 1] = std::exp(acc);
  }
  return out;
}

struct Oscillation {
  std::vector<double> beta;  // nx * nr
  double kappa = 0.0;
  std::vector<double> V;
};

/// beta = (theta^{n-1})'/theta^{n-1} - V'/V with V(r) = integral over alpha
/// of theta^{n-1}. V'/V is taken as the theta^{n-1}-weighted mean of the
/// first term, so beta is centred exactly on every radial sample.
inline Oscillation oscillation_beta(const TubeProfile& t) {
  const int nx = t.nx(), nr = t.nr();
  const auto L = detail::log_derivative(t);
  const auto wx = t.x_weights();
  Oscillation o;
  o.beta.assign(L.size(), 0.0);
  o.V.assign(static_cast<std::size_t>(nr), 0.0);
  for (int j = 0; j < nr; ++j) {
    double v = 0.0, num = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double w = wx[i] * std::pow(t.theta(i, j), t.n() - 1);
      v += w;
      num += w * (t.n() - 1) * L[static_cast<std::size_t>(i) * nr + j];
    }
    o.V[j] = v;
    const double mean = num / v;
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) * nr + j;
      o.beta[k] = (t.n() - 1) * L[k] - mean;
      o.kappa = std::max(o.kappa, std::abs(o.beta[k]));
    }
  }
  if (nx == 1) {
    std::fill(o.beta.begin(), o.beta.end(), 0.0);
    o.kappa = 0.0;
  }
  return o;
}

/// U_inf(r) = integral_0^r theta_inf^{1-n}, cumulative trapezoid.
inline std::vector<double> u_inf_profile(const std::vector<double>& theta_inf, int n, double dr) {
  std::vector<double> u(theta_inf.size(), 0.0);
  for (std::size_t j = 1; j < theta_inf.size(); ++j)
    u[j] = u[j - 1] + 0.5 * dr * (std::pow(theta_inf[j - 1], 1 - n) + std::pow(theta_inf[j], 1 - n));
  return u;
}

inline TubeDerived compute_derived(const TubeProfile& t) {
  TubeDerived d;
  d.n = t.n();
  d.R = t.R();
  d.dr = t.dr();
  d.vol_alpha = t.vol_alpha();
  d.theta_inf = compute_theta_inf(t);
  const auto L = detail::log_derivative(t);
  d.theta_inf_logderiv.assign(static_cast<std::size_t>(t.nr()), std::numeric_limits<double>::infinity());
  for (int i = 0; i < t.nx(); ++i)
    for (int j = 0; j < t.nr(); ++j)
      d.theta_inf_logderiv[j] = std::min(d.theta_inf_logderiv[j], L[static_cast<std::size_t>(i) * t.nr() + j]);
  auto osc = oscillation_beta(t);
  d.beta = std::move(osc.beta);
  d.kappa = osc.kappa;
  d.V = std::move(osc.V);
  d.U_inf = u_inf_profile(d.theta_inf, d.n, d.dr);
  return d;
}

/// The comparison operator -u'' - (n-1) (theta_inf'/theta_inf) u', radial.
inline std::vector<double> comparison_laplacian_apply(const TubeDerived& d, const std::vector<double>& u) {
  if (u.size() < 3) throw ValidationError("radial Laplacian needs at least 3 radial samples");
  if (u.size() != d.theta_inf.size()) throw ValidationError("radial function size mismatch");
  std::vector<double> d1, d2;
  detail::radial_derivatives(u, d.dr, d1, d2);
  std::vector<double> out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) out[j] = -d2[j] - (d.n - 1) * d.theta_inf_logderiv[j] * d1[j];
  return out;
}

struct HarmonicProfile {
  double P = 0.0;
  double Q = 0.0;
  double R0 = 0.0;   // snapped to the radial grid
  int samples = 0;   // radial samples from 0 to R0 inclusive
  std::vector<double> values;
  double energy = 0.0;  // Vol(alpha) (P-Q)^2 / U_inf(R0)
};

namespace detail {
inline int snap_depth(double R0, double R, double dr) {
  if (!(R0 > 0.0) || R0 > R * (1.0 + 1e-12)) throw ValidationError("R0 must lie in (0, R]");
  const int j0 = static_cast<int>(std::lround(R0 / dr));
  if (j0 < 1) throw ValidationError("R0 is below one radial step");
  return j0;
}
}  // namespace detail

/// G_inf(r) = P - (P-Q) U_inf(r)/U_inf(R0) on [0, R0].
inline HarmonicProfile g_inf_profile(const TubeDerived& d, double P, double Q, double R0) {
  const int j0 = detail::snap_depth(R0, d.R, d.dr);
  const double u0 = d.U_inf[j0];
  if (!(u0 > 0.0)) throw ValidationError("U_inf(R0) must be positive");
  HarmonicProfile h;
  h.P = P;
  h.Q = Q;
  h.R0 = j0 * d.dr;
  h.samples = j0 + 1;
  h.values.resize(static_cast<std::size_t>(j0) + 1);
  for (int j = 0; j <= j0; ++j) h.values[j] = P - (P - Q) * d.U_inf[j] / u0;
  h.values[j0] = Q;
  h.energy = d.vol_alpha * (P - Q) * (P - Q) / u0;
  return h;
}

/// Discrete energy Vol(alpha) * sum_j mean(theta_inf^{n-1}) (dG)^2 / dr of a
/// sampled radial profile.
inline double sampled_energy(const TubeDerived& d, const HarmonicProfile& h) {
  double e = 0.0;
  for (int j = 0; j + 1 < h.samples; ++j) {
    const double w = 0.5 * (std::pow(d.theta_inf[j], d.n - 1) + std::pow(d.theta_inf[j + 1], d.n - 1));
    const double g = h.values[j + 1] - h.values[j];
    e += w * g * g / d.dr;
  }
  return d.vol_alpha * e;
}

struct TubeHarmonic {
  std::vector<double> field;  // nx * (samples) row-major
  int samples = 0;
  double R0 = 0.0;
  double energy = 0.0;
  double residual = 0.0;
};

/// Weighted harmonic function on alpha x [0, R0] with G = P at r = 0, G = Q
/// at r = R0 and natural conditions on the sides. Radial fluxes use the
/// density theta^{n-1}, tangential ones theta^{n-3} (the metric on the
/// parallel hypersurface scales by theta^2).
inline TubeHarmonic harmonic_solve_tube(const TubeProfile& t, double P, double Q, double R0) {
  const int j0 = detail::snap_depth(R0, t.R(), t.dr());
  const int nx = t.nx(), ns = j0 + 1;
  const double dr = t.dr(), dx = t.dx();
  const auto wx = t.x_weights();
  auto pw = [&](int i, int j, int e) { return std::pow(t.theta(i, j), e); };
  auto id = [&](int i, int j) { return i * ns + j; };
  const int N = nx * ns;
  std::vector<Triplet> trip;
  struct Bond {
    int a, b;
    double c;
  };
  std::vector<Bond> bonds;
  auto couple = [&](int a, int b, double c) {
    bonds.push_back({a, b, c});
    trip.push_back({a, a, c});
    trip.push_back({b, b, c});
    trip.push_back({a, b, -c});
    trip.push_back({b, a, -c});
  };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j + 1 < ns; ++j)
      couple(id(i, j), id(i, j + 1), wx[i] * 0.5 * (pw(i, j, t.n() - 1) + pw(i, j + 1, t.n() - 1)) / dr);
  for (int i = 0; i + 1 < nx; ++i)
    for (int j = 0; j < ns; ++j) {
      const double wr = (j == 0 || j == ns - 1) ? 0.5 * dr : dr;
      couple(id(i, j), id(i + 1, j), wr * 0.5 * (pw(i, j, t.n() - 3) + pw(i + 1, j, t.n() - 3)) / dx);
    }
  const CsrMatrix K = CsrMatrix::from_triplets(N, trip);

  TubeHarmonic out;
  out.samples = ns;
  out.R0 = j0 * dr;
  out.field.assign(static_cast<std::size_t>(N), 0.0);
  for (int i = 0; i < nx; ++i) {
    out.field[id(i, 0)] = P;
    out.field[id(i, j0)] = Q;
  }
  // interior unknowns
  std::vector<int> row(static_cast<std::size_t>(N), -1);
  std::vector<int> node;
  for (int i = 0; i < nx; ++i)
    for (int j = 1; j < j0; ++j) {
      row[id(i, j)] = static_cast<int>(node.size());
      node.push_back(id(i, j));
    }
  if (!node.empty() && P != Q) {
    const int m = static_cast<int>(node.size());
    std::vector<Triplet> it;
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    const auto rp = K.row_ptr();
    const auto cs = K.cols();
    const auto vs = K.values();
    for (int r = 0; r < m; ++r) {
      const int a = node[r];
      for (int k = rp[a]; k < rp[a + 1]; ++k) {
        const int b = cs[k];
        if (row[b] >= 0)
          it.push_back({r, row[b], vs[k]});
        else
          rhs[r] -= vs[k] * out.field[b];
      }
    }
    const CsrMatrix A = CsrMatrix::from_triplets(m, it);
    SparseLdlt f(A);
    auto x = f.solve(rhs);
    auto ax = A * x;
    double rn = 0.0, bn = 0.0;
    for (int r = 0; r < m; ++r) {
      rn += (ax[r] - rhs[r]) * (ax[r] - rhs[r]);
      bn += rhs[r] * rhs[r];
    }
    out.residual = std::sqrt(rn) / std::max(std::sqrt(bn), 1e-300);
    if (!f.positive_definite() || out.residual > 1e-8) throw SolverError("tube harmonic solve failed", out.residual);
    for (int r = 0; r < m; ++r) out.field[node[r]] = x[r];
  } else if (!node.empty()) {
    for (int k : node) out.field[k] = P;
  }
  for (const auto& bd : bonds) {
    const double g = out.field[bd.a] - out.field[bd.b];
    out.energy += bd.c * g * g;
  }
  return out;
}

// ------------------------------------------------------------- constants

/// A2 = Vol(alpha) Phi0(0)^2 / (16 U_inf(R)).
inline double constant_A2(const TubeDerived& d, double phi0_at_transition) {
  if (!(phi0_at_transition > 0.0)) throw ValidationError("Phi0(0) must be positive");
  if (!(d.vol_alpha > 0.0) || d.U_inf.empty() || !(d.U_inf.back() > 0.0))
    throw ValidationError("tube data must have positive Vol(alpha) and U_inf(R)");
  return d.vol_alpha * phi0_at_transition * phi0_at_transition / (16.0 * d.U_inf.back());
}

struct LowerConstants {
  double A = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  std::optional<double> A3;  // absent when kappa = 0
  double kappa = 0.0;
  double lambda1 = 0.0;
};

/// 2A = min{A1, A2/(4 lambda1), A3} with A3 = A2/(4 kappa^2), dropped when kappa = 0.
inline LowerConstants combine_lower_constants(double A1, double A2, double lambda1, double kappa) {
  if (!(lambda1 > 0.0)) throw ValidationError("lambda1 must be positive");
  if (!(A1 > 0.0) || !(A2 > 0.0)) throw ValidationError("A1 and A2 must be positive");
  if (kappa < 0.0) throw ValidationError("kappa must be nonnegative");
  LowerConstants c;
  c.A1 = A1;
  c.A2 = A2;
  c.kappa = kappa;
  c.lambda1 = lambda1;
  double m = std::min(A1, A2 / (4.0 * lambda1));
  if (kappa > 0.0) {
    c.A3 = A2 / (4.0 * kappa * kappa);
    m = std::min(m, *c.A3);
  }
  c.A = 0.5 * m;
  return c;
}

/// A1 = Phi0(0)^2 Vol(T+)/16 and A2 from the tube, combined as above.
inline LowerConstants constant_A(const TubeDerived& d, double phi0_at_transition, double lambda1, double vol_tube_plus) {
  if (!(vol_tube_plus > 0.0)) throw ValidationError("Vol(T+) must be positive");
  if (!(lambda1 > 0.0)) throw ValidationError("lambda1 must be positive");
  const double a2 = constant_A2(d, phi0_at_transition);
  const double a1 = phi0_at_transition * phi0_at_transition * vol_tube_plus / 16.0;
  return combine_lower_constants(a1, a2, lambda1, d.kappa);
}

/// A' = k (1/R^2 + 2 sqrt(lambda0)/R + lambda0).
inline double constant_Aprime(int k, double R, double lambda0) {
  if (k < 1) throw ValidationError("neighbour count k must be at least 1");
  if (!(R > 0.0)) throw ValidationError("R must be positive");
  if (lambda0 < 0.0) throw ValidationError("lambda0 must be nonnegative");
  return k * (1.0 / (R * R) + 2.0 * std::sqrt(lambda0) / R + lambda0);
}

inline nlohmann::json derived_to_json(const TubeDerived& d) {
  return {{"n", d.n},         {"R", d.R},   {"dr", d.dr},         {"vol_alpha", d.vol_alpha},
          {"theta_inf", d.theta_inf}, {"kappa", d.kappa}, {"V", d.V}, {"U_inf", d.U_inf}};
}

}  // namespace gperiodic
