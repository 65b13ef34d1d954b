// Acceptance run: one PASS/FAIL line per criterion, all tolerances fixed here.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "../generators.hpp"
#include "../oracles.hpp"
#include "gperiodic/gperiodic.hpp"

using namespace gperiodic;

#ifndef GPERIODIC_SCENARIO_DIR
#define GPERIODIC_SCENARIO_DIR "scenarios"
#endif

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = budget_s <= 0 || s < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s [%2d] %-28s %s (%.2fs%s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s,
              in_time ? "" : ", over budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario load_scenario(const std::string& file) {
  return scenario_from_json(load_config(std::string(GPERIODIC_SCENARIO_DIR) + "/" + file));
}

GraphConstants estimate(const GraphFamily& f, int depth) {
  Mu0Options opt;
  opt.tol = 0.0;  // run the whole schedule
  opt.max_depth = depth;
  return mu0_estimate(f, opt);
}

}  // namespace

int main() {
  constexpr double kAbs = 1e-3;

  criterion(1, "cheeger-inequalities", 10.0, [&] {
    struct Case {
      GraphFamily f;
      int depth;
    };
    const Case cases[] = {{{GraphFamily::Kind::Tree, 1, 3}, 12},
                          {{GraphFamily::Kind::Tree, 1, 4}, 10},
                          {{GraphFamily::Kind::Lattice, 1, 2}, 40},
                          {{GraphFamily::Kind::Lattice, 2, 4}, 30}};
    bool ok = true;
    std::string d;
    for (const auto& c : cases) {
      const auto gc = estimate(c.f, c.depth);
      const double v = gc.valence, mu = gc.converged_mu0, h = gc.converged_h;
      const bool lo = h * h / (2 * v) <= mu + kAbs, hi = mu <= h + kAbs;
      ok = ok && lo && hi;
      d += fmt("%s mu0=%.4f h=%.4f; ", gc.family.c_str(), mu, h);
    }
    return Outcome{ok, d};
  });

  criterion(2, "tree-mu0-limit", 30.0, [&] {
    bool ok = true;
    std::string d;
    for (int v : {3, 4}) {
      const GraphFamily f{GraphFamily::Kind::Tree, 1, v};
      const auto gc = estimate(f, 12);
      const double exact = v - 2.0 * std::sqrt(v - 1.0);
      const double err = std::abs(gc.converged_mu0 - exact);
      // the ball sequence itself against a dense solve on small balls
      double oracle_err = 0.0;
      for (std::size_t i = 0; i < gc.depths.size() && gc.depths[i] <= 6; ++i) {
        const auto op = dirichlet_laplacian(f.ball(gc.depths[i]));
        const double ref = oracle::symmetric_eigenvalues(oracle::to_dense(op.op.stiffness))[0];
        oracle_err = std::max(oracle_err, std::abs(ref - gc.mu0_estimates[i]));
      }
      ok = ok && err < 1e-2 && oracle_err < 1e-8;
      d += fmt("v=%d mu0=%.5f (exact %.5f, err %.1e, raw d12 %.5f, dense-oracle err %.1e); ", v, gc.converged_mu0,
               exact, err, gc.mu0_estimates.back(), oracle_err);
    }
    return Outcome{ok, d};
  });

  criterion(3, "amenable-equality", 60.0, [&] {
    const auto sc = load_scenario("z_escape.toml");
    const auto r = run_scenario(sc);
    // lambda0(C) of the escape cell against 2 tan(k a) = cot(k L)
    const double a = 0.5, L = 1.0;
    double lo = 1e-9, hi = std::numbers::pi / (2 * L) - 1e-9;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (lo + hi);
      (2 * std::tan(m * a) * std::tan(m * L) - 1.0 < 0 ? lo : hi) = m;
    }
    const double k = 0.5 * (lo + hi);
    const double cell_err = std::abs(r.lambda0_C - k * k) / (k * k);
    bool decreasing = true, cutoff_ok = true;
    for (std::size_t i = 1; i < r.rows.size(); ++i) decreasing = decreasing && r.rows[i].bracket.delta < r.rows[i - 1].bracket.delta;
    for (const auto& row : r.rows) cutoff_ok = cutoff_ok && row.cutoff && row.cutoff->holds;
    const bool ok = decreasing && cutoff_ok && r.rows.back().bracket.depth == 50 && r.delta_last < 5e-3 && cell_err < 1e-3;
    return Outcome{ok, fmt("lambda0(C)=%.6f (secular %.6f), delta_50=%.3e, decreasing=%d, cutoff bound at all %zu depths=%d",
                           r.lambda0_C, k * k, r.delta_last, decreasing, r.rows.size(), cutoff_ok)};
  });

  criterion(4, "non-amenable-gap", 120.0, [&] {
    const auto sc = load_scenario("tree3.toml");
    const auto r = run_scenario(sc);
    const double A = r.constants.value().A;
    const double target = A * r.eta * (3 - 2 * std::sqrt(2.0)) * 0.95;
    const double d_inf = std::min(r.delta_last, r.delta_inf);
    const bool ok = d_inf > 0 && d_inf >= target && r.rows.back().bracket.depth <= 8;
    return Outcome{ok, fmt("delta_inf=%.4f (raw d8 %.4f) >= A eta mu0 * 0.95 = %.3e (A=%.3e, eta=%.3f)", d_inf,
                           r.delta_last, target, A, r.eta)};
  });

  criterion(5, "tube-comparison", 60.0, [&] {
    const int nx = 64, nr = 64;
    auto flat = TubeProfile::from_function(2, 1.0, 1.0, nx, nr, [](double, double r) { return std::cosh(r); });
    const auto fd = compute_derived(flat);
    const double e_ref = harmonic_solve_tube(flat, 1.0, 0.0, 1.0).energy;
    const double c = std::abs(e_ref - g_inf_profile(fd, 1.0, 0.0, 1.0).energy) / (fd.dr * fd.dr);
    std::mt19937_64 rng(2024);
    int violations = 0;
    double worst = 1e300;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + trial % 3;
      const auto t = TubeProfile::from_function(n, 1.0, 1.0, nx, nr, gen::random_theta(rng));
      const auto d = compute_derived(t);
      const double et = harmonic_solve_tube(t, 1.0, 0.0, 1.0).energy;
      const double ei = g_inf_profile(d, 1.0, 0.0, 1.0).energy;
      const double margin = et - (ei - c * d.dr * d.dr);
      worst = std::min(worst, margin);
      if (margin < 0) ++violations;
    }
    return Outcome{violations == 0, fmt("50 fields on 64x64, c=%.3e, violations=%d, min margin %.3e", c, violations, worst)};
  });

  criterion(6, "closed-form-energy-order", 0.0, [&] {
    const double exact = 1.0 / std::atan(std::sinh(1.0));
    double err[3];
    int k = 0;
    for (int nr : {33, 65, 129}) {
      const auto t = TubeProfile::from_function(2, 1.0, 1.0, 1, nr, [](double, double r) { return std::cosh(r); });
      const auto d = compute_derived(t);
      err[k++] = std::abs(sampled_energy(d, g_inf_profile(d, 1.0, 0.0, 1.0)) - exact);
    }
    const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
    return Outcome{o1 >= 1.8 && o2 >= 1.8,
                   fmt("errors %.2e %.2e %.2e, observed orders %.3f %.3f", err[0], err[1], err[2], o1, o2)};
  });

  criterion(7, "radial-comparison", 0.0, [&] {
    std::mt19937_64 rng(77);
    int violations = 0;
    const int nx = 16, nr = 64;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + trial % 3;
      const auto t = TubeProfile::from_function(n, 1.0, 1.0, nx, nr, gen::random_theta(rng));
      const auto d = compute_derived(t);
      const auto f = gen::random_decreasing(rng);
      std::vector<double> u(nr);
      for (int j = 0; j < nr; ++j) u[j] = f(j * d.dr);
      const auto lap = radial_laplacian_apply(t, u);
      const auto cmp = comparison_laplacian_apply(d, u);
      const auto L = detail::log_derivative(t);
      double spread = 0.0;
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nr; ++j) spread = std::max(spread, L[i * nr + j] - d.theta_inf_logderiv[j]);
      const double end_tol = (n - 1) * spread * d.dr * d.dr / 3.0 * f.third_derivative_bound();
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nr; ++j) {
          const double tol = (j == 0 || j == nr - 1 ? end_tol : 0.0) + 1e-12 * (1 + std::abs(cmp[j]));
          if (lap[i * nr + j] < cmp[j] - tol) ++violations;
        }
    }
    return Outcome{violations == 0, fmt("100 decreasing u, violations=%d", violations)};
  });

  criterion(8, "hyperbolic-bottom", 0.0, [&] {
    bool ok = true;
    std::string d;
    for (int n : {2, 3}) {
      const auto c = build_cell(
          CellSpec::interval(30.0, WeightSpec::cosh_power(n - 1.0), 1e-2, NodeRole::Free, NodeRole::Dirichlet));
      const double l0 = neumann_spectrum(c).lambda0;
      const double bottom = (n - 1.0) * (n - 1.0) / 4.0;
      ok = ok && std::abs(l0 - bottom) < 1e-2;
      d += fmt("n=%d lambda0=%.5f (bottom %.2f); ", n, l0, bottom);
    }
    return Outcome{ok, d};
  });

  criterion(9, "bounded-decomposition", 0.0, [&] {
    const auto r = run_bounded_decomposition(load_scenario("tree3_star.toml"));
    const double up = r.rows.back().bracket.upper;
    const double est = std::min(up, r.upper_inf);
    const bool ok = est > 0 && est >= r.lower_bound * 0.95 && up <= r.upper_bound * 1.05;
    return Outcome{ok, fmt("%.3e <= lambda0(M) in [%.4f, %.4f] <= %.4f", r.lower_bound, est, up, r.upper_bound)};
  });

  criterion(10, "discretization-identities", 0.0, [&] {
    const auto c = build_cell(
        CellSpec::star(3, 0.5, WeightSpec::exp(0.4), 0.05, CellSpec::Escape{1.0, WeightSpec::constant(1.0), true}));
    const auto spec = neumann_spectrum(c, 2, 1e-11);
    const auto s = glue(build_regular_tree(3, 4), c, Truncation::Neumann);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd;
    double pyth = 0.0, orth = 0.0, energy = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> f(static_cast<std::size_t>(s.dimension()));
      for (auto& x : f) x = nd(rng);
      const auto d = discretize_against_phi0(s, f, spec);
      for (std::size_t i = 0; i < d.a2.size(); ++i)
        pyth = std::max(pyth, std::abs(d.a2[i] - d.b[i] * d.b[i] - d.c2[i]) / std::max(1.0, d.a2[i]));
      orth = std::max(orth, d.max_orthogonality);
      energy = std::max(energy, std::abs(d.decomposed_energy - d.energy) / d.energy);
    }
    return Outcome{pyth < 1e-10 && orth < 1e-8 && energy < 1e-8,
                   fmt("200 functions: pythagoras %.1e, orthogonality %.1e, energy %.1e", pyth, orth, energy)};
  });

  criterion(11, "eigensolver-oracle", 0.0, [&] {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    bool converged = true;
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 20 + static_cast<int>(rng() % 181);
      const auto op = oracle::random_definite_pair(n, rng, trial % 2 == 0);
      EigenOptions opt;
      opt.count = 2;
      const auto r = smallest_eigenpairs(op, opt);
      converged = converged && r.converged;
      const auto ref = oracle::generalized_eigenvalues(op.stiffness, op.mass);
      for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(r.pairs[i].value - ref[i]) / std::max(1.0, std::abs(ref[i])));
    }
    return Outcome{converged && worst < 1e-8, fmt("25 pairs (n 20..200), max deviation %.1e", worst)};
  });

  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
