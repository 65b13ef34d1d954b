#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "generators.hpp"
#include "gperiodic/tube.hpp"

using namespace gperiodic;

namespace {

// Composite Simpson integral of f on [a, b] with 2m panels.
template <class F>
double simpson(F f, double a, double b, int m = 2000) {
  const double h = (b - a) / (2 * m);
  double s = f(a) + f(b);
  for (int i = 1; i < 2 * m; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

TubeProfile radial(int n, double R, int nx, int nr, double (*f)(double)) {
  return TubeProfile::from_function(n, R, 1.0, nx, nr, [f](double, double r) { return f(r); });
}

double one(double) { return 1.0; }
double coshr(double r) { return std::cosh(r); }

std::vector<double> samples(int nr, double R, const std::function<double(double)>& u) {
  std::vector<double> v(nr);
  for (int j = 0; j < nr; ++j) v[j] = u(j * R / (nr - 1));
  return v;
}

}  // namespace

TEST(TubeProfile, Validation) {
  EXPECT_THROW(TubeProfile::create(1, 1.0, 1.0, 1, 3, {1, 1, 1}), ValidationError);
  EXPECT_THROW(TubeProfile::create(2, 0.0, 1.0, 1, 3, {1, 1, 1}), ValidationError);
  EXPECT_THROW(TubeProfile::create(2, 1.0, -1.0, 1, 3, {1, 1, 1}), ValidationError);
  EXPECT_THROW(TubeProfile::create(2, 1.0, 1.0, 1, 3, {1, 0, 1}), ValidationError);
  EXPECT_THROW(TubeProfile::create(2, 1.0, 1.0, 1, 3, {2, 1, 1}), ValidationError);
  EXPECT_THROW(TubeProfile::create(2, 1.0, 1.0, 1, 3, {1, 1}), ValidationError);
  EXPECT_NO_THROW(TubeProfile::create(2, 1.0, 1.0, 1, 3, {1, 2, 3}));
}

TEST(TubeProfile, JsonRoundTrip) {
  auto t = TubeProfile::from_function(3, 2.0, 0.5, 4, 5, [](double x, double r) { return 1.0 + x * r; });
  auto back = tube_from_json(tube_to_json(t));
  EXPECT_EQ(back.samples(), t.samples());
  EXPECT_EQ(back.n(), 3);
  EXPECT_THROW(tube_from_json(nlohmann::json{{"n", 2}}), ValidationError);
}

TEST(RadialLaplacian, ConstantGivesZero) {
  auto t = TubeProfile::from_function(3, 1.0, 1.0, 4, 21, [](double x, double r) { return std::exp((1 + x) * r); });
  for (double v : radial_laplacian_apply(t, std::vector<double>(21, 4.0))) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(RadialLaplacian, CoshLinear) {
  const int nr = 201;
  auto t = radial(2, 1.0, 1, nr, coshr);
  auto out = radial_laplacian_apply(t, samples(nr, 1.0, [](double r) { return r; }));
  for (int j = 0; j < nr; ++j) EXPECT_NEAR(out[j], -std::tanh(j * 1.0 / (nr - 1)), 1e-4);
}

TEST(RadialLaplacian, FlatQuadratic) {
  auto t = radial(4, 2.0, 3, 11, one);
  for (double v : radial_laplacian_apply(t, samples(11, 2.0, [](double r) { return r * r; }))) EXPECT_NEAR(v, -2.0, 1e-10);
}

TEST(RadialLaplacian, Errors) {
  auto t = radial(2, 1.0, 1, 2, one);
  EXPECT_THROW(radial_laplacian_apply(t, {0.0, 1.0}), ValidationError);
  auto t3 = radial(2, 1.0, 1, 5, one);
  EXPECT_THROW(radial_laplacian_apply(t3, {0.0, 1.0}), ValidationError);
}

TEST(ThetaInf, RadialProfileIsItsOwnEnvelope) {
  auto t = TubeProfile::from_function(2, 3.0, 1.0, 5, 31, [](double, double r) { return 1 + r * r; });
  auto ti = compute_theta_inf(t);
  for (int j = 0; j < 31; ++j) EXPECT_NEAR(ti[j], t.theta(2, j), 1e-13 * t.theta(2, j));
}

TEST(ThetaInf, Cosh) {
  auto t = TubeProfile::from_function(2, 2.0, 1.0, 3, 101, [](double, double r) { return std::cosh(r); });
  auto ti = compute_theta_inf(t);
  for (int j = 0; j < 101; ++j) EXPECT_NEAR(ti[j], std::cosh(j * 0.02), 1e-6);
}

TEST(ThetaInf, SmallestRate) {
  // c(x) = 1 + x on x in [0, 1]; the sample x = 0 carries the minimum rate 1
  auto t = TubeProfile::from_function(2, 1.0, 1.0, 11, 21, [](double x, double r) { return std::exp((1 + x) * r); });
  auto ti = compute_theta_inf(t);
  for (int j = 0; j < 21; ++j) EXPECT_NEAR(ti[j], std::exp(j * 0.05), 1e-12);
}

TEST(ThetaInf, AdmissibleOnRandomProfiles) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto th = gen::random_theta(rng);
    auto t = TubeProfile::from_function(3, 1.0, 1.0, 16, 33, th);
    auto d = compute_derived(t);
    EXPECT_DOUBLE_EQ(d.theta_inf[0], 1.0);
    EXPECT_DOUBLE_EQ(d.U_inf[0], 0.0);
    for (int j = 1; j < 33; ++j) EXPECT_GT(d.U_inf[j], d.U_inf[j - 1]);
    for (int i = 0; i < 16; ++i)
      for (int j = 1; j < 33; ++j)
        EXPECT_LE(d.theta_inf[j] / t.theta(i, j), d.theta_inf[j - 1] / t.theta(i, j - 1) * (1 + 1e-13));
  }
}

TEST(Oscillation, RadialProfileHasNoOscillation) {
  auto o = oscillation_beta(TubeProfile::from_function(3, 1.0, 1.0, 6, 11, [](double, double r) { return std::cosh(r); }));
  EXPECT_NEAR(o.kappa, 0.0, 1e-12);
  auto single = oscillation_beta(radial(2, 1.0, 1, 5, coshr));
  EXPECT_EQ(single.kappa, 0.0);
}

TEST(Oscillation, LinearPerturbationAtZero) {
  // theta = 1 + r s(x), s = cos(2 pi x) has zero trapezoid mean on the closed period
  const int nx = 21, n = 3;
  auto s = [](double x) { return std::cos(2 * M_PI * x); };
  auto t = TubeProfile::from_function(n, 0.1, 1.0, nx, 101, [&](double x, double r) { return 1 + r * s(x); });
  auto o = oscillation_beta(t);
  for (int i = 0; i < nx; ++i) EXPECT_NEAR(o.beta[static_cast<std::size_t>(i) * 101], (n - 1) * s(i / 20.0), 1e-5);
}

TEST(Oscillation, CenteredOnRandomProfiles) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = TubeProfile::from_function(4, 1.0, 2.0, 12, 17, gen::random_theta(rng));
    auto o = oscillation_beta(t);
    auto wx = t.x_weights();
    for (int j = 0; j < 17; ++j) {
      double s = 0.0, scale = 0.0;
      for (int i = 0; i < 12; ++i) {
        const double w = wx[i] * std::pow(t.theta(i, j), 3);
        s += o.beta[static_cast<std::size_t>(i) * 17 + j] * w;
        scale += std::abs(o.beta[static_cast<std::size_t>(i) * 17 + j]) * w;
      }
      EXPECT_NEAR(s, 0.0, 1e-13 * std::max(1.0, scale));
    }
  }
}

TEST(GInf, FlatCylinder) {
  auto d = compute_derived(radial(2, 1.0, 1, 11, one));
  auto h = g_inf_profile(d, 1.0, 0.0, 1.0);
  EXPECT_NEAR(h.energy, 1.0, 1e-14);
  for (int j = 0; j <= 10; ++j) EXPECT_NEAR(h.values[j], 1.0 - j / 10.0, 1e-14);
  EXPECT_NEAR(sampled_energy(d, h), 1.0, 1e-14);
}

TEST(GInf, EqualCapsGiveConstant) {
  auto d = compute_derived(radial(3, 1.0, 1, 11, coshr));
  auto h = g_inf_profile(d, 0.7, 0.7, 0.5);
  EXPECT_EQ(h.energy, 0.0);
  for (double v : h.values) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(GInf, CoshEnergyAgainstQuadrature) {
  const double U = simpson([](double r) { return 1.0 / std::cosh(r); }, 0.0, 1.0);
  EXPECT_NEAR(U, std::atan(std::sinh(1.0)), 1e-12);
  auto d = compute_derived(radial(2, 1.0, 1, 2001, coshr));
  auto h = g_inf_profile(d, 1.0, 0.0, 1.0);
  EXPECT_NEAR(h.energy, 1.0 / U, 1e-7);
  EXPECT_NEAR(h.energy, 1.155042, 1e-6);
}

TEST(GInf, DepthOutOfRange) {
  auto d = compute_derived(radial(2, 1.0, 1, 11, one));
  EXPECT_THROW(g_inf_profile(d, 1, 0, 0.0), ValidationError);
  EXPECT_THROW(g_inf_profile(d, 1, 0, 1.5), ValidationError);
  EXPECT_NO_THROW(g_inf_profile(d, 1, 0, 0.5));
}

TEST(HarmonicTube, RadialProfileMatchesGInf) {
  auto t = TubeProfile::from_function(2, 1.0, 1.0, 5, 201, [](double, double r) { return std::cosh(r); });
  auto d = compute_derived(t);
  auto g = g_inf_profile(d, 2.0, -1.0, 1.0);
  auto h = harmonic_solve_tube(t, 2.0, -1.0, 1.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < h.samples; ++j) EXPECT_NEAR(h.field[static_cast<std::size_t>(i) * h.samples + j], g.values[j], 1e-5);
  EXPECT_NEAR(h.energy, g.energy, 1e-4);
}

TEST(HarmonicTube, EqualCaps) {
  auto t = TubeProfile::from_function(3, 1.0, 1.0, 4, 9, [](double x, double r) { return 1 + x * r; });
  auto h = harmonic_solve_tube(t, 1.5, 1.5, 1.0);
  EXPECT_EQ(h.energy, 0.0);
  for (double v : h.field) EXPECT_EQ(v, 1.5);
}

TEST(HarmonicTube, EnergyNeverBelowComparison) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = TubeProfile::from_function(3, 1.0, 1.0, 16, 16, gen::random_theta(rng));
    auto d = compute_derived(t);
    auto h = harmonic_solve_tube(t, 1.0, 0.0, 1.0);
    EXPECT_GE(h.energy, g_inf_profile(d, 1.0, 0.0, 1.0).energy * (1 - 1e-12));
    EXPECT_LT(h.residual, 1e-10);
  }
}

TEST(Constants, A2Examples) {
  auto flat = compute_derived(radial(2, 1.0, 1, 11, one));
  EXPECT_NEAR(constant_A2(flat, 1.0), 1.0 / 16, 1e-15);
  EXPECT_NEAR(constant_A2(flat, 2.0), 4.0 * constant_A2(flat, 1.0), 1e-15);
  auto c = compute_derived(radial(2, 1.0, 1, 2001, coshr));
  const double U = simpson([](double r) { return 1.0 / std::cosh(r); }, 0.0, 1.0);
  EXPECT_NEAR(constant_A2(c, 1.0), 1.0 / (16 * U), 1e-8);
  EXPECT_NEAR(constant_A2(c, 1.0), 0.072190, 1e-6);
  EXPECT_THROW(constant_A2(flat, 0.0), ValidationError);
}

TEST(Constants, AExamples) {
  auto flat = compute_derived(radial(2, 1.0, 1, 11, one));
  auto a = constant_A(flat, 1.0, 1.0, 1.0);
  EXPECT_NEAR(a.A, 1.0 / 128, 1e-15);
  EXPECT_FALSE(a.A3.has_value());
  auto k2 = combine_lower_constants(1.0 / 16, 1.0 / 16, 1.0, 2.0);
  EXPECT_NEAR(*k2.A3, 1.0 / 256, 1e-15);
  EXPECT_NEAR(k2.A, 1.0 / 512, 1e-15);
  EXPECT_NEAR(constant_A(flat, 3.0, 1.0, 1.0).A, 9.0 * a.A, 1e-15);
  EXPECT_THROW(constant_A(flat, 1.0, 0.0, 1.0), ValidationError);
  EXPECT_THROW(constant_A(flat, 1.0, 1.0, 0.0), ValidationError);
}

TEST(Constants, AprimeExamples) {
  EXPECT_DOUBLE_EQ(constant_Aprime(2, 1.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(constant_Aprime(1, 1.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(constant_Aprime(3, 0.5, 0.25), 18.75);
  EXPECT_THROW(constant_Aprime(1, 0.0, 1.0), ValidationError);
  EXPECT_THROW(constant_Aprime(0, 1.0, 1.0), ValidationError);
}

TEST(Constants, PositiveOnRandomProfiles) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto d = compute_derived(TubeProfile::from_function(3, 1.0, 1.0, 8, 9, gen::random_theta(rng)));
    auto c = constant_A(d, 0.3, 5.0, 0.7);
    EXPECT_GT(c.A, 0.0);
    EXPECT_GT(c.A1, 0.0);
    EXPECT_GT(c.A2, 0.0);
    if (c.A3) EXPECT_GT(*c.A3, 0.0);
    EXPECT_GT(constant_Aprime(3, 1.0, 0.2), 0.0);
  }
}
