#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sce/kinematics.hpp"

using namespace sce;

TEST(TimeJet, ArithmeticMatchesDerivatives) {
  // f = t^2 + 1 at t = 2: (5, 4, 2, 0)
  const TimeJet t = TimeJet::variable(2.0, 3);
  const TimeJet f = t * t + 1.0;
  EXPECT_DOUBLE_EQ(f.deriv(0), 5.0);
  EXPECT_DOUBLE_EQ(f.deriv(1), 4.0);
  EXPECT_DOUBLE_EQ(f.deriv(2), 2.0);
  EXPECT_DOUBLE_EQ(f.deriv(3), 0.0);
  // 1/f: derivatives -f'/f^2 = -4/25, (2f'^2 - f f'')/f^3 = (32-10)/125
  const TimeJet g = 1.0 / f;
  EXPECT_NEAR(g.deriv(1), -4.0 / 25.0, 1e-15);
  EXPECT_NEAR(g.deriv(2), 22.0 / 125.0, 1e-15);
  const TimeJet l = log(f);
  EXPECT_NEAR(l.deriv(1), 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(l.deriv(2), (2.0 * 5.0 - 16.0) / 25.0, 1e-15);
  const TimeJet e = exp(t);
  for (int k = 0; k <= 3; ++k) EXPECT_NEAR(e.deriv(k), std::exp(2.0), 1e-13);
  const TimeJet s = sqrt(f);
  EXPECT_NEAR(s.deriv(1), 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR((s * s).deriv(2), 2.0, 1e-14);
}

TEST(TimeJet, DerivativeAndTruncation) {
  const auto a = TimeJet::from_derivatives({1.0, 2.0, 3.0, 4.0});
  const auto d = a.derivative();
  EXPECT_EQ(d.order(), 2u);
  EXPECT_DOUBLE_EQ(d.deriv(0), 2.0);
  EXPECT_DOUBLE_EQ(d.deriv(1), 3.0);
  EXPECT_DOUBLE_EQ(d.deriv(2), 4.0);
  EXPECT_EQ((a * d).order(), 2u);
  EXPECT_THROW(TimeJet(1.0, 0).derivative(), std::domain_error);
  EXPECT_THROW(1.0 / TimeJet(0.0, 2), std::domain_error);
}

TEST(Potential, FlatCase) {
  const auto a = TimeJet::from_derivatives({1.0, 0.0, 0.0, 0.0});
  const auto V = potential(a, {2.0, 0.3});
  EXPECT_DOUBLE_EQ(V.value(), 4.0);
  EXPECT_DOUBLE_EQ(V.deriv(1), 0.0);
}

TEST(Potential, ConformalCoupling) {
  const auto a = TimeJet::from_derivatives({1.5, 0.2, 7.0, 1.0});
  const auto V = potential(a, {0.5, 1.0 / 6.0});
  EXPECT_NEAR(V.value(), 1.5 * 1.5 * 0.25, 1e-15);
}

TEST(Potential, Arithmetic) {
  EXPECT_DOUBLE_EQ(potential(2.0, 1.0, {0.0, 0.0}), -0.5);
  const auto V = potential(TimeJet::from_derivatives({2.0, 0.0, 1.0}), {0.0, 0.0});
  EXPECT_DOUBLE_EQ(V.value(), -0.5);
  EXPECT_THROW(potential(-1.0, 0.0, {}), std::domain_error);
  EXPECT_THROW(potential(TimeJet::from_derivatives({0.0, 0.0, 1.0}), {}), std::domain_error);
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
  // a(t) = 1 + 0.3 sin t, evaluated at t = 0.4
  auto ajet = [](double t) {
    return TimeJet::from_derivatives({1 + 0.3 * std::sin(t), 0.3 * std::cos(t), -0.3 * std::sin(t),
                                      -0.3 * std::cos(t), 0.3 * std::sin(t)});
  };
  const CouplingParams p{0.7, 0.05};
  const auto V = potential(ajet(0.4), p);
  const double h = 1e-4;
  const double vp = potential(ajet(0.4 + h), p).value(), vm = potential(ajet(0.4 - h), p).value();
  EXPECT_NEAR(V.deriv(1), (vp - vm) / (2 * h), 1e-7);
  EXPECT_NEAR(V.deriv(2), (vp - 2 * V.value() + vm) / (h * h), 1e-5);
}

TEST(Generator, MatricesAsPrinted) {
  const auto [A, B] = generator_matrices(0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (i == 0 && j == 1) ? 2.0 : (i == 1 && j == 2) ? 1.0 : 0.0;
      EXPECT_EQ(A[i][j], expect);
    }
  const auto B3 = mat_mul(B, mat_mul(B, B));
  for (const auto& row : B3)
    for (double x : row) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(mat_mul(B, B)[2][0], 2.0);
}

TEST(Generator, NormBounds) {
  const auto nb = generator_norm_bounds(3.0);
  EXPECT_DOUBLE_EQ(nb.A, 2.0 * std::sqrt(10.0));
  EXPECT_DOUBLE_EQ(nb.B, 2.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 100; ++t) {
    const double V = u(rng);
    const auto [A, B] = generator_matrices(V);
    EXPECT_LE(mat_max_norm(A), generator_norm_bounds(V).A);
    EXPECT_EQ(mat_max_norm(B), 2.0);
  }
}

TEST(Generator, HandMultiplication) {
  MomentVector m(2);
  m[0] = {1.0, 0.0, 0.0};
  const auto s = apply_generator(m, 2.0);
  EXPECT_EQ(s[0], (Triple{0.0, -2.0, 0.0}));
  EXPECT_EQ(s[1], (Triple{}));
}

TEST(Generator, Linearity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    MomentVector x(5), y(5);
    for (std::size_t n = 0; n <= 5; ++n) {
      x[n] = {u(rng), u(rng), u(rng)};
      y[n] = {u(rng), u(rng), u(rng)};
    }
    const double al = u(rng), be = u(rng), V = 3 * u(rng);
    const auto lhs = apply_generator(al * x + be * y, V);
    const auto rhs = al * apply_generator(x, V) + be * apply_generator(y, V);
    for (std::size_t n = 0; n <= 5; ++n) EXPECT_LT((lhs[n] - rhs[n]).norm(), 1e-14);
  }
}

TEST(Generator, FlatFormMatches) {
  const auto m = vacuum_moments(1.3, 0.8, 6);
  const auto flat = m.flatten();
  std::vector<double> dy(flat.size());
  apply_generator_flat(flat.data(), dy.data(), m.size(), 0.4);
  EXPECT_EQ(MomentVector::from_flat(dy), apply_generator(m, 0.4));
}

TEST(Generator, VacuumStationary) {
  const auto m = vacuum_moments(1.0, 1.0, 16);
  const auto s = apply_generator(m, 1.0);
  for (std::size_t n = 0; n < 16; ++n) {
    const double scale = m[n].norm() + m[n + 1].norm();
    EXPECT_LT(s[n].norm(), 1e-12 * scale) << n;
  }
  EXPECT_GT(s[16].norm(), 0.0);  // truncation
}

TEST(Generator, ThermalStationary) {
  const auto m = thermal_moments(1.0, 16);
  const auto s = apply_generator(m, 0.0);
  for (std::size_t n = 0; n < 16; ++n) {
    EXPECT_LT(s[n].norm(), 1e-12 * (m[n].norm() + m[n + 1].norm())) << n;
  }
}

TEST(Generator, WordCountCap) {
  // Products of A's and B's with more than ceil((n+1)/2) factors of B vanish.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int n = 1; n <= 7; ++n) {
    const int cap = (n + 2) / 2;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Mat3 p = mat_identity();
      for (int i = 0; i < n; ++i) {
        const auto g = generator_matrices(u(rng));
        p = mat_mul(p, (mask >> i & 1u) ? g.B : g.A);
      }
      if (__builtin_popcount(mask) > cap) {
        EXPECT_EQ(mat_max_norm(p), 0.0);
      }
    }
  }
}

TEST(Hadamard, MinkowskiClosedForm) {
  const double m = 1.3;
  const std::size_t J = 12;
  const auto c = hadamard_coeffs(TimeJet(m * m, 2 * J), J);
  for (std::size_t j = 0; j <= J; ++j) {
    const double a = 0.5 * special::binom(-0.5, static_cast<int>(j)) * std::pow(m, 2.0 * j);
    EXPECT_NEAR(c.alpha[j].value(), a, 1e-12 * std::abs(a)) << j;
    EXPECT_EQ(c.beta[j].value(), 0.0);
    if (j >= 1) {
      const double g = 0.5 * special::binom(0.5, static_cast<int>(j)) * std::pow(m, 2.0 * j);
      EXPECT_NEAR(c.gamma_at(static_cast<int>(j) - 1).value(), g, 1e-12 * std::abs(g)) << j;
    }
  }
  EXPECT_NEAR(c.gamma_at(0).value() - c.alpha[1].value(), 0.5 * m * m, 1e-15);
  for (std::size_t j = 0; j < J; ++j) EXPECT_LT(std::abs(purity_residual(c, j).value()), 1e-12);
}

TEST(Hadamard, MasslessAllZero) {
  const auto c = hadamard_coeffs(TimeJet(0.0, 10), 5);
  EXPECT_EQ(c.alpha[0].value(), 0.5);
  EXPECT_EQ(c.gamma_at(-1).value(), 0.5);
  for (std::size_t j = 1; j <= 5; ++j) {
    EXPECT_EQ(c.alpha[j].value(), 0.0);
    EXPECT_EQ(c.beta[j].value(), 0.0);
    EXPECT_EQ(c.gamma_at(static_cast<int>(j) - 1).value(), 0.0);
  }
}

TEST(Hadamard, TimeDependentPurityAndErrors) {
  auto V = TimeJet::from_derivatives({1.0, 0.3, -0.2, 0.5, 0.1, -0.7, 0.2, 0.05, 0.3});
  const auto c = hadamard_coeffs(V, 4);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_LT(std::abs(purity_residual(c, j).value()), 1e-14);
  // beta_1 = -V'/8
  EXPECT_NEAR(c.beta[1].value(), -0.3 / 8.0, 1e-15);
  EXPECT_THROW(hadamard_coeffs(V, 5), std::invalid_argument);
  EXPECT_THROW(purity_residual(c, 4), std::out_of_range);
  auto perturbed = c;
  perturbed.alpha[1] += 1e-3;
  EXPECT_NEAR(purity_residual(perturbed, 0).value(), 1e-3, 1e-15);
}

TEST(VacuumMoments, ReferenceValues) {
  const auto m = vacuum_moments(1.0, 1.0, 4);
  EXPECT_NEAR(m[0].ff, -2.4461e-3, 2e-7);  // quoted to 4 digits; exact value -2.44624e-3
  const double expect = (std::log(0.5) + 0.5) / (8 * pi2);
  EXPECT_NEAR(m[0].ff, expect, 1e-16);
  EXPECT_NEAR(m[0].pp, (0.25 + std::log(0.5)) / (32 * pi2), 1e-16);
  for (std::size_t n = 0; n <= 4; ++n) EXPECT_EQ(m[n].fp, 0.0);
  const auto z = vacuum_moments(0.0, 1.0, 4);
  for (std::size_t n = 0; n <= 4; ++n) EXPECT_EQ(z[n], Triple{});
}

TEST(VacuumMoments, GeometricWeightSpace) {
  const double m = 1.4;
  const auto v = vacuum_moments(m, 0.9, 24);
  const double om = 1.1 * m * m;
  double prev_ratio = 0.0;
  for (std::size_t n = 0; n <= 24; ++n) {
    const double r = v[n].norm() / std::pow(om, static_cast<double>(n));
    EXPECT_TRUE(std::isfinite(r));
    if (n > 12) {
      EXPECT_LT(r, prev_ratio * 1.05);  // eventually decaying
    }
    prev_ratio = r;
  }
}

TEST(ThermalMoments, Conventions) {
  const auto c = thermal_moments(1.0, 3);
  EXPECT_NEAR(c[0].ff, 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(c[0].pp, pi2 / 30.0, 1e-14);
  const auto p = thermal_moments(1.0, 3, ThermalConvention::Literature);
  EXPECT_NEAR(p[0].pp, std::pow(pi, 4) / 15.0, 1e-13);
  for (std::size_t n = 0; n <= 3; ++n) EXPECT_EQ(c[n].fp, 0.0);
  const auto b2 = thermal_moments(2.0, 1);
  EXPECT_NEAR(b2[0].ff, 1.0 / 48.0, 1e-15);
}

TEST(ThermalMoments, FactorialWeightSpace) {
  const double beta = 1.0, om = 1.2 / beta;
  const auto t = thermal_moments(beta, 30);
  for (std::size_t n = 0; n <= 30; ++n) {
    const auto nd = static_cast<double>(n);
    EXPECT_LT(std::abs(t[n].ff) / (std::tgamma(2 * nd + 1) * std::pow(om, 2 * nd)), 1.0);
  }
}

TEST(ThermalMoments, MassiveKmsStationaryAndMasslessLimit) {
  const double m = 0.8, beta = 1.3;
  const auto t = massive_thermal_moments(m, 1.0, beta, 6);
  const auto s = apply_generator(t, m * m);
  for (std::size_t n = 0; n < 6; ++n) EXPECT_LT(s[n].norm(), 1e-12 * (t[n].norm() + t[n + 1].norm())) << n;
  const auto z = massive_thermal_moments(0.0, 1.0, beta, 4);
  const auto r = thermal_moments(beta, 4);
  for (std::size_t n = 0; n <= 4; ++n) {
    EXPECT_NEAR(z[n].ff, r[n].ff, 1e-12 * std::abs(r[n].ff)) << n;
    EXPECT_NEAR(z[n].pp, r[n].pp, 1e-12 * std::abs(r[n].pp)) << n;
  }
}

TEST(Special, Values) {
  EXPECT_NEAR(special::digamma_int(1), -0.57721566490153286, 1e-16);
  EXPECT_NEAR(special::digamma_int(3), 1.5 - 0.57721566490153286, 1e-15);
  EXPECT_NEAR(special::zeta(2.0), pi2 / 6, 1e-15);
  EXPECT_NEAR(special::zeta(4.0), pi2 * pi2 / 90, 1e-15);
  EXPECT_DOUBLE_EQ(special::binom(-0.5, 2), 0.375);
  EXPECT_DOUBLE_EQ(special::binom(5.0, 2), 10.0);
}
