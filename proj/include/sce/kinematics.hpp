#pragma once

// Potential, generator matrices, Hadamard coefficient recurrences and the
// closed-form reference moment vectors.

#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sce/seqspace.hpp"
#include "sce/special.hpp"
#include "sce/time_jet.hpp"

namespace sce {

inline constexpr double pi = std::numbers::pi;
inline constexpr double pi2 = pi * pi;

struct CouplingParams {
  double m = 0.0;
  double xi = 0.0;

  void validate() const {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("mass m must be finite and >= 0");
    if (!std::isfinite(xi)) throw std::invalid_argument("curvature coupling xi must be finite");
  }
};

/// V = (6 xi - 1) a''/a + a^2 m^2 as a jet two orders below `a`.
inline TimeJet potential(const TimeJet& a, const CouplingParams& p) {
  if (!(a.value() > 0.0)) throw std::domain_error("potential: scale factor must be positive");
  if (a.order() < 2) throw std::invalid_argument("potential: scale-factor jet needs order >= 2");
  const TimeJet a2 = a.derivative().derivative();
  const TimeJet at = a.truncated(a2.order());
  return (6.0 * p.xi - 1.0) * (a2 / at) + p.m * p.m * (at * at);
}

/// Scalar potential from (a, a'').
inline double potential(double a, double a2, const CouplingParams& p) {
  if (!(a > 0.0)) throw std::domain_error("potential: scale factor must be positive");
  return (6.0 * p.xi - 1.0) * a2 / a + a * a * p.m * p.m;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat_mul(const Mat3& x, const Mat3& y) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += x[i][k] * y[k][j];
  return r;
}

inline Mat3 mat_identity() { return Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

/// Operator norm induced by the max norm on R^3 (maximal row sum).
inline double mat_max_norm(const Mat3& x) {
  double best = 0.0;
  for (const auto& row : x) best = std::max(best, std::abs(row[0]) + std::abs(row[1]) + std::abs(row[2]));
  return best;
}

struct GeneratorMatrices {
  Mat3 A;
  Mat3 B;
};

inline GeneratorMatrices generator_matrices(double V) {
  return {Mat3{{{0.0, 2.0, 0.0}, {-V, 0.0, 1.0}, {0.0, -2.0 * V, 0.0}}},
          Mat3{{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}}}};
}

struct GeneratorNorms {
  double A;
  double B;
};

/// ||A|| <= 2 sqrt(1 + V^2), ||B|| = 2. These are the constants entering all
/// evolution bounds.
inline GeneratorNorms generator_norm_bounds(double V) { return {2.0 * std::sqrt(1.0 + V * V), 2.0}; }

inline Triple apply(const Mat3& x, const Triple& t) {
  return {x[0][0] * t.ff + x[0][1] * t.fp + x[0][2] * t.pp, x[1][0] * t.ff + x[1][1] * t.fp + x[1][2] * t.pp,
          x[2][0] * t.ff + x[2][1] * t.fp + x[2][2] * t.pp};
}

/// (S M)_n = A M_n + B M_{n+1}, with M_{N+1} = 0.
inline MomentVector apply_generator(const MomentVector& m, double V) {
  MomentVector out(m.order());
  for (std::size_t n = 0; n < m.size(); ++n) {
    const Triple& c = m[n];
    const Triple nx = m.at_or_zero(n + 1);
    out[n] = {2.0 * c.fp, -V * c.ff + c.pp + nx.ff, -2.0 * V * c.fp + 2.0 * nx.fp};
  }
  return out;
}

/// Flat-array form used inside integrators: y holds 3(N+1) doubles.
inline void apply_generator_flat(const double* y, double* dy, std::size_t size, double V) {
  for (std::size_t n = 0; n < size; ++n) {
    const double ff = y[3 * n], fp = y[3 * n + 1], pp = y[3 * n + 2];
    const double nff = n + 1 < size ? y[3 * n + 3] : 0.0;
    const double nfp = n + 1 < size ? y[3 * n + 4] : 0.0;
    dy[3 * n] = 2.0 * fp;
    dy[3 * n + 1] = -V * ff + pp + nff;
    dy[3 * n + 2] = -2.0 * V * fp + 2.0 * nfp;
  }
}

struct HadamardCoeffs {
  std::vector<TimeJet> alpha;  // alpha_0 .. alpha_J
  std::vector<TimeJet> beta;   // beta_0 .. beta_J
  std::vector<TimeJet> gamma;  // gamma_{-1} .. gamma_{J-1}, stored shifted by one

  [[nodiscard]] std::size_t J() const { return alpha.size() - 1; }
  /// gamma_j for j >= -1.
  [[nodiscard]] const TimeJet& gamma_at(int j) const { return gamma.at(static_cast<std::size_t>(j + 1)); }
};

namespace detail {

inline TimeJet hadamard_sum(const HadamardCoeffs& c, std::size_t j, std::size_t order) {
  TimeJet s(0.0, order);
  for (std::size_t i = 1; i <= j; ++i) {
    s += c.alpha[i] * c.gamma_at(static_cast<int>(j - i)) - c.beta[i] * c.beta[j - i];
  }
  return s;
}

}  // namespace detail

/// alpha_j, beta_j (j <= J) and gamma_j (j <= J-1) from the recurrences with
/// alpha_0 = 1/2, beta_0 = 0, gamma_{-1} = 1/2.
inline HadamardCoeffs hadamard_coeffs(const TimeJet& V, std::size_t J) {
  if (V.order() < 2 * J) {
    throw std::invalid_argument("hadamard_coeffs: V-jet order " + std::to_string(V.order()) + " < 2J = " +
                                std::to_string(2 * J));
  }
  const std::size_t d = V.order();
  HadamardCoeffs c;
  c.alpha.emplace_back(0.5, d);
  c.beta.emplace_back(0.0, d);
  c.gamma.emplace_back(0.5, d);
  for (std::size_t j = 0; j < J; ++j) {
    const TimeJet a = c.alpha[j];
    const TimeJet b = c.beta[j];
    const std::size_t dj = b.order();
    // beta_j' drops one order, beta_j'' two. Order 0 jets have zero derivatives
    // only when they are constant; they are never reached under the precondition.
    const TimeJet b1 = dj >= 1 ? b.derivative() : TimeJet(0.0, 0);
    const TimeJet b2 = dj >= 2 ? b1.derivative() : TimeJet(0.0, 0);
    const TimeJet sum = detail::hadamard_sum(c, j, dj);
    const TimeJet va = V * a + b1;
    c.gamma.push_back(0.5 * va - sum);
    c.alpha.push_back(-0.5 * va - sum);
    c.beta.push_back(-0.25 * (V.derivative() * a) - 0.25 * b2 - V * b);
  }
  return c;
}

/// alpha_{j+1} + gamma_j + 2 sum_{i=1}^j (alpha_i gamma_{j-i} - beta_i beta_{j-i}).
inline TimeJet purity_residual(const HadamardCoeffs& c, std::size_t j) {
  if (j + 1 > c.J()) throw std::out_of_range("purity_residual: index beyond computed coefficients");
  const TimeJet s = detail::hadamard_sum(c, j, c.alpha[j + 1].order());
  return c.alpha[j + 1] + c.gamma_at(static_cast<int>(j)) + 2.0 * s;
}

/// Massive Minkowski vacuum, length scale mu.
inline MomentVector vacuum_moments(double m, double mu, std::size_t N) {
  if (!(m >= 0.0) || !(mu > 0.0)) throw std::invalid_argument("vacuum_moments needs m >= 0 and mu > 0");
  MomentVector out(N);
  if (m == 0.0) return out;
  using special::digamma_int;
  const double L = std::log(0.5 * m * mu);
  for (std::size_t k = 0; k <= N; ++k) {
    const int n = static_cast<int>(k);
    const double h = 0.5 * m;
    // binom(2n+1, n+1) and (2n+1)!/(n!(n+2)!) through lgamma to avoid overflow
    const double bff = std::exp(std::lgamma(2.0 * n + 2) - std::lgamma(n + 2.0) - std::lgamma(n + 1.0));
    const double bpp = std::exp(std::lgamma(2.0 * n + 2) - std::lgamma(n + 1.0) - std::lgamma(n + 3.0));
    const double ff = std::pow(h, 2 * n + 2) / (2.0 * pi2) *
                      (L + digamma_int(2 * n + 2) - 0.5 * (digamma_int(n + 1) + digamma_int(n + 2))) * bff;
    const double pp = std::pow(h, 2 * n + 4) / pi2 *
                      (L + digamma_int(2 * n + 2) - 0.5 * (digamma_int(n + 1) + digamma_int(n + 3))) * bpp;
    out[k] = {ff, 0.0, pp};
  }
  return out;
}

enum class ThermalConvention {
  Canonical,   // coincidence-limit normalization shared with the vacuum formulas
  Literature,  // literature normalization, larger by 2 pi^2
};

/// Massless thermal state at inverse temperature beta.
inline MomentVector thermal_moments(double beta, std::size_t N,
                                    ThermalConvention conv = ThermalConvention::Canonical) {
  if (!(beta > 0.0)) throw std::invalid_argument("thermal_moments needs beta > 0");
  const double norm = conv == ThermalConvention::Canonical ? 1.0 / (2.0 * pi2) : 1.0;
  MomentVector out(N);
  for (std::size_t k = 0; k <= N; ++k) {
    const int n = static_cast<int>(k);
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    const double ff = sign * std::exp(std::lgamma(2.0 * n + 2) - (2.0 * n + 2) * std::log(beta)) *
                      special::zeta(2.0 * n + 2);
    const double pp = sign * std::exp(std::lgamma(2.0 * n + 4) - (2.0 * n + 4) * std::log(beta)) *
                      special::zeta(2.0 * n + 4);
    out[k] = {norm * ff, 0.0, norm * pp};
  }
  return out;
}

/// Thermal (KMS) state of mass m: vacuum moments plus the Bose-Einstein
/// correction (-1)^n/(2 pi^2) int k^(2n+2) n_B(omega) (1/omega, 0, omega) dk.
/// Stationary under V = m^2; for m -> 0 it tends to thermal_moments.
inline MomentVector massive_thermal_moments(double m, double mu, double beta, std::size_t N) {
  if (!(beta > 0.0)) throw std::invalid_argument("massive_thermal_moments needs beta > 0");
  MomentVector out = vacuum_moments(m, mu, N);
  using boost::math::quadrature::gauss_kronrod;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= N; ++k) {
    const double e = 2.0 * static_cast<double>(k) + 2.0;
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    auto occ = [&](double q) {
      const double w = std::hypot(q, m);
      return std::pair{w, 1.0 / std::expm1(beta * w)};
    };
    auto fff = [&](double q) {
      if (q == 0.0) return 0.0;
      const auto [w, nb] = occ(q);
      return std::pow(q, e) * nb / w;
    };
    auto fpp = [&](double q) {
      if (q == 0.0) return 0.0;
      const auto [w, nb] = occ(q);
      return std::pow(q, e) * nb * w;
    };
    const double iff = gauss_kronrod<double, 61>::integrate(fff, 0.0, inf, 15, 1e-15);
    const double ipp = gauss_kronrod<double, 61>::integrate(fpp, 0.0, inf, 15, 1e-15);
    out[k] += Triple{sign * iff / (2.0 * pi2), 0.0, sign * ipp / (2.0 * pi2)};
  }
  return out;
}

}  // namespace sce
