#pragma once

// Special functions at the arguments the moment formulas need.

#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sce::special {

/// psi(n) for integer n >= 1: -gamma + H_{n-1}.
inline double digamma_int(int n) {
  if (n < 1) throw std::domain_error("digamma_int needs n >= 1");
  double h = 0.0;
  for (int k = n - 1; k >= 1; --k) h += 1.0 / k;  // small terms first
  return h - std::numbers::egamma;
}

/// Generalized binomial coefficient binom(x, j) for real x.
inline double binom(double x, int j) {
  if (j < 0) return 0.0;
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= (x - i) / (j - i);
  return r;
}

inline double factorial(int n) {
  if (n < 0) throw std::domain_error("factorial of a negative integer");
  return std::tgamma(n + 1.0);
}

/// Riemann zeta for s > 1.
inline double zeta(double s) { return boost::math::zeta(s); }

}  // namespace sce::special
