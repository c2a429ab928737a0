#pragma once

// Evolution of moment vectors under M' = S(tau) M: adaptive Runge-Kutta,
// Dyson series on a Chebyshev grid, and the a-priori norm bounds.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sce/chebyshev.hpp"
#include "sce/kinematics.hpp"
#include "sce/ode.hpp"
#include "sce/seqspace.hpp"

namespace sce {

/// tau -> V(tau), assumed continuous and finite on the interval of use.
struct PotentialTrajectory {
  std::function<double(double)> V;

  static PotentialTrajectory constant(double v) {
    return {[v](double) { return v; }};
  }
  double operator()(double t) const { return V(t); }
};

namespace detail {

inline void require_finite_potential(double v, double t) {
  if (!std::isfinite(v)) throw HaltError(HaltReason::BlowUp, "non-finite potential at tau = " + std::to_string(t));
}

}  // namespace detail

/// Moment trajectory at the given output times (ordered from t0 towards t1).
inline std::vector<MomentVector> evolve_rk_samples(const MomentVector& M0, const PotentialTrajectory& V, double t0,
                                                   double t1, const std::vector<double>& outputs,
                                                   double tol = 1e-10) {
  if (!(tol > 0.0)) throw std::invalid_argument("evolve_rk: tol must be positive");
  std::vector<MomentVector> out;
  out.reserve(outputs.size());
  OdeState y = M0.flatten();
  const std::size_t size = M0.size();
  OdeRhs rhs = [&V, size](const OdeState& x, OdeState& dx, double t) {
    const double v = V(t);
    detail::require_finite_potential(v, t);
    apply_generator_flat(x.data(), dx.data(), size, v);
  };
  OdeOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  opt.initial_step = std::min(1e-2, std::max(std::abs(t1 - t0), 1e-12));
  const auto res = integrate_adaptive(rhs, y, t0, t1, outputs,
                                      [&](double, const OdeState& s) { out.push_back(MomentVector::from_flat(s)); }, opt);
  if (!res.ok()) throw HaltError(res.reason, "evolve_rk: " + res.message);
  return out;
}

/// Adaptive embedded RK (Dormand-Prince 5(4)) on the order-N system.
inline MomentVector evolve_rk(const MomentVector& M0, const PotentialTrajectory& V, double t0, double t1,
                              double tol = 1e-10) {
  if (!(tol > 0.0)) throw std::invalid_argument("evolve_rk: tol must be positive");
  if (t0 == t1) return M0;
  return evolve_rk_samples(M0, V, t0, t1, {t1}, tol).back();
}

struct DysonResult {
  MomentVector M;
  std::vector<double> term_norms;  // sup norm of U_n M0 at t1, n = 0..terms
};

/// Partial Dyson sum sum_{n=0}^{terms} U_n(t1, t0) M0. Each iterated integral
/// U_n M0 (tau) = int_{t0}^{tau} S(s) U_{n-1} M0 (s) ds is evaluated on one
/// Chebyshev-Lobatto grid, so t1 < t0 picks up the sign of the orientation.
inline DysonResult evolve_dyson_terms(const MomentVector& M0, const PotentialTrajectory& V, double t0, double t1,
                                      std::size_t terms, std::size_t quad_nodes) {
  if (terms < 1) throw std::invalid_argument("evolve_dyson: terms must be >= 1");
  if (quad_nodes < 2) throw std::invalid_argument("evolve_dyson: quad_nodes must be >= 2");
  DysonResult r{M0, {0.0}};
  for (const auto& t : M0.entries()) r.term_norms[0] = std::max(r.term_norms[0], t.norm());
  if (t0 == t1) return r;

  const ChebyshevGrid grid(t0, t1, quad_nodes);
  const std::size_t q = grid.size();
  const std::size_t stride = 3 * M0.size();
  std::vector<double> Vn(q);
  for (std::size_t j = 0; j < q; ++j) {
    Vn[j] = V(grid.nodes()[j]);
    detail::require_finite_potential(Vn[j], grid.nodes()[j]);
  }
  const auto flat0 = M0.flatten();
  std::vector<double> term(q * stride), integrand(q * stride), next;
  for (std::size_t j = 0; j < q; ++j) std::copy(flat0.begin(), flat0.end(), term.begin() + j * stride);
  std::vector<double> sum = flat0;
  for (std::size_t n = 1; n <= terms; ++n) {
    for (std::size_t j = 0; j < q; ++j) {
      apply_generator_flat(&term[j * stride], &integrand[j * stride], M0.size(), Vn[j]);
    }
    grid.cumulative_integral_strided(integrand, stride, next);
    term.swap(next);
    double nrm = 0.0;
    for (std::size_t c = 0; c < stride; ++c) {
      const double v = term[(q - 1) * stride + c];
      sum[c] += v;
      nrm = std::max(nrm, std::abs(v));
    }
    r.term_norms.push_back(nrm);
  }
  r.M = MomentVector::from_flat(sum);
  return r;
}

inline MomentVector evolve_dyson(const MomentVector& M0, const PotentialTrajectory& V, double t0, double t1,
                                 std::size_t terms, std::size_t quad_nodes) {
  return evolve_dyson_terms(M0, V, t0, t1, terms, quad_nodes).M;
}

enum class BoundRegime { Geometric, Factorial };

struct BoundReport {
  double C = 0.0;  // C_omega (geometric) or C_0 (factorial)
  double K = 0.0;  // K(upsilon, omega); zero in the geometric regime
  double bound = 1.0;
  BoundRegime regime = BoundRegime::Geometric;
  bool valid = true;
};

/// |int_{t0}^{t1} sqrt(1 + V^2)|.
inline double potential_arc_integral(const PotentialTrajectory& V, double t0, double t1) {
  if (t0 == t1) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&V](double t) {
    const double v = V(t);
    return std::sqrt(1.0 + v * v);
  };
  return gauss_kronrod<double, 31>::integrate(f, std::min(t0, t1), std::max(t0, t1), 12, 1e-13);
}

/// ||U(t1, t0)||_{p,w} <= exp(C_omega) for w_n = c omega^n.
inline BoundReport geometric_bound(const PotentialTrajectory& V, double omega, double t0, double t1) {
  if (!(omega > 0.0)) throw std::invalid_argument("geometric_bound: omega must be positive");
  BoundReport r;
  r.C = 2.0 * omega * std::abs(t1 - t0) + 2.0 * potential_arc_integral(V, t0, t1);
  r.bound = std::exp(r.C);
  return r;
}

/// Factor in ||U M||_{p,v} <= bound ||M||_{p,w} for w_n = (2n)! omega^{2n},
/// v_n = (2n)! upsilon^{2n}; valid only when C_0 K < 1.
inline BoundReport factorial_bound(const PotentialTrajectory& V, double omega, double upsilon, double t0, double t1) {
  if (!(upsilon > omega)) throw std::invalid_argument("factorial_bound: requires upsilon > omega");
  if (!(omega >= 1.0)) throw std::invalid_argument("factorial_bound: requires omega >= 1");
  BoundReport r;
  r.regime = BoundRegime::Factorial;
  r.C = 2.0 * potential_arc_integral(V, t0, t1);
  r.K = 2.0 * upsilon * omega / (upsilon - omega);
  const double ck = r.C * r.K;
  r.valid = ck < 1.0;
  if (!r.valid) {
    r.bound = std::numeric_limits<double>::infinity();
    return r;
  }
  r.bound = std::exp(r.C) + r.C * std::pow(r.K, 3) / (2.0 * pi) * std::sqrt(upsilon / omega) * (3.0 - 2.0 * ck) /
                                ((1.0 - ck) * (1.0 - ck));
  return r;
}

struct PerturbationGap {
  double lhs;
  double rhs;
};

/// Both sides of the perturbation estimate in the geometric sup-norm.
inline PerturbationGap perturbation_gap(const MomentVector& M, const MomentVector& Mt, const PotentialTrajectory& V,
                                        const PotentialTrajectory& Vt, double omega, double t0, double t1,
                                        double tol = 1e-12) {
  const NormSpec spec(WeightSpec::geometric(omega));
  const auto UM = evolve_rk(M, V, t0, t1, tol);
  const auto UMt = evolve_rk(Mt, Vt, t0, t1, tol);
  const double lhs = weighted_norm(UM - UMt, spec);
  const double C = geometric_bound(V, omega, t0, t1).C;
  const double Ct = geometric_bound(Vt, omega, t0, t1).C;
  double dv = 0.0;
  if (t0 != t1) {
    using boost::math::quadrature::gauss_kronrod;
    dv = gauss_kronrod<double, 31>::integrate([&](double t) { return std::abs(V(t) - Vt(t)); }, std::min(t0, t1),
                                              std::max(t0, t1), 12, 1e-13);
  }
  const double rhs = std::exp(C) * weighted_norm(M - Mt, spec) + 2.0 * std::exp(C + Ct) * weighted_norm(Mt, spec) * dv;
  return {lhs, rhs};
}

}  // namespace sce
