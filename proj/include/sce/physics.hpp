#pragma once

// Semiclassical source terms on spatially flat FLRW in conformal time: the
// traced equation (expanded and component forms), the energy constraint, the
// conformal second-order reduction and the Minkowski calibration of c1.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "sce/kinematics.hpp"
#include "sce/ode.hpp"
#include "sce/seqspace.hpp"
#include "sce/time_jet.hpp"

namespace sce {

struct PhysicsParams {
  CouplingParams coupling;
  double kappa = 1.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double lambda0 = 1.0;

  void validate() const {
    coupling.validate();
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be finite and > 0");
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw std::invalid_argument("lambda0 must be finite and > 0");
    for (double c : {c1, c2, c3, c4}) {
      if (!std::isfinite(c)) throw std::invalid_argument("renormalization constants must be finite");
    }
  }
};

/// (a, a', a'', a''') in conformal time, optionally a''''.
struct ScaleFactorJet {
  double a = 1.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::optional<double> a4;

  [[nodiscard]] double fourth() const {
    if (!a4) throw std::invalid_argument("ScaleFactorJet: a'''' required");
    return *a4;
  }
};

/// Conformally rescaled homogeneous one-point function (phi, phi').
struct BackgroundField {
  double phi = 0.0;
  double pi = 0.0;

  [[nodiscard]] bool finite() const { return std::isfinite(phi) && std::isfinite(pi); }
};

/// A homogeneous background adds phi(x)phi(y) to the two-point function, i.e.
/// (phi^2, phi pi, pi^2) to M_0; it has no gradient, so M_1 is unchanged.
inline Triple background_shifted(const Triple& M0, const BackgroundField& bg) {
  return {M0.ff + bg.phi * bg.phi, M0.fp + bg.phi * bg.pi, M0.pp + bg.pi * bg.pi};
}

inline BackgroundField background_rhs(const BackgroundField& bg, double V) { return {bg.pi, -V * bg.phi}; }

/// Sum that also tracks the largest term, for relative residuals.
struct TermSum {
  double value = 0.0;
  double scale = 0.0;
  void add(double t) {
    value += t;
    scale = std::max(scale, std::abs(t));
  }
};

namespace detail {

inline void require_positive_a(double a) {
  if (!(a > 0.0)) throw HaltError(HaltReason::ScaleFactorNonPositive, "scale factor a <= 0 (a = " + std::to_string(a) + ")");
}

inline double log_a(double a, const PhysicsParams& p) { return std::log(a * p.lambda0); }

// 3 c3 + c4 at which xi = 1/6 drops the third and fourth derivatives.
inline constexpr double kConformalC34 = -1.0 / (5760.0 * pi2);

}  // namespace detail

/// True when xi = 1/6 and 3c3 + c4 = -1/(5760 pi^2) (to rounding).
inline bool conformal_reduction_applies(const PhysicsParams& p) {
  return std::abs(p.coupling.xi - 1.0 / 6.0) <= 1e-14 &&
         std::abs(3.0 * p.c3 + p.c4 - detail::kConformalC34) <= 1e-12 * std::abs(detail::kConformalC34);
}

/// Coefficient of (a''''/a^5 - ...) in the expanded trace equation, with the
/// magnitude of its largest constituent.
inline TermSum box_coefficient(double a, const PhysicsParams& p) {
  const double s = 6.0 * p.coupling.xi - 1.0;
  TermSum c;
  c.add(-12.0 * (3.0 * p.c3 + p.c4));
  c.add(-1.0 / (480.0 * pi2));
  c.add(s / (48.0 * pi2));
  c.add(s * s / (16.0 * pi2) * detail::log_a(a, p));
  return c;
}

/// [v_1] on FLRW.
inline double v1_coincidence(const ScaleFactorJet& j, const PhysicsParams& p) {
  if (!(j.a > 0.0)) throw std::domain_error("v1_coincidence: scale factor must be positive");
  const double a = j.a, a1 = j.a1, a2 = j.a2, a3 = j.a3, a4 = j.fourth();
  const double xi = p.coupling.xi, m2 = p.coupling.m * p.coupling.m;
  const double a5 = std::pow(a, 5), a6 = a5 * a, a7 = a6 * a, a8 = a7 * a;
  return m2 * m2 / 8.0 + (a1 * a1 * a1 * a1 / a8 - a2 * a1 * a1 / a7) / 60.0 +
         (6.0 * xi - 1.0) * m2 / 4.0 * a2 / (a * a * a) + (6.0 * xi - 1.0) * (6.0 * xi - 1.0) / 8.0 * a2 * a2 / a6 +
         (5.0 * xi - 1.0) / 20.0 * (6.0 * a2 * a1 * a1 / a7 - 3.0 * a2 * a2 / a6 - 4.0 * a3 * a1 / a6 + a4 / a5);
}

/// Expanded trace equation R/kappa + <T> as a sum of terms; a4 defaults to 0
/// so that the value is the a''''-free part.
inline TermSum trace_terms(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                           const PhysicsParams& p, double a4) {
  const double a = j.a, a1 = j.a1, a2 = j.a2, a3 = j.a3;
  detail::require_positive_a(a);
  const Triple m0 = background_shifted(M0, bg);
  const double xi = p.coupling.xi, s = 6.0 * xi - 1.0, m2 = p.coupling.m * p.coupling.m, L = detail::log_a(a, p);
  const double a2_ = a * a, a4_ = a2_ * a2_, a5 = a4_ * a, a6 = a5 * a, a7 = a6 * a, a8 = a7 * a;
  TermSum t;
  const double box = box_coefficient(a, p).value;
  t.add(box * a4 / a5);
  t.add(box * (-4.0 * a3 * a1 / a6 - 3.0 * a2 * a2 / a6 + 6.0 * a2 * a1 * a1 / a7));
  t.add(s * s / (32.0 * pi2) * (4.0 * a3 * a1 / a6 + 3.0 * a2 * a2 / a6 - 10.0 * a2 * a1 * a1 / a7));
  t.add((-a2 * a1 * a1 / a7 + a1 * a1 * a1 * a1 / a8) / (240.0 * pi2));
  t.add((6.0 / p.kappa + m2 * (-6.0 * p.c2 + 1.0 / (48.0 * pi2) + s / (8.0 * pi2) * (1.0 + L))) * a2 / (a2_ * a));
  t.add(s * m2 / (16.0 * pi2) * a1 * a1 / a4_);
  t.add(m2 * m2 * (4.0 * p.c1 + 1.0 / (32.0 * pi2) + L / (8.0 * pi2)));
  t.add(-m2 / a2_ * m0.ff);
  t.add(s * ((6.0 * xi * a2 / a5 - a1 * a1 / a6 + m2 / a2_) * m0.ff + 2.0 * a1 / a5 * m0.fp - (m0.pp + M1.ff) / a4_));
  return t;
}

/// a'' of the conformal second-order reduction; T is double or TimeJet.
template <class T>
T conformal_rhs(const T& a, const T& a1, const T& Mff0, const PhysicsParams& p) {
  using std::log;
  if (!conformal_reduction_applies(p)) {
    throw std::invalid_argument("conformal_rhs: requires xi = 1/6 and 3c3 + c4 = -1/(5760 pi^2)");
  }
  double av;
  if constexpr (std::is_same_v<T, double>) {
    av = a;
  } else {
    av = a.value();
  }
  detail::require_positive_a(av);
  const double m2 = p.coupling.m * p.coupling.m;
  const T a4 = (a * a) * (a * a);
  const T hub2 = (a1 * a1) / a4;
  const double fixed = -1440.0 * pi2 / p.kappa + (1440.0 * pi2 * p.c2 - 5.0) * m2;
  const T den = hub2 + fixed;
  double dv, hv;
  if constexpr (std::is_same_v<T, double>) {
    dv = den;
    hv = hub2;
  } else {
    dv = den.value();
    hv = hub2.value();
  }
  const double dscale = std::max({hv, 1440.0 * pi2 / p.kappa, std::abs((1440.0 * pi2 * p.c2 - 5.0) * m2)});
  if (std::abs(dv) <= 1e-8 * dscale) {
    throw HaltError(HaltReason::SecondOrderSingularity,
                    "second-order singularity: a'^2/a^4 = " + std::to_string(hv) + " hits the pole");
  }
  const T num = (a1 * a1) * (a1 * a1) / (a4 * a) +
                0.5 * m2 * m2 * (a * a * a) * (1920.0 * pi2 * p.c1 + 15.0 + 60.0 * log(a * p.lambda0)) -
                240.0 * pi2 * m2 * a * Mff0;
  return num / den;
}

/// a'''' when xi = 1/6 and 3c3 + c4 = -1/(5760 pi^2): the traced equation is a
/// constraint on (a, a', M_ff,0), and a'''' is its second derivative along the
/// flow with V = a^2 m^2.
inline double conformal_fourth(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                               const PhysicsParams& p) {
  const Triple m0 = background_shifted(M0, bg);
  const double V = p.coupling.m * p.coupling.m * j.a * j.a;
  const TimeJet a = TimeJet::from_derivatives({j.a, j.a1, j.a2});
  const TimeJet a1 = TimeJet::from_derivatives({j.a1, j.a2, j.a3});
  const TimeJet ff = TimeJet::from_derivatives({m0.ff, 2.0 * m0.fp, 2.0 * (-V * m0.ff + m0.pp + M1.ff)});
  return conformal_rhs(a, a1, ff, p).deriv(2);
}

/// The a'''' solving the traced equation. Halts with LogSingularity where the
/// a'''' coefficient vanishes (outside the exact conformal reduction).
inline double trace_rhs(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                        const PhysicsParams& p) {
  detail::require_positive_a(j.a);
  if (conformal_reduction_applies(p)) return conformal_fourth(j, M0, M1, bg, p);
  const TermSum box = box_coefficient(j.a, p);
  if (std::abs(box.value) <= 1e-8 * box.scale) {
    throw HaltError(HaltReason::LogSingularity,
                    "logarithmic singularity: a'''' coefficient vanishes at a = " + std::to_string(j.a));
  }
  const double rest = trace_terms(j, M0, M1, bg, p, 0.0).value;
  return -rest * std::pow(j.a, 5) / box.value;
}

/// Trace residual -R - kappa <T^ren> assembled from the regularized
/// coincidence limits; needs a''''.
inline double trace_from_components(const ScaleFactorJet& j, const Triple& M0, const Triple& M1,
                                    const BackgroundField& bg, const PhysicsParams& p) {
  if (!(j.a > 0.0)) throw std::domain_error("trace_from_components: scale factor must be positive");
  const Triple m0 = background_shifted(M0, bg);
  const double xi = p.coupling.xi, s = 6.0 * xi - 1.0, m2 = p.coupling.m * p.coupling.m;
  const TimeJet aj = TimeJet::from_derivatives({j.a, j.a1, j.a2, j.a3, j.fourth()});
  const TimeJet Vj = potential(aj, p.coupling);
  const double V = Vj.deriv(0), V1 = Vj.deriv(1), V2 = Vj.deriv(2);
  const TimeJet A2j = aj.derivative().derivative() / aj.truncated(2);
  const double A2 = A2j.deriv(0), A2d = A2j.deriv(1), A2dd = A2j.deriv(2);
  const double Hd = (aj.derivative() / aj.truncated(3)).deriv(1);
  const double a = j.a, a1 = j.a1, h = a1 / a, L = detail::log_a(a, p);

  const double Dff = V / (8.0 * pi2) * L + A2 / (48.0 * pi2);
  const double Dfp = V1 / (16.0 * pi2) * L + (6.0 * V * h + A2d) / (96.0 * pi2);
  const double Dpp = (V * V + V2) / (32.0 * pi2) * L + (Hd * Hd + 2.0 * A2 * A2 + 4.0 * A2dd) / (960.0 * pi2) +
                     (3.0 * V * V - 6.0 * V * h * h + 4.0 * V * A2 + 12.0 * V1 * h + V2) / (192.0 * pi2);
  const double DLff = (3.0 * V * V + V2) / (32.0 * pi2) * (5.0 / 6.0 + L) + V / (32.0 * pi2) * h * h +
                      (11.0 * Hd * Hd - 2.0 * A2 * A2 + 12.0 * h * A2d) / (960.0 * pi2);
  const double Gff = m0.ff - Dff, Gfp = m0.fp - Dfp, Gpp = m0.pp - Dpp, LGff = M1.ff - DLff;

  const double aa = a * a;
  const double w = Gff / aa;
  const double wL = LGff / aa;
  const double wtt = Gpp / aa - 2.0 * a1 / (aa * a) * Gfp + a1 * a1 / (aa * aa) * Gff;
  const double R = 6.0 * j.a2 / (aa * a);
  const double a5 = aa * aa * a, a6 = a5 * a, a7 = a6 * a;
  const double boxR = 36.0 * j.a2 * a1 * a1 / a7 - 18.0 * j.a2 * j.a2 / a6 - 24.0 * j.a3 * a1 / a6 + 6.0 * j.fourth() / a5;
  const double T = (s * (xi * R + m2) - m2) * w - s / aa * (wL + wtt) - (9.0 * xi - 2.0) / (2.0 * pi2) * v1_coincidence(j, p) +
                   4.0 * p.c1 * m2 * m2 - p.c2 * m2 * R - (6.0 * p.c3 + 2.0 * p.c4) * boxR;
  return -R - p.kappa * T;
}

/// Largest term of kappa (R/kappa + <T>) in expanded form: the natural scale
/// for relative trace residuals.
inline double trace_scale(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                          const PhysicsParams& p) {
  return p.kappa * trace_terms(j, M0, M1, bg, p, j.a4.value_or(0.0)).scale;
}

/// Energy constraint <T_00> - G_00/kappa as a sum of terms.
inline TermSum energy_terms(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                            const PhysicsParams& p) {
  if (!(j.a > 0.0)) throw std::domain_error("energy_residual: scale factor must be positive");
  const Triple m0 = background_shifted(M0, bg);
  const double a = j.a, a1 = j.a1, a2 = j.a2, a3 = j.a3;
  const double s = 6.0 * p.coupling.xi - 1.0, m2 = p.coupling.m * p.coupling.m, L = detail::log_a(a, p);
  const double aa = a * a, a4_ = aa * aa, a5 = a4_ * a, a6 = a5 * a;
  TermSum e;
  const double k = 6.0 * (3.0 * p.c3 + p.c4) + 1.0 / (960.0 * pi2) - s / (96.0 * pi2) - s * s / (32.0 * pi2) * L;
  e.add(k * 2.0 * a3 * a1 / a4_);
  e.add(k * (-a2 * a2 / a4_ - 4.0 * a2 * a1 * a1 / a5));
  e.add(-s * s / (16.0 * pi2) * a2 * a1 * a1 / a5);
  e.add(a1 * a1 * a1 * a1 / (960.0 * pi2 * a6));
  e.add((-3.0 / p.kappa + m2 * (3.0 * p.c2 - 1.0 / (96.0 * pi2) - s / (16.0 * pi2) * (1.0 + L))) * a1 * a1 / aa);
  e.add(-m2 * m2 * (p.c1 + L / (32.0 * pi2)) * aa);
  e.add(0.5 * m2 * m0.ff);
  e.add(s * (-a1 * a1 / (2.0 * a4_) * m0.ff + a1 / (aa * a) * m0.fp));
  e.add((m0.pp - M1.ff) / (2.0 * aa));
  return e;
}

inline double energy_residual(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                              const PhysicsParams& p) {
  return energy_terms(j, M0, M1, bg, p).value;
}

/// The a''' that zeroes the energy constraint given (a, a', a'', M). The
/// constraint is linear in a''' with a coefficient proportional to a', so it
/// has a pole at a' = 0.
/// Coefficient of a''' in the energy residual (it is affine in a'''); carries
/// a factor a', the pole of the solved form.
inline double energy_a3_slope(const ScaleFactorJet& j, const Triple& M0, const Triple& M1, const BackgroundField& bg,
                              const PhysicsParams& p) {
  ScaleFactorJet z = j;
  z.a3 = 0.0;
  const double e0 = energy_residual(z, M0, M1, bg, p);
  z.a3 = 1.0;
  return energy_residual(z, M0, M1, bg, p) - e0;
}

inline double energy_constraint_a3(const ScaleFactorJet& j, const Triple& M0, const Triple& M1,
                                   const BackgroundField& bg, const PhysicsParams& p) {
  ScaleFactorJet z = j;
  z.a3 = 0.0;
  const double e0 = energy_residual(z, M0, M1, bg, p);
  const double slope = energy_a3_slope(j, M0, M1, bg, p);
  if (std::abs(slope) <= 1e-14 * std::max(1.0, std::abs(e0))) {
    throw HaltError(HaltReason::EnergyPole, "energy constraint does not determine a''' (a' = 0 or degenerate coefficient)");
  }
  return -e0 / slope;
}

/// c1 zeroing the static energy constraint of a stationary state.
inline double calibrate_c1(double Mpp0, double m, double lambda0) {
  if (!(m > 0.0)) throw std::invalid_argument("calibrate_c1: needs m > 0 (c1 decouples from m^4 at m = 0)");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("calibrate_c1: lambda0 must be positive");
  return Mpp0 / (m * m * m * m) - std::log(lambda0) / (32.0 * pi2);
}

}  // namespace sce
