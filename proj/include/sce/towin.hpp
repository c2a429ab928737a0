#pragma once

// Tow-in construction of initial data: the state is evolved on a prescribed
// background, the traced equation is switched on smoothly, and the strength of
// a third-derivative bump in the background is shot to satisfy the energy
// constraint when the equation is fully on.

#include <array>
#include <boost/math/interpolators/quintic_hermite.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sce/ode.hpp"
#include "sce/physics.hpp"
#include "sce/propagator.hpp"
#include "sce/solver.hpp"
#include "sce/time_jet.hpp"

namespace sce {

/// C^inf step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x).
inline TimeJet smooth_step(const TimeJet& x) {
  const double v = x.value();
  if (v <= 0.0) return TimeJet(0.0, x.order());
  if (v >= 1.0) return TimeJet(1.0, x.order());
  const TimeJet f = exp(-1.0 / x);
  const TimeJet g = exp(-1.0 / (1.0 - x));
  return f / (f + g);
}

inline double smooth_step(double x) { return smooth_step(TimeJet(x, 0)).value(); }

/// tau -> (a, a', a'', a''', a'''').
using ProfileJet = std::array<double, 5>;
using ScaleProfile = std::function<ProfileJet(double)>;

/// a = 1 + H w x S(x), x = (tau - tau_a)/w: Minkowskian up to tau_a, linear
/// with slope H beyond tau_a + w.
inline ScaleProfile minkowski_ramp(double H, double tau_a, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("minkowski_ramp: width must be positive");
  return [H, tau_a, width](double tau) {
    const TimeJet x = TimeJet::variable((tau - tau_a) / width, 4);
    const TimeJet f = x * smooth_step(x);
    ProfileJet out{};
    double scale = H * width;
    for (std::size_t k = 0; k < 5; ++k) {
      out[k] = scale * f.deriv(k);
      scale /= width;
    }
    out[0] += 1.0;
    return out;
  };
}

/// Bump with support [-delta, delta] and value 1 at 0, with its derivative.
inline std::pair<double, double> bump(double x, double delta) {
  const double u = x / delta;
  if (std::abs(u) >= 1.0) return {0.0, 0.0};
  const double q = 1.0 - u * u;
  const double b = std::exp(1.0 - 1.0 / q);
  return {b, -b * 2.0 * u / (delta * q * q)};
}

/// a_tow + (c/2) int_{tau_tow}^{tau} (tau - eta)^2 bump(eta - tau_init) d eta.
/// The partial bump moments int s^k bump(s) ds (k <= 2) are tabulated once and
/// read back through quintic Hermite interpolation with exact derivatives.
inline ScaleProfile shooting_profile(ScaleProfile base, double c, double delta, double tau_tow, double tau_init) {
  if (!(delta > 0.0)) throw std::invalid_argument("shooting_profile: delta must be positive");
  using Table = boost::math::interpolators::cardinal_quintic_hermite<std::vector<double>>;
  const double lo = std::max(tau_tow, tau_init - delta), hi = tau_init + delta;
  constexpr std::size_t kCells = 1024;
  const double h = (hi - lo) / static_cast<double>(kCells);
  std::array<std::shared_ptr<const Table>, 3> tables;
  std::array<double, 3> full{};
  for (int k = 0; k < 3; ++k) {
    std::vector<double> y(kCells + 1), dy(kCells + 1), d2y(kCells + 1);
    auto f = [=](double eta) { return std::pow(eta - tau_init, k) * bump(eta - tau_init, delta).first; };
    double acc = 0.0;
    for (std::size_t i = 0; i <= kCells; ++i) {
      const double t = lo + h * static_cast<double>(i);
      if (i > 0) acc += boost::math::quadrature::gauss<double, 10>::integrate(f, t - h, t);
      const double sv = t - tau_init;
      const auto [b, db] = bump(sv, delta);
      y[i] = acc;
      dy[i] = std::pow(sv, k) * b;
      d2y[i] = (k > 0 ? k * std::pow(sv, k - 1) * b : 0.0) + std::pow(sv, k) * db;
    }
    full[static_cast<std::size_t>(k)] = acc;
    tables[static_cast<std::size_t>(k)] = std::make_shared<const Table>(std::move(y), std::move(dy), std::move(d2y), lo, h);
  }
  return [=](double tau) {
    ProfileJet j = base(tau);
    if (c == 0.0 || tau <= lo) return j;
    std::array<double, 3> mu = full;
    if (tau < hi) {
      for (std::size_t k = 0; k < 3; ++k) mu[k] = (*tables[k])(tau);
    }
    // I_k = int (tau - eta)^k bump(eta - tau_init) d eta, expanded in s = eta - tau_init
    const double d = tau - tau_init;
    const double I0 = mu[0], I1 = d * mu[0] - mu[1], I2 = d * d * mu[0] - 2.0 * d * mu[1] + mu[2];
    const auto [b, db] = bump(d, delta);
    j[0] += 0.5 * c * I2;
    j[1] += c * I1;
    j[2] += c * I0;
    j[3] += c * b;
    j[4] += c * db;
    return j;
  };
}

struct TowInSetup {
  ScaleProfile a_tow;
  MomentVector M_tow{0};  // at tau_tow
  BackgroundField bg_tow;
  PhysicsParams p;
  double tau_tow = 0.0, tau_init = 1.0, tau_free = 1.002, tau_stop = 1.5;
  std::function<double(double)> chi;  // empty: smooth_step over [tau_init, tau_free]
  double tol = 1e-11;
  std::size_t samples_tow = 21;    // on [tau_tow, tau_init]
  std::size_t samples_blend = 11;  // on [tau_init, tau_free]
  std::size_t samples_free = 201;  // on [tau_free, tau_stop], uniform

  void validate() const {
    p.validate();
    if (!a_tow) throw std::invalid_argument("tow_in: a_tow profile missing");
    if (!(tau_tow < tau_init && tau_init < tau_free && tau_free < tau_stop)) {
      throw std::invalid_argument("tow_in: need tau_tow < tau_init < tau_free < tau_stop");
    }
    if (samples_tow < 2 || samples_blend < 2 || samples_free < 5) throw std::invalid_argument("tow_in: too few samples");
  }
  [[nodiscard]] double switch_value(double tau) const {
    if (chi) return chi(tau);
    return smooth_step((tau - tau_init) / (tau_free - tau_init));
  }
};

struct TowInResult {
  SCETrajectory traj;
  std::size_t init_index = 0;  // sample at tau_init
  std::size_t free_index = 0;  // first sample at tau_free
  double jet_jump = 0.0;       // max |a^(j)(tau_free) - a^(j)(tau_init)|, j <= 3
  double moment_jump = 0.0;    // sup norm of M(tau_free) - M(tau_init)
};

namespace detail {

inline ScaleFactorJet profile_jet(const ProfileJet& p) { return {p[0], p[1], p[2], p[3], p[4]}; }

inline void append_grid(std::vector<double>& out, double t0, double t1, std::size_t n) {
  for (double t : linspace(t0, t1, n)) {
    if (out.empty() || t > out.back()) out.push_back(t);
  }
}

}  // namespace detail

/// Runs the towed phase on [tau_tow, tau_init] and the blended traced equation
/// a'''' = (1 - chi) a_tow'''' + chi f_tr afterwards. `stop` (default tau_stop)
/// may end the run early, e.g. at tau_free while shooting.
inline TowInResult tow_in(const TowInSetup& s, double stop = std::numeric_limits<double>::quiet_NaN()) {
  s.validate();
  const double t_end = std::isnan(stop) ? s.tau_stop : stop;
  if (!(t_end > s.tau_init)) throw std::invalid_argument("tow_in: stop time must exceed tau_init");
  TowInResult r;
  SCETrajectory& tr = r.traj;
  tr.mode = SolveMode::FourthOrder;

  // towed phase: state and background only, on V(a_tow)
  const PotentialTrajectory V{[&](double t) {
    const auto j = s.a_tow(t);
    return potential(j[0], j[2], s.p.coupling);
  }};
  OdeState y;
  y.push_back(s.bg_tow.phi);
  y.push_back(s.bg_tow.pi);
  const auto flat = s.M_tow.flatten();
  y.insert(y.end(), flat.begin(), flat.end());
  const std::size_t msize = s.M_tow.size();
  const OdeRhs rhs = [&](const OdeState& x, OdeState& dx, double t) {
    const double v = V(t);
    if (!std::isfinite(v)) throw HaltError(HaltReason::BlowUp, "non-finite towed potential");
    dx[0] = x[1];
    dx[1] = -v * x[0];
    apply_generator_flat(x.data() + 2, dx.data() + 2, msize, v);
  };
  OdeOptions o;
  o.abs_tol = s.tol;
  o.rel_tol = s.tol;
  const auto grid = linspace(s.tau_tow, s.tau_init, s.samples_tow);
  std::string err;
  const auto res = integrate_adaptive(
      rhs, y, s.tau_tow, s.tau_init, grid,
      [&](double t, const OdeState& x) {
        try {
          detail::append_sample(tr, t, detail::profile_jet(s.a_tow(t)),
                                MomentVector::from_flat(std::vector<double>(x.begin() + 2, x.end())), {x[0], x[1]}, s.p);
        } catch (const std::exception& e) {
          if (err.empty()) err = e.what();
        }
      },
      o);
  if (!res.ok() || !err.empty()) {
    tr.halt = res.ok() ? HaltReason::BlowUp : res.reason;
    tr.message = "towed phase: " + (res.ok() ? err : res.message);
    tr.t_stop = res.t_stop;
    return r;
  }

  // blended phase from the towed data at tau_init
  r.init_index = tr.size() - 1;
  SCEInit init;
  init.jet = tr.jets.back();
  init.jet.a4.reset();
  init.M = tr.moments.back();
  init.bg = tr.bg.back();
  SolveOptions so;
  so.tol = s.tol;
  detail::append_grid(so.times, s.tau_init, std::min(s.tau_free, t_end), s.samples_blend);
  if (t_end > s.tau_free) detail::append_grid(so.times, s.tau_free, t_end, s.samples_free);
  const FourthBlend blend = [&s](double t, double f) {
    const double chi = s.switch_value(t);
    if (chi == 0.0) return s.a_tow(t)[4];
    if (chi == 1.0) return f;
    return (1.0 - chi) * s.a_tow(t)[4] + chi * f;
  };
  SCETrajectory ph = solve_sce(init, s.p, SolveMode::FourthOrder, s.tau_init, t_end, so, blend);
  // the blended run re-records tau_init; keep the towed sample there
  for (std::size_t i = 1; i < ph.size(); ++i) {
    tr.tau.push_back(ph.tau[i]);
    tr.jets.push_back(ph.jets[i]);
    tr.moments.push_back(ph.moments[i]);
    tr.bg.push_back(ph.bg[i]);
    tr.diag.push_back(ph.diag[i]);
  }
  tr.halt = ph.halt;
  tr.message = ph.message;
  tr.t_stop = ph.t_stop;

  r.free_index = tr.size();
  for (std::size_t i = r.init_index; i < tr.size(); ++i) {
    if (tr.tau[i] >= s.tau_free) {
      r.free_index = i;
      break;
    }
  }
  if (r.free_index < tr.size()) {
    const auto& a = tr.jets[r.init_index];
    const auto& b = tr.jets[r.free_index];
    r.jet_jump = std::max({std::abs(b.a - a.a), std::abs(b.a1 - a.a1), std::abs(b.a2 - a.a2), std::abs(b.a3 - a.a3)});
    const MomentVector dM = tr.moments[r.free_index] - tr.moments[r.init_index];
    for (const auto& t : dM.entries()) {
      r.moment_jump = std::max(r.moment_jump, t.norm());
    }
  }
  return r;
}

/// Samples from index `first` on, as a trajectory of their own.
inline SCETrajectory slice_from(const SCETrajectory& tr, std::size_t first) {
  SCETrajectory out;
  out.mode = tr.mode;
  out.halt = tr.halt;
  out.message = tr.message;
  out.t_stop = tr.t_stop;
  for (std::size_t i = first; i < tr.size(); ++i) {
    out.tau.push_back(tr.tau[i]);
    out.jets.push_back(tr.jets[i]);
    out.moments.push_back(tr.moments[i]);
    out.bg.push_back(tr.bg[i]);
    out.diag.push_back(tr.diag[i]);
  }
  return out;
}

struct ShootOptions {
  double delta = 0.02;   // bump half-width around tau_init
  double tol = 1e-10;    // |g| <= tol * scale ends the bisection
  std::size_t max_steps = 60;
};

struct ShootResult {
  double c0 = 0.0;
  double g = 0.0;        // a''' - f_en at tau_free for c0
  double g_scale = 0.0;  // largest energy term over the a''' coefficient
  std::size_t steps = 0;
  TowInResult run;
};

/// Bisection in the bump strength c for a zero of the energy residual at
/// tau_free of the tow-in run with profile a_tow,c,delta. The bracketed
/// quantity is g = a''' - f_en, the residual divided by its a''' coefficient:
/// same zeros, but it changes sign through a root where E itself only
/// touches zero (E is even in c on a flat background).
inline ShootResult shoot_energy_constraint(const TowInSetup& base, double c_lo, double c_hi,
                                           const ShootOptions& opt = {}) {
  base.validate();
  if (!(c_lo < c_hi)) throw std::invalid_argument("shoot_energy_constraint: need c_lo < c_hi");
  auto setup_for = [&](double c) {
    TowInSetup s = base;
    s.a_tow = shooting_profile(base.a_tow, c, opt.delta, base.tau_tow, base.tau_init);
    return s;
  };
  const PhysicsParams& s_p = base.p;
  auto g_at = [&](double c) {
    const TowInResult r = tow_in(setup_for(c), base.tau_free);
    if (!r.traj.ok() || r.free_index >= r.traj.size()) {
      throw HaltError(r.traj.ok() ? HaltReason::BlowUp : r.traj.halt,
                      "shoot_energy_constraint: run for c = " + std::to_string(c) + " failed: " + r.traj.message);
    }
    const std::size_t i = r.free_index;
    const auto& j = r.traj.jets[i];
    const double slope = energy_a3_slope(j, r.traj.moments[i][0], r.traj.moments[i].at_or_zero(1), r.traj.bg[i], s_p);
    if (std::abs(j.a1) <= 1e-12 * j.a || slope == 0.0) {
      throw HaltError(HaltReason::EnergyPole, "shoot_energy_constraint: a' = 0 at tau_free");
    }
    const auto& d = r.traj.diag[i];
    return std::pair<double, double>{d.energy_residual / slope, d.energy_scale / std::abs(slope)};
  };

  auto [g_lo, s_lo] = g_at(c_lo);
  auto [g_hi, s_hi] = g_at(c_hi);
  if (g_lo == 0.0 || g_hi == 0.0 || (g_lo < 0.0) != (g_hi < 0.0)) {
    // fine: a sign change or an endpoint root
  } else {
    throw std::invalid_argument("shoot_energy_constraint: no sign change of a''' - f_en on [c_lo, c_hi]");
  }
  ShootResult out;
  double lo = c_lo, hi = c_hi;
  double c = g_lo == 0.0 ? c_lo : c_hi;
  double g = g_lo == 0.0 ? 0.0 : g_hi, scale = g_lo == 0.0 ? s_lo : s_hi;
  if (g_lo != 0.0 && g_hi != 0.0) {
    for (out.steps = 0; out.steps < opt.max_steps; ++out.steps) {
      c = 0.5 * (lo + hi);
      std::tie(g, scale) = g_at(c);
      if (std::abs(g) <= opt.tol * scale) break;
      if ((g < 0.0) == (g_lo < 0.0)) {
        lo = c;
        g_lo = g;
      } else {
        hi = c;
      }
    }
  }
  out.c0 = c;
  out.g = g;
  out.g_scale = scale;
  out.run = tow_in(setup_for(c));
  return out;
}

}  // namespace sce
