#pragma once

// Coupled integration of the scale-factor jet, the moment system and the
// background field; Picard iteration of the same system; constraint monitor.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sce/chebyshev.hpp"
#include "sce/kinematics.hpp"
#include "sce/ode.hpp"
#include "sce/physics.hpp"
#include "sce/seqspace.hpp"

namespace sce {

enum class SolveMode { FourthOrder, ConformalSecondOrder };

inline const char* to_string(SolveMode m) {
  return m == SolveMode::FourthOrder ? "fourth-order" : "conformal-second-order";
}

struct SCEInit {
  ScaleFactorJet jet;
  MomentVector M{0};
  BackgroundField bg;
};

struct SCEDiagnostics {
  double R = 0.0;
  double G00 = 0.0;
  double trace_residual = 0.0;
  double trace_scale = 0.0;
  double energy_residual = 0.0;
  double energy_scale = 0.0;
};

struct SCETrajectory {
  SolveMode mode = SolveMode::FourthOrder;
  std::vector<double> tau;
  std::vector<ScaleFactorJet> jets;  // a4 always filled
  std::vector<MomentVector> moments;
  std::vector<BackgroundField> bg;
  std::vector<SCEDiagnostics> diag;
  HaltReason halt = HaltReason::None;
  std::string message;
  double t_stop = 0.0;
  std::vector<double> picard_gaps;  // sup-norm change per Picard iteration

  [[nodiscard]] bool ok() const { return halt == HaltReason::None; }
  [[nodiscard]] std::size_t size() const { return tau.size(); }
};

struct SolveOptions {
  double tol = 1e-10;
  std::size_t samples = 101;  // uniform output grid, ignored if `times` is set
  std::vector<double> times;  // explicit output times inside the span
  double max_step = 0.0;
};

/// a'''' override used by tow-in: (tau, a'''' from the SCE) -> a'''' applied.
using FourthBlend = std::function<double(double, double)>;

namespace detail {

// State layout: jet (4 or 2 entries), background (2), moments (3(N+1)).
inline std::size_t jet_len(SolveMode m) { return m == SolveMode::FourthOrder ? 4 : 2; }

inline OdeState pack(const SCEInit& s, SolveMode mode) {
  OdeState y;
  y.push_back(s.jet.a);
  y.push_back(s.jet.a1);
  if (mode == SolveMode::FourthOrder) {
    y.push_back(s.jet.a2);
    y.push_back(s.jet.a3);
  }
  y.push_back(s.bg.phi);
  y.push_back(s.bg.pi);
  const auto flat = s.M.flatten();
  y.insert(y.end(), flat.begin(), flat.end());
  return y;
}

struct Unpacked {
  ScaleFactorJet jet;
  BackgroundField bg;
  const double* moments;
  std::size_t msize;
};

inline Unpacked unpack(const OdeState& y, SolveMode mode) {
  const std::size_t k = jet_len(mode);
  Unpacked u;
  u.jet.a = y[0];
  u.jet.a1 = y[1];
  if (mode == SolveMode::FourthOrder) {
    u.jet.a2 = y[2];
    u.jet.a3 = y[3];
  }
  u.bg = {y[k], y[k + 1]};
  u.moments = y.data() + k + 2;
  u.msize = (y.size() - k - 2) / 3;
  return u;
}

inline Triple moment_at(const Unpacked& u, std::size_t n) {
  if (n >= u.msize) return {};
  return {u.moments[3 * n], u.moments[3 * n + 1], u.moments[3 * n + 2]};
}

inline void check_blowup(const ScaleFactorJet& j) {
  detail::require_positive_a(j.a);
  for (double v : {j.a, j.a1, j.a2, j.a3}) {
    if (!std::isfinite(v) || std::abs(v) > 1e12) throw HaltError(HaltReason::BlowUp, "scale-factor jet blew up");
  }
}

/// Per-component integration units: 1 for jet and background, the largest
/// entry of the initial M_n (at least 1) for the moments of index n.
inline std::vector<double> state_scales(const OdeState& y, SolveMode mode) {
  const std::size_t off = jet_len(mode) + 2;
  std::vector<double> s(y.size(), 1.0);
  for (std::size_t c = off; c + 2 < y.size(); c += 3) {
    const double m = std::max({1.0, std::abs(y[c]), std::abs(y[c + 1]), std::abs(y[c + 2])});
    s[c] = s[c + 1] = s[c + 2] = m;
  }
  return s;
}

/// Completes the jet (a2, a3 in conformal mode; a4 always).
inline ScaleFactorJet complete_jet(const Unpacked& u, SolveMode mode, const PhysicsParams& p, double t,
                                   const FourthBlend& blend) {
  ScaleFactorJet j = u.jet;
  const Triple M0 = moment_at(u, 0), M1 = moment_at(u, 1);
  if (mode == SolveMode::ConformalSecondOrder) {
    const Triple m0 = background_shifted(M0, u.bg);
    j.a2 = conformal_rhs(j.a, j.a1, m0.ff, p);
    const TimeJet a = TimeJet::from_derivatives({j.a, j.a1});
    const TimeJet a1 = TimeJet::from_derivatives({j.a1, j.a2});
    const TimeJet ff = TimeJet::from_derivatives({m0.ff, 2.0 * m0.fp});
    j.a3 = conformal_rhs(a, a1, ff, p).deriv(1);
    j.a4 = conformal_fourth(j, M0, M1, u.bg, p);
    return j;
  }
  const double f = trace_rhs(j, M0, M1, u.bg, p);
  j.a4 = blend ? blend(t, f) : f;
  return j;
}

inline OdeRhs make_rhs(SolveMode mode, const PhysicsParams& p, const FourthBlend& blend) {
  return [mode, p, blend](const OdeState& y, OdeState& dy, double t) {
    const Unpacked u = unpack(y, mode);
    check_blowup(u.jet);
    const Triple M0 = moment_at(u, 0), M1 = moment_at(u, 1);
    double V;
    if (mode == SolveMode::FourthOrder) {
      const ScaleFactorJet j = u.jet;
      const double f = trace_rhs(j, M0, M1, u.bg, p);
      dy[0] = j.a1;
      dy[1] = j.a2;
      dy[2] = j.a3;
      dy[3] = blend ? blend(t, f) : f;
      V = potential(j.a, j.a2, p.coupling);
    } else {
      const Triple m0 = background_shifted(M0, u.bg);
      dy[0] = u.jet.a1;
      dy[1] = conformal_rhs(u.jet.a, u.jet.a1, m0.ff, p);
      V = potential(u.jet.a, dy[1], p.coupling);
    }
    const std::size_t k = jet_len(mode);
    const BackgroundField db = background_rhs(u.bg, V);
    dy[k] = db.phi;
    dy[k + 1] = db.pi;
    apply_generator_flat(u.moments, dy.data() + k + 2, u.msize, V);
  };
}

/// Appends one sample with diagnostics; `j` must carry a4.
inline void append_sample(SCETrajectory& tr, double t, const ScaleFactorJet& j, MomentVector M,
                          const BackgroundField& bg, const PhysicsParams& p) {
  SCEDiagnostics d;
  d.R = 6.0 * j.a2 / (j.a * j.a * j.a);
  d.G00 = 3.0 * j.a1 * j.a1 / (j.a * j.a);
  const Triple M0 = M[0], M1 = M.at_or_zero(1);
  d.trace_residual = trace_from_components(j, M0, M1, bg, p);
  d.trace_scale = trace_scale(j, M0, M1, bg, p);
  const TermSum e = energy_terms(j, M0, M1, bg, p);
  d.energy_residual = e.value;
  d.energy_scale = e.scale;
  tr.tau.push_back(t);
  tr.jets.push_back(j);
  tr.moments.push_back(std::move(M));
  tr.bg.push_back(bg);
  tr.diag.push_back(d);
}

inline void record(SCETrajectory& tr, double t, const OdeState& y, SolveMode mode, const PhysicsParams& p,
                   const FourthBlend& blend) {
  const Unpacked u = unpack(y, mode);
  const ScaleFactorJet j = complete_jet(u, mode, p, t, blend);
  append_sample(tr, t, j, MomentVector::from_flat(std::vector<double>(u.moments, u.moments + 3 * u.msize)), u.bg, p);
}

inline std::vector<double> output_times(double t0, double t1, const SolveOptions& o) {
  if (!o.times.empty()) return o.times;
  if (o.samples < 2) throw std::invalid_argument("solve_sce: need at least 2 samples");
  return linspace(t0, t1, o.samples);
}

inline void validate_init(const SCEInit& init, const PhysicsParams& p, SolveMode mode) {
  p.validate();
  if (!(init.jet.a > 0.0)) throw std::invalid_argument("solve_sce: initial scale factor must be positive");
  if (!init.bg.finite()) throw std::invalid_argument("solve_sce: background field must be finite");
  if (mode == SolveMode::ConformalSecondOrder && !conformal_reduction_applies(p)) {
    throw std::invalid_argument("solve_sce: conformal mode requires xi = 1/6 and 3c3 + c4 = -1/(5760 pi^2)");
  }
}

}  // namespace detail

/// Integrates the jet ODE (a'''' from the traced equation, or a'' from the
/// conformal reduction) together with the moment and background dynamics in
/// one adaptive integrator. Poles and blow-up end the run with a typed halt;
/// samples up to that point are kept.
inline SCETrajectory solve_sce(const SCEInit& init, const PhysicsParams& p, SolveMode mode, double t0, double t1,
                               const SolveOptions& opt = {}, const FourthBlend& blend = {}) {
  detail::validate_init(init, p, mode);
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_sce: tol must be positive");
  SCETrajectory tr;
  tr.mode = mode;
  tr.t_stop = t0;
  OdeState y = detail::pack(init, mode);
  const auto times = detail::output_times(t0, t1, opt);
  // Moments are integrated in units of their initial size per index, so a
  // zero entry next to a large one is held to a relative, not absolute,
  // tolerance (thermal moments grow factorially with n).
  const std::vector<double> scale = detail::state_scales(y, mode);
  const OdeRhs raw = detail::make_rhs(mode, p, blend);
  const OdeRhs rhs = [&raw, &scale](const OdeState& z, OdeState& dz, double t) {
    OdeState x(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) x[c] = z[c] * scale[c];
    raw(x, dz, t);
    for (std::size_t c = 0; c < z.size(); ++c) dz[c] /= scale[c];
  };
  for (std::size_t c = 0; c < y.size(); ++c) y[c] /= scale[c];
  OdeOptions o;
  o.abs_tol = opt.tol;
  o.rel_tol = opt.tol;
  o.initial_step = std::min(1e-3, std::max(std::abs(t1 - t0), 1e-12));
  o.max_step = opt.max_step;
  std::string record_error;
  const auto res = integrate_adaptive(
      rhs, y, t0, t1, times,
      [&](double t, const OdeState& s) {
        if (!record_error.empty()) return;
        try {
          OdeState x(s.size());
          for (std::size_t c = 0; c < s.size(); ++c) x[c] = s[c] * scale[c];
          detail::record(tr, t, x, mode, p, blend);
        } catch (const std::exception& e) {
          record_error = e.what();
        }
      },
      o);
  tr.halt = res.reason;
  tr.message = res.message;
  tr.t_stop = res.ok() ? t1 : res.t_stop;
  if (res.ok() && !record_error.empty()) {
    tr.halt = HaltReason::BlowUp;
    tr.message = "diagnostics failed: " + record_error;
  }
  return tr;
}

inline SCETrajectory solve_sce(const SCEInit& init, const PhysicsParams& p, SolveMode mode, double t0, double t1,
                               double tol) {
  SolveOptions o;
  o.tol = tol;
  return solve_sce(init, p, mode, t0, t1, o);
}

/// Consistent conformal-mode data: replaces a'' and a''' by the values the
/// second-order relation implies.
inline ScaleFactorJet conformal_consistent_jet(const SCEInit& init, const PhysicsParams& p) {
  detail::validate_init(init, p, SolveMode::ConformalSecondOrder);
  OdeState y = detail::pack(init, SolveMode::ConformalSecondOrder);
  return detail::complete_jet(detail::unpack(y, SolveMode::ConformalSecondOrder), SolveMode::ConformalSecondOrder, p,
                              0.0, {});
}

struct PicardOptions {
  std::size_t nodes = 33;         // Chebyshev-Lobatto grid
  std::size_t inner_max = 200;    // linear moment iterations per outer step
  double inner_tol = 1e-15;       // relative change ending the inner loop
  double divergence_gap = 1e6;    // outer gap treated as divergence
};

/// Fixed-point iteration of the integral map: given a jet trajectory, the
/// moment system is solved for its potential (inner Picard loop, linear), the
/// top jet derivative is integrated from the resulting right-hand side and the
/// lower ones by repeated integration. 0 iterations returns the constant
/// extension of the initial data. Nodes carry the trajectory; gaps are sup
/// norms of successive differences over jet, background and moments.
inline SCETrajectory picard_solve(const SCEInit& init, const PhysicsParams& p, SolveMode mode, double t0, double t1,
                                  std::size_t iterations, const PicardOptions& po = {}) {
  detail::validate_init(init, p, mode);
  const ChebyshevGrid grid(t0, t1, po.nodes);
  const std::size_t q = grid.size();
  const OdeState y0 = detail::pack(init, mode);
  const std::size_t dim = y0.size();
  const std::size_t k = detail::jet_len(mode);
  std::vector<OdeState> Y(q, y0);
  SCETrajectory tr;
  tr.mode = mode;
  const OdeRhs rhs = detail::make_rhs(mode, p, {});

  auto sup_diff = [&](const std::vector<OdeState>& A, const std::vector<OdeState>& B) {
    double g = 0.0;
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t c = 0; c < dim; ++c) g = std::max(g, std::abs(A[i][c] - B[i][c]));
    return g;
  };
  // integrates derivative samples dY (per component) from the initial value
  auto integrate = [&](const std::vector<OdeState>& dY, std::size_t c0, std::size_t c1, std::vector<OdeState>& out) {
    std::vector<double> f(q);
    for (std::size_t c = c0; c < c1; ++c) {
      for (std::size_t i = 0; i < q; ++i) f[i] = dY[i][c];
      const auto F = grid.cumulative_integral(f);
      for (std::size_t i = 0; i < q; ++i) out[i][c] = y0[c] + F[i];
    }
  };

  try {
    for (std::size_t it = 0; it < iterations; ++it) {
      // potential along the current jet iterate
      std::vector<double> V(q);
      std::vector<OdeState> dY(q, OdeState(dim));
      for (std::size_t i = 0; i < q; ++i) {
        rhs(Y[i], dY[i], grid.nodes()[i]);
        const auto u = detail::unpack(Y[i], mode);
        V[i] = potential(u.jet.a, mode == SolveMode::FourthOrder ? u.jet.a2 : dY[i][1], p.coupling);
      }
      // inner loop: linear background/moment system under the frozen V
      std::vector<OdeState> Z = Y;
      for (std::size_t inner = 0; inner < po.inner_max; ++inner) {
        std::vector<OdeState> dZ(q, OdeState(dim, 0.0));
        for (std::size_t i = 0; i < q; ++i) {
          const auto u = detail::unpack(Z[i], mode);
          const BackgroundField db = background_rhs(u.bg, V[i]);
          dZ[i][k] = db.phi;
          dZ[i][k + 1] = db.pi;
          apply_generator_flat(u.moments, dZ[i].data() + k + 2, u.msize, V[i]);
        }
        std::vector<OdeState> Znew = Z;
        integrate(dZ, k, dim, Znew);
        double change = 0.0, size = 0.0;
        for (std::size_t i = 0; i < q; ++i)
          for (std::size_t c = k; c < dim; ++c) {
            change = std::max(change, std::abs(Znew[i][c] - Z[i][c]));
            size = std::max(size, std::abs(Znew[i][c]));
          }
        Z.swap(Znew);
        if (change <= po.inner_tol * std::max(size, 1e-300)) break;
      }
      // jet: top derivative from the right-hand side with the new moments
      std::vector<OdeState> next = Z;
      std::vector<OdeState> dJ(q, OdeState(dim));
      for (std::size_t i = 0; i < q; ++i) {
        OdeState mixed = Y[i];
        std::copy(Z[i].begin() + static_cast<long>(k), Z[i].end(), mixed.begin() + static_cast<long>(k));
        rhs(mixed, dJ[i], grid.nodes()[i]);
      }
      integrate(dJ, k - 1, k, next);
      // lower jet entries integrate the updated higher ones
      for (std::size_t c = k - 1; c-- > 0;) {
        std::vector<OdeState> d(q, OdeState(dim));
        for (std::size_t i = 0; i < q; ++i) d[i][c] = next[i][c + 1];
        integrate(d, c, c + 1, next);
      }
      const double gap = sup_diff(next, Y);
      tr.picard_gaps.push_back(gap);
      Y.swap(next);
      if (!std::isfinite(gap) || gap > po.divergence_gap) {
        throw HaltError(HaltReason::PicardDivergence, "Picard iterates diverge (interval too long)");
      }
    }
  } catch (const HaltError& e) {
    tr.halt = e.reason();
    tr.message = e.what();
  }

  if (tr.ok()) {
    try {
      for (std::size_t i = 0; i < q; ++i) detail::record(tr, grid.nodes()[i], Y[i], mode, p, {});
    } catch (const HaltError& e) {
      tr.halt = e.reason();
      tr.message = e.what();
    }
  }
  tr.t_stop = tr.ok() ? t1 : t0;
  return tr;
}

struct ConstraintSample {
  double residual;
  double defect;  // dE/dtau + 2 (a'/a) E, by 5-point differences
};

/// Energy residual per sample and the defect of its propagation law. Needs a
/// uniform sample grid with at least 5 points.
inline std::vector<ConstraintSample> constraint_monitor(const SCETrajectory& tr, const PhysicsParams& p) {
  (void)p;
  const std::size_t n = tr.size();
  std::vector<ConstraintSample> out(n);
  if (n < 5) throw std::invalid_argument("constraint_monitor: need at least 5 samples");
  const double h = (tr.tau.back() - tr.tau.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(tr.tau[i] - tr.tau[i - 1] - h) > 1e-9 * std::abs(h)) {
      throw std::invalid_argument("constraint_monitor: samples must be uniform");
    }
  }
  auto E = [&](std::size_t i) { return tr.diag[i].energy_residual; };
  for (std::size_t i = 0; i < n; ++i) {
    double d;
    if (i >= 2 && i + 2 < n) {
      d = (E(i - 2) - 8.0 * E(i - 1) + 8.0 * E(i + 1) - E(i + 2)) / (12.0 * h);
    } else if (i < 2) {
      static constexpr double c[2][5] = {{-25.0, 48.0, -36.0, 16.0, -3.0}, {-3.0, -10.0, 18.0, -6.0, 1.0}};
      d = 0.0;
      for (std::size_t k = 0; k < 5; ++k) d += c[i][k] * E(k);
      d /= 12.0 * h;
    } else {
      static constexpr double c[2][5] = {{3.0, -16.0, 36.0, -48.0, 25.0}, {-1.0, 6.0, -18.0, 10.0, 3.0}};
      const std::size_t r = n - 1 - i;  // 0 at the last sample
      d = 0.0;
      for (std::size_t k = 0; k < 5; ++k) d += c[r][k] * E(n - 5 + k);
      d /= 12.0 * h;
    }
    const auto& j = tr.jets[i];
    out[i] = {E(i), d + 2.0 * j.a1 / j.a * E(i)};
  }
  return out;
}

}  // namespace sce
