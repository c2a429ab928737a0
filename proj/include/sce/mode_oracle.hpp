#pragma once

// Per-mode evolution of the Fourier-space two-point data and moment
// extraction for smooth compactly supported difference fields.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sce/kinematics.hpp"
#include "sce/ode.hpp"
#include "sce/propagator.hpp"
#include "sce/seqspace.hpp"

namespace sce {

struct ModeField {
  std::vector<double> k;        // strictly increasing, positive
  std::vector<double> weights;  // quadrature weights for int dk
  std::vector<Triple> g;        // (G_phiphi, G_(phipi), G_pipi) per node

  void validate() const {
    if (k.size() != weights.size() || k.size() != g.size()) throw std::invalid_argument("ModeField: size mismatch");
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!(k[i] > 0.0) || (i > 0 && !(k[i] > k[i - 1]))) {
        throw std::invalid_argument("ModeField: k-grid must be positive and strictly increasing");
      }
      if (!g[i].finite()) throw std::invalid_argument("ModeField: non-finite mode data");
    }
  }
};

/// g' for one mode.
inline Triple mode_rhs(const Triple& g, double k, double V) {
  const double w2 = k * k + V;
  return {2.0 * g.fp, -w2 * g.ff + g.pp, -2.0 * w2 * g.fp};
}

inline Triple vacuum_mode(double k, double m) {
  const double w = std::hypot(k, m);
  return {0.5 / w, 0.0, 0.5 * w};
}

inline Triple thermal_mode(double k, double beta) {
  const double c = 1.0 / std::tanh(0.5 * beta * k);
  return {0.5 * c / k, 0.0, 0.5 * k * c};
}

/// J = G_phiphi G_pipi - G_(phipi)^2 per node.
inline std::vector<double> j_invariant(const ModeField& f) {
  std::vector<double> j(f.g.size());
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = f.g[i].ff * f.g[i].pp - f.g[i].fp * f.g[i].fp;
  return j;
}

/// Smooth bump amplitude * (1 - x^2)^8, x = (k - center)/radius, on
/// [center - radius, center + radius].
struct BumpSpec {
  double center = 1.5;
  double radius = 0.5;
  Triple amplitude{1.0, 0.0, 0.0};

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("BumpSpec: radius must be positive");
    if (!(center - radius > 0.0)) throw std::invalid_argument("BumpSpec: support must lie in (0, inf)");
    if (!amplitude.finite()) throw std::invalid_argument("BumpSpec: amplitude must be finite");
  }
  [[nodiscard]] double profile(double k) const {
    const double x = (k - center) / radius;
    if (std::abs(x) >= 1.0) return 0.0;
    return std::pow(1.0 - x * x, 8);
  }
};

inline constexpr std::size_t kDefaultOracleNodes = 2049;

/// Log-spaced nodes on the bump support with Simpson weights in log k.
inline ModeField bump_field(const BumpSpec& b, std::size_t nodes = kDefaultOracleNodes) {
  b.validate();
  if (nodes < 3 || nodes % 2 == 0) throw std::invalid_argument("bump_field: node count must be odd and >= 3");
  ModeField f;
  f.k.resize(nodes);
  f.weights.resize(nodes);
  f.g.resize(nodes);
  const double l0 = std::log(b.center - b.radius), l1 = std::log(b.center + b.radius);
  const double h = (l1 - l0) / static_cast<double>(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double k = std::exp(l0 + h * static_cast<double>(i));
    const double s = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    f.k[i] = k;
    f.weights[i] = s * h / 3.0 * k;  // dk = k dlog k
    f.g[i] = b.profile(k) * b.amplitude;
  }
  return f;
}

/// M_n = (-1)^n / (2 pi^2) int k^{2n+2} g dk, in a fixed summation order.
inline MomentVector field_moments(const ModeField& f, std::size_t N) {
  MomentVector out(N);
  for (std::size_t n = 0; n <= N; ++n) {
    Triple acc{};
    for (std::size_t i = 0; i < f.k.size(); ++i) {
      acc += (f.weights[i] * std::pow(f.k[i], 2.0 * static_cast<double>(n) + 2.0)) * f.g[i];
    }
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    out[n] = (sign / (2.0 * pi2)) * acc;
  }
  return out;
}

inline MomentVector bump_moments(const BumpSpec& b, std::size_t N, std::size_t nodes = kDefaultOracleNodes) {
  return field_moments(bump_field(b, nodes), N);
}

/// Worker count: hardware concurrency capped by SCE_THREADS.
inline std::size_t oracle_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SCE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

/// Evolves every node independently with adaptive RK. Nodes are split into
/// contiguous blocks per worker; results do not depend on the worker count.
inline ModeField evolve_modes(const ModeField& f, const PotentialTrajectory& V, double t0, double t1,
                              double tol = 1e-12) {
  if (!(tol > 0.0)) throw std::invalid_argument("evolve_modes: tol must be positive");
  f.validate();
  ModeField out = f;
  if (t0 == t1) return out;
  const std::size_t count = f.k.size();
  const std::size_t workers = std::min(oracle_threads(), std::max<std::size_t>(count, 1));
  std::vector<std::string> errors(workers);

  auto work = [&](std::size_t w) {
    const std::size_t lo = count * w / workers, hi = count * (w + 1) / workers;
    OdeOptions opt;
    opt.abs_tol = tol;
    opt.rel_tol = tol;
    opt.initial_step = 1e-3;
    for (std::size_t i = lo; i < hi; ++i) {
      const double k = f.k[i];
      OdeRhs rhs = [k, &V](const OdeState& x, OdeState& dx, double t) {
        const double v = V(t);
        if (!std::isfinite(v)) throw HaltError(HaltReason::BlowUp, "non-finite potential");
        const Triple d = mode_rhs({x[0], x[1], x[2]}, k, v);
        dx[0] = d.ff;
        dx[1] = d.fp;
        dx[2] = d.pp;
      };
      OdeState y{f.g[i].ff, f.g[i].fp, f.g[i].pp};
      const auto res = integrate_adaptive(rhs, y, t0, t1, {}, [](double, const OdeState&) {}, opt);
      if (!res.ok()) {
        errors[w] = "mode k = " + std::to_string(k) + ": " + res.message;
        return;
      }
      out.g[i] = {y[0], y[1], y[2]};
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error("evolve_modes: step failure at " + e);
  }
  return out;
}

/// Highest moment index unaffected by truncation over |t1 - t0|.
inline long retained_index(std::size_t N, double t0, double t1, double safety = 16.0) {
  return static_cast<long>(N) - static_cast<long>(std::ceil(std::abs(t1 - t0) * safety));
}

struct OracleReport {
  double max_abs_gap = 0.0;
  long retained = 0;
  MomentVector via_modes;    // moments of the evolved mode field
  MomentVector via_moments;  // moment system evolved directly
};

/// Evolves the bump per mode and its moments via evolve_rk; returns the
/// largest discrepancy on indices n <= N - ceil(|t1 - t0| * safety).
inline OracleReport oracle_compare_report(const BumpSpec& b, const PotentialTrajectory& V, double t0, double t1,
                                          std::size_t N, double tol, std::size_t nodes = kDefaultOracleNodes,
                                          double safety = 16.0) {
  const ModeField f0 = bump_field(b, nodes);
  const MomentVector m0 = field_moments(f0, N);
  const MomentVector via_modes = field_moments(evolve_modes(f0, V, t0, t1, tol), N);
  const MomentVector via_moments = evolve_rk(m0, V, t0, t1, tol);
  OracleReport r;
  r.retained = retained_index(N, t0, t1, safety);
  if (r.retained < 0) throw std::invalid_argument("oracle_compare: no truncation-unaffected index; raise N");
  for (long n = 0; n <= r.retained; ++n) {
    const auto i = static_cast<std::size_t>(n);
    r.max_abs_gap = std::max(r.max_abs_gap, (via_modes[i] - via_moments[i]).norm());
  }
  r.via_modes = via_modes;
  r.via_moments = via_moments;
  return r;
}

inline double oracle_compare(const BumpSpec& b, const PotentialTrajectory& V, double t0, double t1, std::size_t N,
                             double tol) {
  return oracle_compare_report(b, V, t0, t1, N, tol).max_abs_gap;
}

}  // namespace sce
