// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "sce/mode_oracle.hpp"
#include "sce/towin.hpp"

using namespace sce;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const PotentialTrajectory kWiggle{[](double t) { return 1.0 + 0.3 * std::sin(t); }};

MomentVector random_geometric(std::mt19937_64& rng, std::size_t N, double omega) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MomentVector m(N);
  for (std::size_t n = 0; n <= N; ++n) {
    const double w = std::pow(omega, static_cast<double>(n));
    m[n] = {w * u(rng), w * u(rng), w * u(rng)};
  }
  return m;
}

double geo_dist(const MomentVector& a, const MomentVector& b, double omega) {
  return weighted_norm(a - b, NormSpec(WeightSpec::geometric(omega)));
}

PhysicsParams vacuum_params() {
  PhysicsParams p;
  p.coupling = {1.0, 0.0};
  p.c3 = -1e-3;
  p.c1 = calibrate_c1(vacuum_moments(1.0, 1.0, 2)[0].pp, 1.0, p.lambda0);
  return p;
}

Outcome c1_stationarity() {
  double worst = 0.0;
  const auto vac = vacuum_moments(1.0, 1.0, 16);
  const auto sv = apply_generator(vac, 1.0);
  const auto th = thermal_moments(1.0, 16);
  const auto st = apply_generator(th, 0.0);
  for (std::size_t n = 0; n < 16; ++n) {
    worst = std::max(worst, sv[n].norm() / (vac[n].norm() + vac[n + 1].norm()));
    worst = std::max(worst, st[n].norm() / (th[n].norm() + th[n + 1].norm()));
  }
  return {worst < 1e-12, fmt("max relative entry %.2e", worst)};
}

Outcome c2_hadamard() {
  const double m = 1.0;
  const std::size_t J = 12;
  const auto c = hadamard_coeffs(TimeJet(m * m, 2 * J), J);
  double rel = 0.0, purity = 0.0;
  for (std::size_t j = 0; j <= J; ++j) {
    const int ji = static_cast<int>(j);
    const double a = 0.5 * special::binom(-0.5, ji) * std::pow(m, 2.0 * j);
    rel = std::max(rel, std::abs(c.alpha[j].value() - a) / std::abs(a));
    rel = std::max(rel, std::abs(c.beta[j].value()));
    if (j >= 1) {
      const double g = 0.5 * special::binom(0.5, ji) * std::pow(m, 2.0 * j);
      rel = std::max(rel, std::abs(c.gamma_at(ji - 1).value() - g) / std::abs(g));
    }
    if (j < J) purity = std::max(purity, std::abs(purity_residual(c, j).value()));
  }
  return {rel < 1e-12 && purity < 1e-12, fmt("coefficient rel %.2e, purity %.2e", rel, purity)};
}

Outcome c3_word_count() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  bool ok = true;
  long words = 0;
  for (int n = 1; n <= 9; ++n) {
    const int cap = (n + 2) / 2;
    std::vector<GeneratorMatrices> g;
    for (int i = 0; i < n; ++i) g.push_back(generator_matrices(u(rng)));
    bool cap_hit = false;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Mat3 p = mat_identity();
      for (int i = 0; i < n; ++i) p = mat_mul(p, (mask >> i & 1u) ? g[i].B : g[i].A);
      const int b = __builtin_popcount(mask);
      if (b > cap && mat_max_norm(p) != 0.0) ok = false;
      if (b == cap && mat_max_norm(p) != 0.0) cap_hit = true;
      ++words;
    }
    ok = ok && cap_hit;
  }
  return {ok, fmt("%ld words checked", words)};
}

Outcome c4_propagators() {
  std::mt19937_64 rng(4);
  double gap = 0.0, e1 = 0.0, e2 = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const auto m = trial == 0 ? vacuum_moments(1.0, 1.0, 12) : random_geometric(rng, 12, 2.0);
    const auto rk = evolve_rk(m, kWiggle, 0.0, 0.5, 1e-12);
    gap = std::max(gap, geo_dist(rk, evolve_dyson(m, kWiggle, 0.0, 0.5, 40, 24), 2.0));
    e1 = std::max({e1, geo_dist(evolve_rk(m, kWiggle, 0.3, 0.3), m, 2.0),
                   geo_dist(evolve_dyson(m, kWiggle, 0.3, 0.3, 40, 24), m, 2.0)});
    const auto split = evolve_rk(evolve_rk(m, kWiggle, 0.0, 0.2, 1e-12), kWiggle, 0.2, 0.5, 1e-12);
    e2 = std::max(e2, geo_dist(split, rk, 2.0));
  }
  return {gap < 1e-8 && e1 < 1e-8 && e2 < 1e-8, fmt("dyson-rk %.2e, E1 %.2e, E2 %.2e", gap, e1, e2)};
}

Outcome c5_bounds() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double omega = 1.7;
  const NormSpec spec(WeightSpec::geometric(omega));
  const auto rep = geometric_bound(kWiggle, omega, 0.0, 0.6);
  int geo_viol = 0, flag_viol = 0, gap_viol = 0;
  for (int t = 0; t < 100; ++t) {
    const auto m = random_geometric(rng, 10, omega);
    if (weighted_norm(evolve_rk(m, kWiggle, 0.0, 0.6), spec) > rep.bound * weighted_norm(m, spec)) ++geo_viol;
  }
  for (int t = 0; t <= 40; ++t) {
    const auto f = factorial_bound(kWiggle, 1.0, 2.0, 0.0, 0.005 * t);
    if (f.valid != (f.C * f.K < 1.0)) ++flag_viol;
    if (f.valid && !(std::isfinite(f.bound) && f.bound >= 1.0)) ++flag_viol;
  }
  const auto vac = vacuum_moments(1.0, 1.0, 10);
  for (int t = 0; t < 100; ++t) {
    const auto other = vac + 1e-2 * random_geometric(rng, 10, 1.5);
    const double v0 = 1.0 + 0.2 * u(rng), dv = 0.05 * u(rng);
    const auto Vt = PotentialTrajectory{[=](double s) { return v0 + dv * std::sin(3 * s); }};
    const auto g = perturbation_gap(vac, other, PotentialTrajectory::constant(v0), Vt, 1.5, 0.0, 0.5 + 0.5 * std::abs(u(rng)));
    if (!(g.lhs <= g.rhs)) ++gap_viol;
  }
  return {geo_viol == 0 && flag_viol == 0 && gap_viol == 0,
          fmt("violations: geometric %d, factorial flag %d, perturbation %d", geo_viol, flag_viol, gap_viol)};
}

Outcome c6_mode_oracle() {
  const BumpSpec b{1.5, 0.5, {1.0, 0.2, 0.7}};
  const auto f = bump_field(b, 201);
  const auto out = evolve_modes(f, kWiggle, 0.0, 1.0, 1e-13);
  const auto j0 = j_invariant(f), j1 = j_invariant(out);
  double drift = 0.0;
  for (std::size_t i = 0; i < j0.size(); ++i) drift = std::max(drift, std::abs(j1[i] - j0[i]));
  const auto rc = oracle_compare_report(b, PotentialTrajectory::constant(1.0), 0.0, 0.5, 12, 1e-12);
  const double gw = oracle_compare(b, kWiggle, 0.0, 0.5, 12, 1e-12);
  return {drift < 1e-10 && rc.max_abs_gap < 1e-6 && gw < 1e-6,
          fmt("J drift %.2e, gap constant V %.2e, gap wiggle V %.2e", drift, rc.max_abs_gap, gw)};
}

struct FixedPoint {
  double trace, energy, drift;
  bool halted;
};

FixedPoint fixed_point(const MomentVector& M, PhysicsParams p) {
  p.c1 = calibrate_c1(M[0].pp, p.coupling.m, p.lambda0);
  const ScaleFactorJet j{1.0, 0.0, 0.0, 0.0, 0.0};
  FixedPoint r{};
  r.trace = std::abs(trace_from_components(j, M[0], M[1], {}, p));
  r.energy = std::abs(energy_residual(j, M[0], M[1], {}, p));
  SCEInit in;
  in.M = M;
  const auto tr = solve_sce(in, p, SolveMode::FourthOrder, 0.0, 1.0, 1e-12);
  r.halted = !tr.ok();
  for (const auto& s : tr.jets) r.drift = std::max(r.drift, std::abs(s.a - 1.0));
  return r;
}

Outcome c7_minkowski() {
  const PhysicsParams p = vacuum_params();
  const auto v = fixed_point(vacuum_moments(1.0, 1.0, 12), p);
  const auto t = fixed_point(massive_thermal_moments(1.0, 1.0, 1.0, 12), p);
  auto good = [](const FixedPoint& f) { return f.trace < 1e-12 && f.energy < 1e-12 && f.drift < 1e-8 && !f.halted; };
  return {good(v) && good(t),
          fmt("vacuum %s (trace %.2e, energy %.2e, |a-1| %.2e); thermal %s (trace %.2e, energy %.2e, |a-1| %.2e%s)",
              good(v) ? "ok" : "bad", v.trace, v.energy, v.drift, good(t) ? "ok" : "bad", t.trace, t.energy, t.drift,
              t.halted ? ", halted" : "")};
}

Outcome c8_formulations() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    PhysicsParams p;
    p.coupling = {1.0 + 0.5 * u(rng), 0.3 * u(rng)};
    p.kappa = 1.0 + 0.5 * u(rng);
    p.c1 = 0.01 * u(rng);
    p.c2 = 0.01 * u(rng);
    p.c3 = 0.001 * u(rng);
    p.c4 = 0.001 * u(rng);
    p.lambda0 = 1.0 + 0.5 * u(rng);
    ScaleFactorJet j{1.0 + 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng), std::nullopt};
    const Triple M0{0.01 * u(rng), 0.01 * u(rng), 0.01 * u(rng)}, M1{0.01 * u(rng), 0.01 * u(rng), 0.01 * u(rng)};
    const BackgroundField bg{0.1 * u(rng), 0.1 * u(rng)};
    j.a4 = trace_rhs(j, M0, M1, bg, p);
    worst = std::max(worst, std::abs(trace_from_components(j, M0, M1, bg, p)) / trace_scale(j, M0, M1, bg, p));
  }
  return {worst < 1e-10, fmt("max relative residual %.2e over 50 draws", worst)};
}

Outcome c9_conformal() {
  PhysicsParams p = vacuum_params();
  p.coupling.xi = 1.0 / 6.0;
  p.c3 = -1.0 / (5760.0 * pi2 * 3.0);
  p.c4 = 0.0;
  SCEInit in;
  in.M = vacuum_moments(1.0, 1.0, 12);
  in.jet = {1.0, 0.1, 0.0, 0.0, std::nullopt};
  in.bg = {0.1, 0.05};
  in.jet = conformal_consistent_jet(in, p);
  in.jet.a4.reset();
  const auto A = solve_sce(in, p, SolveMode::FourthOrder, 0.0, 0.5, 1e-12);
  const auto B = solve_sce(in, p, SolveMode::ConformalSecondOrder, 0.0, 0.5, 1e-12);
  if (!A.ok() || !B.ok()) return {false, "solver halted: " + A.message + B.message};
  double gap = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    gap = std::max({gap, std::abs(A.jets[i].a - B.jets[i].a), std::abs(A.jets[i].a1 - B.jets[i].a1),
                    std::abs(A.jets[i].a2 - B.jets[i].a2)});
    for (std::size_t n = 0; n < A.moments[i].size(); ++n) gap = std::max(gap, (A.moments[i][n] - B.moments[i][n]).norm());
  }
  return {gap < 1e-6, fmt("max gap %.2e, a(0.5)-1 = %.3e", gap, A.jets.back().a - 1.0)};
}

Outcome c10_constraint() {
  const PhysicsParams p = vacuum_params();
  const auto vac = vacuum_moments(1.0, 1.0, 12);
  SCEInit in;
  in.M = vac;
  in.jet = {1.0, 0.1, 0.05, 0.0, std::nullopt};
  in.jet.a3 = energy_constraint_a3(in.jet, vac[0], vac[1], {}, p);
  SolveOptions o;
  o.tol = 1e-12;
  o.samples = 1001;
  auto tr = solve_sce(in, p, SolveMode::FourthOrder, 0.0, 0.5, o);
  if (!tr.ok()) return {false, "solver halted: " + tr.message};
  auto mon = constraint_monitor(tr, p);
  double res = 0.0;
  for (std::size_t i = 0; i < mon.size(); ++i) res = std::max(res, std::abs(mon[i].residual) / tr.diag[i].energy_scale);
  in.jet.a3 += 0.3;
  tr = solve_sce(in, p, SolveMode::FourthOrder, 0.0, 0.5, o);
  if (!tr.ok()) return {false, "solver halted: " + tr.message};
  mon = constraint_monitor(tr, p);
  double dE = 0.0, defect = 0.0;
  for (std::size_t i = 0; i < mon.size(); ++i) {
    dE = std::max(dE, std::abs(2.0 * tr.jets[i].a1 / tr.jets[i].a * mon[i].residual));
    defect = std::max(defect, std::abs(mon[i].defect));
  }
  return {res < 1e-8 && defect < 1e-6 * dE, fmt("residual/scale %.2e, defect relative %.2e", res, defect / dE)};
}

Outcome c11_towin() {
  TowInSetup s;
  s.a_tow = minkowski_ramp(0.1, 0.2, 0.6);
  s.M_tow = vacuum_moments(1.0, 1.0, 12);
  s.p = vacuum_params();
  s.tau_tow = 0.0;
  s.tau_init = 1.0;
  s.tau_free = 1.002;
  s.tau_stop = 1.5;
  const double eps = 0.1;
  const auto sh = shoot_energy_constraint(s, -50.0, 50.0);
  if (!sh.run.traj.ok()) return {false, "solver halted: " + sh.run.traj.message};
  const auto fr = slice_from(sh.run.traj, sh.run.free_index);
  const auto mon = constraint_monitor(fr, s.p);
  double tr = 0.0, en = 0.0;
  for (std::size_t i = 0; i < fr.size(); ++i) {
    tr = std::max(tr, std::abs(fr.diag[i].trace_residual));
    en = std::max(en, std::abs(mon[i].residual) / fr.diag[i].energy_scale);
  }
  const bool ok = tr < 1e-8 && en < 1e-6 && sh.run.jet_jump < eps && sh.run.moment_jump < eps;
  return {ok, fmt("c0 %.6g in %zu steps, trace %.2e, energy/scale %.2e, jumps %.2e/%.2e (eps %.1g)", sh.c0,
                  static_cast<std::size_t>(sh.steps), tr, en, sh.run.jet_jump, sh.run.moment_jump, eps)};
}

Outcome c12_picard() {
  const PhysicsParams p = vacuum_params();
  const auto vac = vacuum_moments(1.0, 1.0, 12);
  SCEInit in;
  in.M = vac;
  in.jet = {1.0, 0.1, 0.05, 0.0, std::nullopt};
  in.jet.a3 = energy_constraint_a3(in.jet, vac[0], vac[1], {}, p);
  const auto P = picard_solve(in, p, SolveMode::FourthOrder, 0.0, 0.1, 20);
  if (!P.ok()) return {false, "picard halted: " + P.message};
  SolveOptions o;
  o.tol = 1e-13;
  o.times = P.tau;
  const auto S = solve_sce(in, p, SolveMode::FourthOrder, 0.0, 0.1, o);
  double gap = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    gap = std::max({gap, std::abs(P.jets[i].a - S.jets[i].a), std::abs(P.jets[i].a1 - S.jets[i].a1),
                    std::abs(P.jets[i].a2 - S.jets[i].a2), std::abs(P.jets[i].a3 - S.jets[i].a3)});
    for (std::size_t n = 0; n < P.moments[i].size(); ++n) gap = std::max(gap, (P.moments[i][n] - S.moments[i][n]).norm());
  }
  const auto& g = P.picard_gaps;
  bool geometric = true;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i - 1] < 1e-2 && g[i - 1] > 1e-13 && !(g[i] < 0.5 * g[i - 1])) geometric = false;
  }
  return {gap < 1e-6 && geometric,
          fmt("sup-gap %.2e after %zu iterations, last update %.2e", gap, g.size(), g.empty() ? 0.0 : g.back())};
}

}  // namespace

int main() {
  const std::pair<int, std::function<Outcome()>> criteria[] = {
      {1, c1_stationarity}, {2, c2_hadamard}, {3, c3_word_count}, {4, c4_propagators},
      {5, c5_bounds},       {6, c6_mode_oracle}, {7, c7_minkowski},  {8, c8_formulations},
      {9, c9_conformal},    {10, c10_constraint}, {11, c11_towin},   {12, c12_picard}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s [%.2f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of 12 criteria failed\n", failed);
  return failed;
}
