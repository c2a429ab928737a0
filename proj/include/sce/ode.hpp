#pragma once

// Adaptive Dormand-Prince integration with output clamping, step rejection on
// non-finite values or domain errors, and typed halts.

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sce {

enum class HaltReason {
  None,
  ScaleFactorNonPositive,
  LogSingularity,
  SecondOrderSingularity,
  EnergyPole,
  BlowUp,
  StepUnderflow,
  MaxSteps,
  PicardDivergence,
};

inline const char* to_string(HaltReason r) {
  switch (r) {
    case HaltReason::None: return "none";
    case HaltReason::ScaleFactorNonPositive: return "scale-factor-nonpositive";
    case HaltReason::LogSingularity: return "log-singularity";
    case HaltReason::SecondOrderSingularity: return "second-order-singularity";
    case HaltReason::EnergyPole: return "energy-pole";
    case HaltReason::BlowUp: return "blow-up";
    case HaltReason::StepUnderflow: return "step-underflow";
    case HaltReason::MaxSteps: return "max-steps";
    case HaltReason::PicardDivergence: return "picard-divergence";
  }
  return "unknown";
}

/// Raised by right-hand sides at a pole; carries a typed reason.
class HaltError : public std::runtime_error {
 public:
  HaltError(HaltReason r, const std::string& what) : std::runtime_error(what), reason_(r) {}
  [[nodiscard]] HaltReason reason() const { return reason_; }

 private:
  HaltReason reason_;
};

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double initial_step = 1e-3;
  double min_step = 1e-13;  // relative to the span
  double max_step = 0.0;    // 0: unlimited
  std::size_t max_steps = 2000000;
};

struct OdeResult {
  HaltReason reason = HaltReason::None;
  std::string message;
  double t_stop = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  [[nodiscard]] bool ok() const { return reason == HaltReason::None; }
};

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(const OdeState&, OdeState&, double)>;

/// Integrates y' = f(y, t) from t0 to t1 (either direction). `observer(t, y)`
/// fires at t0 and at every entry of `outputs` (which must be ordered in the
/// integration direction and lie within [t0, t1]); on a halt it is not called
/// for the remaining outputs. y holds the final state.
template <class Observer>
OdeResult integrate_adaptive(const OdeRhs& rhs, OdeState& y, double t0, double t1, std::span<const double> outputs,
                             Observer&& observer, const OdeOptions& opt = {}) {
  namespace odeint = boost::numeric::odeint;
  OdeResult res;
  res.t_stop = t0;
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double min_step = opt.min_step * std::max(span, 1.0);

  auto finite = [](const OdeState& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };

  {
    OdeState probe(y.size());
    try {
      rhs(y, probe, t0);
    } catch (const HaltError& e) {
      res.reason = e.reason();
      res.message = e.what();
      return res;
    } catch (const std::domain_error& e) {
      res.reason = HaltReason::ScaleFactorNonPositive;
      res.message = e.what();
      return res;
    }
    if (!finite(probe)) {
      res.reason = HaltReason::BlowUp;
      res.message = "non-finite right-hand side at the initial point";
      return res;
    }
  }

  auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<OdeState>>(opt.abs_tol, opt.rel_tol);
  auto sys = [&rhs](const OdeState& x, OdeState& dx, double t) { rhs(x, dx, t); };

  double t = t0;
  double dt = dir * std::min(opt.initial_step, std::max(span, min_step));
  if (opt.max_step > 0.0) dt = dir * std::min(std::abs(dt), opt.max_step);
  std::size_t next_out = 0;
  while (next_out < outputs.size() && dir * (outputs[next_out] - t0) <= 0.0) {
    observer(outputs[next_out], y);
    ++next_out;
  }

  OdeState backup(y.size());
  HaltReason last_fail = HaltReason::StepUnderflow;
  std::string last_msg = "step size underflow";
  while (dir * (t1 - t) > 0.0) {
    if (res.steps + res.rejected >= opt.max_steps) {
      res.reason = HaltReason::MaxSteps;
      res.message = "maximum number of steps exceeded";
      res.t_stop = t;
      return res;
    }
    const double target = next_out < outputs.size() ? outputs[next_out] : t1;
    bool clamped = false;
    const double dt_unclamped = dt;
    if (dir * (t + dt - target) > 0.0) {
      dt = target - t;
      clamped = true;
    }
    backup = y;
    const double t_before = t;
    const double dt_before = dt;
    bool failed = false;
    try {
      const auto r = stepper.try_step(sys, y, t, dt);
      if (r == odeint::fail) {
        ++res.rejected;
        if (std::abs(dt) < min_step) {
          res.reason = HaltReason::StepUnderflow;
          res.message = "error control forced step size underflow near tau = " + std::to_string(t);
          res.t_stop = t;
          return res;
        }
        continue;
      }
      if (!finite(y)) {
        failed = true;
        last_fail = HaltReason::BlowUp;
        last_msg = "non-finite state";
      }
    } catch (const HaltError& e) {
      failed = true;
      last_fail = e.reason();
      last_msg = e.what();
    } catch (const std::domain_error& e) {
      failed = true;
      last_fail = HaltReason::ScaleFactorNonPositive;
      last_msg = e.what();
    }
    if (failed) {
      y = backup;
      t = t_before;
      dt = 0.25 * dt_before;  // pole probes and overflow get a smaller step
      stepper.reset();
      ++res.rejected;
      if (std::abs(dt) < min_step) {
        res.reason = last_fail;
        res.message = last_msg + " near tau = " + std::to_string(t);
        res.t_stop = t;
        return res;
      }
      continue;
    }
    ++res.steps;
    if (opt.max_step > 0.0 && std::abs(dt) > opt.max_step) dt = dir * opt.max_step;
    if (clamped) {
      t = target;         // t0 + (target - t0) may round off target
      dt = dt_unclamped;  // clamping says nothing about accuracy
    }
    while (next_out < outputs.size() && dir * (outputs[next_out] - t) <= 0.0) {
      observer(outputs[next_out], y);
      ++next_out;
    }
    if (std::abs(dt) < min_step && dir * (t1 - t) > min_step) {
      res.reason = HaltReason::StepUnderflow;
      res.message = "step size underflow near tau = " + std::to_string(t);
      res.t_stop = t;
      return res;
    }
  }
  res.t_stop = t;
  return res;
}

/// Evenly spaced output times from t0 to t1 inclusive.
inline std::vector<double> linspace(double t0, double t1, std::size_t count) {
  if (count < 2) return {t1};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = t1;
  return out;
}

}  // namespace sce
