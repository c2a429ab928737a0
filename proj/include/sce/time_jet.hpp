#pragma once

// Truncated Taylor jets in conformal time. Coefficient k holds f^(k)/k!.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace sce {

class TimeJet {
 public:
  /// Constant of the given order.
  explicit TimeJet(double value = 0.0, std::size_t order = 0) : c_(order + 1, 0.0) { c_[0] = value; }

  /// Jet from the derivative values f, f', f'', ...
  static TimeJet from_derivatives(std::initializer_list<double> d) {
    return from_derivatives(std::vector<double>(d));
  }
  static TimeJet from_derivatives(const std::vector<double>& d) {
    if (d.empty()) throw std::invalid_argument("TimeJet needs at least a value");
    TimeJet j(0.0, d.size() - 1);
    double fact = 1.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (k > 0) fact *= static_cast<double>(k);
      j.c_[k] = d[k] / fact;
    }
    return j;
  }

  /// The identity function tau -> t0 + (tau - t0) at order d.
  static TimeJet variable(double t0, std::size_t order) {
    TimeJet j(t0, order);
    if (order > 0) j.c_[1] = 1.0;
    return j;
  }

  [[nodiscard]] std::size_t order() const { return c_.size() - 1; }
  [[nodiscard]] double value() const { return c_[0]; }
  [[nodiscard]] double coeff(std::size_t k) const { return c_.at(k); }

  /// k-th derivative value.
  [[nodiscard]] double deriv(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return c_.at(k) * f;
  }

  /// Jet of f' (one order lower). The derivative of an order-0 jet is
  /// unknown, so that is an error.
  [[nodiscard]] TimeJet derivative() const {
    if (order() == 0) throw std::domain_error("TimeJet: derivative exhausts jet order");
    TimeJet d(0.0, order() - 1);
    for (std::size_t k = 0; k + 1 < c_.size(); ++k) d.c_[k] = static_cast<double>(k + 1) * c_[k + 1];
    return d;
  }

  [[nodiscard]] TimeJet truncated(std::size_t order) const {
    TimeJet t(0.0, std::min(order, this->order()));
    std::copy_n(c_.begin(), t.c_.size(), t.c_.begin());
    return t;
  }

  TimeJet& operator+=(const TimeJet& o) {
    shrink_to(o.order());
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  TimeJet& operator-=(const TimeJet& o) {
    shrink_to(o.order());
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  TimeJet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  TimeJet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  TimeJet& operator*=(double s) {
    for (auto& x : c_) x *= s;
    return *this;
  }
  TimeJet& operator/=(double s) {
    for (auto& x : c_) x /= s;
    return *this;
  }

  friend TimeJet operator+(TimeJet a, const TimeJet& b) { return a += b; }
  friend TimeJet operator-(TimeJet a, const TimeJet& b) { return a -= b; }
  friend TimeJet operator+(TimeJet a, double s) { return a += s; }
  friend TimeJet operator+(double s, TimeJet a) { return a += s; }
  friend TimeJet operator-(TimeJet a, double s) { return a -= s; }
  friend TimeJet operator-(double s, const TimeJet& a) { return (-a) += s; }
  friend TimeJet operator*(TimeJet a, double s) { return a *= s; }
  friend TimeJet operator*(double s, TimeJet a) { return a *= s; }
  friend TimeJet operator/(TimeJet a, double s) { return a /= s; }
  friend TimeJet operator-(TimeJet a) { return a *= -1.0; }

  friend TimeJet operator*(const TimeJet& a, const TimeJet& b) {
    const std::size_t d = std::min(a.order(), b.order());
    TimeJet r(0.0, d);
    for (std::size_t k = 0; k <= d; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i <= k; ++i) s += a.c_[i] * b.c_[k - i];
      r.c_[k] = s;
    }
    return r;
  }
  TimeJet& operator*=(const TimeJet& o) { return *this = *this * o; }

  friend TimeJet operator/(const TimeJet& a, const TimeJet& b) {
    if (b.c_[0] == 0.0) throw std::domain_error("TimeJet: division by a jet with zero value");
    const std::size_t d = std::min(a.order(), b.order());
    TimeJet q(0.0, d);
    for (std::size_t k = 0; k <= d; ++k) {
      double s = a.c_[k];
      for (std::size_t i = 1; i <= k; ++i) s -= b.c_[i] * q.c_[k - i];
      q.c_[k] = s / b.c_[0];
    }
    return q;
  }
  friend TimeJet operator/(double s, const TimeJet& b) { return TimeJet(s, b.order()) / b; }
  TimeJet& operator/=(const TimeJet& o) { return *this = *this / o; }

  friend TimeJet exp(const TimeJet& a) {
    // e' = a' e
    TimeJet e(0.0, a.order());
    e.c_[0] = std::exp(a.c_[0]);
    for (std::size_t k = 1; k <= a.order(); ++k) {
      double s = 0.0;
      for (std::size_t i = 1; i <= k; ++i) s += static_cast<double>(i) * a.c_[i] * e.c_[k - i];
      e.c_[k] = s / static_cast<double>(k);
    }
    return e;
  }

  friend TimeJet log(const TimeJet& a) {
    if (!(a.c_[0] > 0.0)) throw std::domain_error("TimeJet: log of a non-positive value");
    // a l' = a'
    TimeJet l(0.0, a.order());
    l.c_[0] = std::log(a.c_[0]);
    for (std::size_t k = 1; k <= a.order(); ++k) {
      double s = static_cast<double>(k) * a.c_[k];
      for (std::size_t i = 1; i < k; ++i) s -= static_cast<double>(i) * l.c_[i] * a.c_[k - i];
      l.c_[k] = s / (static_cast<double>(k) * a.c_[0]);
    }
    return l;
  }

  friend TimeJet sqrt(const TimeJet& a) {
    if (!(a.c_[0] > 0.0)) throw std::domain_error("TimeJet: sqrt of a non-positive value");
    TimeJet r(0.0, a.order());
    r.c_[0] = std::sqrt(a.c_[0]);
    for (std::size_t k = 1; k <= a.order(); ++k) {
      double s = a.c_[k];
      for (std::size_t i = 1; i < k; ++i) s -= r.c_[i] * r.c_[k - i];
      r.c_[k] = s / (2.0 * r.c_[0]);
    }
    return r;
  }

 private:
  void shrink_to(std::size_t order) {
    if (order < this->order()) c_.resize(order + 1);
  }

  std::vector<double> c_;
};

}  // namespace sce
