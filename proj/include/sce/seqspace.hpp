#pragma once

// Weighted sequence spaces R^3 (x) l^p(w), truncated moment vectors and the
// left shift.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sce {

/// One moment entry (M_phiphi, M_(phipi), M_pipi).
struct Triple {
  double ff = 0.0;
  double fp = 0.0;
  double pp = 0.0;

  Triple& operator+=(const Triple& o) {
    ff += o.ff;
    fp += o.fp;
    pp += o.pp;
    return *this;
  }
  Triple& operator-=(const Triple& o) {
    ff -= o.ff;
    fp -= o.fp;
    pp -= o.pp;
    return *this;
  }
  Triple& operator*=(double s) {
    ff *= s;
    fp *= s;
    pp *= s;
    return *this;
  }
  friend Triple operator+(Triple a, const Triple& b) { return a += b; }
  friend Triple operator-(Triple a, const Triple& b) { return a -= b; }
  friend Triple operator*(double s, Triple a) { return a *= s; }
  friend Triple operator*(Triple a, double s) { return a *= s; }
  friend bool operator==(const Triple&, const Triple&) = default;

  // max norm on R^3
  [[nodiscard]] double norm() const {
    return std::max({std::abs(ff), std::abs(fp), std::abs(pp)});
  }
  [[nodiscard]] bool finite() const {
    return std::isfinite(ff) && std::isfinite(fp) && std::isfinite(pp);
  }
};

/// Truncated sequence (M_0, ..., M_N). Entries beyond N are implicitly zero.
class MomentVector {
 public:
  MomentVector() : entries_(1) {}

  /// Zero vector of order N.
  explicit MomentVector(std::size_t order) : entries_(order + 1) {}

  explicit MomentVector(std::vector<Triple> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
      throw std::invalid_argument("MomentVector needs at least one entry");
    }
    for (std::size_t n = 0; n < entries_.size(); ++n) {
      if (!entries_[n].finite()) {
        throw std::invalid_argument("MomentVector entry " + std::to_string(n) + " is not finite");
      }
    }
  }

  /// Rebuilds a vector from the flat layout produced by flatten().
  static MomentVector from_flat(std::span<const double> flat) {
    if (flat.size() < 3 || flat.size() % 3 != 0) {
      throw std::invalid_argument("flat moment data must hold a positive multiple of 3 values");
    }
    std::vector<Triple> e(flat.size() / 3);
    for (std::size_t n = 0; n < e.size(); ++n) {
      e[n] = {flat[3 * n], flat[3 * n + 1], flat[3 * n + 2]};
    }
    return MomentVector(std::move(e));
  }

  [[nodiscard]] std::size_t order() const { return entries_.size() - 1; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] const Triple& operator[](std::size_t n) const { return entries_[n]; }
  [[nodiscard]] Triple& operator[](std::size_t n) { return entries_[n]; }

  /// Entry n, or zero past the truncation order.
  [[nodiscard]] Triple at_or_zero(std::size_t n) const {
    return n < entries_.size() ? entries_[n] : Triple{};
  }

  [[nodiscard]] const std::vector<Triple>& entries() const { return entries_; }

  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(3 * entries_.size());
    for (const auto& t : entries_) {
      out.push_back(t.ff);
      out.push_back(t.fp);
      out.push_back(t.pp);
    }
    return out;
  }

  MomentVector& operator+=(const MomentVector& o) {
    require_same_order(o);
    for (std::size_t n = 0; n < entries_.size(); ++n) entries_[n] += o.entries_[n];
    return *this;
  }
  MomentVector& operator-=(const MomentVector& o) {
    require_same_order(o);
    for (std::size_t n = 0; n < entries_.size(); ++n) entries_[n] -= o.entries_[n];
    return *this;
  }
  MomentVector& operator*=(double s) {
    for (auto& t : entries_) t *= s;
    return *this;
  }
  friend MomentVector operator+(MomentVector a, const MomentVector& b) { return a += b; }
  friend MomentVector operator-(MomentVector a, const MomentVector& b) { return a -= b; }
  friend MomentVector operator*(double s, MomentVector a) { return a *= s; }
  friend bool operator==(const MomentVector&, const MomentVector&) = default;

 private:
  void require_same_order(const MomentVector& o) const {
    if (o.entries_.size() != entries_.size()) {
      throw std::invalid_argument("moment vectors of different order");
    }
  }

  std::vector<Triple> entries_;
};

/// Weight family w_n defining the norm of l^p(w). Weights enter the norm as
/// inverses, so w_n is the admissible growth rate of entry n.
class WeightSpec {
 public:
  struct Geometric {
    double c;
    double omega;
  };
  struct Factorial {
    double omega;
  };
  struct Explicit {
    std::vector<double> w;
  };
  using Kind = std::variant<Geometric, Factorial, Explicit>;

  static WeightSpec geometric(double omega, double c = 1.0) {
    if (!(c > 0.0) || !(omega > 0.0)) {
      throw std::invalid_argument("geometric weights need c > 0 and omega > 0");
    }
    return WeightSpec(Geometric{c, omega});
  }
  static WeightSpec factorial(double omega) {
    if (!(omega > 0.0)) throw std::invalid_argument("factorial weights need omega > 0");
    return WeightSpec(Factorial{omega});
  }
  static WeightSpec explicit_weights(std::vector<double> w) {
    if (w.empty()) throw std::invalid_argument("explicit weights must not be empty");
    for (double x : w) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument("explicit weights must be finite and positive");
      }
    }
    return WeightSpec(Explicit{std::move(w)});
  }
  /// Explicit weights holding the first `count` values of another family.
  static WeightSpec tabulate(const WeightSpec& src, std::size_t count) {
    std::vector<double> w(count);
    for (std::size_t n = 0; n < count; ++n) w[n] = src(n);
    return explicit_weights(std::move(w));
  }

  [[nodiscard]] const Kind& kind() const { return kind_; }

  /// w_n. Factorial weights overflow to +inf for n beyond ~85.
  [[nodiscard]] double operator()(std::size_t n) const {
    return std::visit(
        [n](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          const auto nd = static_cast<double>(n);
          if constexpr (std::is_same_v<K, Geometric>) {
            return k.c * std::pow(k.omega, nd);
          } else if constexpr (std::is_same_v<K, Factorial>) {
            return std::tgamma(2.0 * nd + 1.0) * std::pow(k.omega, 2.0 * nd);
          } else {
            if (n >= k.w.size()) {
              throw std::out_of_range("explicit weight index " + std::to_string(n) + " out of range");
            }
            return k.w[n];
          }
        },
        kind_);
  }

  /// log w_n, finite where w_n itself would overflow.
  [[nodiscard]] double log_weight(std::size_t n) const {
    return std::visit(
        [n, this](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          const auto nd = static_cast<double>(n);
          if constexpr (std::is_same_v<K, Geometric>) {
            return std::log(k.c) + nd * std::log(k.omega);
          } else if constexpr (std::is_same_v<K, Factorial>) {
            return std::lgamma(2.0 * nd + 1.0) + 2.0 * nd * std::log(k.omega);
          } else {
            return std::log((*this)(n));
          }
        },
        kind_);
  }

 private:
  explicit WeightSpec(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

struct NormSpec {
  double p = std::numeric_limits<double>::infinity();
  WeightSpec weights = WeightSpec::geometric(1.0);

  NormSpec(double p_, WeightSpec w) : p(p_), weights(std::move(w)) {
    if (!(p >= 1.0)) throw std::invalid_argument("norm exponent p must be >= 1");
  }
  explicit NormSpec(WeightSpec w) : weights(std::move(w)) {}
};

/// (sum_n |M_n / w_n|^p)^(1/p), or sup_n |M_n| / w_n for p = inf, with the
/// max norm on each triple.
inline double weighted_norm(const MomentVector& m, const NormSpec& spec) {
  const bool sup = std::isinf(spec.p);
  double acc = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    const double x = m[n].norm() / spec.weights(n);
    if (sup) {
      acc = std::max(acc, x);
    } else {
      acc += std::pow(x, spec.p);
    }
  }
  return sup ? acc : std::pow(acc, 1.0 / spec.p);
}

/// (LM)_n = M_{n+1}; the result has order N-1.
inline MomentVector left_shift(const MomentVector& m) {
  if (m.order() == 0) throw std::invalid_argument("left_shift of an order-0 moment vector");
  return MomentVector(std::vector<Triple>(m.entries().begin() + 1, m.entries().end()));
}

namespace detail {

// sup_n exp(g(n)) for a log-ratio g whose increments g(n+1)-g(n) are
// non-increasing: scan until the first negative increment.
template <class LogRatio>
double unimodal_sup(LogRatio g, std::size_t max_scan = 100000) {
  double best = g(0);
  for (std::size_t n = 0; n < max_scan; ++n) {
    const double next = g(n + 1);
    if (next < g(n)) break;
    best = std::max(best, next);
  }
  return std::exp(best);
}

}  // namespace detail

/// sup_n w_{n+m} / v_n, the operator norm bound of L^m from l^p(w) to l^p(v).
/// Returns +inf when the supremum is unbounded.
inline double shift_norm_bound(const WeightSpec& w, const WeightSpec& v, std::size_t m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto md = static_cast<double>(m);

  if (const auto* ew = std::get_if<WeightSpec::Explicit>(&w.kind())) {
    double best = 0.0;
    for (std::size_t n = 0; n + m < ew->w.size(); ++n) best = std::max(best, ew->w[n + m] / v(n));
    return best;
  }
  if (const auto* ev = std::get_if<WeightSpec::Explicit>(&v.kind())) {
    double best = 0.0;
    for (std::size_t n = 0; n < ev->w.size(); ++n) best = std::max(best, std::exp(w.log_weight(n + m)) / ev->w[n]);
    return best;
  }

  const auto* gw = std::get_if<WeightSpec::Geometric>(&w.kind());
  const auto* gv = std::get_if<WeightSpec::Geometric>(&v.kind());
  const auto* fw = std::get_if<WeightSpec::Factorial>(&w.kind());
  const auto* fv = std::get_if<WeightSpec::Factorial>(&v.kind());

  if (gw && gv) {
    // (c_w/c_v) omega_w^m (omega_w/omega_v)^n
    const double base = gw->c / gv->c * std::pow(gw->omega, md);
    if (gw->omega > gv->omega) return inf;
    return base;
  }
  if (fw && gv) return inf;  // factorial growth beats any geometric weight
  if (gw && fv) {
    return detail::unimodal_sup([&](std::size_t n) { return w.log_weight(n + m) - v.log_weight(n); });
  }
  // factorial over factorial: (2n+2m)!/(2n)! * omega^(2n+2m) / upsilon^(2n)
  if (m == 0) {
    if (fw->omega > fv->omega) return inf;
    return 1.0;
  }
  if (fw->omega >= fv->omega) return inf;
  return detail::unimodal_sup([&](std::size_t n) { return w.log_weight(n + m) - v.log_weight(n); });
}

}  // namespace sce
