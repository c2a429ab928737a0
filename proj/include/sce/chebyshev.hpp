#pragma once

// Chebyshev-Lobatto grids with spectral cumulative integration and
// barycentric interpolation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sce {

class ChebyshevGrid {
 public:
  /// `count` nodes on [t0, t1] ordered from t0 to t1 (t1 < t0 allowed).
  ChebyshevGrid(double t0, double t1, std::size_t count) : t0_(t0), t1_(t1) {
    if (count < 2) throw std::invalid_argument("Chebyshev grid needs at least 2 nodes");
    const std::size_t n = count - 1;
    x_.resize(count);
    t_.resize(count);
    for (std::size_t j = 0; j <= n; ++j) {
      x_[j] = -std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
      t_[j] = map(x_[j]);
    }
    t_.front() = t0;
    t_.back() = t1;
    build_integration_matrix();
  }

  [[nodiscard]] std::size_t size() const { return t_.size(); }
  [[nodiscard]] const std::vector<double>& nodes() const { return t_; }
  [[nodiscard]] double t0() const { return t0_; }
  [[nodiscard]] double t1() const { return t1_; }

  /// (Q f)_i = int_{t0}^{t_i} f, exact for polynomials of the grid degree.
  [[nodiscard]] std::vector<double> cumulative_integral(const std::vector<double>& f) const {
    const std::size_t m = size();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += Q_[i * m + j] * f[j];
      out[i] = s;
    }
    return out;
  }

  /// Same for several interleaved components: f[j * stride + c].
  void cumulative_integral_strided(const std::vector<double>& f, std::size_t stride, std::vector<double>& out) const {
    const std::size_t m = size();
    out.assign(m * stride, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* o = &out[i * stride];
      for (std::size_t j = 0; j < m; ++j) {
        const double q = Q_[i * m + j];
        const double* src = &f[j * stride];
        for (std::size_t c = 0; c < stride; ++c) o[c] += q * src[c];
      }
    }
  }

  /// Barycentric interpolation of nodal values at t.
  [[nodiscard]] double interpolate(const std::vector<double>& f, double t) const {
    const std::size_t n = size() - 1;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      const double d = t - t_[j];
      if (d == 0.0) return f[j];
      double w = (j % 2 == 0) ? 1.0 : -1.0;
      if (j == 0 || j == n) w *= 0.5;
      num += w * f[j] / d;
      den += w / d;
    }
    return num / den;
  }

 private:
  [[nodiscard]] double map(double x) const { return t0_ + 0.5 * (x + 1.0) * (t1_ - t0_); }

  void build_integration_matrix() {
    const std::size_t m = size();
    const std::size_t n = m - 1;
    const double half = 0.5 * (t1_ - t0_);
    Q_.assign(m * m, 0.0);
    // theta_k with x_k = cos(theta_k); our x_j = -cos(pi j/n) = cos(pi (n-j)/n)
    std::vector<double> coef(m), icoef(m + 1);
    for (std::size_t j = 0; j < m; ++j) {
      // Chebyshev coefficients of the j-th Lagrange basis function
      const std::size_t k = n - j;  // index in the cos(pi k/n) ordering
      for (std::size_t r = 0; r <= n; ++r) {
        double c = (2.0 / static_cast<double>(n)) * std::cos(std::numbers::pi * static_cast<double>(r * k) / n);
        if (k == 0 || k == n) c *= 0.5;
        if (r == 0 || r == n) c *= 0.5;
        coef[r] = c;
      }
      // antiderivative coefficients
      std::fill(icoef.begin(), icoef.end(), 0.0);
      for (std::size_t r = 0; r <= n; ++r) {
        const double c = coef[r];
        if (r == 0) {
          icoef[1] += c;
        } else if (r == 1) {
          icoef[2] += 0.25 * c;
        } else {
          icoef[r + 1] += c / (2.0 * static_cast<double>(r + 1));
          icoef[r - 1] -= c / (2.0 * static_cast<double>(r - 1));
        }
      }
      // value at x = -1 to fix the constant
      double at_left = 0.0;
      for (std::size_t r = 0; r <= n + 1; ++r) at_left += icoef[r] * ((r % 2 == 0) ? 1.0 : -1.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double theta = std::numbers::pi * static_cast<double>(n - i) / static_cast<double>(n);
        double v = 0.0;
        for (std::size_t r = 0; r <= n + 1; ++r) v += icoef[r] * std::cos(static_cast<double>(r) * theta);
        Q_[i * m + j] = half * (v - at_left);
      }
    }
  }

  double t0_, t1_;
  std::vector<double> x_, t_, Q_;
};

}  // namespace sce
