#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mcpar/errors.hpp"

namespace mcpar {

/// Symmetric tridiagonal matrix: `diag` has n entries, `off` has n - 1
/// (off[i] couples rows i and i + 1).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  SymTridiagonal() = default;
  explicit SymTridiagonal(std::size_t n) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}

  std::size_t size() const noexcept { return diag.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return diag[i];
    if (i + 1 == j) return off[i];
    if (j + 1 == i) return off[j];
    return 0.0;
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += off[i - 1] * x[i - 1];
      if (i + 1 < n) s += off[i] * x[i + 1];
      y[i] = s;
    }
  }

  /// y -= A x
  void multiply_subtract(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += off[i - 1] * x[i - 1];
      if (i + 1 < n) s += off[i] * x[i + 1];
      y[i] -= s;
    }
  }

  double quadratic_form(std::span<const double> x) const {
    const std::size_t n = size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += diag[i] * x[i] * x[i];
      if (i + 1 < n) s += 2.0 * off[i] * x[i] * x[i + 1];
    }
    return s;
  }

  /// this += alpha * other
  SymTridiagonal& add_scaled(const SymTridiagonal& other, double alpha) {
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] += alpha * other.diag[i];
    for (std::size_t i = 0; i < off.size(); ++i) off[i] += alpha * other.off[i];
    return *this;
  }
};

/// LDL^T factorization of a symmetric tridiagonal matrix. Requires every
/// pivot to be positive, which holds for the SPD systems the time stepper
/// builds; anything else is reported as SingularSystem.
class TridiagonalLdlt {
 public:
  explicit TridiagonalLdlt(const SymTridiagonal& a) {
    const std::size_t n = a.size();
    if (n == 0) throw SingularSystem("empty system");
    d_.resize(n);
    l_.resize(n - 1);
    double scale = 0.0;
    for (double v : a.diag) scale = std::max(scale, std::abs(v));
    const double floor = scale * 1e-14;
    d_[0] = a.diag[0];
    check_pivot(0, floor);
    for (std::size_t i = 1; i < n; ++i) {
      l_[i - 1] = a.off[i - 1] / d_[i - 1];
      d_[i] = a.diag[i] - l_[i - 1] * a.off[i - 1];
      check_pivot(i, floor);
    }
  }

  /// Solves A x = b in place.
  void solve_in_place(std::span<double> b) const {
    const std::size_t n = d_.size();
    for (std::size_t i = 1; i < n; ++i) b[i] -= l_[i - 1] * b[i - 1];
    for (std::size_t i = 0; i < n; ++i) b[i] /= d_[i];
    for (std::size_t i = n - 1; i-- > 0;) b[i] -= l_[i] * b[i + 1];
  }

 private:
  void check_pivot(std::size_t i, double floor) const {
    if (!std::isfinite(d_[i]) || !(d_[i] > floor)) {
      throw SingularSystem("non-positive pivot at row " + std::to_string(i));
    }
  }

  std::vector<double> d_;
  std::vector<double> l_;
};

}  // namespace mcpar
