#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace pgrad {

/// Forward-mode dual number carrying a value and its gradient with respect to the
/// state variables x1..xn. Time variables enter as constants (zero partials).
struct DualVector {
  double value = 0.0;
  std::vector<double> partials;

  DualVector() = default;
  DualVector(double v, std::size_t n) : value(v), partials(n, 0.0) {}

  /// Seed for the independent variable x_{index+1}.
  static DualVector variable(double v, std::size_t n, std::size_t index) {
    DualVector d(v, n);
    d.partials[index] = 1.0;
    return d;
  }

  bool is_constant() const {
    for (double p : partials)
      if (p != 0.0) return false;
    return true;
  }

  DualVector& operator+=(const DualVector& o) {
    value += o.value;
    for (std::size_t j = 0; j < partials.size(); ++j) partials[j] += o.partials[j];
    return *this;
  }
  DualVector& operator-=(const DualVector& o) {
    value -= o.value;
    for (std::size_t j = 0; j < partials.size(); ++j) partials[j] -= o.partials[j];
    return *this;
  }
  // (fg)' = f'g + fg'
  DualVector& operator*=(const DualVector& o) {
    for (std::size_t j = 0; j < partials.size(); ++j) partials[j] = partials[j] * o.value + value * o.partials[j];
    value *= o.value;
    return *this;
  }
  // (f/g)' = (f'g - fg') / g^2; caller guarantees g != 0
  DualVector& operator/=(const DualVector& o) {
    const double inv = 1.0 / o.value;
    const double q = value * inv;
    for (std::size_t j = 0; j < partials.size(); ++j) partials[j] = (partials[j] - q * o.partials[j]) * inv;
    value = q;
    return *this;
  }

  friend DualVector operator+(DualVector a, const DualVector& b) { return a += b; }
  friend DualVector operator-(DualVector a, const DualVector& b) { return a -= b; }
  friend DualVector operator*(DualVector a, const DualVector& b) { return a *= b; }
  friend DualVector operator/(DualVector a, const DualVector& b) { return a /= b; }
  friend DualVector operator-(DualVector a) {
    a.value = -a.value;
    for (double& p : a.partials) p = -p;
    return a;
  }
};

/// Chain rule for a scalar function with value f and derivative df at a.value.
inline DualVector chain(const DualVector& a, double f, double df) {
  DualVector r(f, a.partials.size());
  for (std::size_t j = 0; j < a.partials.size(); ++j) r.partials[j] = df * a.partials[j];
  return r;
}

inline DualVector sin(const DualVector& a) { return chain(a, std::sin(a.value), std::cos(a.value)); }
inline DualVector cos(const DualVector& a) { return chain(a, std::cos(a.value), -std::sin(a.value)); }
inline DualVector exp(const DualVector& a) {
  const double e = std::exp(a.value);
  return chain(a, e, e);
}

}  // namespace pgrad
