#pragma once

// Forward-mode dual numbers carrying a gradient with respect to N seeded
// variables. N may be Eigen::Dynamic; a dynamic dual with an empty gradient
// is treated as a constant.

#include <Eigen/Core>

#include <cmath>
#include <type_traits>

namespace bodyfit {

template <int N>
struct Dual {
  using Gradient = Eigen::Matrix<double, N, 1>;

  double v = 0.0;
  Gradient d;

  Dual() { clear(); }
  Dual(double value) : v(value) { clear(); }  // NOLINT: implicit constants
  Dual(double value, Gradient grad) : v(value), d(std::move(grad)) {}

  static Dual variable(double value, int index, int size) {
    Dual out(value);
    if constexpr (N == Eigen::Dynamic) {
      out.d = Gradient::Zero(size);
    }
    out.d[index] = 1.0;
    return out;
  }

  bool is_constant() const {
    if constexpr (N == Eigen::Dynamic) {
      return d.size() == 0;
    } else {
      return false;
    }
  }

  Dual& operator+=(const Dual& o) { return *this = *this + o; }
  Dual& operator-=(const Dual& o) { return *this = *this - o; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(const Dual& a, const Dual& b) {
    return {a.v + b.v, combine(1.0, a, 1.0, b)};
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    return {a.v - b.v, combine(1.0, a, -1.0, b)};
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, combine(b.v, a, a.v, b)};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.v;
    return {a.v * inv, combine(inv, a, -a.v * inv * inv, b)};
  }
  friend Dual operator-(const Dual& a) { return {-a.v, scaled(-1.0, a)}; }

  friend Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
  friend Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
  friend Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
  friend Dual operator-(double a, const Dual& b) { return {a - b.v, scaled(-1.0, b)}; }
  friend Dual operator*(const Dual& a, double b) { return {a.v * b, scaled(b, a)}; }
  friend Dual operator*(double a, const Dual& b) { return {a * b.v, scaled(a, b)}; }
  friend Dual operator/(const Dual& a, double b) { return {a.v / b, scaled(1.0 / b, a)}; }
  friend Dual operator/(double a, const Dual& b) {
    return {a / b.v, scaled(-a / (b.v * b.v), b)};
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

  // Chain rule helper: f(a) with f'(a) = slope.
  friend Dual apply(const Dual& a, double value, double slope) {
    return {value, scaled(slope, a)};
  }

 private:
  void clear() {
    if constexpr (N != Eigen::Dynamic) {
      d.setZero();
    }
  }

  static Gradient scaled(double s, const Dual& a) {
    if (a.is_constant()) return a.d;
    return s * a.d;
  }

  static Gradient combine(double sa, const Dual& a, double sb, const Dual& b) {
    if constexpr (N == Eigen::Dynamic) {
      if (a.is_constant()) return scaled(sb, b);
      if (b.is_constant()) return scaled(sa, a);
    }
    return sa * a.d + sb * b.d;
  }
};

template <int N>
Dual<N> sin(const Dual<N>& a) {
  return apply(a, std::sin(a.v), std::cos(a.v));
}
template <int N>
Dual<N> cos(const Dual<N>& a) {
  return apply(a, std::cos(a.v), -std::sin(a.v));
}
template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return apply(a, s, 0.5 / s);
}
template <int N>
Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return apply(a, e, e);
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

template <class T>
struct is_dual : std::false_type {};
template <int N>
struct is_dual<Dual<N>> : std::true_type {};

}  // namespace bodyfit
