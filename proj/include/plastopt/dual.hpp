#pragma once

#include <cmath>

namespace plastopt {

// Forward-mode scalar carrying one derivative lane. The local constitutive
// update is templated on the scalar type, so seeding one input direction and
// re-evaluating yields an exact column of its Jacobian.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}
  Dual(double value, double deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& r) { v += r.v; d += r.d; return *this; }
  Dual& operator-=(const Dual& r) { v -= r.v; d -= r.d; return *this; }
  Dual& operator*=(const Dual& r) { d = d * r.v + v * r.d; v *= r.v; return *this; }
  Dual& operator/=(const Dual& r) { d = (d - v / r.v * r.d) / r.v; v /= r.v; return *this; }
  Dual operator-() const { return {-v, -d}; }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

inline Dual sqrt(const Dual& x) {
  const double s = std::sqrt(x.v);
  return {s, s > 0.0 ? x.d / (2.0 * s) : 0.0};
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.v);
  return {e, e * x.d};
}
inline Dual log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }
inline Dual tanh(const Dual& x) {
  const double t = std::tanh(x.v);
  return {t, (1.0 - t * t) * x.d};
}
inline Dual abs(const Dual& x) { return x.v < 0.0 ? -x : x; }
inline Dual cbrt(const Dual& x) {
  const double c = std::cbrt(x.v);
  return {c, x.d / (3.0 * c * c)};
}
// Real exponent power for positive base (and the x^p, p>=1 penalty case
// where the derivative at x=0 is finite).
inline Dual pow(const Dual& x, double p) {
  if (x.v == 0.0) {
    if (p == 1.0) return {0.0, x.d};
    return {0.0, 0.0};  // p > 1
  }
  const double f = std::pow(x.v, p);
  return {f, p * std::pow(x.v, p - 1.0) * x.d};
}

// Exact-match double overloads so templated code resolves to the scalar
// math functions instead of converting through Dual.
inline double sqrt(double x) { return std::sqrt(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double abs(double x) { return std::abs(x); }
inline double cbrt(double x) { return std::cbrt(x); }
inline double pow(double x, double p) { return std::pow(x, p); }

// Value extraction usable from code templated on the scalar type; branch
// decisions go through these so duals branch exactly like doubles.
inline double val(double x) { return x; }
inline double val(const Dual& x) { return x.v; }
inline double deriv(double) { return 0.0; }
inline double deriv(const Dual& x) { return x.d; }

}  // namespace plastopt
