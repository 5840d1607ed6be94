#pragma once

#include <array>
#include <cmath>

#include "plastopt/common.hpp"
#include "plastopt/dual.hpp"

namespace plastopt {

// Fixed-size 3x3 tensor algebra. 2D plane-strain problems are embedded as
// 3x3 tensors with identity out-of-plane blocks, so there is a single
// constitutive code path for every problem dimension.

template <typename T>
struct Tensor3 {
  std::array<T, 9> a{};  // row-major

  T& operator()(int i, int j) { return a[3 * i + j]; }
  const T& operator()(int i, int j) const { return a[3 * i + j]; }

  static Tensor3 identity() {
    Tensor3 t;
    t(0, 0) = T(1.0); t(1, 1) = T(1.0); t(2, 2) = T(1.0);
    return t;
  }
};

// Symmetric 3x3 tensor: components stored as (11,12,13,22,23,33).
template <typename T>
struct SymTensor3 {
  std::array<T, 6> a{};

  static constexpr int index(int i, int j) {
    // (0,0)->0 (0,1)->1 (0,2)->2 (1,1)->3 (1,2)->4 (2,2)->5
    if (i > j) { const int t = i; i = j; j = t; }
    return i == 0 ? j : (i == 1 ? 2 + j : 5);
  }
  T& operator()(int i, int j) { return a[index(i, j)]; }
  const T& operator()(int i, int j) const { return a[index(i, j)]; }

  static SymTensor3 identity() {
    SymTensor3 t;
    t.a[0] = T(1.0); t.a[3] = T(1.0); t.a[5] = T(1.0);
    return t;
  }
};

template <typename T>
inline Tensor3<T> operator+(const Tensor3<T>& x, const Tensor3<T>& y) {
  Tensor3<T> r;
  for (int i = 0; i < 9; ++i) r.a[i] = x.a[i] + y.a[i];
  return r;
}
template <typename T>
inline Tensor3<T> operator-(const Tensor3<T>& x, const Tensor3<T>& y) {
  Tensor3<T> r;
  for (int i = 0; i < 9; ++i) r.a[i] = x.a[i] - y.a[i];
  return r;
}
template <typename T>
inline Tensor3<T> operator*(const T& s, const Tensor3<T>& x) {
  Tensor3<T> r;
  for (int i = 0; i < 9; ++i) r.a[i] = s * x.a[i];
  return r;
}
template <typename T>
inline SymTensor3<T> operator+(const SymTensor3<T>& x, const SymTensor3<T>& y) {
  SymTensor3<T> r;
  for (int i = 0; i < 6; ++i) r.a[i] = x.a[i] + y.a[i];
  return r;
}
template <typename T>
inline SymTensor3<T> operator-(const SymTensor3<T>& x, const SymTensor3<T>& y) {
  SymTensor3<T> r;
  for (int i = 0; i < 6; ++i) r.a[i] = x.a[i] - y.a[i];
  return r;
}
template <typename T>
inline SymTensor3<T> operator*(const T& s, const SymTensor3<T>& x) {
  SymTensor3<T> r;
  for (int i = 0; i < 6; ++i) r.a[i] = s * x.a[i];
  return r;
}

template <typename T>
inline Tensor3<T> matmul(const Tensor3<T>& x, const Tensor3<T>& y) {
  Tensor3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      T s = x(i, 0) * y(0, j);
      s += x(i, 1) * y(1, j);
      s += x(i, 2) * y(2, j);
      r(i, j) = s;
    }
  return r;
}

template <typename T>
inline Tensor3<T> transpose(const Tensor3<T>& x) {
  Tensor3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = x(j, i);
  return r;
}

template <typename T>
inline T trace(const Tensor3<T>& x) { return x(0, 0) + x(1, 1) + x(2, 2); }
template <typename T>
inline T trace(const SymTensor3<T>& x) { return x.a[0] + x.a[3] + x.a[5]; }

template <typename T>
inline T det(const Tensor3<T>& x) {
  return x(0, 0) * (x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1)) -
         x(0, 1) * (x(1, 0) * x(2, 2) - x(1, 2) * x(2, 0)) +
         x(0, 2) * (x(1, 0) * x(2, 1) - x(1, 1) * x(2, 0));
}
template <typename T>
inline T det(const SymTensor3<T>& x) {
  return x(0, 0) * (x(1, 1) * x(2, 2) - x(1, 2) * x(1, 2)) -
         x(0, 1) * (x(0, 1) * x(2, 2) - x(1, 2) * x(0, 2)) +
         x(0, 2) * (x(0, 1) * x(1, 2) - x(1, 1) * x(0, 2));
}

template <typename T>
inline Tensor3<T> inverse(const Tensor3<T>& x) {
  const T d = det(x);
  if (val(d) == 0.0) throw NumericsError("tensor inverse: singular 3x3 tensor");
  Tensor3<T> r;
  r(0, 0) = (x(1, 1) * x(2, 2) - x(1, 2) * x(2, 1)) / d;
  r(0, 1) = (x(0, 2) * x(2, 1) - x(0, 1) * x(2, 2)) / d;
  r(0, 2) = (x(0, 1) * x(1, 2) - x(0, 2) * x(1, 1)) / d;
  r(1, 0) = (x(1, 2) * x(2, 0) - x(1, 0) * x(2, 2)) / d;
  r(1, 1) = (x(0, 0) * x(2, 2) - x(0, 2) * x(2, 0)) / d;
  r(1, 2) = (x(0, 2) * x(1, 0) - x(0, 0) * x(1, 2)) / d;
  r(2, 0) = (x(1, 0) * x(2, 1) - x(1, 1) * x(2, 0)) / d;
  r(2, 1) = (x(0, 1) * x(2, 0) - x(0, 0) * x(2, 1)) / d;
  r(2, 2) = (x(0, 0) * x(1, 1) - x(0, 1) * x(1, 0)) / d;
  return r;
}

template <typename T>
inline Tensor3<T> full(const SymTensor3<T>& x) {
  Tensor3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = x(i, j);
  return r;
}

// Symmetric part of a general tensor.
template <typename T>
inline SymTensor3<T> sym(const Tensor3<T>& x) {
  SymTensor3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) r(i, j) = T(0.5) * (x(i, j) + x(j, i));
  return r;
}

template <typename T>
inline SymTensor3<T> dev(const SymTensor3<T>& t) {
  const T m = trace(t) / T(3.0);
  SymTensor3<T> r = t;
  r.a[0] -= m; r.a[3] -= m; r.a[5] -= m;
  return r;
}

template <typename T>
inline T ddot(const SymTensor3<T>& x, const SymTensor3<T>& y) {
  return x.a[0] * y.a[0] + x.a[3] * y.a[3] + x.a[5] * y.a[5] +
         T(2.0) * (x.a[1] * y.a[1] + x.a[2] * y.a[2] + x.a[4] * y.a[4]);
}
template <typename T>
inline T ddot(const Tensor3<T>& x, const Tensor3<T>& y) {
  T s = x.a[0] * y.a[0];
  for (int i = 1; i < 9; ++i) s += x.a[i] * y.a[i];
  return s;
}
template <typename T>
inline T ddot(const SymTensor3<T>& x, const Tensor3<T>& y) {
  T s = x(0, 0) * y(0, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == 0 && j == 0) continue;
      s += x(i, j) * y(i, j);
    }
  return s;
}

template <typename T>
inline T norm(const SymTensor3<T>& x) { return sqrt(ddot(x, x)); }

// b = t t^T for symmetric t (used for dev(n^2)).
template <typename T>
inline SymTensor3<T> square(const SymTensor3<T>& t) {
  SymTensor3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      T s = t(i, 0) * t(0, j);
      s += t(i, 1) * t(1, j);
      s += t(i, 2) * t(2, j);
      r(i, j) = s;
    }
  return r;
}

// Matrix-vector product t v for symmetric t.
template <typename T>
inline std::array<T, 3> matvec(const SymTensor3<T>& t, const std::array<T, 3>& v) {
  std::array<T, 3> r;
  for (int i = 0; i < 3; ++i) r[i] = t(i, 0) * v[0] + t(i, 1) * v[1] + t(i, 2) * v[2];
  return r;
}

// Pull-back F^-1 t F^-T and push-forward F t F^T between configurations.
template <typename T>
inline SymTensor3<T> push_forward(const SymTensor3<T>& t, const Tensor3<T>& F) {
  if (val(det(F)) <= 0.0)
    throw NumericsError("push_forward: non-positive det(F), degenerate deformation");
  const Tensor3<T> m = matmul(matmul(F, full(t)), transpose(F));
  return sym(m);
}
template <typename T>
inline SymTensor3<T> pull_back(const SymTensor3<T>& t, const Tensor3<T>& F) {
  if (val(det(F)) <= 0.0)
    throw NumericsError("pull_back: non-positive det(F), degenerate deformation");
  const Tensor3<T> Fi = inverse(F);
  const Tensor3<T> m = matmul(matmul(Fi, full(t)), transpose(Fi));
  return sym(m);
}

// Fourth-order moduli with minor symmetries, stored as a 6x6 matrix over the
// component basis (11,12,13,22,23,33) of symmetric second-order tensors.
// Contractions carry the factor-2 weights of the doubled off-diagonal slots.
struct Moduli4 {
  std::array<double, 36> m{};
  bool major_symmetric = false;

  double& operator()(int i, int j) { return m[6 * i + j]; }
  const double& operator()(int i, int j) const { return m[6 * i + j]; }

  static constexpr std::array<int, 6> kI = {0, 0, 0, 1, 1, 2};
  static constexpr std::array<int, 6> kJ = {0, 1, 2, 1, 2, 2};
  static constexpr std::array<double, 6> kW = {1.0, 2.0, 2.0, 1.0, 2.0, 1.0};

  void add_scaled_identity4(double c) {
    // c * I_sym where (I_sym)_ijkl = (d_ik d_jl + d_il d_jk)/2
    for (int p = 0; p < 6; ++p) (*this)(p, p) += (kI[p] == kJ[p]) ? c : 0.5 * c;
  }
  void add_outer(double c, const SymTensor3<double>& x, const SymTensor3<double>& y) {
    for (int p = 0; p < 6; ++p)
      for (int q = 0; q < 6; ++q)
        (*this)(p, q) += c * x(kI[p], kJ[p]) * y(kI[q], kJ[q]);
  }
  // c * I_A with (I_A)_ijkl = (A_ik A_jl + A_il A_jk)/2 for symmetric A.
  void add_sym_identity(double c, const SymTensor3<double>& A) {
    for (int p = 0; p < 6; ++p) {
      const int i = kI[p], j = kJ[p];
      for (int q = 0; q < 6; ++q) {
        const int k = kI[q], l = kJ[q];
        (*this)(p, q) += 0.5 * c * (A(i, k) * A(j, l) + A(i, l) * A(j, k));
      }
    }
  }

  // A : C : B for symmetric A, B.
  double contract(const SymTensor3<double>& A, const SymTensor3<double>& B) const {
    double s = 0.0;
    for (int p = 0; p < 6; ++p) {
      const double ap = kW[p] * A(kI[p], kJ[p]);
      if (ap == 0.0) continue;
      for (int q = 0; q < 6; ++q)
        s += ap * (*this)(p, q) * kW[q] * B(kI[q], kJ[q]);
    }
    return s;
  }
  // C : B (action on a symmetric tensor).
  SymTensor3<double> apply(const SymTensor3<double>& B) const {
    SymTensor3<double> r;
    for (int p = 0; p < 6; ++p) {
      double s = 0.0;
      for (int q = 0; q < 6; ++q) s += (*this)(p, q) * kW[q] * B(kI[q], kJ[q]);
      r.a[p] = s;
    }
    return r;
  }

  double major_asymmetry() const {
    double s = 0.0;
    for (int p = 0; p < 6; ++p)
      for (int q = 0; q < 6; ++q) s = std::max(s, std::abs((*this)(p, q) - (*this)(q, p)));
    return s;
  }
};

}  // namespace plastopt
