#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "plastopt/common.hpp"
#include "plastopt/dual.hpp"
#include "plastopt/material.hpp"
#include "plastopt/tensor.hpp"

namespace plastopt {

// Trial indicator above which a point is treated as plastic. Points within
// the band take the elastic branch.
inline constexpr double kYieldTol = 1e-12;

// be_bar update variants: the det-preserving correction, and the classical
// update that keeps the trial trace (kept as a negative control; it lets
// det(be_bar) drift away from 1 on unloading).
enum class UpdateScheme { Isochoric, Classical };

struct ConstitutiveOptions {
  UpdateScheme scheme = UpdateScheme::Isochoric;
  double consistency_tol = 1e-12;  // |G| <= tol * mu
  int consistency_max_iter = 50;
};

// Converged per-integration-point history at one load step.
struct QuadPointState {
  SymTensor3<double> be_bar = SymTensor3<double>::identity();
  SymTensor3<double> beta_bar{};
  double alpha = 0.0;
  double gamma_hat = 0.0;
};

template <typename T>
struct TrialState {
  SymTensor3<T> be_bar_tr, beta_bar_tr, s_tr, xi_tr, n_unit;
  T alpha_tr{}, mu_bar_tr{}, mu2_bar_tr{}, f_tr{}, xi_norm{};
  bool has_direction = false;
};

// Advect the previous state through the volume-preserving relative
// deformation gradient and evaluate every trial quantity.
template <typename T>
TrialState<T> trial_state(const SymTensor3<T>& be_n, const SymTensor3<T>& beta_n,
                          const T& alpha_n, const Tensor3<T>& F_prev,
                          const Tensor3<T>& F_now, const EffMaterial<T>& mat) {
  const T detf_prev = det(F_prev);
  const T detf_now = det(F_now);
  if (val(detf_prev) <= 0.0 || val(detf_now) <= 0.0)
    throw NumericsError("trial_state: non-positive deformation gradient determinant");

  const Tensor3<T> f = matmul(F_now, inverse(F_prev));
  const T jf = det(f);
  const T jf_m13 = T(1.0) / cbrt(jf);
  const Tensor3<T> f_bar = jf_m13 * f;

  TrialState<T> tr;
  tr.be_bar_tr = push_forward(be_n, f_bar);
  tr.beta_bar_tr = push_forward(beta_n, f_bar);
  tr.alpha_tr = alpha_n;
  tr.s_tr = mat.mu * dev(tr.be_bar_tr);
  tr.xi_tr = tr.s_tr - dev(tr.beta_bar_tr);
  tr.xi_norm = norm(tr.xi_tr);
  tr.mu_bar_tr = mat.mu / T(3.0) * trace(tr.be_bar_tr);
  tr.mu2_bar_tr = tr.mu_bar_tr - trace(tr.beta_bar_tr) / T(3.0);
  tr.f_tr = tr.xi_norm - T(std::sqrt(2.0 / 3.0)) * mat.k(tr.alpha_tr);

  tr.has_direction = val(tr.xi_norm) > 1e-14 * val(mat.mu);
  if (tr.has_direction) {
    tr.n_unit = (T(1.0) / tr.xi_norm) * tr.xi_tr;
  } else if (val(tr.f_tr) > kYieldTol) {
    throw NumericsError("trial_state: yield violated with vanishing net stress, flow direction undefined");
  }
  return tr;
}

inline TrialState<double> trial_state(const QuadPointState& prev, const Tensor3<double>& F_prev,
                                      const Tensor3<double>& F_now,
                                      const EffMaterial<double>& mat) {
  return trial_state<double>(prev.be_bar, prev.beta_bar, prev.alpha, F_prev, F_now, mat);
}

// Yield residual whose root is the consistency increment.
template <typename T>
T consistency_residual(const TrialState<T>& tr, const EffMaterial<T>& mat, const T& gamma) {
  const T s23 = T(std::sqrt(2.0 / 3.0));
  return tr.xi_norm - T(2.0) * tr.mu2_bar_tr * (T(1.0) + mat.h / (T(3.0) * mat.mu)) * gamma -
         s23 * mat.k(tr.alpha_tr + s23 * gamma);
}

template <typename T>
T consistency_residual_prime(const TrialState<T>& tr, const EffMaterial<T>& mat, const T& gamma) {
  const T s23 = T(std::sqrt(2.0 / 3.0));
  return T(-2.0) * tr.mu2_bar_tr * (T(1.0) + mat.h / (T(3.0) * mat.mu)) -
         T(2.0 / 3.0) * mat.k_prime(tr.alpha_tr + s23 * gamma);
}

// Closed-form consistency increment for a linear hardening law.
inline double solve_consistency_linear(const TrialState<double>& tr,
                                       const EffMaterial<double>& mat) {
  if (!(tr.mu2_bar_tr > 0.0))
    throw NumericsError("solve_consistency_linear: mu2_bar_tr <= 0 violates the return-map assumption");
  const double s23 = std::sqrt(2.0 / 3.0);
  const double num = tr.xi_norm - s23 * (mat.k_sigma0 + mat.k_lin * tr.alpha_tr);
  const double fac = 1.0 + mat.h / (3.0 * mat.mu) + mat.k_lin / (3.0 * tr.mu2_bar_tr);
  return num / (2.0 * tr.mu2_bar_tr * fac);
}

// Newton iteration on G(gamma) = 0 with a bisection fallback on [0, upper].
// G is strictly decreasing, so the upper bracket from the hardening-free
// bound always has G <= 0.
inline double solve_consistency_newton(const TrialState<double>& tr,
                                       const EffMaterial<double>& mat,
                                       double tol = 1e-12, int max_iter = 50) {
  if (!(tr.mu2_bar_tr > 0.0))
    throw NumericsError("solve_consistency_newton: mu2_bar_tr <= 0 violates the return-map assumption");
  const double slope0 = 2.0 * tr.mu2_bar_tr * (1.0 + mat.h / (3.0 * mat.mu));
  double hi = tr.f_tr / slope0;  // G(hi) <= 0 since k is nondecreasing
  double lo = 0.0;
  const double gtol = tol * std::max(1.0, mat.mu);

  double gamma = 0.0;
  double g = consistency_residual(tr, mat, gamma);
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(g) <= gtol && gamma >= 0.0) return gamma;
    if (g > 0.0) lo = gamma; else hi = gamma;
    const double gp = consistency_residual_prime(tr, mat, gamma);
    double next = gamma - g / gp;
    if (!(next > lo) || !(next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    gamma = next;
    g = consistency_residual(tr, mat, gamma);
  }
  if (std::abs(g) <= 1e3 * gtol && gamma >= 0.0) return gamma;  // near-degenerate slope
  throw NumericsError("solve_consistency_newton: no convergence, |G| = " + std::to_string(std::abs(g)));
}

inline double solve_consistency(const TrialState<double>& tr, const EffMaterial<double>& mat,
                                const ConstitutiveOptions& opts) {
  if (mat.linear()) return solve_consistency_linear(tr, mat);
  return solve_consistency_newton(tr, mat, opts.consistency_tol, opts.consistency_max_iter);
}

// First invariant I1 such that det(dev_be + I1/3 I) = 1 and the
// reconstructed tensor is positive definite. Root of the depressed cubic
// t^3 + P t + Q with t = I1/3, P = -J2, Q = J3 - 1; the branch follows the
// sign of the discriminant, with Sylvester's criterion selecting between the
// two positive roots of the trigonometric case.
template <typename T>
T enforce_isochoric_I1(const SymTensor3<T>& dev_be) {
  if (std::abs(val(trace(dev_be))) > 1e-12 * std::max(1.0, std::abs(val(dev_be.a[0]))))
    throw NumericsError("enforce_isochoric_I1: input is not deviatoric");

  const T J2 = T(0.5) * ddot(dev_be, dev_be);
  const T J3 = det(dev_be);
  const T P = -J2;
  const T Q = J3 - T(1.0);
  const double p = val(P), q = val(Q);
  const double disc = -(p * p * p / 27.0 + q * q / 4.0);
  const double band = 1e-14 * std::max({1.0, std::abs(p * p * p), q * q});

  auto sylvester_ok = [&](double t) {
    const double b11 = val(dev_be.a[0]) + t;
    const double b22 = val(dev_be.a[3]) + t;
    const double b12 = val(dev_be.a[1]);
    return b11 > 0.0 && b11 * b22 - b12 * b12 > 0.0;
  };

  double t;
  if (disc < -band || p > -1e-300) {
    const double rt = std::sqrt(std::max(0.0, -disc));
    t = std::cbrt(-q / 2.0 + rt) + std::cbrt(-q / 2.0 - rt);
  } else if (disc <= band) {
    t = std::max(3.0 * q / p, -1.5 * q / p);
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    double arg = 3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p);
    arg = std::clamp(arg, -1.0, 1.0);
    const double phi = std::acos(arg);
    double r[3];
    for (int k = 1; k <= 3; ++k)
      r[k - 1] = m * std::cos(phi / 3.0 - 2.0 * k * M_PI / 3.0);
    std::sort(r, r + 3);
    const double s1 = r[2], s2 = r[1];
    if (q <= 0.0) {
      t = s1;
    } else {
      t = sylvester_ok(s1) ? s1 : s2;
    }
  }

  // Polish in the working scalar type; this also propagates the implicit
  // derivative of the root through P and Q.
  T tt(t);
  for (int it = 0; it < 3; ++it) {
    const T fp = T(3.0) * tt * tt + P;
    if (std::abs(val(fp)) < 1e-14 * std::max(1.0, std::abs(p))) break;
    tt = tt - (tt * tt * tt + P * tt + Q) / fp;
  }

  const double tv = val(tt);
  SymTensor3<double> b;
  for (int i = 0; i < 6; ++i) b.a[i] = val(dev_be.a[i]);
  b.a[0] += tv; b.a[3] += tv; b.a[5] += tv;
  if (!(tv > 0.0) || !sylvester_ok(tv) || std::abs(det(b) - 1.0) > 1e-10)
    throw NumericsError("enforce_isochoric_I1: no positive-definite unimodular root");
  return T(3.0) * tt;
}

struct ReturnMapResult {
  QuadPointState state;
  TrialState<double> trial;
  bool plastic = false;
};

// Radial return for one point: predictor from trial advection, corrector
// along the fixed trial direction, then the volumetric re-enforcement.
inline ReturnMapResult return_map(const QuadPointState& prev, const Tensor3<double>& F_prev,
                                  const Tensor3<double>& F_now, const EffMaterial<double>& mat,
                                  const ConstitutiveOptions& opts = {}) {
  ReturnMapResult r;
  r.trial = trial_state(prev, F_prev, F_now, mat);
  const TrialState<double>& tr = r.trial;

  double gamma = 0.0;
  r.plastic = tr.f_tr > kYieldTol;
  if (r.plastic) gamma = solve_consistency(tr, mat, opts);

  QuadPointState& s = r.state;
  s.gamma_hat = gamma;
  s.alpha = tr.alpha_tr + std::sqrt(2.0 / 3.0) * gamma;
  s.beta_bar = tr.beta_bar_tr;
  SymTensor3<double> dev_be = dev(tr.be_bar_tr);
  if (r.plastic) {
    const double c = 2.0 * tr.mu2_bar_tr * gamma / mat.mu;
    dev_be = dev_be - c * tr.n_unit;
    s.beta_bar = s.beta_bar + (2.0 * mat.h * tr.mu2_bar_tr * gamma / (3.0 * mat.mu)) * tr.n_unit;
  }
  if (opts.scheme == UpdateScheme::Isochoric) {
    const double I1 = enforce_isochoric_I1(dev_be);
    s.be_bar = dev_be;
    s.be_bar.a[0] += I1 / 3.0; s.be_bar.a[3] += I1 / 3.0; s.be_bar.a[5] += I1 / 3.0;
  } else {
    const double m = trace(tr.be_bar_tr) / 3.0;
    s.be_bar = dev_be;
    s.be_bar.a[0] += m; s.be_bar.a[3] += m; s.be_bar.a[5] += m;
  }
  return r;
}

// Everything the assembly and the adjoint need from one integration point.
// F_check = I + phi grad(u) is the interpolated deformation gradient; the
// constitutive state advances with it, and the interpolated stress blends
// the finite-strain response with the small-strain law of the void limit.
template <typename T>
struct PointEval {
  TrialState<T> trial;
  T gamma{};
  bool plastic = false;
  SymTensor3<T> be_next, beta_next;
  T alpha_next{};
  T J{}, JUp{};            // det(F_check), J U'(J)
  SymTensor3<T> tau;
  Tensor3<T> P;            // tau F_check^-T
  SymTensor3<T> S;
  Tensor3<T> P_check;
  Tensor3<T> F_check, F_check_inv;
};

template <typename T>
Tensor3<T> deformation_gradient(const Tensor3<T>& grad_u, const T& phi) {
  Tensor3<T> F = Tensor3<T>::identity();
  for (int i = 0; i < 9; ++i) F.a[i] += phi * grad_u.a[i];
  return F;
}

namespace detail_cst {
// Corrector, stress measures, and the interpolated stress given a trial
// state and a prescribed consistency increment (frozen branch).
template <typename T>
PointEval<T> finish_point_eval(const EffMaterial<T>& mat, const T& phi,
                               const Tensor3<T>& grad_u_now, TrialState<T> trial,
                               Tensor3<T> F_check, const T& gamma, bool plastic,
                               UpdateScheme scheme) {
  PointEval<T> e;
  e.F_check = std::move(F_check);
  e.trial = std::move(trial);
  e.gamma = gamma;
  e.plastic = plastic;

  const T s23 = T(std::sqrt(2.0 / 3.0));
  e.alpha_next = e.trial.alpha_tr + (plastic ? s23 * gamma : T(0.0));
  e.beta_next = e.trial.beta_bar_tr;
  SymTensor3<T> dev_be = dev(e.trial.be_bar_tr);
  if (plastic) {
    dev_be = dev_be - (T(2.0) * e.trial.mu2_bar_tr * gamma / mat.mu) * e.trial.n_unit;
    e.beta_next = e.beta_next +
        (T(2.0) * mat.h * e.trial.mu2_bar_tr * gamma / (T(3.0) * mat.mu)) * e.trial.n_unit;
  }
  if (scheme == UpdateScheme::Isochoric) {
    const T I1 = enforce_isochoric_I1(dev_be);
    e.be_next = dev_be;
    e.be_next.a[0] += I1 / T(3.0); e.be_next.a[3] += I1 / T(3.0); e.be_next.a[5] += I1 / T(3.0);
  } else {
    const T m = trace(e.trial.be_bar_tr) / T(3.0);
    e.be_next = dev_be;
    e.be_next.a[0] += m; e.be_next.a[3] += m; e.be_next.a[5] += m;
  }

  e.J = det(e.F_check);
  if (val(e.J) <= 0.0) throw NumericsError("evaluate_point: det(F_check) <= 0");
  e.JUp = mat.kappa / T(2.0) * (e.J * e.J - T(1.0));
  e.tau = e.trial.s_tr;
  if (plastic) e.tau = e.tau - (T(2.0) * e.trial.mu2_bar_tr * gamma) * e.trial.n_unit;
  e.tau.a[0] += e.JUp; e.tau.a[3] += e.JUp; e.tau.a[5] += e.JUp;

  e.F_check_inv = inverse(e.F_check);
  e.P = matmul(full(e.tau), transpose(e.F_check_inv));
  e.S = sym(matmul(matmul(e.F_check_inv, full(e.tau)), transpose(e.F_check_inv)));

  // P_check = phi P(F_check) - phi sigma_l(eps(F_check)) + sigma_l(eps(F));
  // with eps(F_check) = phi eps(F) the linear terms collapse to (1 - phi^2).
  const SymTensor3<T> eps = sym(grad_u_now);
  const T treps = trace(eps);
  SymTensor3<T> sig_l = (T(2.0) * mat.mu) * dev(eps);
  const T vol = mat.kappa * treps;
  sig_l.a[0] += vol; sig_l.a[3] += vol; sig_l.a[5] += vol;
  const T w = T(1.0) - phi * phi;
  e.P_check = phi * e.P + w * full(sig_l);
  return e;
}
}  // namespace detail_cst

// Update + stress with a prescribed consistency increment and frozen branch.
// This is the function the adjoint differentiates; the forward path wraps it
// after solving for gamma.
template <typename T>
PointEval<T> evaluate_point_given(const EffMaterial<T>& mat, const T& phi,
                                  const Tensor3<T>& grad_u_now, const Tensor3<T>& grad_u_prev,
                                  const SymTensor3<T>& be_n, const SymTensor3<T>& beta_n,
                                  const T& alpha_n, const T& gamma, bool plastic,
                                  UpdateScheme scheme = UpdateScheme::Isochoric) {
  Tensor3<T> F_check = deformation_gradient(grad_u_now, phi);
  const Tensor3<T> F_check_prev = deformation_gradient(grad_u_prev, phi);
  TrialState<T> trial = trial_state<T>(be_n, beta_n, alpha_n, F_check_prev, F_check, mat);
  return detail_cst::finish_point_eval<T>(mat, phi, grad_u_now, std::move(trial),
                                          std::move(F_check), gamma, plastic, scheme);
}

// Forward evaluation: solve the consistency condition, then finish.
inline PointEval<double> evaluate_point_forward(const EffMaterial<double>& mat, double phi,
                                                const Tensor3<double>& grad_u_now,
                                                const Tensor3<double>& grad_u_prev,
                                                const QuadPointState& prev,
                                                const ConstitutiveOptions& opts = {}) {
  Tensor3<double> Fc = deformation_gradient(grad_u_now, phi);
  const Tensor3<double> Fp = deformation_gradient(grad_u_prev, phi);
  TrialState<double> tr =
      trial_state<double>(prev.be_bar, prev.beta_bar, prev.alpha, Fp, Fc, mat);
  const bool plastic = tr.f_tr > kYieldTol;
  const double gamma = plastic ? solve_consistency(tr, mat, opts) : 0.0;
  return detail_cst::finish_point_eval<double>(mat, phi, grad_u_now, std::move(tr),
                                               std::move(Fc), gamma, plastic, opts.scheme);
}

inline QuadPointState committed_state(const PointEval<double>& e) {
  QuadPointState s;
  s.be_bar = e.be_next;
  s.beta_bar = e.beta_next;
  s.alpha = e.alpha_next;
  s.gamma_hat = e.plastic ? e.gamma : 0.0;
  return s;
}

// Scalar coefficients of the compact-form algorithmic moduli. The c4 cross
// term of the exact consistent tangent is not major-symmetric; assembly uses
// the exact form, the 6x6 export offers the symmetrized variant.
struct TangentCoeffs {
  double A1 = 0.0;       // coefficient of (U)^sym : V
  double A2 = 0.0;       // coefficient of tr(U) tr(V)
  double c1t23 = 0.0;    // 2 theta c1 / 3
  double c3t = 0.0;      // theta c3
  double c4t = 0.0;      // theta c4
  bool plastic = false;
  SymTensor3<double> s_tr, xi_tr, n, devn2, S;
  Tensor3<double> F_inv;
};

inline TangentCoeffs make_tangent_coeffs(const PointEval<double>& e,
                                         const EffMaterial<double>& mat) {
  TangentCoeffs c;
  c.plastic = e.plastic;
  c.s_tr = e.trial.s_tr;
  c.xi_tr = e.trial.xi_tr;
  c.S = e.S;
  c.F_inv = e.F_check_inv;
  const double JJUpp = mat.kappa * e.J * e.J;  // J (J U')' for U = kappa/2[(J^2-1)/2 - ln J]
  double c1 = 0.0;
  if (e.plastic) {
    const double kp = mat.k_prime(e.alpha_next);
    const double c0 = 1.0 + mat.h / (3.0 * mat.mu) + kp / (3.0 * e.trial.mu2_bar_tr);
    c1 = 2.0 * e.trial.mu2_bar_tr * e.gamma / e.trial.xi_norm;
    const double c2 = 1.0 / c0 - c1;
    c.c3t = 2.0 * c2 * e.trial.mu2_bar_tr -
            ((1.0 / c0) * (1.0 + mat.h / (3.0 * mat.mu)) - 1.0) * (4.0 / 3.0) * e.gamma * e.trial.xi_norm;
    c.c4t = 2.0 * c2 * e.trial.xi_norm;
    c.c1t23 = 2.0 * c1 / 3.0;
    c.n = e.trial.n_unit;
    c.devn2 = dev(square(e.trial.n_unit));
  }
  const double th_c1_mu2 = e.plastic ? c1 * e.trial.mu2_bar_tr : 0.0;
  c.A1 = 2.0 * e.trial.mu_bar_tr - 2.0 * th_c1_mu2 - 2.0 * e.JUp;
  c.A2 = JJUpp - 2.0 / 3.0 * e.trial.mu_bar_tr + 2.0 / 3.0 * th_c1_mu2;
  return c;
}

// grad_v : C_hat : grad_du for the finite-strain branch, material part plus
// the geometric term (grad_du S) : grad_v.
inline double tangent_action(const TangentCoeffs& c, const Tensor3<double>& grad_v,
                             const Tensor3<double>& grad_du, bool symmetrize_c4 = false) {
  const Tensor3<double> V = matmul(grad_v, c.F_inv);
  const Tensor3<double> U = matmul(grad_du, c.F_inv);
  const double trU = trace(U), trV = trace(V);
  const SymTensor3<double> symU = sym(U);

  double r = c.A1 * ddot(symU, V) + c.A2 * trU * trV;
  r += -(2.0 / 3.0) * (trU * ddot(c.s_tr, V) + trV * ddot(c.s_tr, U));
  if (c.plastic) {
    r += c.c1t23 * (trU * ddot(c.xi_tr, V) + trV * ddot(c.xi_tr, U));
    const double nV = ddot(c.n, V), nU = ddot(c.n, U);
    const double mV = ddot(c.devn2, V), mU = ddot(c.devn2, U);
    r -= c.c3t * nV * nU;
    if (symmetrize_c4)
      r -= 0.5 * c.c4t * (nV * mU + mV * nU);
    else
      r -= c.c4t * nV * mU;
  }
  // geometric part
  const Tensor3<double> gS = matmul(grad_du, full(c.S));
  r += ddot(gS, grad_v);
  return r;
}

// Second algorithmic tangent moduli in the compact form, as a 6x6 operator
// on Lagrangian strain. The plastic cross term is symmetrized on request.
inline Moduli4 second_tangent_moduli(const PointEval<double>& e, const EffMaterial<double>& mat,
                                     bool symmetrize = true) {
  const SymTensor3<double> C = sym(matmul(transpose(e.F_check), e.F_check));
  const Tensor3<double> Cif = inverse(full(C));
  const SymTensor3<double> Cinv = sym(Cif);
  const TangentCoeffs k = make_tangent_coeffs(e, mat);

  Moduli4 M;
  M.add_sym_identity(k.A1, Cinv);
  M.add_outer(k.A2, Cinv, Cinv);
  const SymTensor3<double> ps = pull_back(k.s_tr, e.F_check);
  M.add_outer(-2.0 / 3.0, ps, Cinv);
  M.add_outer(-2.0 / 3.0, Cinv, ps);
  if (e.plastic) {
    const SymTensor3<double> pxi = pull_back(k.xi_tr, e.F_check);
    const SymTensor3<double> pn = pull_back(k.n, e.F_check);
    const SymTensor3<double> pm = pull_back(k.devn2, e.F_check);
    M.add_outer(k.c1t23, pxi, Cinv);
    M.add_outer(k.c1t23, Cinv, pxi);
    M.add_outer(-k.c3t, pn, pn);
    if (symmetrize) {
      M.add_outer(-0.5 * k.c4t, pn, pm);
      M.add_outer(-0.5 * k.c4t, pm, pn);
    } else {
      M.add_outer(-k.c4t, pn, pm);
    }
  }
  M.major_symmetric = symmetrize || !e.plastic;
  return M;
}

// Directional first-moduli action as a full tensor: C_hat : dF, computed as
// dF S + F (C : sym(F^T dF)). Used by verification paths.
inline Tensor3<double> first_moduli_apply(const PointEval<double>& e, const Moduli4& C,
                                          const Tensor3<double>& dF) {
  const SymTensor3<double> dE = sym(matmul(transpose(e.F_check), dF));
  const SymTensor3<double> dS = C.apply(dE);
  return matmul(dF, full(e.S)) + matmul(e.F_check, full(dS));
}

}  // namespace plastopt
