#pragma once

#include <cmath>
#include <vector>

#include "plastopt/common.hpp"
#include "plastopt/material.hpp"

namespace plastopt {

// Semi-analytical uniaxial cyclic solution for a perfectly plastic column
// (k(alpha) = sigma_y, h = 0). Serves as the ground-truth oracle for the
// constitutive kernel and the forward solver.

enum class UniaxialBranch { Elastic, YieldTension, YieldCompression };

struct UniaxialState {
  double lambda = 1.0;    // applied stretch
  double lambda_l = 1.0;  // lateral stretch
  double lambda_p = 1.0;  // plastic stretch
  double tau11 = 0.0;
  UniaxialBranch branch = UniaxialBranch::Elastic;
};

namespace detail {
// Deviatoric magnitude entering dev(be_bar) = (B/3) diag(-2, 1, 1).
inline double uniax_B(double lambda, double lambda_l, double lambda_p) {
  return lambda_p * std::pow(lambda_l / lambda, 2.0 / 3.0) -
         std::pow(lambda / lambda_l, 4.0 / 3.0) / (lambda_p * lambda_p);
}
}  // namespace detail

// Lateral stretch on the elastic branch: root of tau22 = 0 at fixed plastic
// stretch. The residual is strictly increasing in lambda_l, so bisection
// with a Newton polish is safe.
inline double elastic_lateral(double lambda, double lambda_p, const MaterialSpec& mat) {
  auto g = [&](double ll) {
    return 0.5 * mat.kappa * (lambda * lambda * std::pow(ll, 4) - 1.0) +
           mat.mu / 3.0 * detail::uniax_B(lambda, ll, lambda_p);
  };
  double lo = 0.05, hi = 20.0;
  if (!(g(lo) < 0.0) || !(g(hi) > 0.0))
    throw NumericsError("elastic_lateral: bracket failure");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-13 * mid) break;
  }
  double ll = 0.5 * (lo + hi);
  const double tol = 1e-12 * std::max(1.0, mat.kappa);
  for (int it = 0; it < 60 && std::abs(g(ll)) > tol; ++it) {
    const double h = 1e-7 * ll;
    const double gp = (g(ll + h) - g(ll - h)) / (2.0 * h);
    ll -= g(ll) / gp;
  }
  if (std::abs(g(ll)) > tol) throw NumericsError("elastic_lateral: residual not converged");
  return ll;
}

// Lateral stretch on a yield branch; sign = +1 for tension, -1 compression.
inline double plastic_lateral(double lambda, const MaterialSpec& mat, int sign) {
  const double arg = 1.0 + sign * 2.0 * mat.sigma_y / (3.0 * mat.kappa);
  if (!(arg > 0.0)) throw NumericsError("plastic_lateral: 1 - 2 sigma_y / (3 kappa) <= 0");
  return std::pow(arg, 0.25) / std::sqrt(lambda);
}

// Plastic stretch on a yield branch: positive root of the cubic in lambda_p.
inline double plastic_stretch(double lambda, double lambda_l, const MaterialSpec& mat,
                              int sign) {
  const double a = std::pow(lambda_l / lambda, 2.0 / 3.0);
  const double b = sign * mat.sigma_y / mat.mu;
  const double d = std::pow(lambda / lambda_l, 4.0 / 3.0);
  auto c = [&](double lp) { return a * lp * lp * lp + b * lp * lp - d; };
  double lo = 1e-8, hi = 1.0;
  while (c(hi) < 0.0 && hi < 1e8) hi *= 2.0;
  if (!(c(hi) > 0.0) || !(c(lo) < 0.0))
    throw NumericsError("plastic_stretch: no positive root");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (c(mid) < 0.0 ? lo : hi) = mid;
    if (hi - lo < 1e-14 * mid) break;
  }
  double lp = 0.5 * (lo + hi);
  for (int it = 0; it < 60 && std::abs(c(lp)) > 1e-13; ++it) {
    const double cp = 3.0 * a * lp * lp + 2.0 * b * lp;
    lp -= c(lp) / cp;
  }
  if (std::abs(c(lp)) > 1e-12) throw NumericsError("plastic_stretch: residual not converged");
  return lp;
}

// Walk an arbitrary stretch schedule. Branch switching replicates the FEA's
// trial test: freeze lambda_p, solve the elastic lateral stretch, and yield
// when the resulting |tau11 deviator| exceeds the yield surface.
inline std::vector<UniaxialState> cyclic_reference(const std::vector<double>& schedule,
                                                   const MaterialSpec& mat) {
  std::vector<UniaxialState> out;
  out.reserve(schedule.size());
  double lambda_p = 1.0;
  for (const double lambda : schedule) {
    UniaxialState st;
    st.lambda = lambda;
    const double ll_e = elastic_lateral(lambda, lambda_p, mat);
    const double B_e = detail::uniax_B(lambda, ll_e, lambda_p);
    if (mat.mu * std::abs(B_e) <= mat.sigma_y * (1.0 + 1e-14)) {
      st.branch = UniaxialBranch::Elastic;
      st.lambda_l = ll_e;
      st.lambda_p = lambda_p;
      const double J = lambda * ll_e * ll_e;
      const double JUp = 0.5 * mat.kappa * (J * J - 1.0);
      st.tau11 = JUp - 2.0 * mat.mu / 3.0 * B_e;
    } else {
      const int sign = B_e < 0.0 ? 1 : -1;  // tension drives B negative
      st.branch = sign > 0 ? UniaxialBranch::YieldTension : UniaxialBranch::YieldCompression;
      st.lambda_l = plastic_lateral(lambda, mat, sign);
      st.lambda_p = plastic_stretch(lambda, st.lambda_l, mat, sign);
      st.tau11 = sign * mat.sigma_y;
      lambda_p = st.lambda_p;
    }
    out.push_back(st);
  }
  return out;
}

}  // namespace plastopt
