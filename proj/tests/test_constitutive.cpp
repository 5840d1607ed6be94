#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "plastopt/constitutive.hpp"
#include "plastopt/uniaxial_oracle.hpp"

using namespace plastopt;

namespace {
std::mt19937 rng(123);

MaterialSpec dummy_spec() { return MaterialSpec::from_young("dummy", 1.0, 0.3, 0.2); }
EffMaterial<double> dummy_mat() { return EffMaterial<double>::from_spec(dummy_spec()); }

Tensor3<double> diag(double a, double b, double c) {
  Tensor3<double> t{};
  t(0, 0) = a; t(1, 1) = b; t(2, 2) = c;
  return t;
}

SymTensor3<double> random_deviator(double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymTensor3<double> t;
  for (auto& v : t.a) v = u(rng);
  return dev(t);
}

// independent scalar root-finder on t^3 - J2 t + (J3 - 1) over t > 0
double cubic_root_oracle(const SymTensor3<double>& d) {
  const double J2 = 0.5 * ddot(d, d);
  const double J3 = det(d);
  auto f = [&](double t) { return t * t * t - J2 * t + (J3 - 1.0); };
  // scan for the sign change giving a positive-definite reconstruction
  double best = -1.0;
  for (double lo = 1e-6; lo < 6.0; lo += 1e-3) {
    const double hi = lo + 1e-3;
    if (f(lo) <= 0.0 && f(hi) > 0.0) {
      double a = lo, b = hi;
      for (int i = 0; i < 100; ++i) {
        const double m = 0.5 * (a + b);
        (f(m) <= 0.0 ? a : b) = m;
      }
      const double t = 0.5 * (a + b);
      SymTensor3<double> bt = d;
      bt.a[0] += t; bt.a[3] += t; bt.a[5] += t;
      const double b11 = bt(0, 0);
      const double minor = bt(0, 0) * bt(1, 1) - bt(0, 1) * bt(0, 1);
      if (b11 > 0.0 && minor > 0.0 && det(bt) > 0.0) { best = t; break; }
    }
  }
  return 3.0 * best;
}

}  // namespace

TEST_CASE("trial state at rest and under rigid rotation") {
  auto mat = dummy_mat();
  QuadPointState virgin;
  auto I3 = Tensor3<double>::identity();
  auto tr = trial_state(virgin, I3, I3, mat);
  for (int i = 0; i < 3; ++i) CHECK(tr.be_bar_tr(i, i) == doctest::Approx(1.0));
  CHECK(tr.f_tr == doctest::Approx(-std::sqrt(2.0 / 3.0) * 0.2));
  CHECK_FALSE(tr.has_direction);

  // rotation about z by 0.3 rad
  const double c = std::cos(0.3), s = std::sin(0.3);
  Tensor3<double> R{};
  R(0, 0) = c; R(0, 1) = -s; R(1, 0) = s; R(1, 1) = c; R(2, 2) = 1.0;
  auto tr2 = trial_state(virgin, I3, R, mat);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(tr2.be_bar_tr(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));

  Tensor3<double> bad{};
  CHECK_THROWS_AS((void)trial_state(virgin, I3, bad, mat), NumericsError);
}

TEST_CASE("linear consistency solve satisfies the yield residual") {
  // synthetic trial with prescribed scalars
  TrialState<double> tr;
  tr.xi_norm = 1.0;
  tr.mu2_bar_tr = 0.4;
  tr.alpha_tr = 0.1;
  EffMaterial<double> mat;
  mat.mu = 0.4;
  mat.h = 0.12;
  mat.k_sigma0 = 0.5;
  mat.k_lin = 0.2;
  mat.kappa = 1.0;
  tr.f_tr = tr.xi_norm - std::sqrt(2.0 / 3.0) * mat.k(tr.alpha_tr);
  REQUIRE(tr.f_tr > 0.0);

  const double gamma = solve_consistency_linear(tr, mat);
  CHECK(gamma > 0.0);
  CHECK(std::abs(consistency_residual(tr, mat, gamma)) <= 1e-12);

  // perfect plasticity reduction
  EffMaterial<double> pp = mat;
  pp.h = 0.0; pp.k_lin = 0.0;
  const double gpp = solve_consistency_linear(tr, pp);
  CHECK(gpp == doctest::Approx((tr.xi_norm - std::sqrt(2.0 / 3.0) * 0.5) /
                               (2.0 * tr.mu2_bar_tr)).epsilon(1e-14));

  // boundary: f_tr -> 0+ gives gamma -> 0+
  TrialState<double> tb = tr;
  tb.xi_norm = std::sqrt(2.0 / 3.0) * mat.k(tr.alpha_tr) + 1e-12;
  tb.f_tr = 1e-12;
  CHECK(solve_consistency_linear(tb, mat) < 1e-11);

  TrialState<double> bad = tr;
  bad.mu2_bar_tr = -0.1;
  CHECK_THROWS_AS((void)solve_consistency_linear(bad, mat), NumericsError);
}

TEST_CASE("newton consistency matches linear limit and bisection oracle") {
  auto cat = builtin_catalog();
  // linear limit: sigma_inf == sigma_y
  {
    TrialState<double> tr;
    tr.xi_norm = 200.0;
    tr.mu2_bar_tr = 30000.0;
    tr.alpha_tr = 0.05;
    auto mat = EffMaterial<double>::from_spec(cat.lookup("CuSn10"));
    tr.f_tr = tr.xi_norm - std::sqrt(2.0 / 3.0) * mat.k(tr.alpha_tr);
    REQUIRE(mat.linear());
    REQUIRE(tr.f_tr > 0.0);
    const double g1 = solve_consistency_linear(tr, mat);
    const double g2 = solve_consistency_newton(tr, mat);
    CHECK(g2 == doctest::Approx(g1).epsilon(1e-10));
  }
  // nonlinear: nickel-chromium constants, trial slightly above yield
  {
    auto mat = EffMaterial<double>::from_spec(cat.lookup("INCONEL 718"));
    TrialState<double> tr;
    tr.alpha_tr = 0.02;
    tr.mu2_bar_tr = mat.mu * 1.001;
    tr.xi_norm = std::sqrt(2.0 / 3.0) * mat.k(tr.alpha_tr) + 25.0;
    tr.f_tr = 25.0;
    const double g = solve_consistency_newton(tr, mat);
    CHECK(std::abs(consistency_residual(tr, mat, g)) <= 1e-12 * mat.mu);

    // bisection oracle
    double lo = 0.0, hi = tr.f_tr / (2.0 * tr.mu2_bar_tr);
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (consistency_residual(tr, mat, mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(g == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));

    // G is strictly decreasing around the root
    const double eps = 1e-9;
    CHECK(consistency_residual(tr, mat, g + eps) < 0.0);
    CHECK(consistency_residual(tr, mat, g - eps) > 0.0);
  }
}

TEST_CASE("isochoric first-invariant enforcement") {
  // undeformed point
  SymTensor3<double> z{};
  CHECK(enforce_isochoric_I1(z) == doctest::Approx(3.0).epsilon(1e-14));

  // mild deviator vs scalar root-finder oracle
  SymTensor3<double> d{};
  d(0, 0) = 0.2; d(1, 1) = -0.1; d(2, 2) = -0.1;
  const double I1 = enforce_isochoric_I1(d);
  CHECK(I1 == doctest::Approx(cubic_root_oracle(d)).epsilon(1e-9));
  SymTensor3<double> b = d;
  b.a[0] += I1 / 3.0; b.a[3] += I1 / 3.0; b.a[5] += I1 / 3.0;
  CHECK(det(b) == doctest::Approx(1.0).epsilon(1e-12));

  // random deviators: reconstruction always unimodular and positive definite
  for (int it = 0; it < 200; ++it) {
    auto dd = random_deviator(0.6);
    double i1;
    try {
      i1 = enforce_isochoric_I1(dd);
    } catch (const NumericsError&) {
      continue;  // some random deviators admit no positive-definite root
    }
    SymTensor3<double> bb = dd;
    bb.a[0] += i1 / 3.0; bb.a[3] += i1 / 3.0; bb.a[5] += i1 / 3.0;
    CHECK(std::abs(det(bb) - 1.0) <= 1e-10);
    CHECK(bb(0, 0) > 0.0);
    CHECK(bb(0, 0) * bb(1, 1) - bb(0, 1) * bb(0, 1) > 0.0);
  }

  // a Delta > 0, Q > 0 case: the selected root passes the Sylvester test
  // while the rejected positive root fails it
  bool exercised = false;
  for (int it = 0; it < 20000 && !exercised; ++it) {
    auto dd = random_deviator(1.4);
    const double J2 = 0.5 * ddot(dd, dd);
    const double J3 = det(dd);
    const double P = -J2, Q = J3 - 1.0;
    const double disc = -(P * P * P / 27.0 + Q * Q / 4.0);
    if (!(disc > 1e-10) || !(Q > 1e-8)) continue;
    // enumerate the trigonometric roots
    const double mfac = 2.0 * std::sqrt(-P / 3.0);
    const double arg = std::clamp(3.0 * Q / (2.0 * P) * std::sqrt(-3.0 / P), -1.0, 1.0);
    std::vector<double> roots;
    for (int k = 1; k <= 3; ++k)
      roots.push_back(mfac * std::cos(std::acos(arg) / 3.0 - 2.0 * k * M_PI / 3.0));
    std::sort(roots.begin(), roots.end());
    auto pd = [&](double t) {
      SymTensor3<double> bb = dd;
      bb.a[0] += t; bb.a[3] += t; bb.a[5] += t;
      return bb(0, 0) > 0.0 && bb(0, 0) * bb(1, 1) - bb(0, 1) * bb(0, 1) > 0.0 &&
             det(bb) > 0.0;
    };
    const double s1 = roots[2], s2 = roots[1];
    if (s2 <= 0.0) continue;           // want two positive candidates
    if (pd(s1) == pd(s2)) continue;    // want exactly one admissible
    exercised = true;
    const double got = enforce_isochoric_I1(dd) / 3.0;
    const double want = pd(s1) ? s1 : s2;
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
  CHECK(exercised);

  // non-deviatoric input rejected
  CHECK_THROWS_AS((void)enforce_isochoric_I1(SymTensor3<double>::identity()), NumericsError);
}

TEST_CASE("isochoric I1 derivative matches finite differences") {
  for (int it = 0; it < 20; ++it) {
    auto d = random_deviator(0.3);
    double i1;
    try {
      i1 = enforce_isochoric_I1(d);
    } catch (const NumericsError&) { continue; }
    for (int comp = 0; comp < 6; ++comp) {
      SymTensor3<Dual> dd;
      for (int i = 0; i < 6; ++i) dd.a[i] = Dual(d.a[i]);
      dd.a[comp].d = 1.0;
      // keep the seed deviatoric for diagonal components
      if (comp == 0 || comp == 3 || comp == 5) {
        const int diags[3] = {0, 3, 5};
        for (int dg : diags)
          if (dg != comp) dd.a[dg].d -= 0.5;
      }
      const Dual r = enforce_isochoric_I1(dd);
      // forward difference with the same deviatoric direction
      SymTensor3<double> dp = d, dm = d;
      const double h = 1e-7;
      for (int i = 0; i < 6; ++i) {
        dp.a[i] += h * dd.a[i].d;
        dm.a[i] -= h * dd.a[i].d;
      }
      const double fd = (enforce_isochoric_I1(dp) - enforce_isochoric_I1(dm)) / (2.0 * h);
      CHECK(r.v == doctest::Approx(i1).epsilon(1e-12));
      CHECK(r.d == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("return map: elastic step leaves state advected, Kuhn-Tucker holds") {
  auto mat = dummy_mat();
  QuadPointState virgin;
  auto I3 = Tensor3<double>::identity();
  auto F = diag(1.02, 0.995, 0.995);
  auto r = return_map(virgin, I3, F, mat);
  CHECK_FALSE(r.plastic);
  CHECK(r.state.gamma_hat == 0.0);
  CHECK(r.state.alpha == 0.0);
  CHECK(std::abs(det(r.state.be_bar) - 1.0) <= 1e-10);
  CHECK(r.trial.f_tr < 0.0);
  CHECK(r.state.gamma_hat * r.trial.f_tr == 0.0);
}

TEST_CASE("return map tracks the uniaxial oracle through a full cycle") {
  auto spec = dummy_spec();
  auto mat = dummy_mat();
  std::vector<double> sched;
  for (double l = 1.0; l <= 1.4001; l += 0.01) sched.push_back(l);
  for (double l = 1.39; l >= 0.7001; l -= 0.01) sched.push_back(l);
  for (double l = 0.71; l <= 1.1001; l += 0.01) sched.push_back(l);
  auto oracle = cyclic_reference(sched, spec);

  ConstitutiveOptions opts;
  QuadPointState st;
  Tensor3<double> F_prev = Tensor3<double>::identity();
  double err2_tau = 0.0, err2_det = 0.0;
  double max_lateral_dev = 0.0;
  double prev_alpha = 0.0;
  bool saw_plastic = false;
  for (const auto& p : oracle) {
    const Tensor3<double> F = diag(p.lambda, p.lambda_l, p.lambda_l);
    auto r = return_map(st, F_prev, F, mat, opts);
    st = r.state;
    // Kirchhoff stress of this step
    const double JUp = 0.5 * mat.kappa * (std::pow(det(F), 2) - 1.0);
    SymTensor3<double> tau = r.trial.s_tr;
    if (r.plastic) {
      saw_plastic = true;
      tau = tau - (2.0 * r.trial.mu2_bar_tr * st.gamma_hat) * r.trial.n_unit;
    }
    tau.a[0] += JUp; tau.a[3] += JUp; tau.a[5] += JUp;

    err2_tau += std::pow(tau(0, 0) - p.tau11, 2);
    err2_det += std::pow(det(st.be_bar) - 1.0, 2);
    max_lateral_dev = std::max(max_lateral_dev, std::abs(tau(1, 1)));
    max_lateral_dev = std::max(max_lateral_dev, std::abs(tau(2, 2)));

    // invariants
    CHECK(st.alpha >= prev_alpha);
    prev_alpha = st.alpha;
    CHECK(std::abs(det(st.be_bar) - 1.0) <= 1e-10);
    if (r.plastic) {
      // return lands on the yield surface
      const SymTensor3<double> xi =
          mat.mu * dev(st.be_bar) - dev(st.beta_bar);
      const double k = mat.k(st.alpha);
      CHECK(std::abs(norm(xi) - std::sqrt(2.0 / 3.0) * k) <= 1e-9 * k);
      // corrected direction equals the trial direction
      const double nd = ddot(xi, r.trial.n_unit) / norm(xi);
      CHECK(nd == doctest::Approx(1.0).epsilon(1e-12));
    }
    F_prev = F;
  }
  CHECK(saw_plastic);
  CHECK(std::sqrt(err2_tau) <= 1e-8);
  CHECK(std::sqrt(err2_det) <= 1e-9);
  CHECK(max_lateral_dev <= 1e-8);  // tau22 = tau33 = 0 on the driven path
}

TEST_CASE("classical update violates the isochoric constraint on unloading") {
  auto spec = dummy_spec();
  auto mat = dummy_mat();
  std::vector<double> sched;
  for (double l = 1.0; l <= 1.4001; l += 0.01) sched.push_back(l);
  for (double l = 1.39; l >= 0.9; l -= 0.01) sched.push_back(l);
  auto oracle = cyclic_reference(sched, spec);

  ConstitutiveOptions opts;
  opts.scheme = UpdateScheme::Classical;
  QuadPointState st;
  Tensor3<double> F_prev = Tensor3<double>::identity();
  double max_defect = 0.0;
  for (const auto& p : oracle) {
    const Tensor3<double> F = diag(p.lambda, p.lambda_l, p.lambda_l);
    st = return_map(st, F_prev, F, mat, opts).state;
    max_defect = std::max(max_defect, std::abs(det(st.be_bar) - 1.0));
    F_prev = F;
  }
  CHECK(max_defect > 1e-4);
}

TEST_CASE("stresses: reference state, pure volumetric, uniaxial lateral-free") {
  auto mat = dummy_mat();
  auto I3 = Tensor3<double>::identity();
  QuadPointState virgin;

  auto e0 = evaluate_point_forward(mat, 1.0, Tensor3<double>{}, Tensor3<double>{}, virgin);
  for (double v : e0.P.a) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
  for (double v : e0.tau.a) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

  // volumetric stretch: deviator-free Kirchhoff stress
  Tensor3<double> gu{};
  gu(0, 0) = gu(1, 1) = gu(2, 2) = 0.03;
  auto ev = evaluate_point_forward(mat, 1.0, gu, Tensor3<double>{}, virgin);
  const double J = std::pow(1.03, 3);
  CHECK(ev.tau(0, 0) == doctest::Approx(0.5 * mat.kappa * (J * J - 1.0)).epsilon(1e-12));
  CHECK(ev.tau(0, 1) == doctest::Approx(0.0));
  CHECK(norm(dev(ev.tau)) <= 1e-12);

  // uniaxial plastic state from the oracle: tau22 = tau33 = 0
  auto spec = dummy_spec();
  std::vector<double> sched{1.1, 1.2, 1.3, 1.35};
  auto padded = cyclic_reference(sched, spec);
  QuadPointState st;
  Tensor3<double> F_prev = I3;
  PointEval<double> last;
  for (const auto& p : padded) {
    const Tensor3<double> F = diag(p.lambda, p.lambda_l, p.lambda_l);
    last = evaluate_point_forward(mat, 1.0, F - I3, F_prev - I3, st);
    st = committed_state(last);
    F_prev = F;
  }
  CHECK(last.plastic);
  CHECK(std::abs(last.tau(1, 1)) <= 1e-8);
  CHECK(std::abs(last.tau(2, 2)) <= 1e-8);
}

namespace {
// consistent tangent via dual forward propagation: re-solves gamma by a
// dual-valued Newton polish, then differentiates the stress evaluation
Tensor3<double> consistent_dP(const EffMaterial<double>& mat, const Tensor3<double>& gu,
                              const Tensor3<double>& gu_prev, const QuadPointState& prev,
                              const Tensor3<double>& dF) {
  EffMaterial<Dual> dmat = mat.cast<Dual>();
  Tensor3<Dual> dgu, dgp;
  for (int i = 0; i < 9; ++i) {
    dgu.a[i] = Dual(gu.a[i], dF.a[i]);
    dgp.a[i] = Dual(gu_prev.a[i]);
  }
  SymTensor3<Dual> be, beta;
  for (int i = 0; i < 6; ++i) {
    be.a[i] = Dual(prev.be_bar.a[i]);
    beta.a[i] = Dual(prev.beta_bar.a[i]);
  }
  const Dual alpha(prev.alpha);

  // solve gamma on the primal path
  const auto ev0 = evaluate_point_forward(mat, 1.0, gu, gu_prev, prev);
  Dual gamma(ev0.gamma);
  if (ev0.plastic) {
    auto trd = trial_state<Dual>(be, beta, alpha, deformation_gradient(dgp, Dual(1.0)),
                                 deformation_gradient(dgu, Dual(1.0)), dmat);
    for (int it = 0; it < 3; ++it)
      gamma = gamma - consistency_residual(trd, dmat, gamma) /
                          consistency_residual_prime(trd, dmat, gamma);
  }
  auto evd = evaluate_point_given<Dual>(dmat, Dual(1.0), dgu, dgp, be, beta, alpha, gamma,
                                        ev0.plastic);
  Tensor3<double> dP;
  for (int i = 0; i < 9; ++i) dP.a[i] = evd.P.a[i].d;
  return dP;
}
}  // namespace

TEST_CASE("algorithmic tangent: elastic limit, symmetry, FD consistency") {
  auto mat = dummy_mat();
  auto I3 = Tensor3<double>::identity();
  QuadPointState virgin;

  // theta = 0 at F = I reduces to linear elasticity
  auto e0 = evaluate_point_forward(mat, 1.0, Tensor3<double>{}, Tensor3<double>{}, virgin);
  auto c0 = make_tangent_coeffs(e0, mat);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 10; ++it) {
    Tensor3<double> gv, gd;
    for (auto& v : gv.a) v = u(rng);
    for (auto& v : gd.a) v = u(rng);
    const double got = tangent_action(c0, gv, gd);
    const SymTensor3<double> sd = sym(gd);
    const double want = (mat.kappa - 2.0 * mat.mu / 3.0) * trace(gd) * trace(gv) +
                        2.0 * mat.mu * ddot(sd, gv);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }

  // build a genuinely plastic, non-radial state
  QuadPointState st;
  Tensor3<double> F_prev = I3;
  Tensor3<double> F = I3;
  F(0, 0) = 1.25; F(0, 1) = 0.18; F(1, 1) = 0.92; F(1, 2) = -0.1; F(2, 2) = 1.05;
  auto ev = evaluate_point_forward(mat, 1.0, F - I3, F_prev - I3, st);
  REQUIRE(ev.plastic);

  // symmetrized 6x6 export has major symmetry
  auto Csym = second_tangent_moduli(ev, mat, true);
  CHECK(Csym.major_asymmetry() <= 1e-12 * std::abs(Csym(0, 0)));

  // exact moduli match the dual consistent tangent and central differences
  auto Cexact = second_tangent_moduli(ev, mat, false);
  ConstitutiveOptions opts;
  int checked = 0;
  for (int it = 0; it < 20; ++it) {
    Tensor3<double> dF;
    for (auto& v : dF.a) v = u(rng);
    const Tensor3<double> dP_dual = consistent_dP(mat, F - I3, F_prev - I3, st, dF);
    const Tensor3<double> dP_mod = first_moduli_apply(ev, Cexact, dF);

    const double h = 1e-6;
    Tensor3<double> gup = F - I3, gum = F - I3;
    for (int i = 0; i < 9; ++i) { gup.a[i] += h * dF.a[i]; gum.a[i] -= h * dF.a[i]; }
    auto evp = evaluate_point_forward(mat, 1.0, gup, F_prev - I3, st, opts);
    auto evm = evaluate_point_forward(mat, 1.0, gum, F_prev - I3, st, opts);
    if (!evp.plastic || !evm.plastic) continue;  // FD invalid across branch switch
    ++checked;
    double nrm = 0.0, err_dual = 0.0, err_mod = 0.0;
    for (int i = 0; i < 9; ++i) {
      const double fd = (evp.P.a[i] - evm.P.a[i]) / (2.0 * h);
      nrm += fd * fd;
      err_dual += std::pow(fd - dP_dual.a[i], 2);
      err_mod += std::pow(fd - dP_mod.a[i], 2);
    }
    CHECK(std::sqrt(err_dual / nrm) <= 1e-6);
    CHECK(std::sqrt(err_mod / nrm) <= 1e-6);
  }
  CHECK(checked >= 15);

  // the scalar assembly action agrees with the moduli route
  auto coeffs = make_tangent_coeffs(ev, mat);
  for (int it = 0; it < 10; ++it) {
    Tensor3<double> gv, gd;
    for (auto& v : gv.a) v = u(rng);
    for (auto& v : gd.a) v = u(rng);
    const Tensor3<double> dP = first_moduli_apply(ev, Cexact, gd);
    CHECK(tangent_action(coeffs, gv, gd) == doctest::Approx(ddot(dP, gv)).epsilon(5e-10));
  }
}
