#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "plastopt/common.hpp"

namespace plastopt {

// Method of moving asymptotes for box-bounded variables with inequality
// constraints. Separable convex subproblems are solved by a primal-dual
// interior-point iteration; constraints carry elastic-mode slack variables,
// so the subproblem is always feasible.
struct MmaOptions {
  double move = 0.2;
  double asyinit = 0.5;
  double asydecr = 0.7;
  double asyincr = 1.2;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double epsimin = 1e-10;
  double c_elastic = 1000.0;
};

struct MmaState {
  int n = 0, m = 0;
  int iter = 0;
  MmaOptions opt;
  Eigen::VectorXd xval, xold1, xold2, low, upp, xmin, xmax;
  double subproblem_kkt = 0.0;  // residual norm of the last subproblem solve

  void init(int n_vars, int m_cons, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
            const Eigen::VectorXd& hi, const MmaOptions& options = {}) {
    n = n_vars;
    m = m_cons;
    opt = options;
    iter = 0;
    xval = x0;
    xold1 = x0;
    xold2 = x0;
    xmin = lo;
    xmax = hi;
    low = lo;
    upp = hi;
  }
};

namespace detail_mma {

struct Subproblem {
  Eigen::VectorXd alfa, beta, p0, q0, b;
  Eigen::MatrixXd P, Q;  // m x n
  Eigen::VectorXd low, upp;
};

// Primal-dual interior-point solve of the separable subproblem. Returns the
// primal x; the achieved residual norm is stored in kkt_out.
inline Eigen::VectorXd subsolv(const Subproblem& sp, int m, int n, const MmaOptions& opt,
                               double& kkt_out) {
  const double a0 = 1.0;
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(m, opt.c_elastic);
  const Eigen::VectorXd d = Eigen::VectorXd::Ones(m);

  double epsi = 1.0;
  Eigen::VectorXd x = 0.5 * (sp.alfa + sp.beta);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
  double z = 1.0;
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd xsi = ((x - sp.alfa).cwiseInverse()).cwiseMax(1.0);
  Eigen::VectorXd eta = ((sp.beta - x).cwiseInverse()).cwiseMax(1.0);
  Eigen::VectorXd mu = (0.5 * c).cwiseMax(1.0);
  double zet = 1.0;
  Eigen::VectorXd s = Eigen::VectorXd::Ones(m);

  auto residuals = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& yy, double zz,
                       const Eigen::VectorXd& ll, const Eigen::VectorXd& xs,
                       const Eigen::VectorXd& et, const Eigen::VectorXd& mm, double zt,
                       const Eigen::VectorXd& ss, double eps, double& norm2, double& maxr) {
    const Eigen::VectorXd ux1 = sp.upp - xx;
    const Eigen::VectorXd xl1 = xx - sp.low;
    const Eigen::VectorXd plam = sp.p0 + sp.P.transpose() * ll;
    const Eigen::VectorXd qlam = sp.q0 + sp.Q.transpose() * ll;
    const Eigen::VectorXd gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
    const Eigen::VectorXd dpsidx =
        plam.cwiseQuotient(ux1.cwiseProduct(ux1)) - qlam.cwiseQuotient(xl1.cwiseProduct(xl1));

    Eigen::VectorXd rex = dpsidx - xs + et;
    Eigen::VectorXd rey = c + d.cwiseProduct(yy) - mm - ll;
    double rez = a0 - zt - a.dot(ll);
    Eigen::VectorXd relam = gvec - a * zz - yy + ss - sp.b;
    Eigen::VectorXd rexsi = xs.cwiseProduct(xx - sp.alfa).array() - eps;
    Eigen::VectorXd reeta = et.cwiseProduct(sp.beta - xx).array() - eps;
    Eigen::VectorXd remu = mm.cwiseProduct(yy).array() - eps;
    double rezet = zt * zz - eps;
    Eigen::VectorXd res = ll.cwiseProduct(ss).array() - eps;

    norm2 = rex.squaredNorm() + rey.squaredNorm() + rez * rez + relam.squaredNorm() +
            rexsi.squaredNorm() + reeta.squaredNorm() + remu.squaredNorm() + rezet * rezet +
            res.squaredNorm();
    norm2 = std::sqrt(norm2);
    maxr = std::max({rex.cwiseAbs().maxCoeff(), rey.size() ? rey.cwiseAbs().maxCoeff() : 0.0,
                     std::abs(rez), relam.size() ? relam.cwiseAbs().maxCoeff() : 0.0,
                     rexsi.cwiseAbs().maxCoeff(), reeta.cwiseAbs().maxCoeff(),
                     remu.size() ? remu.cwiseAbs().maxCoeff() : 0.0, std::abs(rezet),
                     res.size() ? res.cwiseAbs().maxCoeff() : 0.0});
  };

  double residunorm = 0.0, residumax = 0.0;
  residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi, residunorm, residumax);

  while (epsi > opt.epsimin) {
    int ittt = 0;
    while (residumax > 0.9 * epsi && ittt < 200) {
      ++ittt;
      const Eigen::VectorXd ux1 = sp.upp - x;
      const Eigen::VectorXd xl1 = x - sp.low;
      const Eigen::VectorXd ux2 = ux1.cwiseProduct(ux1);
      const Eigen::VectorXd xl2 = xl1.cwiseProduct(xl1);
      const Eigen::VectorXd ux3 = ux2.cwiseProduct(ux1);
      const Eigen::VectorXd xl3 = xl2.cwiseProduct(xl1);
      const Eigen::VectorXd plam = sp.p0 + sp.P.transpose() * lam;
      const Eigen::VectorXd qlam = sp.q0 + sp.Q.transpose() * lam;
      const Eigen::VectorXd gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
      Eigen::MatrixXd GG(m, n);
      for (int i = 0; i < m; ++i)
        GG.row(i) = sp.P.row(i).cwiseQuotient(ux2.transpose()) -
                    sp.Q.row(i).cwiseQuotient(xl2.transpose());
      const Eigen::VectorXd dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);

      const Eigen::VectorXd delx = dpsidx - epsi * (x - sp.alfa).cwiseInverse() +
                                   epsi * (sp.beta - x).cwiseInverse();
      const Eigen::VectorXd dely =
          c + d.cwiseProduct(y) - lam - epsi * y.cwiseInverse();
      const double delz = a0 - a.dot(lam) - epsi / z;
      const Eigen::VectorXd dellam =
          gvec - a * z - y - sp.b + epsi * lam.cwiseInverse();

      const Eigen::VectorXd diagx = 2.0 * (plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3)) +
                                    xsi.cwiseQuotient(x - sp.alfa) +
                                    eta.cwiseQuotient(sp.beta - x);
      const Eigen::VectorXd diagy = d + mu.cwiseQuotient(y);
      const Eigen::VectorXd diaglam = s.cwiseQuotient(lam);
      const Eigen::VectorXd diaglamyi = diaglam + diagy.cwiseInverse();

      // m << n: condense x out of the Newton system
      const Eigen::VectorXd blam =
          dellam + dely.cwiseQuotient(diagy) - GG * delx.cwiseQuotient(diagx);
      Eigen::MatrixXd Alam = diaglamyi.asDiagonal();
      Alam += GG * diagx.cwiseInverse().asDiagonal() * GG.transpose();
      Eigen::MatrixXd AA(m + 1, m + 1);
      AA.topLeftCorner(m, m) = Alam;
      AA.topRightCorner(m, 1) = a;
      AA.bottomLeftCorner(1, m) = a.transpose();
      AA(m, m) = -zet / z;
      Eigen::VectorXd bb(m + 1);
      bb.head(m) = blam;
      bb(m) = delz;
      const Eigen::VectorXd solut = AA.fullPivLu().solve(bb);
      const Eigen::VectorXd dlam = solut.head(m);
      const double dz = solut(m);
      const Eigen::VectorXd dx =
          -delx.cwiseQuotient(diagx) - (GG.transpose() * dlam).cwiseQuotient(diagx);

      const Eigen::VectorXd dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const Eigen::VectorXd dxsi = -xsi + (epsi - xsi.cwiseProduct(dx).array()).matrix().cwiseQuotient(x - sp.alfa);
      const Eigen::VectorXd deta = -eta + (epsi + eta.cwiseProduct(dx).array()).matrix().cwiseQuotient(sp.beta - x);
      const Eigen::VectorXd dmu = -mu + (epsi - mu.cwiseProduct(dy).array()).matrix().cwiseQuotient(y);
      const double dzet = -zet + (epsi - zet * dz) / z;
      const Eigen::VectorXd ds = -s + (epsi - s.cwiseProduct(dlam).array()).matrix().cwiseQuotient(lam);

      // step length keeping all positivity conditions
      double t = 1.0;
      auto limit_pos = [&](double v, double dv) {
        if (dv < 0.0) t = std::min(t, -v / (1.01 * dv));
      };
      for (int i = 0; i < m; ++i) {
        limit_pos(y[i], dy[i]);
        limit_pos(lam[i], dlam[i]);
        limit_pos(mu[i], dmu[i]);
        limit_pos(s[i], ds[i]);
      }
      limit_pos(z, dz);
      limit_pos(zet, dzet);
      for (int j = 0; j < n; ++j) {
        limit_pos(xsi[j], dxsi[j]);
        limit_pos(eta[j], deta[j]);
        limit_pos(x[j] - sp.alfa[j], dx[j]);
        limit_pos(sp.beta[j] - x[j], -dx[j]);
      }

      double resinew = 2.0 * residunorm;
      double steg = t;
      Eigen::VectorXd xn, yn, ln, xsn, etn, mn, sn;
      double zn = z, ztn = zet;
      for (int itto = 0; itto < 60 && resinew > residunorm; ++itto) {
        xn = x + steg * dx;
        yn = y + steg * dy;
        zn = z + steg * dz;
        ln = lam + steg * dlam;
        xsn = xsi + steg * dxsi;
        etn = eta + steg * deta;
        mn = mu + steg * dmu;
        ztn = zet + steg * dzet;
        sn = s + steg * ds;
        double mx;
        residuals(xn, yn, zn, ln, xsn, etn, mn, ztn, sn, epsi, resinew, mx);
        residumax = mx;
        steg *= 0.5;
      }
      x = xn; y = yn; z = zn; lam = ln; xsi = xsn; eta = etn; mu = mn; zet = ztn; s = sn;
      residunorm = resinew;
    }
    epsi *= 0.1;
  }
  kkt_out = residunorm;
  return x;
}

}  // namespace detail_mma

// One MMA design update. Gradients follow the minimization convention; the
// caller negates maximized objectives.
inline Eigen::VectorXd mma_update(MmaState& st, const Eigen::VectorXd& df0dx,
                                  const Eigen::VectorXd& fval, const Eigen::MatrixXd& dfdx) {
  const int n = st.n, m = st.m;
  if (df0dx.size() != n || fval.size() != m || dfdx.rows() != m || dfdx.cols() != n)
    throw ConfigError("mma_update: gradient dimensions mismatch");
  if (!df0dx.allFinite() || !fval.allFinite() || !dfdx.allFinite())
    throw NumericsError("mma_update: non-finite gradients rejected");
  ++st.iter;
  const MmaOptions& o = st.opt;
  const Eigen::VectorXd xmami = (st.xmax - st.xmin).cwiseMax(1e-5);

  if (st.iter <= 2) {
    st.low = st.xval - o.asyinit * xmami;
    st.upp = st.xval + o.asyinit * xmami;
  } else {
    for (int j = 0; j < n; ++j) {
      const double zzz = (st.xval[j] - st.xold1[j]) * (st.xold1[j] - st.xold2[j]);
      double factor = 1.0;
      if (zzz > 0.0) factor = o.asyincr;
      if (zzz < 0.0) factor = o.asydecr;
      st.low[j] = st.xval[j] - factor * (st.xold1[j] - st.low[j]);
      st.upp[j] = st.xval[j] + factor * (st.upp[j] - st.xold1[j]);
      st.low[j] = std::max(st.low[j], st.xval[j] - 10.0 * xmami[j]);
      st.low[j] = std::min(st.low[j], st.xval[j] - 0.01 * xmami[j]);
      st.upp[j] = std::min(st.upp[j], st.xval[j] + 10.0 * xmami[j]);
      st.upp[j] = std::max(st.upp[j], st.xval[j] + 0.01 * xmami[j]);
    }
  }

  detail_mma::Subproblem sp;
  sp.low = st.low;
  sp.upp = st.upp;
  sp.alfa.resize(n);
  sp.beta.resize(n);
  for (int j = 0; j < n; ++j) {
    sp.alfa[j] = std::max({st.low[j] + o.albefa * (st.xval[j] - st.low[j]),
                           st.xval[j] - o.move * xmami[j], st.xmin[j]});
    sp.beta[j] = std::min({st.upp[j] - o.albefa * (st.upp[j] - st.xval[j]),
                           st.xval[j] + o.move * xmami[j], st.xmax[j]});
  }

  const Eigen::VectorXd ux1 = st.upp - st.xval;
  const Eigen::VectorXd xl1 = st.xval - st.low;
  const Eigen::VectorXd ux2 = ux1.cwiseProduct(ux1);
  const Eigen::VectorXd xl2 = xl1.cwiseProduct(xl1);

  sp.p0.resize(n);
  sp.q0.resize(n);
  for (int j = 0; j < n; ++j) {
    const double dp = std::max(df0dx[j], 0.0);
    const double dq = std::max(-df0dx[j], 0.0);
    const double pq = 0.001 * (dp + dq) + o.raa0 / xmami[j];
    sp.p0[j] = ux2[j] * (dp + pq);
    sp.q0[j] = xl2[j] * (dq + pq);
  }
  sp.P.resize(m, n);
  sp.Q.resize(m, n);
  sp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dp = std::max(dfdx(i, j), 0.0);
      const double dq = std::max(-dfdx(i, j), 0.0);
      const double pq = 0.001 * (dp + dq) + o.raa0 / xmami[j];
      sp.P(i, j) = ux2[j] * (dp + pq);
      sp.Q(i, j) = xl2[j] * (dq + pq);
    }
    sp.b[i] = sp.P.row(i).dot(ux1.cwiseInverse()) + sp.Q.row(i).dot(xl1.cwiseInverse()) -
              fval[i];
  }

  const Eigen::VectorXd xnew = detail_mma::subsolv(sp, m, n, o, st.subproblem_kkt);
  st.xold2 = st.xold1;
  st.xold1 = st.xval;
  st.xval = xnew;
  return xnew;
}

}  // namespace plastopt
