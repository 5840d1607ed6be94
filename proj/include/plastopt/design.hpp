#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "plastopt/common.hpp"
#include "plastopt/dual.hpp"
#include "plastopt/material.hpp"
#include "plastopt/mesh.hpp"

namespace plastopt {

// Smoothed Heaviside projection; fixes 0 -> 0 and 1 -> 1 for any beta, theta.
template <typename T>
T heaviside_project(double beta, double theta, const T& x) {
  const double t0 = std::tanh(beta * theta);
  const double den = t0 + std::tanh(beta * (1.0 - theta));
  return (T(t0) + tanh(T(beta) * (x - T(theta)))) / T(den);
}

inline double heaviside_slope(double beta, double theta, double x) {
  const double t0 = std::tanh(beta * theta);
  const double den = t0 + std::tanh(beta * (1.0 - theta));
  const double t = std::tanh(beta * (x - theta));
  return beta * (1.0 - t * t) / den;
}

// Linear density filter with hat weights w = max(0, R - dist) on element
// centroids, rows normalized. The structured lattice makes the neighbor
// search a fixed index window.
struct FilterOperator {
  int n = 0;
  std::vector<int> row_ptr, col;
  std::vector<double> w;

  void apply(const std::vector<double>& in, std::vector<double>& out) const {
    if (static_cast<int>(in.size()) != n) throw ConfigError("filter: field length mismatch");
    out.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out[i] += w[p] * in[col[p]];
  }
  void apply_transpose(const std::vector<double>& in, std::vector<double>& out) const {
    if (static_cast<int>(in.size()) != n) throw ConfigError("filter: field length mismatch");
    out.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out[col[p]] += w[p] * in[i];
  }
};

inline FilterOperator build_filter(const Mesh& mesh, double radius) {
  FilterOperator F;
  F.n = mesh.n_elems();
  F.row_ptr.assign(F.n + 1, 0);
  const int ex = mesh.counts[0];
  const int ey = mesh.counts[1];
  const int ez = mesh.dim == 3 ? mesh.counts[2] : 1;
  if (radius <= 0.0) {  // identity
    F.col.resize(F.n);
    F.w.assign(F.n, 1.0);
    for (int i = 0; i < F.n; ++i) { F.row_ptr[i + 1] = i + 1; F.col[i] = i; }
    return F;
  }
  const int wx = static_cast<int>(std::ceil(radius / mesh.h[0]));
  const int wy = static_cast<int>(std::ceil(radius / mesh.h[1]));
  const int wz = mesh.dim == 3 ? static_cast<int>(std::ceil(radius / mesh.h[2])) : 0;

  for (int pass = 0; pass < 2; ++pass) {
    int nnz = 0;
    for (int k = 0; k < ez; ++k)
      for (int j = 0; j < ey; ++j)
        for (int i = 0; i < ex; ++i) {
          const int e = (k * ey + j) * ex + i;
          double wsum = 0.0;
          int count = 0;
          for (int dk = -wz; dk <= wz; ++dk)
            for (int dj = -wy; dj <= wy; ++dj)
              for (int di = -wx; di <= wx; ++di) {
                const int ii = i + di, jj = j + dj, kk = k + dk;
                if (ii < 0 || ii >= ex || jj < 0 || jj >= ey || kk < 0 || kk >= ez) continue;
                const double dx = di * mesh.h[0], dy = dj * mesh.h[1],
                             dz = mesh.dim == 3 ? dk * mesh.h[2] : 0.0;
                const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                const double wt = radius - dist;
                if (wt <= 0.0) continue;
                if (pass == 1) {
                  F.col[F.row_ptr[e] + count] = (kk * ey + jj) * ex + ii;
                  F.w[F.row_ptr[e] + count] = wt;
                }
                wsum += wt;
                ++count;
              }
          if (pass == 0) {
            F.row_ptr[e + 1] = count;
            nnz += count;
          } else {
            for (int p = F.row_ptr[e]; p < F.row_ptr[e] + count; ++p) F.w[p] /= wsum;
          }
        }
    if (pass == 0) {
      for (int e = 0; e < F.n; ++e) F.row_ptr[e + 1] += F.row_ptr[e];
      F.col.resize(F.row_ptr[F.n]);
      F.w.resize(F.row_ptr[F.n]);
    }
  }
  return F;
}

// Hypercube-to-simplex projection: maps Nxi independent material variables
// in [0,1] onto Nxi+1 fractions summing to one, with hypercube vertices
// hitting the pure or equally mixed assignments.
struct Hsp {
  int n_xi = 0;

  int n_mat() const { return n_xi + 1; }

  // vertex coordinate l of vertex k
  static int cvert(int k, int l) { return (k >> l) & 1; }

  // xi_bar (size n_xi + 1) from xi_hat (size n_xi)
  void project(const double* xi_hat, double* xi_bar) const {
    const int nv = 1 << n_xi;
    for (int nn = 0; nn < n_xi; ++nn) xi_bar[nn] = 0.0;
    for (int k = 0; k < nv; ++k) {
      int ones = 0;
      double prod = 1.0;
      for (int l = 0; l < n_xi; ++l) {
        ones += cvert(k, l);
        prod *= xi_hat[l] + cvert(k, l) - 1.0;
      }
      const double sign = ((n_xi + ones) % 2 == 0) ? 1.0 : -1.0;
      const double basis = sign * prod;
      if (ones >= 1)
        for (int nn = 0; nn < n_xi; ++nn)
          if (cvert(k, nn)) xi_bar[nn] += basis / ones;
    }
    double s = 0.0;
    for (int nn = 0; nn < n_xi; ++nn) s += xi_bar[nn];
    xi_bar[n_xi] = 1.0 - s;
  }

  // d(xi_bar)/d(xi_hat): (n_xi+1) x n_xi, row-major
  void jacobian(const double* xi_hat, double* J) const {
    const int nv = 1 << n_xi;
    const int nm = n_mat();
    for (int i = 0; i < nm * n_xi; ++i) J[i] = 0.0;
    for (int k = 0; k < nv; ++k) {
      int ones = 0;
      for (int l = 0; l < n_xi; ++l) ones += cvert(k, l);
      if (ones < 1) continue;
      const double sign = ((n_xi + ones) % 2 == 0) ? 1.0 : -1.0;
      for (int j = 0; j < n_xi; ++j) {
        double prod = 1.0;
        for (int l = 0; l < n_xi; ++l) {
          if (l == j) continue;
          prod *= xi_hat[l] + cvert(k, l) - 1.0;
        }
        const double dbasis = sign * prod;
        for (int nn = 0; nn < n_xi; ++nn)
          if (cvert(k, nn)) J[nn * n_xi + j] += dbasis / ones;
      }
    }
    for (int j = 0; j < n_xi; ++j) {
      double s = 0.0;
      for (int nn = 0; nn < n_xi; ++nn) s += J[nn * n_xi + j];
      J[n_xi * n_xi + j] = -s;
    }
  }
};

struct DesignParams {
  double filter_radius_rho = 0.0;
  double filter_radius_xi = 0.0;
  double beta_rho = 1.0, theta_rho = 0.5;
  double beta_xi = 1.0, theta_xi = 0.5;
  double beta_phi = 500.0, theta_phi = 0.1;
  double p_kappa = 3.0;  // also p_mu
  double p_k = 2.5;
  double p_h = 3.0;
  double p_xi = 1.0;
  double eps_rho = 1e-6;

  void validate() const {
    if (!(eps_rho > 0.0 && eps_rho <= 1e-3))
      throw ConfigError("design: eps_rho must be in (0, 1e-3]");
    if (p_kappa < 1.0 || p_k < 1.0 || p_h < 1.0 || p_xi < 1.0)
      throw ConfigError("design: penalties must be >= 1");
    for (double th : {theta_rho, theta_xi})
      if (!(th > 0.0 && th < 1.0)) throw ConfigError("design: theta must be in (0,1)");
    if (!(beta_rho > 0.0 && beta_xi > 0.0)) throw ConfigError("design: beta must be > 0");
  }
};

// Raw, filtered, projected and physical per-element fields.
struct DesignField {
  int n_elems = 0;
  int n_xi = 0;
  std::vector<double> rho_raw, rho_tilde, rho_bar;
  std::vector<std::vector<double>> xi_raw, xi_tilde, xi_hat;  // n_xi families
  std::vector<std::vector<double>> xi_bar;                    // n_xi + 1 families
  std::vector<double> phi;

  int n_mat() const { return n_xi + 1; }
};

// phi(rho_bar): the solid/void switch of the stress interpolation.
template <typename T>
T phi_switch(const DesignParams& p, const T& rho_bar) {
  return heaviside_project<T>(p.beta_phi, p.theta_phi, pow(rho_bar, p.p_kappa));
}

inline DesignField evaluate_chain(const Mesh& mesh, const DesignParams& params,
                                  const FilterOperator& filt_rho, const FilterOperator& filt_xi,
                                  const std::vector<double>& rho_raw,
                                  const std::vector<std::vector<double>>& xi_raw) {
  DesignField f;
  f.n_elems = mesh.n_elems();
  f.n_xi = static_cast<int>(xi_raw.size());
  f.rho_raw = rho_raw;
  f.xi_raw = xi_raw;
  filt_rho.apply(f.rho_raw, f.rho_tilde);
  f.rho_bar.resize(f.n_elems);
  for (int e = 0; e < f.n_elems; ++e)
    f.rho_bar[e] = heaviside_project(params.beta_rho, params.theta_rho, f.rho_tilde[e]);

  f.xi_tilde.resize(f.n_xi);
  f.xi_hat.resize(f.n_xi);
  for (int j = 0; j < f.n_xi; ++j) {
    filt_xi.apply(f.xi_raw[j], f.xi_tilde[j]);
    f.xi_hat[j].resize(f.n_elems);
    for (int e = 0; e < f.n_elems; ++e)
      f.xi_hat[j][e] = heaviside_project(params.beta_xi, params.theta_xi, f.xi_tilde[j][e]);
  }

  Hsp hsp{f.n_xi};
  f.xi_bar.assign(f.n_mat(), std::vector<double>(f.n_elems, 0.0));
  std::vector<double> xh(std::max(f.n_xi, 1)), xb(f.n_mat());
  for (int e = 0; e < f.n_elems; ++e) {
    for (int j = 0; j < f.n_xi; ++j) xh[j] = f.xi_hat[j][e];
    hsp.project(xh.data(), xb.data());
    for (int nn = 0; nn < f.n_mat(); ++nn) f.xi_bar[nn][e] = xb[nn];
  }

  f.phi.resize(f.n_elems);
  for (int e = 0; e < f.n_elems; ++e) f.phi[e] = phi_switch(params, f.rho_bar[e]);
  return f;
}

// Interpolated constants and hardening law for one element. Seeding rho_bar
// or a xi_bar entry with a dual chains design derivatives through the
// constitutive update.
template <typename T>
EffMaterial<T> interp_effective(const DesignParams& p, const T& rho_bar, const T* xi_bar,
                                int n_mat, const MaterialCatalog& catalog) {
  EffMaterial<T> e;
  const T one_m = T(1.0 - p.eps_rho);
  const T fk = T(p.eps_rho) + one_m * pow(rho_bar, p.p_kappa);
  const T fks = T(p.eps_rho) + one_m * pow(rho_bar, p.p_k);
  const T fh = T(p.eps_rho) + one_m * pow(rho_bar, p.p_h);
  e.kappa = T(0.0); e.mu = T(0.0); e.h = T(0.0);
  e.k_sigma0 = T(0.0); e.k_lin = T(0.0);
  for (int n = 0; n < n_mat; ++n) {
    const MaterialSpec& m = catalog[n];
    const T w = pow(xi_bar[n], p.p_xi);
    e.kappa += fk * w * T(m.kappa);
    e.mu += fk * w * T(m.mu);
    e.h += fh * w * T(m.h_kin);
    e.k_sigma0 += fks * w * T(m.sigma_y);
    e.k_lin += fks * w * T(m.K_iso);
    if (m.sigma_inf != m.sigma_y || m.delta != 0.0) {
      if (e.n_exp >= 8) throw ConfigError("too many nonlinear hardening terms");
      e.exp_amp[e.n_exp] = fks * w * T(m.sigma_inf - m.sigma_y);
      e.exp_delta[e.n_exp] = m.delta;
      ++e.n_exp;
    }
  }
  return e;
}

// Scalar property interpolation (exposed for tests and constraint assembly).
enum class Property { Kappa, Mu, HKin, SigmaY };
inline double interp_property(const DesignParams& p, double rho_bar, const double* xi_bar,
                              int n_mat, const MaterialCatalog& catalog, Property which) {
  const auto e = interp_effective<double>(p, rho_bar, xi_bar, n_mat, catalog);
  switch (which) {
    case Property::Kappa: return e.kappa;
    case Property::Mu: return e.mu;
    case Property::HKin: return e.h;
    case Property::SigmaY: return e.k_sigma0;
  }
  return 0.0;
}

// Transpose of the raw -> physical chain. Input: gradients with respect to
// rho_bar and each xi_bar family; output: gradients with respect to the raw
// variables. The phi and penalty dependence on rho_bar must already be
// folded into d_rho_bar by the caller (it is, when seeds go through
// interp_effective / phi_switch).
struct ChainAdjointWorkspace {
  std::vector<double> tmp;
  std::vector<std::vector<double>> fam;
};

inline void chain_adjoint_rho(const DesignParams& params, const FilterOperator& filt,
                              const std::vector<double>& rho_tilde,
                              const std::vector<double>& d_rho_bar,
                              std::vector<double>& d_rho_raw, ChainAdjointWorkspace& ws) {
  const int n = static_cast<int>(rho_tilde.size());
  ws.tmp.resize(n);
  for (int e = 0; e < n; ++e)
    ws.tmp[e] = heaviside_slope(params.beta_rho, params.theta_rho, rho_tilde[e]) * d_rho_bar[e];
  filt.apply_transpose(ws.tmp, d_rho_raw);
}

inline void chain_adjoint_xi(const DesignParams& params, const FilterOperator& filt,
                             const DesignField& field,
                             const std::vector<std::vector<double>>& d_xi_bar,
                             std::vector<std::vector<double>>& d_xi_raw,
                             ChainAdjointWorkspace& ws) {
  const int n = field.n_elems;
  const int nxi = field.n_xi;
  Hsp hsp{nxi};
  d_xi_raw.assign(nxi, std::vector<double>());
  std::vector<double> xh(std::max(nxi, 1));
  std::vector<double> J(static_cast<std::size_t>(field.n_mat()) * std::max(nxi, 1));
  ws.fam.assign(nxi, std::vector<double>(n, 0.0));
  for (int e = 0; e < n; ++e) {
    for (int j = 0; j < nxi; ++j) xh[j] = field.xi_hat[j][e];
    hsp.jacobian(xh.data(), J.data());
    for (int j = 0; j < nxi; ++j) {
      double s = 0.0;
      for (int nn = 0; nn < field.n_mat(); ++nn) s += J[nn * nxi + j] * d_xi_bar[nn][e];
      ws.fam[j][e] = s * heaviside_slope(params.beta_xi, params.theta_xi, field.xi_tilde[j][e]);
    }
  }
  for (int j = 0; j < nxi; ++j) filt.apply_transpose(ws.fam[j], d_xi_raw[j]);
}

}  // namespace plastopt
