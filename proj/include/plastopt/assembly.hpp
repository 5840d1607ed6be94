#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <mutex>
#include <thread>
#include <vector>

#include "plastopt/constitutive.hpp"
#include "plastopt/design.hpp"
#include "plastopt/mesh.hpp"

namespace plastopt {

// Per-element material state of one design: interpolated constants plus the
// solid/void stress-interpolation switch.
struct DesignContext {
  std::vector<EffMaterial<double>> mats;
  std::vector<double> phi;

  int n_elems() const { return static_cast<int>(mats.size()); }
};

inline DesignContext context_from_field(const Mesh& mesh, const MaterialCatalog& catalog,
                                        const DesignParams& params, const DesignField& field) {
  DesignContext ctx;
  const int ne = mesh.n_elems();
  ctx.mats.reserve(ne);
  ctx.phi = field.phi;
  std::vector<double> xb(field.n_mat());
  for (int e = 0; e < ne; ++e) {
    for (int n = 0; n < field.n_mat(); ++n) xb[n] = field.xi_bar[n][e];
    ctx.mats.push_back(interp_effective<double>(params, field.rho_bar[e], xb.data(),
                                                field.n_mat(), catalog));
  }
  return ctx;
}

inline DesignContext context_single_material(const Mesh& mesh, const MaterialSpec& spec) {
  DesignContext ctx;
  ctx.mats.assign(mesh.n_elems(), EffMaterial<double>::from_spec(spec));
  ctx.phi.assign(mesh.n_elems(), 1.0);
  return ctx;
}

namespace detail {
template <typename F>
void parallel_elems(int n_elems, int threads, F&& body) {
  if (threads <= 1 || n_elems < 4 * threads) {
    for (int e = 0; e < n_elems; ++e) body(e);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_elems + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n_elems, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (int e = lo; e < hi; ++e) body(e);
    });
  }
  for (auto& th : pool) th.join();
}

inline Tensor3<double> gradient_at(const Mesh& mesh, const Eigen::VectorXd& u, int e, int q) {
  Tensor3<double> g{};
  const int* cn = mesh.elem_conn(e);
  const auto* gn = &mesh.qgrad[static_cast<std::size_t>(q) * mesh.nen];
  for (int a = 0; a < mesh.nen; ++a) {
    const int node = cn[a];
    for (int i = 0; i < mesh.dim; ++i) {
      const double ui = u[node * mesh.dim + i];
      for (int j = 0; j < mesh.dim; ++j) g(i, j) += ui * gn[a][j];
    }
  }
  return g;
}
}  // namespace detail

// One element's residual and (optionally) tangent. Exceptions carry the
// element and point index for diagnosis.
struct ElementOut {
  std::vector<double> fe;  // nen*dim
  std::vector<double> Ke;  // (nen*dim)^2, row-major, when with_tangent
};

inline void element_kernel(const Mesh& mesh, const DesignContext& ctx,
                           const std::vector<QuadPointState>& states_prev,
                           const Eigen::VectorXd& u_prev, const Eigen::VectorXd& u, int e,
                           bool with_tangent, const ConstitutiveOptions& copts,
                           bool symmetrize_c4, ElementOut& out) {
  const int nen = mesh.nen, dim = mesh.dim;
  const int nd = nen * dim;
  out.fe.assign(nd, 0.0);
  if (with_tangent) out.Ke.assign(static_cast<std::size_t>(nd) * nd, 0.0);

  const EffMaterial<double>& mat = ctx.mats[e];
  const double phi = ctx.phi[e];
  const double phi2 = phi * phi;
  const double lin_w = 1.0 - phi2;

  std::array<std::array<double, 3>, 8> h{}, sv{}, xv{}, nv{}, mv{};

  for (int q = 0; q < mesh.nqp; ++q) {
    const Tensor3<double> gu = detail::gradient_at(mesh, u, e, q);
    const Tensor3<double> gp = detail::gradient_at(mesh, u_prev, e, q);
    const QuadPointState& prev = states_prev[static_cast<std::size_t>(e) * mesh.nqp + q];

    PointEval<double> ev;
    try {
      ev = evaluate_point_forward(mat, phi, gu, gp, prev, copts);
    } catch (const NumericsError& err) {
      throw NumericsError("element " + std::to_string(e) + " point " + std::to_string(q) +
                          ": " + err.what());
    }
    const double w = mesh.qweight[q];
    const auto* gn = &mesh.qgrad[static_cast<std::size_t>(q) * mesh.nen];

    for (int a = 0; a < nen; ++a)
      for (int i = 0; i < dim; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += ev.P_check(i, j) * gn[a][j];
        out.fe[a * dim + i] += w * s;
      }

    if (!with_tangent) continue;
    const TangentCoeffs tc = make_tangent_coeffs(ev, mat);
    for (int a = 0; a < nen; ++a) {
      std::array<double, 3> ga{gn[a][0], gn[a][1], gn[a][2]};
      for (int i = 0; i < 3; ++i) {
        h[a][i] = tc.F_inv(0, i) * ga[0] + tc.F_inv(1, i) * ga[1] + tc.F_inv(2, i) * ga[2];
      }
      sv[a] = matvec(tc.s_tr, h[a]);
      if (tc.plastic) {
        xv[a] = matvec(tc.xi_tr, h[a]);
        nv[a] = matvec(tc.n, h[a]);
        mv[a] = matvec(tc.devn2, h[a]);
      }
    }
    for (int a = 0; a < nen; ++a) {
      const auto& ga = gn[a];
      for (int b = 0; b < nen; ++b) {
        const auto& gb = gn[b];
        const double hab = h[a][0] * h[b][0] + h[a][1] * h[b][1] + h[a][2] * h[b][2];
        const double gab = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
        // g_a' S g_b for the geometric term
        const auto Sgb = matvec(tc.S, {gb[0], gb[1], gb[2]});
        const double gSg = ga[0] * Sgb[0] + ga[1] * Sgb[1] + ga[2] * Sgb[2];
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) {
            double K = tc.A1 * 0.5 * ((i == j ? hab : 0.0) + h[b][i] * h[a][j]) +
                       tc.A2 * h[a][i] * h[b][j] -
                       (2.0 / 3.0) * (h[b][j] * sv[a][i] + h[a][i] * sv[b][j]);
            if (tc.plastic) {
              K += tc.c1t23 * (h[b][j] * xv[a][i] + h[a][i] * xv[b][j]);
              K -= tc.c3t * nv[a][i] * nv[b][j];
              if (symmetrize_c4)
                K -= 0.5 * tc.c4t * (nv[a][i] * mv[b][j] + mv[a][i] * nv[b][j]);
              else
                K -= tc.c4t * nv[a][i] * mv[b][j];
            }
            if (i == j) K += gSg;
            K *= phi2;
            K += lin_w * ((mat.kappa - 2.0 * mat.mu / 3.0) * ga[i] * gb[j] +
                          mat.mu * ((i == j ? gab : 0.0) + gb[i] * ga[j]));
            out.Ke[static_cast<std::size_t>(a * dim + i) * nd + (b * dim + j)] += w * K;
          }
      }
    }
  }
}

struct AssembledSystem {
  Eigen::VectorXd fint;
  std::vector<Eigen::Triplet<double>> triplets;
};

inline AssembledSystem assemble_system(const Mesh& mesh, const DesignContext& ctx,
                                       const std::vector<QuadPointState>& states_prev,
                                       const Eigen::VectorXd& u_prev, const Eigen::VectorXd& u,
                                       bool with_tangent, const ConstitutiveOptions& copts,
                                       bool symmetrize_c4 = false, int threads = 1) {
  const int ne = mesh.n_elems();
  const int nd = mesh.nen * mesh.dim;
  AssembledSystem sys;
  sys.fint = Eigen::VectorXd::Zero(mesh.n_dofs());

  std::vector<ElementOut> outs(ne);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  detail::parallel_elems(ne, threads, [&](int e) {
    try {
      element_kernel(mesh, ctx, states_prev, u_prev, u, e, with_tangent, copts, symmetrize_c4,
                     outs[e]);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  if (with_tangent) sys.triplets.reserve(static_cast<std::size_t>(ne) * nd * nd);
  for (int e = 0; e < ne; ++e) {
    const int* cn = mesh.elem_conn(e);
    for (int a = 0; a < mesh.nen; ++a)
      for (int i = 0; i < mesh.dim; ++i) {
        const int row = cn[a] * mesh.dim + i;
        sys.fint[row] += outs[e].fe[a * mesh.dim + i];
        if (with_tangent)
          for (int b = 0; b < mesh.nen; ++b)
            for (int j = 0; j < mesh.dim; ++j)
              sys.triplets.emplace_back(row, cn[b] * mesh.dim + j,
                                        outs[e].Ke[static_cast<std::size_t>(a * mesh.dim + i) *
                                                       nd +
                                                   (b * mesh.dim + j)]);
      }
  }
  return sys;
}

// Commit the per-point states at a converged displacement, producing the
// internal force vector of the committed configuration in the same pass.
inline std::vector<QuadPointState> commit_states(const Mesh& mesh, const DesignContext& ctx,
                                                 const std::vector<QuadPointState>& states_prev,
                                                 const Eigen::VectorXd& u_prev,
                                                 const Eigen::VectorXd& u,
                                                 const ConstitutiveOptions& copts,
                                                 int threads = 1,
                                                 Eigen::VectorXd* fint_out = nullptr) {
  std::vector<QuadPointState> out(states_prev.size());
  std::vector<std::array<double, 24>> fe(fint_out ? mesh.n_elems() : 0);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  detail::parallel_elems(mesh.n_elems(), threads, [&](int e) {
    try {
      if (fint_out) fe[e].fill(0.0);
      for (int q = 0; q < mesh.nqp; ++q) {
        const Tensor3<double> gu = detail::gradient_at(mesh, u, e, q);
        const Tensor3<double> gp = detail::gradient_at(mesh, u_prev, e, q);
        const auto ev = evaluate_point_forward(ctx.mats[e], ctx.phi[e], gu, gp,
                                               states_prev[static_cast<std::size_t>(e) * mesh.nqp + q],
                                               copts);
        out[static_cast<std::size_t>(e) * mesh.nqp + q] = committed_state(ev);
        if (fint_out) {
          const auto* gn = &mesh.qgrad[static_cast<std::size_t>(q) * mesh.nen];
          for (int a = 0; a < mesh.nen; ++a)
            for (int i = 0; i < mesh.dim; ++i) {
              double s = 0.0;
              for (int j = 0; j < mesh.dim; ++j) s += ev.P_check(i, j) * gn[a][j];
              fe[e][a * mesh.dim + i] += mesh.qweight[q] * s;
            }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);
  if (fint_out) {
    *fint_out = Eigen::VectorXd::Zero(mesh.n_dofs());
    for (int e = 0; e < mesh.n_elems(); ++e) {
      const int* cn = mesh.elem_conn(e);
      for (int a = 0; a < mesh.nen; ++a)
        for (int i = 0; i < mesh.dim; ++i)
          (*fint_out)[cn[a] * mesh.dim + i] += fe[e][a * mesh.dim + i];
    }
  }
  return out;
}

}  // namespace plastopt
