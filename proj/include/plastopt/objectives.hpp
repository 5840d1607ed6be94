#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "plastopt/assembly.hpp"
#include "plastopt/solver.hpp"

namespace plastopt {

struct ObjectiveWeights {
  double w_stiff = 0.0;
  double w_force = 0.0;
  double w_energy = 1.0;

  void validate() const {
    for (double w : {w_stiff, w_force, w_energy})
      if (w < 0.0 || w > 1.0) throw ConfigError("objective weights must lie in [0,1]");
    if (std::abs(w_stiff + w_force + w_energy - 1.0) > 1e-12)
      throw ConfigError("objective weights must sum to 1");
  }
};

struct ObjectiveBreakdown {
  double J = 0.0;
  double J_stiff = 0.0;
  double J_force = 0.0;
  double J_energy = 0.0;
};

namespace detail {
// Interpolated first Piola-Kirchhoff stress of one committed step, from the
// stored consistency increment (frozen branch).
inline Tensor3<double> stored_P_check(const Mesh& mesh, const DesignContext& ctx,
                                      const StateHistory& hist, int step, int e, int q,
                                      const ConstitutiveOptions& copts) {
  const auto& rec = hist.steps[step];
  const auto& prev = hist.steps[step - 1];
  const Tensor3<double> gu = gradient_at(mesh, rec.u, e, q);
  const Tensor3<double> gp = gradient_at(mesh, prev.u, e, q);
  const QuadPointState& qs = prev.qstates[static_cast<std::size_t>(e) * mesh.nqp + q];
  const double gamma = rec.qstates[static_cast<std::size_t>(e) * mesh.nqp + q].gamma_hat;
  const auto ev = evaluate_point_given<double>(ctx.mats[e], ctx.phi[e], gu, gp, qs.be_bar,
                                               qs.beta_bar, qs.alpha, gamma, gamma > 0.0,
                                               copts.scheme);
  return ev.P_check;
}
}  // namespace detail

// J = w_stiff J_stiff + w_force J_force + w_energy J_energy with the three
// energy-type terms built from the interpolated stress:
//   J_stiff  = 1/2 int P1 : grad u1
//   J_force  = int PN : grad uN
//   J_energy = 1/2 sum_n int (Pn + P_{n-1}) : (grad u_n - grad u_{n-1})
inline ObjectiveBreakdown eval_objective(const Mesh& mesh, const DesignContext& ctx,
                                         const StateHistory& hist,
                                         const ObjectiveWeights& w,
                                         const ConstitutiveOptions& copts = {}) {
  if (hist.n_steps() < 2) throw ConfigError("eval_objective: empty history");
  const int N = hist.n_steps() - 1;
  ObjectiveBreakdown out;

  std::vector<Tensor3<double>> P_prev(mesh.n_qp_total());  // P_check at step n-1 (0 at start)
  for (int n = 1; n <= N; ++n) {
    double stiff_n = 0.0, force_n = 0.0, energy_n = 0.0;
    for (int e = 0; e < mesh.n_elems(); ++e)
      for (int q = 0; q < mesh.nqp; ++q) {
        const std::size_t p = static_cast<std::size_t>(e) * mesh.nqp + q;
        const Tensor3<double> P = detail::stored_P_check(mesh, ctx, hist, n, e, q, copts);
        const Tensor3<double> gu = detail::gradient_at(mesh, hist.steps[n].u, e, q);
        const Tensor3<double> gp = detail::gradient_at(mesh, hist.steps[n - 1].u, e, q);
        const double wq = mesh.qweight[q];
        if (n == 1) stiff_n += 0.5 * wq * ddot(P, gu);
        if (n == N) force_n += wq * ddot(P, gu);
        energy_n += 0.5 * wq * ddot(P + P_prev[p], gu - gp);
        P_prev[p] = P;
      }
    out.J_stiff += stiff_n;
    out.J_force += force_n;
    out.J_energy += energy_n;
  }
  out.J = w.w_stiff * out.J_stiff + w.w_force * out.J_force + w.w_energy * out.J_energy;
  return out;
}

// Optional bounds of the optimization formulation. Volume constraints are
// means of the physical fields; the practical constraints weight the
// material fractions by per-material price, mass density, or CO2 footprint.
struct ConstraintSet {
  std::optional<double> vol_total;
  std::vector<double> vol_material;  // empty or one bound per material
  std::optional<double> price;
  std::optional<double> mass;
  std::optional<double> co2;
};

struct ConstraintValue {
  std::string name;
  double g = 0.0;      // feasible when g <= 0
  double scale = 1.0;  // magnitude used to normalize the optimizer's view
  // closed-form gradients with respect to the physical fields
  std::vector<double> d_rho_bar;
  std::vector<std::vector<double>> d_xi_bar;
};

inline std::vector<ConstraintValue> eval_constraints(const DesignField& field,
                                                     const MaterialCatalog& catalog,
                                                     const ConstraintSet& set) {
  std::vector<ConstraintValue> out;
  const int ne = field.n_elems;
  const int nm = field.n_mat();
  const double inv = 1.0 / ne;

  auto blank = [&](const std::string& name) {
    ConstraintValue c;
    c.name = name;
    c.d_rho_bar.assign(ne, 0.0);
    c.d_xi_bar.assign(nm, std::vector<double>(ne, 0.0));
    return c;
  };

  if (set.vol_total) {
    auto c = blank("g_V0");
    for (int e = 0; e < ne; ++e) {
      c.g += field.rho_bar[e] * inv;
      c.d_rho_bar[e] = inv;
    }
    c.g -= *set.vol_total;
    out.push_back(std::move(c));
  }
  if (!set.vol_material.empty()) {
    if (static_cast<int>(set.vol_material.size()) != nm)
      throw ConfigError("per-material volume bounds must match the material count");
    for (int n = 0; n < nm; ++n) {
      auto c = blank("g_V" + std::to_string(n + 1));
      for (int e = 0; e < ne; ++e) {
        c.g += field.rho_bar[e] * field.xi_bar[n][e] * inv;
        c.d_rho_bar[e] = field.xi_bar[n][e] * inv;
        c.d_xi_bar[n][e] = field.rho_bar[e] * inv;
      }
      c.g -= set.vol_material[n];
      out.push_back(std::move(c));
    }
  }
  auto practical = [&](const char* name, auto prop, double bound) {
    auto c = blank(name);
    c.scale = std::max(1.0, std::abs(bound));
    for (int e = 0; e < ne; ++e) {
      double mix = 0.0;
      for (int n = 0; n < nm; ++n) {
        mix += field.xi_bar[n][e] * prop(catalog[n]);
        c.d_xi_bar[n][e] = field.rho_bar[e] * prop(catalog[n]) * inv;
      }
      c.g += field.rho_bar[e] * mix * inv;
      c.d_rho_bar[e] = mix * inv;
    }
    c.g -= bound;
    out.push_back(std::move(c));
  };
  if (set.price) practical("g_P", [](const MaterialSpec& m) { return m.price; }, *set.price);
  if (set.mass)
    practical("g_M", [](const MaterialSpec& m) { return m.mass_density; }, *set.mass);
  if (set.co2) practical("g_C", [](const MaterialSpec& m) { return m.co2; }, *set.co2);
  return out;
}

}  // namespace plastopt
