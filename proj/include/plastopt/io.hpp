#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "plastopt/design.hpp"
#include "plastopt/objectives.hpp"
#include "plastopt/optimize.hpp"
#include "plastopt/solver.hpp"

namespace plastopt {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
}

// Per-step solver log: fixed schema
// step,time,u_applied,F_reaction,newton_iters,line_searches,residual
inline void write_history_csv(const std::string& path, const StateHistory& hist,
                              const Mesh& mesh, const std::vector<int>& monitor_nodes,
                              int monitor_axis) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "step,time,u_applied,F_reaction,newton_iters,line_searches,residual\n";
  std::vector<double> F;
  if (!monitor_nodes.empty()) F = reaction_series(hist, mesh, monitor_nodes, monitor_axis);
  out << std::setprecision(15);
  for (int s = 0; s < hist.n_steps(); ++s) {
    const auto& rec = hist.steps[s];
    double ua = 0.0;
    if (!monitor_nodes.empty())
      ua = rec.u[monitor_nodes.front() * mesh.dim + monitor_axis];
    out << s << ',' << rec.time << ',' << ua << ',' << (F.empty() ? 0.0 : F[s]) << ','
        << rec.diag.newton_iters << ',' << rec.diag.line_searches << ','
        << rec.diag.resid_final << '\n';
  }
}

// Legacy ASCII VTK unstructured grid with nodal displacements and element
// fields (physical design variables, equivalent plastic strain, elastic
// strain energy density).
inline void write_vtk(const std::string& path, const Mesh& mesh, const Eigen::VectorXd& u,
                      const std::vector<QuadPointState>& qstates, const DesignContext& ctx,
                      const DesignField* field = nullptr) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "# vtk DataFile Version 3.0\n";
  out << "plastopt output\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << std::setprecision(12);
  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (int n = 0; n < mesh.n_nodes(); ++n)
    out << mesh.nodes[n][0] << ' ' << mesh.nodes[n][1] << ' ' << mesh.nodes[n][2] << '\n';
  out << "CELLS " << mesh.n_elems() << ' ' << mesh.n_elems() * (mesh.nen + 1) << '\n';
  for (int e = 0; e < mesh.n_elems(); ++e) {
    out << mesh.nen;
    const int* cn = mesh.elem_conn(e);
    for (int a = 0; a < mesh.nen; ++a) out << ' ' << cn[a];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.n_elems() << '\n';
  const int vtk_type = mesh.dim == 2 ? 9 : 12;  // quad / hexahedron
  for (int e = 0; e < mesh.n_elems(); ++e) out << vtk_type << '\n';

  out << "POINT_DATA " << mesh.n_nodes() << '\n';
  out << "VECTORS displacement double\n";
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    for (int d = 0; d < 3; ++d)
      out << (d < mesh.dim ? u[n * mesh.dim + d] : 0.0) << (d == 2 ? '\n' : ' ');
  }

  out << "CELL_DATA " << mesh.n_elems() << '\n';
  auto scalar_field = [&](const std::string& name, auto&& f) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < mesh.n_elems(); ++e) out << f(e) << '\n';
  };
  if (field) {
    scalar_field("rho_phys", [&](int e) { return field->rho_bar[e]; });
    for (int n = 0; n < field->n_mat(); ++n)
      scalar_field("xi_phys_" + std::to_string(n + 1),
                   [&](int e) { return field->xi_bar[n][e]; });
  }
  scalar_field("alpha", [&](int e) {
    double a = 0.0;
    for (int q = 0; q < mesh.nqp; ++q)
      a += qstates[static_cast<std::size_t>(e) * mesh.nqp + q].alpha / mesh.nqp;
    return a;
  });
  scalar_field("strain_energy_density", [&](int e) {
    // elastic part of the stored energy at the current state
    double w = 0.0;
    for (int q = 0; q < mesh.nqp; ++q) {
      const auto& qs = qstates[static_cast<std::size_t>(e) * mesh.nqp + q];
      const Tensor3<double> gu = detail::gradient_at(mesh, u, e, q);
      const Tensor3<double> F = deformation_gradient(gu, ctx.phi[e]);
      const double J = det(F);
      if (J <= 0.0) continue;
      const double U = 0.5 * ctx.mats[e].kappa * (0.5 * (J * J - 1.0) - std::log(J));
      const double Wd = 0.5 * ctx.mats[e].mu * (trace(qs.be_bar) - 3.0);
      w += (U + Wd) / mesh.nqp;
    }
    return w;
  });
}

inline void write_iterations_csv(const std::string& path,
                                 const std::vector<IterationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "iteration,J,J_stiff,J_force,J_energy";
  if (!rows.empty())
    for (const auto& n : rows.front().g_names) out << ',' << n;
  out << ",design_change,beta,p_xi,kkt\n";
  out << std::setprecision(15);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.objective.J << ',' << r.objective.J_stiff << ','
        << r.objective.J_force << ',' << r.objective.J_energy;
    for (double g : r.g) out << ',' << g;
    out << ',' << r.change << ',' << r.beta << ',' << r.p_xi << ',' << r.kkt << '\n';
  }
}

}  // namespace plastopt
