#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "plastopt/adjoint.hpp"
#include "plastopt/config.hpp"
#include "plastopt/io.hpp"
#include "plastopt/optimize.hpp"
#include "plastopt/uniaxial_oracle.hpp"

namespace plastopt {

// A parsed configuration resolved against its mesh: the working set shared
// by the analyze / optimize / check-gradients commands.
struct RunBundle {
  RunConfig rc;
  Mesh mesh;
  FilterOperator filt_rho, filt_xi;
  std::vector<double> rho_raw;
  std::vector<std::vector<double>> xi_raw;
  std::vector<int> monitor_nodes;
  int monitor_axis = 0;

  int n_xi() const { return rc.n_xi(); }
};

inline RunBundle make_bundle(const RunConfig& rc, int threads = 1) {
  RunBundle b;
  b.rc = rc;
  b.rc.solver.threads = threads;
  b.mesh = rc.build_mesh();
  b.filt_rho = build_filter(b.mesh, rc.params.filter_radius_rho);
  b.filt_xi = build_filter(b.mesh, rc.params.filter_radius_xi);

  const int ne = b.mesh.n_elems();
  b.rho_raw.assign(ne, rc.initial_rho);
  b.xi_raw.assign(rc.n_xi(), std::vector<double>(ne, 0.5));
  for (int j = 0; j < rc.n_xi(); ++j)
    if (!rc.initial_xi.empty()) b.xi_raw[j].assign(ne, rc.initial_xi[j]);
  for (const auto& reg : rc.regions) {
    const auto elems = b.mesh.select_elems(reg.box);
    for (int e : elems) {
      if (reg.rho) b.rho_raw[e] = *reg.rho;
      for (std::size_t j = 0; j < reg.xi.size() && j < b.xi_raw.size(); ++j)
        b.xi_raw[j][e] = reg.xi[j];
    }
  }

  if (rc.monitor.defined) {
    const Box box = rc.monitor.use_side ? b.mesh.side_box(rc.monitor.side) : rc.monitor.box;
    b.monitor_nodes = b.mesh.select_nodes(box);
    b.monitor_axis = rc.monitor.axis;
  } else {
    // default: first Dirichlet spec with a nonzero nominal value
    for (const auto& st : rc.program.stages) {
      for (const auto& d : st.dirichlet) {
        int best_axis = -1;
        double best = 0.0;
        for (int ax = 0; ax < 3; ++ax)
          if (d.axes[ax] && std::abs(d.value[ax]) > best) {
            best = std::abs(d.value[ax]);
            best_axis = ax;
          }
        if (best_axis >= 0) {
          const Box box = d.side.empty() ? d.box : b.mesh.side_box(d.side);
          b.monitor_nodes = b.mesh.select_nodes(box);
          b.monitor_axis = best_axis;
          break;
        }
      }
      if (!b.monitor_nodes.empty()) break;
    }
  }
  return b;
}

struct AnalyzeOutput {
  DesignField field;
  StateHistory history;
  ObjectiveBreakdown objective;
  std::vector<ConstraintValue> constraints;
};

inline AnalyzeOutput run_forward(const RunBundle& b) {
  AnalyzeOutput out;
  out.field = evaluate_chain(b.mesh, b.rc.params, b.filt_rho, b.filt_xi, b.rho_raw, b.xi_raw);
  DesignContext ctx = context_from_field(b.mesh, b.rc.catalog, b.rc.params, out.field);
  out.history = run_analysis(b.mesh, b.rc.program, ctx, b.rc.solver);
  out.objective = eval_objective(b.mesh, ctx, out.history, b.rc.weights, b.rc.solver.copts);
  out.constraints = eval_constraints(out.field, b.rc.catalog, b.rc.constraints);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient verification against forward finite differences on the raw
// design variables (stratified element sampling).

struct FdSample {
  std::string function;
  int sample = 0;
  int element = 0;
  int family = 0;  // 0 = rho, 1.. = xi_j
  double analytic = 0.0;
  double fd = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  bool flagged = false;  // FD breakdown at this sample
};

struct FdReport {
  std::vector<FdSample> samples;
  double max_rel = 0.0;
  double median_rel = 0.0;
  double max_abs = 0.0;
  double median_abs = 0.0;

  void finalize() {
    std::vector<double> rels, abss;
    for (const auto& s : samples)
      if (!s.flagged) {
        rels.push_back(s.rel_err);
        abss.push_back(s.abs_err);
      }
    if (rels.empty()) return;
    std::sort(rels.begin(), rels.end());
    std::sort(abss.begin(), abss.end());
    max_rel = rels.back();
    median_rel = rels[rels.size() / 2];
    max_abs = abss.back();
    median_abs = abss[abss.size() / 2];
  }
};

namespace detail_fd {

struct FunctionGrad {
  double value = 0.0;
  std::vector<double> d_rho_raw;
  std::vector<std::vector<double>> d_xi_raw;
};

// value + chained raw gradient of one named function
inline FunctionGrad analytic_gradient(const RunBundle& b, const std::string& fn) {
  FunctionGrad out;
  DesignField field =
      evaluate_chain(b.mesh, b.rc.params, b.filt_rho, b.filt_xi, b.rho_raw, b.xi_raw);
  DesignContext ctx = context_from_field(b.mesh, b.rc.catalog, b.rc.params, field);
  ChainAdjointWorkspace ws;

  auto chain = [&](const std::vector<double>& d_rho_bar,
                   const std::vector<std::vector<double>>& d_xi_bar) {
    chain_adjoint_rho(b.rc.params, b.filt_rho, field.rho_tilde, d_rho_bar, out.d_rho_raw, ws);
    chain_adjoint_xi(b.rc.params, b.filt_xi, field, d_xi_bar, out.d_xi_raw, ws);
  };

  if (fn == "J_stiff" || fn == "J_force" || fn == "J_energy") {
    ObjectiveWeights w;
    w.w_stiff = fn == "J_stiff" ? 1.0 : 0.0;
    w.w_force = fn == "J_force" ? 1.0 : 0.0;
    w.w_energy = fn == "J_energy" ? 1.0 : 0.0;
    auto hist = run_analysis(b.mesh, b.rc.program, ctx, b.rc.solver);
    auto grad = adjoint_objective_gradient(b.mesh, ctx, hist, w, b.rc.solver.copts,
                                           &b.rc.catalog, &b.rc.params, &field,
                                           b.rc.solver.threads);
    out.value = grad.breakdown.J;
    chain(grad.d_rho_bar, grad.d_xi_bar);
    return out;
  }
  auto cons = eval_constraints(field, b.rc.catalog, b.rc.constraints);
  for (const auto& c : cons)
    if (c.name == fn) {
      out.value = c.g;
      chain(c.d_rho_bar, c.d_xi_bar);
      return out;
    }
  throw ConfigError("check-gradients: unknown function '" + fn + "'");
}

inline double value_only(const RunBundle& b, const std::string& fn,
                         const std::vector<double>& rho,
                         const std::vector<std::vector<double>>& xi) {
  DesignField field = evaluate_chain(b.mesh, b.rc.params, b.filt_rho, b.filt_xi, rho, xi);
  if (fn == "J_stiff" || fn == "J_force" || fn == "J_energy") {
    DesignContext ctx = context_from_field(b.mesh, b.rc.catalog, b.rc.params, field);
    ObjectiveWeights w;
    w.w_stiff = fn == "J_stiff" ? 1.0 : 0.0;
    w.w_force = fn == "J_force" ? 1.0 : 0.0;
    w.w_energy = fn == "J_energy" ? 1.0 : 0.0;
    auto hist = run_analysis(b.mesh, b.rc.program, ctx, b.rc.solver);
    return eval_objective(b.mesh, ctx, hist, w, b.rc.solver.copts).J;
  }
  auto cons = eval_constraints(field, b.rc.catalog, b.rc.constraints);
  for (const auto& c : cons)
    if (c.name == fn) return c.g;
  throw ConfigError("check-gradients: unknown function '" + fn + "'");
}

}  // namespace detail_fd

// Stratified sampling by analytic-gradient magnitude: elements sorted per
// stratum, one representative each, forward difference on the raw variable.
inline FdReport fd_verify(const RunBundle& b, const std::vector<std::string>& functions,
                          int samples_per_function, double eps) {
  FdReport rep;
  const int ne = b.mesh.n_elems();
  for (const auto& fn : functions) {
    const auto an = detail_fd::analytic_gradient(b, fn);
    const int n_fam = 1 + b.n_xi();
    for (int fam = 0; fam < n_fam; ++fam) {
      const std::vector<double>& g = fam == 0 ? an.d_rho_raw : an.d_xi_raw[fam - 1];
      std::vector<int> order(ne);
      for (int e = 0; e < ne; ++e) order[e] = e;
      std::sort(order.begin(), order.end(),
                [&](int a, int bb) { return std::abs(g[a]) < std::abs(g[bb]); });
      const int ns = std::max(1, samples_per_function / n_fam);
      for (int s = 0; s < ns; ++s) {
        // stratified: even quantiles of the magnitude-sorted order
        const int idx = static_cast<int>((s + 0.5) / ns * (ne - 1));
        const int e = order[idx];
        FdSample smp;
        smp.function = fn;
        smp.sample = static_cast<int>(rep.samples.size());
        smp.element = e;
        smp.family = fam;
        smp.analytic = g[e];
        auto rho = b.rho_raw;
        auto xi = b.xi_raw;
        if (fam == 0)
          rho[e] += eps;
        else
          xi[fam - 1][e] += eps;
        try {
          const double vp = detail_fd::value_only(b, fn, rho, xi);
          smp.fd = (vp - an.value) / eps;
        } catch (const std::exception&) {
          smp.flagged = true;
        }
        if (!smp.flagged) {
          smp.abs_err = std::abs(smp.analytic - smp.fd);
          const double denom = std::max(std::abs(smp.analytic), std::abs(smp.fd));
          if (denom < 1e-14)
            smp.flagged = true;  // both effectively zero: relative error undefined
          else
            smp.rel_err = smp.abs_err / denom;
        }
        rep.samples.push_back(smp);
      }
    }
  }
  rep.finalize();
  return rep;
}

inline void write_fd_csv(const std::string& path, const FdReport& rep) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "function,sample,element,family,analytic,fd,abs_err,rel_err,flagged\n";
  out << std::setprecision(15);
  for (const auto& s : rep.samples)
    out << s.function << ',' << s.sample << ',' << s.element << ',' << s.family << ','
        << s.analytic << ',' << s.fd << ',' << s.abs_err << ',' << s.rel_err << ','
        << (s.flagged ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Uniaxial verification: single-hex FEA under a cyclic stretch schedule
// against the semi-analytical solution.

struct UniaxialVerification {
  std::vector<double> schedule;
  std::vector<double> tau11_fea, tau11_ref;
  std::vector<double> lateral_fea, lateral_ref;
  std::vector<double> detbe_fea, detbe_ref;
  double err_tau11 = 0.0, err_lateral = 0.0, err_detbe = 0.0;  // absolute 2-norms
};

inline UniaxialVerification verify_uniaxial(const MaterialSpec& mat,
                                            std::vector<double> schedule, int threads = 1) {
  if (schedule.empty()) {
    for (double l = 1.0 + 0.01; l <= 1.4001; l += 0.01) schedule.push_back(l);
    for (double l = 1.39; l >= 0.7001; l -= 0.01) schedule.push_back(l);
    for (double l = 0.71; l <= 1.1001; l += 0.01) schedule.push_back(l);
  }
  UniaxialVerification v;
  v.schedule = schedule;

  auto oracle = cyclic_reference(schedule, mat);

  Mesh mesh = build_structured_mesh(3, {1, 1, 1}, {1.0, 1.0, 1.0});
  DesignContext ctx = context_single_material(mesh, mat);

  Stage st;
  DirichletSpec x0, x1, y0, z0;
  x0.side = "xmin";
  x0.axes = {true, false, false};
  st.dirichlet.push_back(x0);
  x1.side = "xmax";
  x1.axes = {true, false, false};
  x1.value = {1.0, 0.0, 0.0};  // multiplier = applied displacement
  st.dirichlet.push_back(x1);
  y0.side = "ymin";
  y0.axes = {false, true, false};
  st.dirichlet.push_back(y0);
  z0.side = "zmin";
  z0.axes = {false, false, true};
  st.dirichlet.push_back(z0);
  for (double l : schedule) st.steps.push_back(l - 1.0);
  LoadProgram prog;
  prog.stages.push_back(st);

  SolverSettings cfg;
  cfg.eps_abs = 1e-13;
  cfg.eps_rel = 1e-13;
  cfg.max_newton = 60;
  cfg.threads = threads;
  cfg.copts.consistency_tol = 1e-14;
  StateHistory hist = run_analysis(mesh, prog, ctx, cfg);

  // collect the prescribed steps in schedule order
  const auto corner = mesh.select_nodes(Box{{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}});
  const EffMaterial<double> em = EffMaterial<double>::from_spec(mat);
  std::size_t k = 0;
  for (int s = 1; s < hist.n_steps() && k < schedule.size(); ++s) {
    const auto& rec = hist.steps[s];
    if (!rec.prescribed) continue;
    const auto& prev = hist.steps[s - 1];
    const Tensor3<double> gu = detail::gradient_at(mesh, rec.u, 0, 0);
    const Tensor3<double> gp = detail::gradient_at(mesh, prev.u, 0, 0);
    const QuadPointState& qs = prev.qstates[0];
    const double gamma = rec.qstates[0].gamma_hat;
    const auto ev = evaluate_point_given<double>(em, 1.0, gu, gp, qs.be_bar, qs.beta_bar,
                                                 qs.alpha, gamma, gamma > 0.0);
    v.tau11_fea.push_back(ev.tau(0, 0));
    v.lateral_fea.push_back(1.0 + rec.u[corner.front() * 3 + 1]);
    v.detbe_fea.push_back(det(rec.qstates[0].be_bar));
    v.tau11_ref.push_back(oracle[k].tau11);
    v.lateral_ref.push_back(oracle[k].lambda_l);
    v.detbe_ref.push_back(1.0);
    ++k;
  }
  if (k != schedule.size())
    throw SolverError("verify_uniaxial: solver did not commit every prescribed step");

  auto norm2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  v.err_tau11 = norm2(v.tau11_fea, v.tau11_ref);
  v.err_lateral = norm2(v.lateral_fea, v.lateral_ref);
  v.err_detbe = norm2(v.detbe_fea, v.detbe_ref);
  return v;
}

inline void write_uniaxial_csv(const std::string& path, const UniaxialVerification& v) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "step,lambda,tau11_fea,tau11_ref,lateral_fea,lateral_ref,detbe_fea,detbe_ref\n";
  out << std::setprecision(15);
  for (std::size_t i = 0; i < v.schedule.size(); ++i)
    out << i << ',' << v.schedule[i] << ',' << v.tau11_fea[i] << ',' << v.tau11_ref[i] << ','
        << v.lateral_fea[i] << ',' << v.lateral_ref[i] << ',' << v.detbe_fea[i] << ','
        << v.detbe_ref[i] << '\n';
}

}  // namespace plastopt
