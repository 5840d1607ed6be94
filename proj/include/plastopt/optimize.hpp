#pragma once

#include <functional>
#include <vector>

#include "plastopt/adjoint.hpp"
#include "plastopt/mma.hpp"
#include "plastopt/objectives.hpp"

namespace plastopt {

// Piecewise-constant continuation parameter: held at `start` before
// iteration `from`, then grown (multiplicatively or additively) every
// `every` iterations up to `cap`.
struct ContinuationSchedule {
  double start = 1.0;
  double factor = 2.0;
  double increment = 0.0;  // used instead of factor when nonzero
  int every = 40;
  int from = 41;
  double cap = 512.0;

  double value_at(int iter) const {
    if (iter < from || every <= 0) return std::min(start, cap);
    const int k = (iter - from) / every + 1;
    double v = start;
    for (int i = 0; i < k; ++i) v = increment != 0.0 ? v + increment : v * factor;
    return std::min(v, cap);
  }
};

struct OptimizeSettings {
  int max_iter = 300;
  double tol_change = 1e-3;
  MmaOptions mma;
  ContinuationSchedule beta_sched{1.0, 2.0, 0.0, 40, 41, 512.0};
  ContinuationSchedule pxi_sched{1.0, 1.0, 0.25, 40, 41, 3.0};
};

struct IterationRow {
  int iteration = 0;
  ObjectiveBreakdown objective;
  std::vector<double> g;
  std::vector<std::string> g_names;
  double change = 0.0;
  double beta = 1.0;
  double p_xi = 1.0;
  double kkt = 0.0;
};

struct OptimizeProblem {
  const Mesh* mesh = nullptr;
  MaterialCatalog catalog;
  DesignParams params;  // beta/p_xi fields overridden by the schedules
  LoadProgram program;
  SolverSettings solver;
  ObjectiveWeights weights;
  ConstraintSet constraints;
};

struct OptimizeResult {
  std::vector<double> rho_raw;
  std::vector<std::vector<double>> xi_raw;
  DesignField field;             // at the final design and final continuation
  ObjectiveBreakdown objective;  // of the final design
  std::vector<IterationRow> log;
  bool stopped_by_change = false;
};

// Gradient-based design loop: forward run, objective/constraints, reversed
// adjoint, chain to the raw variables, MMA update, continuation bump.
inline OptimizeResult optimize_loop(
    const OptimizeProblem& prob, std::vector<double> rho_raw,
    std::vector<std::vector<double>> xi_raw, const OptimizeSettings& settings,
    const std::function<void(const IterationRow&)>& on_iteration = {}) {
  const Mesh& mesh = *prob.mesh;
  const int ne = mesh.n_elems();
  const int nxi = static_cast<int>(xi_raw.size());
  const int nvar = ne * (1 + nxi);

  const FilterOperator filt_rho = build_filter(mesh, prob.params.filter_radius_rho);
  const FilterOperator filt_xi = build_filter(mesh, prob.params.filter_radius_xi);

  Eigen::VectorXd x(nvar);
  for (int e = 0; e < ne; ++e) x[e] = rho_raw[e];
  for (int j = 0; j < nxi; ++j)
    for (int e = 0; e < ne; ++e) x[(1 + j) * ne + e] = xi_raw[j][e];

  MmaState mma;
  mma.init(nvar, 0, x, Eigen::VectorXd::Zero(nvar), Eigen::VectorXd::Ones(nvar), settings.mma);

  OptimizeResult result;
  double obj_scale = 1.0;
  bool have_scale = false;

  struct Grads {
    Eigen::VectorXd df0;
    Eigen::VectorXd g;
    Eigen::MatrixXd dg;
  };
  Grads last_grads;
  MmaState mma_backup = mma;
  bool retried = false;

  auto unpack = [&](const Eigen::VectorXd& xv) {
    for (int e = 0; e < ne; ++e) rho_raw[e] = xv[e];
    for (int j = 0; j < nxi; ++j)
      for (int e = 0; e < ne; ++e) xi_raw[j][e] = xv[(1 + j) * ne + e];
  };

  DesignParams params = prob.params;
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    params.beta_rho = settings.beta_sched.value_at(iter);
    params.beta_xi = params.beta_rho;
    params.p_xi = settings.pxi_sched.value_at(iter);

    unpack(x);
    DesignField field = evaluate_chain(mesh, params, filt_rho, filt_xi, rho_raw, xi_raw);
    DesignContext ctx = context_from_field(mesh, prob.catalog, params, field);

    StateHistory hist;
    try {
      hist = run_analysis(mesh, prob.program, ctx, prob.solver);
    } catch (const SolverError&) {
      if (retried || result.log.empty()) throw;
      // retry once from the previous design with a halved move limit
      retried = true;
      mma = mma_backup;
      mma.opt.move *= 0.5;
      x = mma_update(mma, last_grads.df0, last_grads.g, last_grads.dg);
      --iter;
      continue;
    }

    auto grad = adjoint_objective_gradient(mesh, ctx, hist, prob.weights, prob.solver.copts,
                                           &prob.catalog, &params, &field,
                                           prob.solver.threads);
    if (!have_scale) {
      obj_scale = std::max(std::abs(grad.breakdown.J), 1e-12);
      have_scale = true;
    }

    // chain the objective gradient to the raw variables (maximize J)
    ChainAdjointWorkspace ws;
    std::vector<double> d_rho_raw;
    std::vector<std::vector<double>> d_xi_raw;
    chain_adjoint_rho(params, filt_rho, field.rho_tilde, grad.d_rho_bar, d_rho_raw, ws);
    chain_adjoint_xi(params, filt_xi, field, grad.d_xi_bar, d_xi_raw, ws);

    Eigen::VectorXd df0(nvar);
    for (int e = 0; e < ne; ++e) df0[e] = -d_rho_raw[e] / obj_scale;
    for (int j = 0; j < nxi; ++j)
      for (int e = 0; e < ne; ++e) df0[(1 + j) * ne + e] = -d_xi_raw[j][e] / obj_scale;

    auto cons = eval_constraints(field, prob.catalog, prob.constraints);
    const int m = static_cast<int>(cons.size());
    if (mma.m != m) {
      MmaState fresh;
      fresh.init(nvar, m, mma.xval, mma.xmin, mma.xmax, mma.opt);
      fresh.iter = mma.iter;
      fresh.xold1 = mma.xold1;
      fresh.xold2 = mma.xold2;
      fresh.low = mma.low;
      fresh.upp = mma.upp;
      mma = fresh;
    }
    Eigen::VectorXd g(m);
    Eigen::MatrixXd dg(m, nvar);
    for (int i = 0; i < m; ++i) {
      g[i] = cons[i].g / cons[i].scale;
      std::vector<double> dr;
      std::vector<std::vector<double>> dx;
      chain_adjoint_rho(params, filt_rho, field.rho_tilde, cons[i].d_rho_bar, dr, ws);
      chain_adjoint_xi(params, filt_xi, field, cons[i].d_xi_bar, dx, ws);
      for (int e = 0; e < ne; ++e) dg(i, e) = dr[e] / cons[i].scale;
      for (int j = 0; j < nxi; ++j)
        for (int e = 0; e < ne; ++e) dg(i, (1 + j) * ne + e) = dx[j][e] / cons[i].scale;
    }

    mma_backup = mma;
    last_grads = {df0, g, dg};
    const Eigen::VectorXd x_new = mma_update(mma, df0, g, dg);
    const double change = (x_new - x).cwiseAbs().maxCoeff();
    x = x_new;
    retried = false;

    IterationRow row;
    row.iteration = iter;
    row.objective = grad.breakdown;
    for (const auto& cv : cons) {
      row.g.push_back(cv.g);
      row.g_names.push_back(cv.name);
    }
    row.change = change;
    row.beta = params.beta_rho;
    row.p_xi = params.p_xi;
    row.kkt = mma.subproblem_kkt;
    result.log.push_back(row);
    if (on_iteration) on_iteration(row);

    if (change <= settings.tol_change) {
      result.stopped_by_change = true;
      break;
    }
  }

  // evaluate the final design at the final continuation state
  unpack(x);
  result.rho_raw = rho_raw;
  result.xi_raw = xi_raw;
  result.field = evaluate_chain(mesh, params, filt_rho, filt_xi, rho_raw, xi_raw);
  DesignContext ctx = context_from_field(mesh, prob.catalog, params, result.field);
  auto hist = run_analysis(mesh, prob.program, ctx, prob.solver);
  result.objective = eval_objective(mesh, ctx, hist, prob.weights, prob.solver.copts);
  return result;
}

}  // namespace plastopt
