#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "plastopt/assembly.hpp"
#include "plastopt/mesh.hpp"

namespace plastopt {

struct SolverSettings {
  int max_newton = 30;
  double eps_abs = 1e-9;
  double eps_rel = 1e-8;
  int max_search = 10;
  double eps_search = 1.0;  // accept once the residual drops below eps_search * previous
  int max_try = 8;
  int threads = 1;
  bool symmetrize_c4 = false;  // exact consistent tangent by default
  ConstitutiveOptions copts;
};

struct StepDiag {
  int newton_iters = 0;
  int line_searches = 0;  // halvings summed over the step
  double resid_initial = 0.0;
  double resid_final = 0.0;
  std::vector<double> resid_trail;  // accepted residual after each iteration
  bool line_search_engaged = false;
};

// One committed load step: displacements, quadrature history, reaction data
// and iteration diagnostics.
struct StepRecord {
  int stage = 0;
  double time = 0.0;        // monotone pseudo-time across stages
  double multiplier = 0.0;  // stage-local boundary value scale
  bool prescribed = true;   // false for adaptive substeps
  Eigen::VectorXd u;
  std::vector<QuadPointState> qstates;
  Eigen::VectorXd fint;
  Eigen::VectorXd fext;
  StepDiag diag;
};

struct StateHistory {
  std::vector<StepRecord> steps;  // steps[0] is the initial (or inherited) state
  std::vector<ResolvedStage> resolved_stages;

  int n_steps() const { return static_cast<int>(steps.size()); }
  const ResolvedStage& stage_of(int step) const { return resolved_stages[steps[step].stage]; }
};

namespace detail {
inline double free_norm(const Eigen::VectorXd& r, const std::vector<char>& is_fixed) {
  double s = 0.0;
  for (int i = 0; i < r.size(); ++i)
    if (!is_fixed[i]) s += r[i] * r[i];
  return std::sqrt(s);
}
}  // namespace detail

// Direct solver for the constrained linear system K du = -r with du
// prescribed on the fixed dofs. Rows/columns of fixed dofs are eliminated;
// their coupling moves to the right-hand side. The sparsity pattern is
// identical across Newton iterations and load steps of one stage, so the
// symbolic analysis is reused once the structure is known.
class ConstrainedSolver {
 public:
  void bind(const std::vector<char>& is_fixed) {
    if (is_fixed == fixed_) return;
    fixed_ = is_fixed;
    const int nd = static_cast<int>(is_fixed.size());
    free_index_.assign(nd, -1);
    nf_ = 0;
    for (int i = 0; i < nd; ++i)
      if (!is_fixed[i]) free_index_[i] = nf_++;
    analyzed_ = false;
  }

  Eigen::VectorXd solve(const std::vector<Eigen::Triplet<double>>& trips,
                        const Eigen::VectorXd& rhs, const Eigen::VectorXd& du_fixed) {
    const int nd = static_cast<int>(fixed_.size());
    if (nf_ == 0) return du_fixed;

    Eigen::VectorXd b(nf_);
    for (int i = 0; i < nd; ++i)
      if (free_index_[i] >= 0) b[free_index_[i]] = rhs[i];

    if (!analyzed_) {
      std::vector<Eigen::Triplet<double>> red;
      red.reserve(trips.size());
      for (const auto& t : trips) {
        const int r = free_index_[t.row()];
        if (r < 0) continue;
        const int c = free_index_[t.col()];
        if (c >= 0) red.emplace_back(r, c, t.value());
      }
      K_.resize(nf_, nf_);
      K_.setFromTriplets(red.begin(), red.end());
      K_.makeCompressed();
      lu_.analyzePattern(K_);
      analyzed_ = true;
    } else {
      double* v = K_.valuePtr();
      std::fill(v, v + K_.nonZeros(), 0.0);
      for (const auto& t : trips) {
        const int r = free_index_[t.row()];
        if (r < 0) continue;
        const int c = free_index_[t.col()];
        if (c >= 0) K_.coeffRef(r, c) += t.value();
      }
    }
    for (const auto& t : trips) {
      const int r = free_index_[t.row()];
      if (r >= 0 && free_index_[t.col()] < 0) b[r] -= t.value() * du_fixed[t.col()];
    }

    lu_.factorize(K_);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse LU factorization failed (singular tangent?)");
    const Eigen::VectorXd xf = lu_.solve(b);

    Eigen::VectorXd du = du_fixed;
    for (int i = 0; i < nd; ++i)
      if (free_index_[i] >= 0) du[i] = xf[free_index_[i]];
    return du;
  }

 private:
  std::vector<char> fixed_;
  std::vector<int> free_index_;
  int nf_ = 0;
  bool analyzed_ = false;
  Eigen::SparseMatrix<double> K_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline Eigen::VectorXd solve_constrained(const Mesh& mesh,
                                         const std::vector<Eigen::Triplet<double>>& trips,
                                         const Eigen::VectorXd& rhs,
                                         const std::vector<char>& is_fixed,
                                         const Eigen::VectorXd& du_fixed) {
  (void)mesh;
  ConstrainedSolver s;
  s.bind(is_fixed);
  return s.solve(trips, rhs, du_fixed);
}

struct NewtonOutcome {
  bool converged = false;
  StepDiag diag;
};

// Newton iteration with the adaptive line search. The incremental Dirichlet
// values enter through du, so a shortened line search also scales the
// applied boundary increment of that iteration.
inline NewtonOutcome newton_solve_step(const Mesh& mesh, const DesignContext& ctx,
                                       const ResolvedStage& stage,
                                       const Eigen::VectorXd& fixed_targets,
                                       const Eigen::VectorXd& fext,
                                       const std::vector<QuadPointState>& states_prev,
                                       const Eigen::VectorXd& u_prev, Eigen::VectorXd& u,
                                       const SolverSettings& cfg,
                                       ConstrainedSolver* solver_cache = nullptr) {
  NewtonOutcome out;
  u = u_prev;
  ConstrainedSolver local_solver;
  ConstrainedSolver& solver = solver_cache ? *solver_cache : local_solver;
  solver.bind(stage.is_fixed);

  auto residual_vec = [&](const Eigen::VectorXd& uu) {
    return assemble_system(mesh, ctx, states_prev, u_prev, uu, false, cfg.copts, false,
                           cfg.threads)
               .fint -
           fext;
  };

  double dirichlet_gap = 0.0;
  for (std::size_t k = 0; k < stage.fixed_dofs.size(); ++k)
    dirichlet_gap = std::max(dirichlet_gap,
                             std::abs(fixed_targets[k] - u[stage.fixed_dofs[k]]));

  double a = detail::free_norm(residual_vec(u), stage.is_fixed);
  out.diag.resid_initial = a;
  if (a <= cfg.eps_abs && dirichlet_gap == 0.0) {
    out.converged = true;
    out.diag.resid_final = a;
    return out;
  }

  double a1 = 0.0;
  AssembledSystem sys;
  bool have_sys = false;
  for (int k = 0; k < cfg.max_newton; ++k) {
    if (!have_sys)
      sys = assemble_system(mesh, ctx, states_prev, u_prev, u, true, cfg.copts,
                            cfg.symmetrize_c4, cfg.threads);
    have_sys = false;
    const Eigen::VectorXd r = sys.fint - fext;

    Eigen::VectorXd du_fixed = Eigen::VectorXd::Zero(mesh.n_dofs());
    for (std::size_t p = 0; p < stage.fixed_dofs.size(); ++p)
      du_fixed[stage.fixed_dofs[p]] = fixed_targets[p] - u[stage.fixed_dofs[p]];
    const Eigen::VectorXd du = solver.solve(sys.triplets, -r, du_fixed);

    // adaptive line search: halve until the residual drops below eps_search
    // times the previous value. The full step assembles the tangent as well
    // so an accepted full step seeds the next iteration for free. At the
    // first iteration of a step with a Dirichlet increment, the reference
    // residual is the stale value of the previously converged state and
    // carries no information about the new boundary values, so the first
    // admissible trial is taken directly; the adaptive loading scheme
    // guards such steps instead.
    double l = 1.0;
    double best_a = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    const bool reference_meaningful =
        a > cfg.eps_abs && (k > 0 || dirichlet_gap == 0.0);
    for (int s = 1; s <= cfg.max_search; ++s) {
      const Eigen::VectorXd u_try = u + l * du;
      double a_try = std::numeric_limits<double>::infinity();
      try {
        if (s == 1) {
          AssembledSystem trial_sys = assemble_system(mesh, ctx, states_prev, u_prev, u_try,
                                                      true, cfg.copts, cfg.symmetrize_c4,
                                                      cfg.threads);
          a_try = detail::free_norm(trial_sys.fint - fext, stage.is_fixed);
          sys = std::move(trial_sys);
        } else {
          a_try = detail::free_norm(residual_vec(u_try), stage.is_fixed);
        }
      } catch (const NumericsError&) {
        a_try = std::numeric_limits<double>::infinity();  // inadmissible state, shrink
      }
      if (a_try < best_a) {
        best_a = a_try;
        best_u = u_try;
        have_sys = (s == 1);
      }
      if (!reference_meaningful && std::isfinite(a_try)) break;
      if (a_try < cfg.eps_search * a) break;
      l *= 0.5;
      ++out.diag.line_searches;
      out.diag.line_search_engaged = true;
    }
    if (!std::isfinite(best_a)) { out.converged = false; out.diag.resid_final = a; return out; }
    u = best_u;
    a = best_a;
    ++out.diag.newton_iters;
    out.diag.resid_trail.push_back(a);
    if (out.diag.newton_iters == 1) a1 = std::max(a, 1e-300);

    if (a <= cfg.eps_abs || a / a1 <= cfg.eps_rel) {
      out.converged = true;
      break;
    }
  }
  out.diag.resid_final = a;
  return out;
}

// Adaptive loading driver over a multi-stage program. State (displacement
// and quadrature history) carries across stages; Dirichlet values of each
// stage are offsets from the displacement inherited at stage entry.
inline StateHistory run_analysis(const Mesh& mesh, const LoadProgram& program,
                                 const DesignContext& ctx, const SolverSettings& cfg) {
  program.validate();
  StateHistory hist;
  for (const auto& st : program.stages) hist.resolved_stages.push_back(resolve_stage(mesh, st));

  const int npt = mesh.n_qp_total();
  StepRecord rec0;
  rec0.stage = 0;
  rec0.u = Eigen::VectorXd::Zero(mesh.n_dofs());
  rec0.qstates.assign(npt, QuadPointState{});
  rec0.fint = Eigen::VectorXd::Zero(mesh.n_dofs());
  rec0.fext = Eigen::VectorXd::Zero(mesh.n_dofs());
  hist.steps.push_back(std::move(rec0));

  double time = 0.0;
  for (std::size_t si = 0; si < program.stages.size(); ++si) {
    const Stage& stage = program.stages[si];
    const ResolvedStage& rs = hist.resolved_stages[si];
    const int nfix = static_cast<int>(rs.fixed_dofs.size());

    Eigen::VectorXd base_fixed(nfix);
    for (int p = 0; p < nfix; ++p) base_fixed[p] = hist.steps.back().u[rs.fixed_dofs[p]];

    Eigen::VectorXd fext_nominal(mesh.n_dofs());
    for (int i = 0; i < mesh.n_dofs(); ++i) fext_nominal[i] = rs.fext_nominal[i];
    // body force lumping (exact for constant force on affine elements)
    if (rs.body_force[0] != 0.0 || rs.body_force[1] != 0.0 || rs.body_force[2] != 0.0) {
      for (int e = 0; e < mesh.n_elems(); ++e) {
        const int* cn = mesh.elem_conn(e);
        for (int a = 0; a < mesh.nen; ++a)
          for (int i = 0; i < mesh.dim; ++i)
            fext_nominal[cn[a] * mesh.dim + i] +=
                rs.body_force[i] * mesh.elem_volume / mesh.nen;
      }
    }

    ConstrainedSolver stage_solver;
    double mult_conv = 0.0;
    const double stage_span = static_cast<double>(stage.steps.size());
    for (std::size_t m = 0; m < stage.steps.size(); ++m) {
      const double target = stage.steps[m];
      const double prev_target = m == 0 ? 0.0 : stage.steps[m - 1];
      double mult_now = target;
      int tries = 0;
      while (true) {
        Eigen::VectorXd fixed_targets(nfix);
        for (int p = 0; p < nfix; ++p)
          fixed_targets[p] = base_fixed[p] + mult_now * rs.fixed_values[p];
        const Eigen::VectorXd fext = mult_now * fext_nominal;

        const StepRecord& last = hist.steps.back();
        Eigen::VectorXd u;
        NewtonOutcome res;
        bool failed_hard = false;
        std::string failure_reason = "newton iteration budget exhausted";
        try {
          res = newton_solve_step(mesh, ctx, rs, fixed_targets, fext, last.qstates, last.u, u,
                                  cfg, &stage_solver);
        } catch (const SolverError& e) {
          failed_hard = true;
          failure_reason = e.what();
        } catch (const NumericsError& e) {
          failed_hard = true;
          failure_reason = e.what();
        }
        if (!failed_hard && res.converged) {
          StepRecord rec;
          rec.stage = static_cast<int>(si);
          rec.multiplier = mult_now;
          rec.prescribed = (mult_now == target);
          const double denom = (target == prev_target) ? 1.0 : (target - prev_target);
          const double frac = (target == prev_target) ? 1.0
                                                      : (mult_now - prev_target) / denom;
          rec.time = static_cast<double>(si) + (static_cast<double>(m) + frac) / stage_span;
          rec.qstates = commit_states(mesh, ctx, last.qstates, last.u, u, cfg.copts,
                                      cfg.threads, &rec.fint);
          rec.fext = fext;
          rec.u = std::move(u);
          rec.diag = res.diag;
          time = rec.time;
          hist.steps.push_back(std::move(rec));
          mult_conv = mult_now;
          if (mult_now == target) break;
          mult_now = target;
          tries = 0;
        } else {
          ++tries;
          if (tries > cfg.max_try)
            throw SolverError("adaptive loading exhausted at stage " + std::to_string(si) +
                              ", last converged multiplier " + std::to_string(mult_conv) +
                              " (" + failure_reason + ")");
          mult_now = 0.5 * (mult_conv + mult_now);
        }
      }
    }
    (void)time;
  }
  return hist;
}

// Reaction force series along one axis, summed over a node set that must be
// constrained in that axis at every step.
inline std::vector<double> reaction_series(const StateHistory& hist, const Mesh& mesh,
                                           const std::vector<int>& node_ids, int axis) {
  std::vector<double> out;
  out.reserve(hist.steps.size());
  for (int s = 0; s < hist.n_steps(); ++s) {
    const auto& rec = hist.steps[s];
    const auto& rs = hist.resolved_stages[rec.stage];
    double f = 0.0;
    for (int n : node_ids) {
      const int dof = n * mesh.dim + axis;
      if (s > 0 && !rs.is_fixed[dof])
        throw ConfigError("reaction_series: node set is not constrained along the axis");
      f += rec.fint[dof] - rec.fext[dof];
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace plastopt
