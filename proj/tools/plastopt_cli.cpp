#include <CLI11.hpp>
#include <iostream>

#include "plastopt/pipeline.hpp"

using namespace plastopt;

namespace {

int cmd_analyze(const std::string& config, const std::string& out_dir, int threads,
                bool verbose) {
  RunConfig rc = parse_config(config);
  if (!out_dir.empty()) rc.out_dir = out_dir;
  RunBundle b = make_bundle(rc, threads);
  ensure_dir(rc.out_dir);

  auto out = run_forward(b);
  if (verbose) {
    std::cout << "steps committed: " << out.history.n_steps() - 1 << "\n";
    std::cout << "J_stiff = " << out.objective.J_stiff << "  J_force = " << out.objective.J_force
              << "  J_energy = " << out.objective.J_energy << "\n";
    for (const auto& c : out.constraints)
      std::cout << c.name << " = " << c.g
                << (c.g <= 1e-12 * c.scale ? "  (ok)" : "  (violated)") << "\n";
  }
  write_history_csv(rc.out_dir + "/history.csv", out.history, b.mesh, b.monitor_nodes,
                    b.monitor_axis);
  DesignContext ctx = context_from_field(b.mesh, rc.catalog, rc.params, out.field);
  const auto& last = out.history.steps.back();
  write_vtk(rc.out_dir + "/final.vtk", b.mesh, last.u, last.qstates, ctx, &out.field);
  if (rc.vtk_every > 0) {
    for (int s = 0; s < out.history.n_steps(); s += rc.vtk_every) {
      const auto& rec = out.history.steps[s];
      write_vtk(rc.out_dir + "/step_" + std::to_string(s) + ".vtk", b.mesh, rec.u, rec.qstates,
                ctx, &out.field);
    }
  }
  std::cout << "analyze: " << out.history.n_steps() - 1 << " steps, J = " << out.objective.J
            << ", outputs in " << rc.out_dir << "\n";
  return 0;
}

int cmd_optimize(const std::string& config, const std::string& out_dir, int threads,
                 bool verbose) {
  RunConfig rc = parse_config(config);
  if (!out_dir.empty()) rc.out_dir = out_dir;
  RunBundle b = make_bundle(rc, threads);
  ensure_dir(rc.out_dir);

  OptimizeProblem prob;
  prob.mesh = &b.mesh;
  prob.catalog = rc.catalog;
  prob.params = rc.params;
  prob.program = rc.program;
  prob.solver = b.rc.solver;  // carries the thread budget
  prob.weights = rc.weights;
  prob.constraints = rc.constraints;

  auto result = optimize_loop(prob, b.rho_raw, b.xi_raw, rc.optimizer,
                              [&](const IterationRow& row) {
                                if (verbose)
                                  std::cout << "iter " << row.iteration << "  J = "
                                            << row.objective.J << "  change = " << row.change
                                            << "\n";
                              });

  write_iterations_csv(rc.out_dir + "/iterations.csv", result.log);
  DesignContext ctx = context_from_field(b.mesh, rc.catalog, rc.params, result.field);
  auto hist = run_analysis(b.mesh, rc.program, ctx, rc.solver);
  write_history_csv(rc.out_dir + "/history.csv", hist, b.mesh, b.monitor_nodes, b.monitor_axis);
  const auto& last = hist.steps.back();
  write_vtk(rc.out_dir + "/design.vtk", b.mesh, last.u, last.qstates, ctx, &result.field);

  std::ofstream raw(rc.out_dir + "/design_raw.csv");
  raw << "element,rho";
  for (std::size_t j = 0; j < result.xi_raw.size(); ++j) raw << ",xi" << j + 1;
  raw << "\n" << std::setprecision(15);
  for (std::size_t e = 0; e < result.rho_raw.size(); ++e) {
    raw << e << ',' << result.rho_raw[e];
    for (const auto& xj : result.xi_raw) raw << ',' << xj[e];
    raw << '\n';
  }

  std::cout << "optimize: " << result.log.size() << " iterations, final J = "
            << result.objective.J << ", outputs in " << rc.out_dir << "\n";
  return 0;
}

int cmd_verify_uniaxial(const std::string& config, const std::string& out_dir, int threads,
                        bool verbose) {
  double young = 1.0, poisson = 0.3, sigma_y = 0.2, threshold = 1e-8;
  std::vector<double> schedule;
  std::string dir = "out";
  if (!config.empty()) {
    RunConfig rc = parse_config(config, /*require_problem=*/false);
    young = rc.verify_young;
    poisson = rc.verify_poisson;
    sigma_y = rc.verify_sigma_y;
    threshold = rc.verify_threshold;
    schedule = rc.verify_schedule;
    dir = rc.out_dir;
  }
  if (!out_dir.empty()) dir = out_dir;
  ensure_dir(dir);

  const MaterialSpec mat = MaterialSpec::from_young("verify", young, poisson, sigma_y);
  auto v = verify_uniaxial(mat, schedule, threads);
  write_uniaxial_csv(dir + "/uniaxial.csv", v);

  std::cout << "verify-uniaxial 2-norm errors:\n"
            << "  tau11      " << v.err_tau11 << "\n"
            << "  lateral    " << v.err_lateral << "\n"
            << "  det(be)    " << v.err_detbe << "\n";
  const bool pass =
      v.err_tau11 <= threshold && v.err_lateral <= threshold && v.err_detbe <= threshold;
  std::cout << (pass ? "PASS" : "FAIL") << " (threshold " << threshold << ")\n";
  (void)verbose;
  return pass ? 0 : 4;
}

int cmd_check_gradients(const std::string& config, const std::string& out_dir, int threads,
                        bool verbose) {
  RunConfig rc = parse_config(config);
  if (!out_dir.empty()) rc.out_dir = out_dir;
  RunBundle b = make_bundle(rc, threads);
  ensure_dir(rc.out_dir);

  std::vector<std::string> fns = rc.fd_functions;
  if (fns.empty()) {
    fns = {"J_stiff", "J_force", "J_energy"};
    for (const auto& c :
         eval_constraints(evaluate_chain(b.mesh, rc.params, b.filt_rho, b.filt_xi, b.rho_raw,
                                         b.xi_raw),
                          rc.catalog, rc.constraints))
      fns.push_back(c.name);
  }
  auto rep = fd_verify(b, fns, rc.fd_samples, rc.fd_eps);
  write_fd_csv(rc.out_dir + "/gradcheck.csv", rep);

  if (verbose)
    for (const auto& s : rep.samples)
      std::cout << s.function << " fam " << s.family << " elem " << s.element << "  an "
                << s.analytic << "  fd " << s.fd << "  rel " << s.rel_err
                << (s.flagged ? "  [flagged]" : "") << "\n";
  std::cout << "check-gradients: max rel = " << rep.max_rel << ", median rel = "
            << rep.median_rel << " over " << rep.samples.size() << " samples\n";
  const bool pass = rep.max_rel <= 1e-4;
  std::cout << (pass ? "PASS" : "FAIL") << " (criterion max rel <= 1e-4)\n";
  return pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimaterial topology optimization for finite-strain elastoplasticity"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config, out_dir;
  int threads = 1;
  bool verbose = false;
  app.add_option("--config", config, "configuration file");
  app.add_option("--out-dir", out_dir, "output directory (overrides [output] dir)");
  app.add_option("--threads", threads, "element-level worker threads");
  app.add_flag("--verbose", verbose, "per-step / per-iteration logging");

  auto* analyze = app.add_subcommand("analyze", "forward analysis of the configured design");
  auto* optimize = app.add_subcommand("optimize", "run the design optimization loop");
  auto* verify = app.add_subcommand("verify-uniaxial",
                                    "single-element cyclic check against the closed-form solution");
  auto* gradcheck = app.add_subcommand("check-gradients",
                                       "adjoint gradients against finite differences");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) {
      if (config.empty()) throw ConfigError("analyze requires --config");
      return cmd_analyze(config, out_dir, threads, verbose);
    }
    if (app.got_subcommand(optimize)) {
      if (config.empty()) throw ConfigError("optimize requires --config");
      return cmd_optimize(config, out_dir, threads, verbose);
    }
    if (app.got_subcommand(verify)) return cmd_verify_uniaxial(config, out_dir, threads, verbose);
    if (app.got_subcommand(gradcheck)) {
      if (config.empty()) throw ConfigError("check-gradients requires --config");
      return cmd_check_gradients(config, out_dir, threads, verbose);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const NumericsError& e) {
    std::cerr << "numerics error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
