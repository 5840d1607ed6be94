#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plastopt/objectives.hpp"

using namespace plastopt;

namespace {
MaterialSpec dummy_spec() { return MaterialSpec::from_young("dummy", 1.0, 0.3, 0.2); }
MaterialSpec elastic_spec() { return MaterialSpec::from_young("ela", 1.0, 0.3, 1e6); }

LoadProgram shear_program(const Mesh& mesh, double u_top, const std::vector<double>& steps) {
  Stage st;
  DirichletSpec bottom, top;
  bottom.box = mesh.side_box("ymin");
  bottom.axes = {true, true, false};
  st.dirichlet.push_back(bottom);
  top.box = mesh.side_box("ymax");
  top.axes = {true, true, false};
  top.value = {u_top, 0.0, 0.0};
  st.dirichlet.push_back(top);
  st.steps = steps;
  LoadProgram p;
  p.stages.push_back(st);
  return p;
}
}  // namespace

TEST_CASE("single-step linear run: J_energy = J_stiff = J_force/2") {
  auto mesh = build_structured_mesh(2, {3, 2, 1}, {1.5, 1.0, 0.0});
  auto ctx = context_single_material(mesh, elastic_spec());
  SolverSettings cfg;
  cfg.eps_abs = 1e-13;
  cfg.eps_rel = 1e-12;
  auto hist = run_analysis(mesh, shear_program(mesh, 0.001, {1.0}), ctx, cfg);

  ObjectiveWeights w;  // any valid weights; breakdown is weight-independent
  auto b = eval_objective(mesh, ctx, hist, w);
  // an almost-linear tiny step: trapezoid with P0 = 0, u0 = 0
  CHECK(b.J_energy == doctest::Approx(b.J_stiff).epsilon(1e-6));
  CHECK(b.J_force == doctest::Approx(2.0 * b.J_stiff).epsilon(1e-6));
}

TEST_CASE("energy identity: J_energy equals the reaction-displacement loop area") {
  auto mesh = build_structured_mesh(2, {6, 3, 1}, {2.0, 1.0, 0.0});
  auto ctx = context_single_material(mesh, dummy_spec());
  SolverSettings cfg;
  cfg.eps_abs = 1e-12;
  cfg.eps_rel = 1e-12;
  const double u_top = 0.45;
  auto hist = run_analysis(
      mesh, shear_program(mesh, u_top, {0.2, 0.4, 0.6, 0.8, 1.0, 0.6, 0.3, 0.0}), ctx, cfg);

  ObjectiveWeights w;
  auto b = eval_objective(mesh, ctx, hist, w);

  auto top_nodes = mesh.select_nodes(mesh.side_box("ymax"));
  auto F = reaction_series(hist, mesh, top_nodes, 0);
  double area = 0.0;
  for (int n = 1; n < hist.n_steps(); ++n) {
    const double a_now = hist.steps[n].multiplier * u_top;
    const double a_prev = hist.steps[n - 1].multiplier * u_top;
    area += 0.5 * (F[n] + F[n - 1]) * (a_now - a_prev);
  }
  CHECK(b.J_energy == doctest::Approx(area).epsilon(1e-8));
  CHECK(b.J_energy > 0.0);  // plastic dissipation
}

TEST_CASE("closed elastic cycle dissipates nothing") {
  auto mesh = build_structured_mesh(2, {4, 2, 1}, {2.0, 1.0, 0.0});
  auto ctx = context_single_material(mesh, elastic_spec());
  SolverSettings cfg;
  cfg.eps_abs = 1e-13;
  cfg.eps_rel = 1e-12;
  auto hist =
      run_analysis(mesh, shear_program(mesh, 0.3, {0.5, 1.0, 0.5, 0.0}), ctx, cfg);
  ObjectiveWeights w;
  auto b = eval_objective(mesh, ctx, hist, w);

  // peak strain energy along the path bounds the admissible drift
  double peak = 0.0, running = 0.0;
  auto top_nodes = mesh.select_nodes(mesh.side_box("ymax"));
  auto F = reaction_series(hist, mesh, top_nodes, 0);
  for (int n = 1; n < hist.n_steps(); ++n) {
    running += 0.5 * (F[n] + F[n - 1]) * 0.3 *
               (hist.steps[n].multiplier - hist.steps[n - 1].multiplier);
    peak = std::max(peak, running);
  }
  CHECK(std::abs(b.J_energy) <= 1e-8 * peak);
}

TEST_CASE("constraint functions and their closed forms") {
  auto cat = builtin_catalog();
  MaterialCatalog four;
  four.materials = {cat.lookup("Ti-6Al-4V"), cat.lookup("CuSn10"),
                    cat.lookup("INCONEL 718"), cat.lookup("AISI 316L")};

  DesignField f;
  f.n_elems = 10;
  f.n_xi = 3;
  f.rho_bar.assign(10, 1.0);
  f.xi_bar.assign(4, std::vector<double>(10, 0.25));
  f.phi.assign(10, 1.0);

  ConstraintSet set;
  set.vol_total = 0.5;
  set.price = 17.31;
  set.mass = 7340.0;
  set.co2 = 17.64;

  auto g = eval_constraints(f, four, set);
  REQUIRE(g.size() == 4);
  CHECK(g[0].name == "g_V0");
  CHECK(g[0].g == doctest::Approx(0.5));

  const double mean_price = 0.25 * (24.4 + 13.3 + 25.2 + 6.6);
  CHECK(g[1].g == doctest::Approx(mean_price - 17.31).epsilon(1e-12));
  const double mean_mass = 0.25 * (4400.0 + 8800.0 + 8200.0 + 8000.0);
  CHECK(g[2].g == doctest::Approx(mean_mass - 7340.0).epsilon(1e-12));
  const double mean_co2 = 0.25 * (40.4 + 6.0 + 16.6 + 7.4);
  CHECK(g[3].g == doctest::Approx(mean_co2 - 17.64).epsilon(1e-12));

  // void design: all volume constraints at their negative bounds
  DesignField v = f;
  v.rho_bar.assign(10, 0.0);
  ConstraintSet vol;
  vol.vol_total = 0.5;
  vol.vol_material = {0.2, 0.2, 0.2, 0.2};
  auto gv = eval_constraints(v, four, vol);
  CHECK(gv[0].g == doctest::Approx(-0.5));
  for (int n = 1; n <= 4; ++n) CHECK(gv[n].g == doctest::Approx(-0.2));

  // gradients are exact means: finite difference check
  DesignField p = f;
  const double eps = 1e-7;
  p.rho_bar[3] += eps;
  auto gp = eval_constraints(p, four, set);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i].d_rho_bar[3] == doctest::Approx((gp[i].g - g[i].g) / eps).epsilon(1e-6));

  ObjectiveWeights bad;
  bad.w_stiff = 0.3;
  bad.w_force = 0.3;
  bad.w_energy = 0.3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
