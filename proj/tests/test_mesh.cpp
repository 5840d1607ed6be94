#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "plastopt/assembly.hpp"
#include "plastopt/mesh.hpp"

using namespace plastopt;

TEST_CASE("lattice counts") {
  auto m1 = build_structured_mesh(2, {1, 1, 1}, {1.0, 1.0, 0.0});
  CHECK(m1.n_nodes() == 4);
  CHECK(m1.n_elems() == 1);
  CHECK(m1.n_dofs() == 8);

  auto m2 = build_structured_mesh(2, {2, 2, 1}, {2.0, 2.0, 0.0});
  CHECK(m2.n_nodes() == 9);
  CHECK(m2.n_elems() == 4);

  auto m3 = build_structured_mesh(3, {2, 2, 2}, {2.0, 2.0, 2.0});
  CHECK(m3.n_nodes() == 27);
  CHECK(m3.n_elems() == 8);
  CHECK(m3.n_dofs() == 81);

  CHECK_THROWS_AS((void)build_structured_mesh(2, {0, 1, 1}, {1.0, 1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS((void)build_structured_mesh(2, {1, 1, 1}, {0.0, 1.0, 0.0}), ConfigError);
}

TEST_CASE("quadrature integrates element volumes exactly") {
  auto m = build_structured_mesh(2, {1, 1, 1}, {1.0, 1.0, 0.0});
  double vol = 0.0;
  for (int q = 0; q < m.nqp; ++q) vol += m.qweight[q];
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));

  auto ms = build_structured_mesh(2, {1, 1, 1}, {2.0, 0.5, 0.0});
  vol = 0.0;
  for (int q = 0; q < ms.nqp; ++q) vol += ms.qweight[q];
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));

  auto m3 = build_structured_mesh(3, {2, 3, 1}, {2.0, 1.0, 0.4});
  vol = 0.0;
  for (int q = 0; q < m3.nqp; ++q) vol += m3.qweight[q];
  CHECK(vol * m3.n_elems() == doctest::Approx(0.8).epsilon(1e-12));

  // thickness scales 2D quadrature weights
  auto mt = build_structured_mesh(2, {1, 1, 1}, {1.0, 1.0, 0.0}, 2.5);
  vol = 0.0;
  for (int q = 0; q < mt.nqp; ++q) vol += mt.qweight[q];
  CHECK(vol == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("patch test: affine fields reproduce exact constant gradients") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int dim : {2, 3}) {
    auto m = dim == 2 ? build_structured_mesh(2, {3, 2, 1}, {1.5, 1.0, 0.0})
                      : build_structured_mesh(3, {2, 2, 2}, {1.0, 0.8, 1.2});
    Tensor3<double> A{};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) A(i, j) = u(rng);

    Eigen::VectorXd disp(m.n_dofs());
    for (int n = 0; n < m.n_nodes(); ++n)
      for (int i = 0; i < dim; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += A(i, j) * m.nodes[n][j];
        disp[n * dim + i] = s;
      }
    for (int e = 0; e < m.n_elems(); ++e)
      for (int q = 0; q < m.nqp; ++q) {
        auto g = detail::gradient_at(m, disp, e, q);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            CHECK(g(i, j) == doctest::Approx(A(i, j)).epsilon(1e-13));
      }
  }
}

TEST_CASE("selectors and boundary sides") {
  auto m = build_structured_mesh(2, {4, 2, 1}, {4.0, 2.0, 0.0});
  auto left = m.select_nodes(m.side_box("xmin"));
  CHECK(left.size() == 3);
  auto right = m.select_nodes(m.side_box("xmax"));
  CHECK(right.size() == 3);
  auto top = m.select_nodes(m.side_box("ymax"));
  CHECK(top.size() == 5);
  CHECK_THROWS_AS((void)m.side_box("zmax"), ConfigError);

  // boundary side node sets cover the boundary exactly once
  std::vector<int> cover(m.n_nodes(), 0);
  for (const char* s : {"xmin", "xmax", "ymin", "ymax"})
    for (int n : m.select_nodes(m.side_box(s))) cover[n] += 1;
  int boundary_nodes = 0, interior_marked = 0;
  for (int n = 0; n < m.n_nodes(); ++n) {
    const auto& x = m.nodes[n];
    const bool on_bnd = x[0] == 0.0 || x[0] == 4.0 || x[1] == 0.0 || x[1] == 2.0;
    if (on_bnd) {
      ++boundary_nodes;
      CHECK(cover[n] >= 1);
    } else if (cover[n] != 0) {
      ++interior_marked;
    }
  }
  CHECK(boundary_nodes == 12);
  CHECK(interior_marked == 0);
}

TEST_CASE("load program resolution") {
  auto m = build_structured_mesh(2, {2, 2, 1}, {2.0, 2.0, 0.0});
  Stage st;
  DirichletSpec fix;
  fix.box = m.side_box("xmin");
  fix.axes = {true, true, false};
  st.dirichlet.push_back(fix);
  NeumannSpec pull;
  pull.side = "xmax";
  pull.traction = {3.0, 0.0, 0.0};
  st.neumann.push_back(pull);
  st.steps = {1.0};

  auto rs = resolve_stage(m, st);
  CHECK(rs.fixed_dofs.size() == 6);
  // total nominal traction force = t * area = 3 * (2 * thickness 1)
  double fx = 0.0;
  for (int i = 0; i < m.n_dofs(); i += 2) fx += rs.fext_nominal[i];
  CHECK(fx == doctest::Approx(6.0).epsilon(1e-12));

  Stage bad;
  DirichletSpec d;
  d.box = Box{{10.0, 10.0, 0.0}, {11.0, 11.0, 0.0}};
  d.axes = {true, false, false};
  bad.dirichlet.push_back(d);
  bad.steps = {1.0};
  CHECK_THROWS_AS((void)resolve_stage(m, bad), ConfigError);
}
