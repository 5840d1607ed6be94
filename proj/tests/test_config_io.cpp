#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "plastopt/pipeline.hpp"

using namespace plastopt;

namespace {
std::string write_temp(const std::string& body) {
  static int counter = 0;
  std::string path = "/tmp/plastopt_cfg_" + std::to_string(counter++) + ".cfg";
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kMinimal = R"(
[mesh]
dim = 2
counts = 2 1
lengths = 2 1

[material]
name = soft
young = 1.0
poisson = 0.3
sigma_y = 100   # effectively elastic

[stage]
steps = 1.0
dirichlet = side xmin | axes xy | value 0 0
dirichlet = side xmax | axes x | value 0.01

[objective]
w_stiff = 1
w_force = 0
w_energy = 0
)";
}  // namespace

TEST_CASE("minimal config parses and runs") {
  auto path = write_temp(kMinimal);
  RunConfig rc = parse_config(path);
  CHECK(rc.catalog.size() == 1);
  CHECK(rc.program.stages.size() == 1);
  auto b = make_bundle(rc);
  auto out = run_forward(b);
  CHECK(out.history.n_steps() == 2);
  CHECK(out.objective.J_stiff > 0.0);
  std::remove(path.c_str());
}

TEST_CASE("invalid configurations are rejected with precise messages") {
  {
    std::string body = kMinimal;
    body += "\n[objective]\nw_stiff = 0.3\nw_force = 0.3\nw_energy = 0.3\n";
    auto path = write_temp(body);
    CHECK_THROWS_WITH_AS((void)parse_config(path), doctest::Contains("sum to 1"), ConfigError);
    std::remove(path.c_str());
  }
  {
    std::string body = kMinimal;
    body += "\n[mesh]\nbogus_key = 7\n";
    auto path = write_temp(body);
    CHECK_THROWS_WITH_AS((void)parse_config(path), doctest::Contains("unknown key"),
                         ConfigError);
    std::remove(path.c_str());
  }
  {
    std::string body = kMinimal;
    body += "\n[constraints]\nvol_total = 1.5\n";
    auto path = write_temp(body);
    CHECK_THROWS_AS((void)parse_config(path), ConfigError);
    std::remove(path.c_str());
  }
  CHECK_THROWS_AS((void)parse_config("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("damper configuration transcribes the published settings") {
  RunConfig rc = parse_config(std::string(PLASTOPT_SOURCE_DIR) + "/configs/damper.cfg");
  CHECK(rc.params.filter_radius_rho == doctest::Approx(10.0));
  CHECK(rc.constraints.vol_total.has_value());
  CHECK(*rc.constraints.vol_total == doctest::Approx(0.5));
  CHECK(rc.catalog.lookup("CuSn10").K_iso == doctest::Approx(952.0));
  CHECK(rc.catalog.lookup("AISI 316L").h_kin == doctest::Approx(1339.1));
  CHECK(rc.optimizer.beta_sched.value_at(1) == doctest::Approx(1.0));
  CHECK(rc.optimizer.beta_sched.value_at(40) == doctest::Approx(1.0));
  CHECK(rc.optimizer.beta_sched.value_at(41) == doctest::Approx(2.0));
  CHECK(rc.optimizer.beta_sched.value_at(81) == doctest::Approx(4.0));
  CHECK(rc.optimizer.beta_sched.value_at(10000) == doctest::Approx(512.0));
  CHECK(rc.optimizer.pxi_sched.value_at(41) == doctest::Approx(1.25));
  CHECK(rc.optimizer.pxi_sched.value_at(10000) == doctest::Approx(3.0));
  CHECK(rc.weights.w_energy == doctest::Approx(1.0));
  // N_xi = N_mat - 1 cross-validation
  CHECK(rc.n_xi() == 1);
}

TEST_CASE("vtk writer emits the expected layout") {
  auto check_vtk = [](int dim, int expected_type, int expected_nodes) {
    Mesh mesh = dim == 2 ? build_structured_mesh(2, {2, 2, 1}, {1.0, 1.0, 0.0})
                         : build_structured_mesh(3, {2, 2, 2}, {1.0, 1.0, 1.0});
    auto spec = MaterialSpec::from_young("m", 1.0, 0.3, 1.0);
    auto ctx = context_single_material(mesh, spec);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh.n_dofs());
    std::vector<QuadPointState> qs(mesh.n_qp_total());
    const std::string path = "/tmp/plastopt_test.vtk";
    write_vtk(path, mesh, u, qs, ctx);

    // reference reader: scan for POINTS and CELL_TYPES
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int points = -1;
    std::vector<int> types;
    while (std::getline(in, line)) {
      std::istringstream is(line);
      std::string word;
      is >> word;
      if (word == "POINTS") is >> points;
      if (word == "CELL_TYPES") {
        int ncell;
        is >> ncell;
        for (int i = 0; i < ncell; ++i) {
          int t;
          in >> t;
          types.push_back(t);
        }
      }
    }
    CHECK(points == expected_nodes);
    REQUIRE_FALSE(types.empty());
    for (int t : types) CHECK(t == expected_type);
    std::remove(path.c_str());
  };
  check_vtk(2, 9, 9);
  check_vtk(3, 12, 27);
}

TEST_CASE("history csv schema is stable") {
  auto path = write_temp(kMinimal);
  RunConfig rc = parse_config(path);
  auto b = make_bundle(rc);
  auto out = run_forward(b);
  const std::string csv = "/tmp/plastopt_hist.csv";
  write_history_csv(csv, out.history, b.mesh, b.monitor_nodes, b.monitor_axis);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,time,u_applied,F_reaction,newton_iters,line_searches,residual");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == out.history.n_steps());
  std::remove(csv.c_str());
  std::remove(path.c_str());
}

TEST_CASE("monitored force column is monotone for a monotone elastic stretch") {
  std::string body = R"(
[mesh]
dim = 2
counts = 2 2
lengths = 1 1

[material]
name = soft
young = 1.0
poisson = 0.3
sigma_y = 1000

[stage]
steps = 0.25 0.5 0.75 1.0
dirichlet = side xmin | axes xy | value 0 0
dirichlet = side xmax | axes x | value 0.05

[objective]
w_stiff = 1
w_force = 0
w_energy = 0

[output]
monitor = side xmax | axis x
)";
  auto path = write_temp(body);
  RunConfig rc = parse_config(path);
  auto b = make_bundle(rc);
  auto out = run_forward(b);
  auto F = reaction_series(out.history, b.mesh, b.monitor_nodes, b.monitor_axis);
  for (std::size_t i = 1; i < F.size(); ++i) CHECK(F[i] > F[i - 1] - 1e-12);
  std::remove(path.c_str());
}
