#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "plastopt/material.hpp"

using namespace plastopt;

TEST_CASE("builtin catalog constants") {
  auto cat = builtin_catalog();
  cat.validate();
  CHECK(cat.size() == 6);
  CHECK(cat.lookup("CuSn10").sigma_y == doctest::Approx(145.0));
  CHECK(cat.lookup("AISI 316L").h_kin == doctest::Approx(1339.1));
  CHECK(cat.lookup("PCL").sigma_y == doctest::Approx(25.0));
  CHECK(cat.lookup("Ti-6Al-4V").kappa == doctest::Approx(115600.0));
  CHECK(cat.lookup("INCONEL 718").delta == doctest::Approx(16.9));
  CHECK(cat.lookup("Lithium").K_iso == doctest::Approx(2.5));
  CHECK(cat.lookup("Lithium").h_kin == doctest::Approx(2.5));
  CHECK_THROWS_AS((void)cat.lookup("unobtainium"), ConfigError);
}

TEST_CASE("hardening law values") {
  auto cat = builtin_catalog();
  CHECK(hardening_k(cat.lookup("Ti-6Al-4V"), 0.5) == doctest::Approx(853.0));
  CHECK(hardening_k(cat.lookup("CuSn10"), 1.0) == doctest::Approx(145.0 + 952.0));
  const double ref = 450.0 + 129.0 * 0.1 + 265.0 * (1.0 - std::exp(-1.69));
  CHECK(hardening_k(cat.lookup("INCONEL 718"), 0.1) == doctest::Approx(ref).epsilon(1e-12));

  CHECK(hardening_k_prime(cat.lookup("AISI 316L"), 0.37) == doctest::Approx(0.0));
  CHECK(hardening_k_prime(cat.lookup("CuSn10"), 2.0) == doctest::Approx(952.0));
  CHECK(hardening_k_prime(cat.lookup("INCONEL 718"), 0.0) ==
        doctest::Approx(129.0 + 16.9 * 265.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)hardening_k(cat.lookup("PCL"), -0.1), NumericsError);
}

TEST_CASE("hardening is nondecreasing and derivative matches finite differences") {
  auto cat = builtin_catalog();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (const auto& m : cat.materials) {
    for (int it = 0; it < 10; ++it) {
      const double a = u(rng);
      const double h = 1e-6 * std::max(1.0, a);
      const double fd = (hardening_k(m, a + h) - hardening_k(m, a - h)) / (2.0 * h);
      const double an = hardening_k_prime(m, a);
      CHECK(an >= 0.0);
      CHECK(an == doctest::Approx(fd).epsilon(1e-6));
      CHECK(hardening_k(m, a + 0.1) >= hardening_k(m, a));
    }
  }
}

TEST_CASE("effective material from a single spec matches the scalar law") {
  auto cat = builtin_catalog();
  const auto& ni = cat.lookup("INCONEL 718");
  auto eff = EffMaterial<double>::from_spec(ni);
  CHECK_FALSE(eff.linear());
  for (double a : {0.0, 0.05, 0.31, 1.2}) {
    CHECK(eff.k(a) == doctest::Approx(hardening_k(ni, a)).epsilon(1e-14));
    CHECK(eff.k_prime(a) == doctest::Approx(hardening_k_prime(ni, a)).epsilon(1e-14));
  }
  CHECK(EffMaterial<double>::from_spec(cat.lookup("CuSn10")).linear());
}

TEST_CASE("spec validation") {
  MaterialSpec bad = MaterialSpec::from_young("bad", 1.0, 0.3, 0.2);
  bad.sigma_inf = 0.1;  // below sigma_y
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  MaterialCatalog c;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
