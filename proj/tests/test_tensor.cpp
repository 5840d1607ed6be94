#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "plastopt/tensor.hpp"

using namespace plastopt;

namespace {
std::mt19937 rng(42);

SymTensor3<double> random_sym(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymTensor3<double> t;
  for (auto& v : t.a) v = u(rng);
  return t;
}

Tensor3<double> random_full(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor3<double> t;
  for (auto& v : t.a) v = u(rng);
  return t;
}

// brute-force 4-index reference for Moduli4 contraction
double contract_ref(const Moduli4& C, const SymTensor3<double>& A, const SymTensor3<double>& B) {
  double s = 0.0;
  auto comp = [&](int i, int j, int k, int l) {
    int p = SymTensor3<double>::index(i, j);
    int q = SymTensor3<double>::index(k, l);
    return C(p, q);
  };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) s += A(i, j) * comp(i, j, k, l) * B(k, l);
  return s;
}
}  // namespace

TEST_CASE("deviator basics") {
  auto I = SymTensor3<double>::identity();
  auto d = dev(I);
  for (double v : d.a) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

  SymTensor3<double> t{};
  t(0, 0) = 1.0; t(1, 1) = 2.0; t(2, 2) = 3.0;
  auto dt = dev(t);
  CHECK(dt(0, 0) == doctest::Approx(-1.0));
  CHECK(dt(1, 1) == doctest::Approx(0.0));
  CHECK(dt(2, 2) == doctest::Approx(1.0));

  for (int it = 0; it < 20; ++it) {
    auto r = random_sym();
    auto d1 = dev(r), d2 = dev(dev(r));
    for (int i = 0; i < 6; ++i) CHECK(d1.a[i] == doctest::Approx(d2.a[i]).epsilon(1e-14));
    CHECK(std::abs(trace(d1)) < 1e-14);
  }
}

TEST_CASE("pull-back and push-forward") {
  auto I3 = Tensor3<double>::identity();
  auto t = random_sym();
  auto same = pull_back(t, I3);
  for (int i = 0; i < 6; ++i) CHECK(same.a[i] == doctest::Approx(t.a[i]));

  // push_forward(I, F) = F F^T = b
  Tensor3<double> F = random_full(0.3);
  for (int i = 0; i < 3; ++i) F(i, i) += 1.0;
  auto b = push_forward(SymTensor3<double>::identity(), F);
  auto bref = matmul(F, transpose(F));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(b(i, j) == doctest::Approx(bref(i, j)).epsilon(1e-14));

  Tensor3<double> D{};
  D(0, 0) = 1.2; D(1, 1) = 0.9; D(2, 2) = 0.95;
  for (int it = 0; it < 20; ++it) {
    auto x = random_sym();
    auto round = push_forward(pull_back(x, D), D);
    for (int i = 0; i < 6; ++i) CHECK(round.a[i] == doctest::Approx(x.a[i]).epsilon(1e-14));
  }

  // det identity: det(F t F^T) = det(F)^2 det(t)
  for (int it = 0; it < 20; ++it) {
    Tensor3<double> G = random_full(0.4);
    for (int i = 0; i < 3; ++i) G(i, i) += 1.5;
    auto x = random_sym();
    CHECK(det(push_forward(x, G)) ==
          doctest::Approx(det(G) * det(G) * det(x)).epsilon(1e-11));
  }

  Tensor3<double> sing{};
  CHECK_THROWS_AS((void)pull_back(t, sing), NumericsError);
}

TEST_CASE("moduli contraction is bilinear and matches 4-index reference") {
  Moduli4 C;
  auto x = random_sym(), y = random_sym();
  C.add_sym_identity(1.3, random_sym());
  C.add_outer(0.7, x, y);
  C.add_scaled_identity4(0.25);

  for (int it = 0; it < 10; ++it) {
    auto A = random_sym(), B = random_sym();
    CHECK(C.contract(A, B) == doctest::Approx(contract_ref(C, A, B)).epsilon(1e-12));
    // bilinearity
    auto A2 = random_sym();
    SymTensor3<double> Asum = A + A2;
    CHECK(C.contract(Asum, B) ==
          doctest::Approx(C.contract(A, B) + C.contract(A2, B)).epsilon(1e-12));
  }

  // major-symmetric C gives symmetric bilinear form
  Moduli4 S;
  S.add_sym_identity(2.0, random_sym());
  S.add_outer(0.5, x, x);
  for (int it = 0; it < 10; ++it) {
    auto A = random_sym(), B = random_sym();
    CHECK(S.contract(A, B) == doctest::Approx(S.contract(B, A)).epsilon(1e-12));
  }
  CHECK(S.major_asymmetry() < 1e-14);
}

TEST_CASE("apply matches contraction") {
  Moduli4 C;
  C.add_sym_identity(0.9, random_sym());
  C.add_outer(-0.4, random_sym(), random_sym());
  auto B = random_sym();
  auto CB = C.apply(B);
  for (int it = 0; it < 5; ++it) {
    auto A = random_sym();
    CHECK(ddot(A, CB) == doctest::Approx(C.contract(A, B)).epsilon(1e-12));
  }
}
