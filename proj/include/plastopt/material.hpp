#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "plastopt/common.hpp"
#include "plastopt/dual.hpp"

namespace plastopt {

// One candidate material. Internal units: stresses in MPa, lengths in mm,
// forces in N; price in USD/kg, mass density in kg/m^3, CO2 in kg/kg.
struct MaterialSpec {
  std::string name;
  double kappa = 0.0;      // bulk modulus
  double mu = 0.0;         // shear modulus
  double sigma_y = 0.0;    // initial yield strength
  double K_iso = 0.0;      // linear isotropic hardening modulus
  double sigma_inf = 0.0;  // residual yield strength
  double delta = 0.0;      // saturation exponent
  double h_kin = 0.0;      // kinematic hardening modulus
  double price = 0.0;
  double mass_density = 0.0;
  double co2 = 0.0;

  void validate() const {
    if (!(kappa > 0.0)) throw ConfigError("material '" + name + "': kappa must be > 0");
    if (!(mu > 0.0)) throw ConfigError("material '" + name + "': mu must be > 0");
    if (!(sigma_y > 0.0)) throw ConfigError("material '" + name + "': sigma_y must be > 0");
    if (sigma_inf < sigma_y)
      throw ConfigError("material '" + name + "': sigma_inf must be >= sigma_y");
    if (delta < 0.0) throw ConfigError("material '" + name + "': delta must be >= 0");
    if (h_kin < 0.0) throw ConfigError("material '" + name + "': h_kin must be >= 0");
  }

  static MaterialSpec from_young(const std::string& name, double E, double nu,
                                 double sigma_y) {
    MaterialSpec m;
    m.name = name;
    m.kappa = E / (3.0 * (1.0 - 2.0 * nu));
    m.mu = E / (2.0 * (1.0 + nu));
    m.sigma_y = sigma_y;
    m.sigma_inf = sigma_y;
    return m;
  }
};

// Isotropic hardening k(alpha) = sigma_y + K a + (sigma_inf - sigma_y)(1 - e^{-delta a}).
inline double hardening_k(const MaterialSpec& mat, double alpha) {
  if (alpha < 0.0) throw NumericsError("hardening_k: negative equivalent plastic strain");
  return mat.sigma_y + mat.K_iso * alpha +
         (mat.sigma_inf - mat.sigma_y) * (1.0 - std::exp(-mat.delta * alpha));
}

inline double hardening_k_prime(const MaterialSpec& mat, double alpha) {
  if (alpha < 0.0) throw NumericsError("hardening_k_prime: negative equivalent plastic strain");
  return mat.K_iso + mat.delta * (mat.sigma_inf - mat.sigma_y) * std::exp(-mat.delta * alpha);
}

struct MaterialCatalog {
  std::vector<MaterialSpec> materials;

  std::size_t size() const { return materials.size(); }
  const MaterialSpec& operator[](std::size_t i) const { return materials[i]; }

  const MaterialSpec& lookup(const std::string& name) const {
    for (const auto& m : materials)
      if (m.name == name) return m;
    throw ConfigError("unknown material '" + name + "'");
  }

  void validate() const {
    if (materials.empty()) throw ConfigError("material catalog is empty");
    for (std::size_t i = 0; i < materials.size(); ++i) {
      materials[i].validate();
      for (std::size_t j = i + 1; j < materials.size(); ++j)
        if (materials[i].name == materials[j].name)
          throw ConfigError("duplicate material name '" + materials[i].name + "'");
    }
  }
};

// The six materials used throughout the numerical examples. Moduli converted
// from GPa to MPa; lithium's combined hardening is K = h = 2.5 MPa.
inline MaterialCatalog builtin_catalog() {
  MaterialCatalog c;
  auto add = [&](const char* name, double kappa_gpa, double mu_gpa, double h, double K,
                 double sy, double sinf, double delta, double price, double rho,
                 double co2) {
    MaterialSpec m;
    m.name = name;
    m.kappa = 1e3 * kappa_gpa;
    m.mu = 1e3 * mu_gpa;
    m.h_kin = h;
    m.K_iso = K;
    m.sigma_y = sy;
    m.sigma_inf = sinf;
    m.delta = delta;
    m.price = price;
    m.mass_density = rho;
    m.co2 = co2;
    c.materials.push_back(m);
  };
  add("Ti-6Al-4V", 115.6, 41.4, 0.0, 0.0, 853.0, 853.0, 0.0, 24.4, 4400.0, 40.4);
  add("CuSn10", 88.9, 29.6, 0.0, 952.0, 145.0, 145.0, 0.0, 13.3, 8800.0, 6.0);
  add("INCONEL 718", 165.0, 76.2, 0.0, 129.0, 450.0, 715.0, 16.9, 25.2, 8200.0, 16.6);
  add("AISI 316L", 141.3, 76.8, 1339.1, 0.0, 226.0, 226.0, 0.0, 6.6, 8000.0, 7.4);
  add("Lithium", 5.8, 1.8, 2.5, 2.5, 1.0, 1.0, 0.0, 127.0, 500.0, 79.6);
  add("PCL", 0.3880, 0.0157, 0.0, 0.0, 25.0, 25.0, 0.0, 6.8, 1100.0, 2.3);
  return c;
}

// Element-level constants and hardening law after material interpolation.
// Templated on the scalar so design-variable seeds chain through it. A pure
// material reduces to factor 1 with a single active term.
template <typename T>
struct EffMaterial {
  T kappa{}, mu{}, h{};
  T k_sigma0{};  // weighted sigma_y sum (incl. density factor)
  T k_lin{};     // weighted K sum
  int n_exp = 0;
  std::array<T, 8> exp_amp{};      // weighted (sigma_inf - sigma_y) amplitudes
  std::array<double, 8> exp_delta{};

  bool linear() const {
    for (int i = 0; i < n_exp; ++i)
      if (val(exp_amp[i]) != 0.0 && exp_delta[i] != 0.0) return false;
    return true;
  }

  T k(const T& alpha) const {
    if (val(alpha) < 0.0) throw NumericsError("EffMaterial::k: negative alpha");
    T r = k_sigma0 + k_lin * alpha;
    for (int i = 0; i < n_exp; ++i)
      r += exp_amp[i] * (T(1.0) - exp(T(-exp_delta[i]) * alpha));
    return r;
  }
  T k_prime(const T& alpha) const {
    if (val(alpha) < 0.0) throw NumericsError("EffMaterial::k_prime: negative alpha");
    T r = k_lin;
    for (int i = 0; i < n_exp; ++i)
      r += T(exp_delta[i]) * exp_amp[i] * exp(T(-exp_delta[i]) * alpha);
    return r;
  }

  template <typename U>
  EffMaterial<U> cast() const {
    EffMaterial<U> e;
    e.kappa = U(val(kappa)); e.mu = U(val(mu)); e.h = U(val(h));
    e.k_sigma0 = U(val(k_sigma0)); e.k_lin = U(val(k_lin));
    e.n_exp = n_exp;
    for (int i = 0; i < n_exp; ++i) {
      e.exp_amp[i] = U(val(exp_amp[i]));
      e.exp_delta[i] = exp_delta[i];
    }
    return e;
  }

  static EffMaterial from_spec(const MaterialSpec& m) {
    EffMaterial e;
    e.kappa = T(m.kappa);
    e.mu = T(m.mu);
    e.h = T(m.h_kin);
    e.k_sigma0 = T(m.sigma_y);
    e.k_lin = T(m.K_iso);
    if (m.sigma_inf != m.sigma_y || m.delta != 0.0) {
      e.exp_amp[0] = T(m.sigma_inf - m.sigma_y);
      e.exp_delta[0] = m.delta;
      e.n_exp = 1;
    }
    return e;
  }
};

}  // namespace plastopt
