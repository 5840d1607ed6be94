#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plastopt/design.hpp"
#include "plastopt/material.hpp"
#include "plastopt/mesh.hpp"
#include "plastopt/objectives.hpp"
#include "plastopt/optimize.hpp"
#include "plastopt/solver.hpp"

namespace plastopt {

// Sectioned plain-text key/value configuration. Sections repeat ([material],
// [stage]); keys repeat inside a section where noted (dirichlet, neumann,
// region). Values are whitespace-separated tokens; '#' starts a comment.

namespace cfg {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  std::vector<Entry> entries;
  int line = 0;
};

inline std::vector<Section> parse_sections(std::istream& in) {
  std::vector<Section> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      Section s;
      s.name = trim(line.substr(1, line.size() - 2));
      s.line = lineno;
      out.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (out.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    out.back().entries.push_back(std::move(e));
  }
  return out;
}

inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> t;
  std::istringstream is(s);
  std::string w;
  while (is >> w) t.push_back(w);
  return t;
}

inline double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ConfigError("key '" + key + "': cannot parse number '" + s + "'");
  }
}

inline int to_int(const std::string& s, const std::string& key) {
  const double v = to_double(s, key);
  if (v != static_cast<long long>(v))
    throw ConfigError("key '" + key + "': expected integer, got '" + s + "'");
  return static_cast<int>(v);
}

// Typed accessor over one section with unknown-key detection.
struct Reader {
  const Section* sec;
  std::vector<std::string>* errors;
  mutable std::vector<char> used;

  Reader(const Section& s, std::vector<std::string>& errs) : sec(&s), errors(&errs) {
    used.assign(s.entries.size(), 0);
  }

  const Entry* find(const std::string& key, bool mark = true) const {
    const Entry* last = nullptr;
    for (std::size_t i = 0; i < sec->entries.size(); ++i)
      if (sec->entries[i].key == key) {
        if (mark) used[i] = 1;
        last = &sec->entries[i];
      }
    return last;
  }

  std::vector<const Entry*> find_all(const std::string& key) const {
    std::vector<const Entry*> out;
    for (std::size_t i = 0; i < sec->entries.size(); ++i)
      if (sec->entries[i].key == key) {
        used[i] = 1;
        out.push_back(&sec->entries[i]);
      }
    return out;
  }

  bool has(const std::string& key) const { return find(key, false) != nullptr; }

  double number(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    return e ? to_double(e->value, key) : fallback;
  }
  int integer(const std::string& key, int fallback) const {
    const Entry* e = find(key);
    return e ? to_int(e->value, key) : fallback;
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
  }
  std::vector<double> numbers(const std::string& key) const {
    const Entry* e = find(key);
    std::vector<double> out;
    if (!e) return out;
    for (const auto& t : tokens(e->value)) out.push_back(to_double(t, key));
    return out;
  }

  void finish() const {
    for (std::size_t i = 0; i < sec->entries.size(); ++i)
      if (!used[i])
        errors->push_back("[" + sec->name + "] line " + std::to_string(sec->entries[i].line) +
                          ": unknown key '" + sec->entries[i].key + "'");
  }
};

// clause grammar: "box x0 x1 y0 y1 [z0 z1] | axes xy | value 1 0" etc.
struct Clauses {
  std::map<std::string, std::vector<std::string>> map;

  static Clauses parse(const std::string& s, const std::string& context,
                       std::vector<std::string>& errors) {
    Clauses c;
    std::string part;
    std::istringstream is(s);
    std::vector<std::string> parts;
    while (std::getline(is, part, '|')) parts.push_back(part);
    for (const auto& p : parts) {
      auto tk = tokens(p);
      if (tk.empty()) continue;
      const std::string head = tk.front();
      tk.erase(tk.begin());
      if (c.map.count(head)) errors.push_back(context + ": duplicate clause '" + head + "'");
      c.map[head] = tk;
    }
    return c;
  }

  bool has(const std::string& k) const { return map.count(k) > 0; }
  const std::vector<std::string>& at(const std::string& k) const { return map.at(k); }
};

inline Box parse_box(const std::vector<std::string>& tk, int dim, const std::string& ctx,
                     std::vector<std::string>& errors) {
  Box b;
  const std::size_t want = dim == 2 ? 4 : 6;
  if (tk.size() != want) {
    errors.push_back(ctx + ": box needs " + std::to_string(want) + " bounds");
    return b;
  }
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = to_double(tk[2 * d], ctx);
    b.hi[d] = to_double(tk[2 * d + 1], ctx);
  }
  if (dim == 2) {
    b.lo[2] = -1.0;
    b.hi[2] = 1.0;
  }
  return b;
}

}  // namespace cfg

// Raw-design region override: raw values assigned inside a box.
struct DesignRegion {
  Box box;
  std::optional<double> rho;
  std::vector<double> xi;  // empty or N_xi values
};

struct MonitorSpec {
  bool use_side = false;
  std::string side;
  Box box;
  int axis = 0;
  bool defined = false;
};

// Fully parsed and cross-validated run configuration.
struct RunConfig {
  int dim = 2;
  std::array<int, 3> counts{1, 1, 1};
  std::array<double, 3> lengths{1.0, 1.0, 0.0};
  double thickness = 1.0;

  MaterialCatalog catalog;
  DesignParams params;
  double initial_rho = 0.5;
  std::vector<double> initial_xi;
  std::vector<DesignRegion> regions;

  LoadProgram program;
  SolverSettings solver;
  ObjectiveWeights weights;
  ConstraintSet constraints;
  OptimizeSettings optimizer;
  MonitorSpec monitor;

  std::string out_dir = "out";
  int vtk_every = 0;

  // verify-uniaxial
  double verify_young = 1.0, verify_poisson = 0.3, verify_sigma_y = 0.2;
  std::vector<double> verify_schedule;
  double verify_threshold = 1e-8;

  // check-gradients
  int fd_samples = 8;
  double fd_eps = 1e-5;
  std::vector<std::string> fd_functions;

  int n_xi() const { return static_cast<int>(catalog.size()) - 1; }

  Mesh build_mesh() const { return build_structured_mesh(dim, counts, lengths, thickness); }
};

inline RunConfig parse_config(const std::string& path, bool require_problem = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  auto sections = cfg::parse_sections(in);

  RunConfig rc;
  std::vector<std::string> errors;
  MaterialCatalog builtins = builtin_catalog();
  std::vector<std::string> use_names;
  std::vector<MaterialSpec> customs;

  for (const auto& sec : sections) {
    cfg::Reader r(sec, errors);
    if (sec.name == "mesh") {
      rc.dim = r.integer("dim", 2);
      auto c = r.numbers("counts");
      auto l = r.numbers("lengths");
      if (rc.dim != 2 && rc.dim != 3) errors.push_back("[mesh] dim must be 2 or 3");
      if (static_cast<int>(c.size()) != rc.dim) errors.push_back("[mesh] counts must have dim entries");
      if (static_cast<int>(l.size()) != rc.dim) errors.push_back("[mesh] lengths must have dim entries");
      for (int d = 0; d < rc.dim && d < static_cast<int>(c.size()); ++d)
        rc.counts[d] = static_cast<int>(c[d]);
      for (int d = 0; d < rc.dim && d < static_cast<int>(l.size()); ++d) rc.lengths[d] = l[d];
      rc.thickness = r.number("thickness", 1.0);
    } else if (sec.name == "materials") {
      const auto* e = r.find("use");
      if (e) {
        std::string cur;
        std::istringstream is(e->value);
        std::string piece;
        while (std::getline(is, piece, ',')) {
          const auto tk = cfg::tokens(piece);
          std::string name;
          for (const auto& t : tk) name += (name.empty() ? "" : " ") + t;
          if (!name.empty()) use_names.push_back(name);
        }
      }
    } else if (sec.name == "material") {
      MaterialSpec m;
      m.name = r.text("name", "");
      if (m.name.empty()) errors.push_back("[material] requires a name");
      if (r.has("young")) {
        const double E = r.number("young", 0.0);
        const double nu = r.number("poisson", 0.3);
        m.kappa = E / (3.0 * (1.0 - 2.0 * nu));
        m.mu = E / (2.0 * (1.0 + nu));
      } else {
        m.kappa = r.number("kappa", 0.0);
        m.mu = r.number("mu", 0.0);
      }
      m.sigma_y = r.number("sigma_y", 0.0);
      m.sigma_inf = r.number("sigma_inf", m.sigma_y);
      m.delta = r.number("delta", 0.0);
      m.K_iso = r.number("k_iso", 0.0);
      m.h_kin = r.number("h_kin", 0.0);
      m.price = r.number("price", 0.0);
      m.mass_density = r.number("mass_density", 0.0);
      m.co2 = r.number("co2", 0.0);
      customs.push_back(m);
    } else if (sec.name == "design") {
      rc.params.filter_radius_rho = r.number("radius_rho", 0.0);
      rc.params.filter_radius_xi = r.number("radius_xi", rc.params.filter_radius_rho);
      rc.params.beta_rho = r.number("beta_rho", 1.0);
      rc.params.theta_rho = r.number("theta_rho", 0.5);
      rc.params.beta_xi = r.number("beta_xi", 1.0);
      rc.params.theta_xi = r.number("theta_xi", 0.5);
      rc.params.beta_phi = r.number("beta_phi", 500.0);
      rc.params.theta_phi = r.number("theta_phi", 0.1);
      rc.params.p_kappa = r.number("p_kappa", 3.0);
      rc.params.p_k = r.number("p_k", 2.5);
      rc.params.p_h = r.number("p_h", 3.0);
      rc.params.p_xi = r.number("p_xi", 1.0);
      rc.params.eps_rho = r.number("eps_rho", 1e-6);
      rc.initial_rho = r.number("initial_rho", 0.5);
      rc.initial_xi = r.numbers("initial_xi");
      for (const auto* e : r.find_all("region")) {
        const std::string ctx = "[design] region line " + std::to_string(e->line);
        auto cl = cfg::Clauses::parse(e->value, ctx, errors);
        DesignRegion reg;
        if (cl.has("box")) reg.box = cfg::parse_box(cl.at("box"), rc.dim, ctx, errors);
        else errors.push_back(ctx + ": region requires a box clause");
        if (cl.has("rho")) reg.rho = cfg::to_double(cl.at("rho").at(0), ctx);
        if (cl.has("xi"))
          for (const auto& t : cl.at("xi")) reg.xi.push_back(cfg::to_double(t, ctx));
        rc.regions.push_back(std::move(reg));
      }
    } else if (sec.name == "stage") {
      Stage st;
      st.steps = r.numbers("steps");
      auto bf = r.numbers("body_force");
      for (std::size_t d = 0; d < bf.size() && d < 3; ++d) st.body_force[d] = bf[d];
      for (const auto* e : r.find_all("dirichlet")) {
        const std::string ctx = "[stage] dirichlet line " + std::to_string(e->line);
        auto cl = cfg::Clauses::parse(e->value, ctx, errors);
        DirichletSpec d;
        if (cl.has("side") && !cl.at("side").empty()) {
          d.side = cl.at("side")[0];
        } else if (cl.has("box")) {
          d.box = cfg::parse_box(cl.at("box"), rc.dim, ctx, errors);
        } else {
          errors.push_back(ctx + ": needs box or side");
        }
        std::string axes = cl.has("axes") && !cl.at("axes").empty() ? cl.at("axes")[0] : "";
        if (axes.empty()) errors.push_back(ctx + ": needs axes");
        for (char a : axes) {
          if (a == 'x') d.axes[0] = true;
          else if (a == 'y') d.axes[1] = true;
          else if (a == 'z' && rc.dim == 3) d.axes[2] = true;
          else errors.push_back(ctx + ": bad axis '" + std::string(1, a) + "'");
        }
        if (cl.has("value")) {
          const auto& v = cl.at("value");
          int k = 0;
          for (int ax = 0; ax < 3; ++ax)
            if (d.axes[ax]) {
              if (k < static_cast<int>(v.size())) d.value[ax] = cfg::to_double(v[k], ctx);
              ++k;
            }
          if (k != static_cast<int>(v.size()))
            errors.push_back(ctx + ": value needs one entry per listed axis");
        }
        st.dirichlet.push_back(d);
      }
      for (const auto* e : r.find_all("neumann")) {
        const std::string ctx = "[stage] neumann line " + std::to_string(e->line);
        auto cl = cfg::Clauses::parse(e->value, ctx, errors);
        NeumannSpec nm;
        if (cl.has("side") && !cl.at("side").empty()) nm.side = cl.at("side")[0];
        else if (cl.has("box")) nm.box = cfg::parse_box(cl.at("box"), rc.dim, ctx, errors);
        else errors.push_back(ctx + ": needs box or side");
        if (cl.has("traction")) {
          const auto& v = cl.at("traction");
          for (std::size_t d2 = 0; d2 < v.size() && d2 < 3; ++d2)
            nm.traction[d2] = cfg::to_double(v[d2], ctx);
        } else {
          errors.push_back(ctx + ": needs traction");
        }
        st.neumann.push_back(nm);
      }
      rc.program.stages.push_back(std::move(st));
    } else if (sec.name == "solver") {
      rc.solver.max_newton = r.integer("max_newton", 30);
      rc.solver.eps_abs = r.number("eps_abs", 1e-9);
      rc.solver.eps_rel = r.number("eps_rel", 1e-8);
      rc.solver.max_search = r.integer("max_search", 10);
      rc.solver.eps_search = r.number("eps_search", 1.0);
      rc.solver.max_try = r.integer("max_try", 8);
      rc.solver.copts.consistency_tol = r.number("consistency_tol", 1e-12);
      rc.solver.copts.consistency_max_iter = r.integer("consistency_max_iter", 50);
      const std::string scheme = r.text("scheme", "isochoric");
      if (scheme == "isochoric") rc.solver.copts.scheme = UpdateScheme::Isochoric;
      else if (scheme == "classical") rc.solver.copts.scheme = UpdateScheme::Classical;
      else errors.push_back("[solver] scheme must be isochoric or classical");
    } else if (sec.name == "objective") {
      rc.weights.w_stiff = r.number("w_stiff", 0.0);
      rc.weights.w_force = r.number("w_force", 0.0);
      rc.weights.w_energy = r.number("w_energy", 1.0);
    } else if (sec.name == "constraints") {
      if (r.has("vol_total")) rc.constraints.vol_total = r.number("vol_total", 0.0);
      rc.constraints.vol_material = r.numbers("vol_material");
      if (r.has("price")) rc.constraints.price = r.number("price", 0.0);
      if (r.has("mass")) rc.constraints.mass = r.number("mass", 0.0);
      if (r.has("co2")) rc.constraints.co2 = r.number("co2", 0.0);
    } else if (sec.name == "optimizer") {
      rc.optimizer.max_iter = r.integer("max_iter", 300);
      rc.optimizer.tol_change = r.number("tol_change", 1e-3);
      rc.optimizer.mma.move = r.number("move", 0.2);
      rc.optimizer.beta_sched.start = r.number("beta_start", 1.0);
      rc.optimizer.beta_sched.factor = r.number("beta_factor", 2.0);
      rc.optimizer.beta_sched.every = r.integer("beta_every", 40);
      rc.optimizer.beta_sched.from = r.integer("beta_from", 41);
      rc.optimizer.beta_sched.cap = r.number("beta_cap", 512.0);
      rc.optimizer.pxi_sched.start = r.number("pxi_start", 1.0);
      rc.optimizer.pxi_sched.increment = r.number("pxi_increment", 0.25);
      rc.optimizer.pxi_sched.every = r.integer("pxi_every", 40);
      rc.optimizer.pxi_sched.from = r.integer("pxi_from", 41);
      rc.optimizer.pxi_sched.cap = r.number("pxi_cap", 3.0);
    } else if (sec.name == "output") {
      rc.out_dir = r.text("dir", "out");
      rc.vtk_every = r.integer("vtk_every", 0);
      const auto* e = r.find("monitor");
      if (e) {
        const std::string ctx = "[output] monitor";
        auto cl = cfg::Clauses::parse(e->value, ctx, errors);
        rc.monitor.defined = true;
        if (cl.has("side") && !cl.at("side").empty()) {
          rc.monitor.use_side = true;
          rc.monitor.side = cl.at("side")[0];
        } else if (cl.has("box")) {
          rc.monitor.box = cfg::parse_box(cl.at("box"), rc.dim, ctx, errors);
        } else {
          errors.push_back(ctx + ": needs side or box");
        }
        if (cl.has("axis") && !cl.at("axis").empty()) {
          const char a = cl.at("axis")[0][0];
          rc.monitor.axis = a == 'x' ? 0 : (a == 'y' ? 1 : 2);
        }
      }
    } else if (sec.name == "verify") {
      rc.verify_young = r.number("young", 1.0);
      rc.verify_poisson = r.number("poisson", 0.3);
      rc.verify_sigma_y = r.number("sigma_y", 0.2);
      rc.verify_schedule = r.numbers("schedule");
      rc.verify_threshold = r.number("threshold", 1e-8);
    } else if (sec.name == "fd") {
      rc.fd_samples = r.integer("samples", 8);
      rc.fd_eps = r.number("eps", 1e-5);
      const auto* e = r.find("functions");
      if (e) rc.fd_functions = cfg::tokens(e->value);
    } else {
      errors.push_back("unknown section [" + sec.name + "] at line " + std::to_string(sec.line));
      continue;
    }
    r.finish();
  }

  // materials: builtins by name plus customs, in listed order
  for (const auto& n : use_names) {
    bool found = false;
    for (const auto& m : builtins.materials)
      if (m.name == n) {
        rc.catalog.materials.push_back(m);
        found = true;
      }
    for (const auto& m : customs)
      if (m.name == n) {
        rc.catalog.materials.push_back(m);
        found = true;
      }
    if (!found) errors.push_back("[materials] unknown material '" + n + "'");
  }
  if (use_names.empty())
    for (const auto& m : customs) rc.catalog.materials.push_back(m);

  // cross-validation (skipped for configs that only feed verify-uniaxial)
  if (require_problem) {
    try {
      (void)rc.build_mesh();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    if (rc.catalog.materials.empty()) errors.push_back("no materials configured");
    if (rc.program.stages.empty()) errors.push_back("no [stage] sections");
    for (const auto& st : rc.program.stages)
      if (st.steps.empty()) errors.push_back("[stage] needs a steps list");
    try {
      rc.weights.validate();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    try {
      rc.params.validate();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    try {
      rc.catalog.validate();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    if (!rc.initial_xi.empty() && static_cast<int>(rc.initial_xi.size()) != rc.n_xi())
      errors.push_back("[design] initial_xi needs N_mat - 1 = " + std::to_string(rc.n_xi()) +
                       " entries");
    if (!rc.constraints.vol_material.empty() &&
        static_cast<int>(rc.constraints.vol_material.size()) !=
            static_cast<int>(rc.catalog.size()))
      errors.push_back("[constraints] vol_material needs one bound per material");
    if (rc.constraints.vol_total &&
        !(*rc.constraints.vol_total > 0.0 && *rc.constraints.vol_total <= 1.0))
      errors.push_back("[constraints] vol_total must lie in (0, 1]");
  }

  if (!errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return rc;
}

}  // namespace plastopt
