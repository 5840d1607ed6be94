#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "plastopt/common.hpp"
#include "plastopt/tensor.hpp"

namespace plastopt {

// Axis-aligned box predicate on reference coordinates, the node/facet
// selector used by boundary conditions and design regions.
struct Box {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{0.0, 0.0, 0.0};

  bool contains(const std::array<double, 3>& x, double tol) const {
    for (int d = 0; d < 3; ++d)
      if (x[d] < lo[d] - tol || x[d] > hi[d] + tol) return false;
    return true;
  }
};

// Structured first-order quad/hex mesh on a uniform lattice. The element
// geometry is affine and identical across the mesh, so one reference
// quadrature table (weights and physical shape-function gradients) serves
// every element.
struct Mesh {
  int dim = 2;
  std::array<int, 3> counts{1, 1, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  double thickness = 1.0;  // out-of-plane thickness, 2D only

  std::vector<std::array<double, 3>> nodes;
  std::vector<int> conn;  // nen entries per element
  int nen = 4;

  std::array<double, 3> h{0.0, 0.0, 0.0};  // lattice spacing
  double elem_volume = 0.0;                // physical volume incl. thickness

  // quadrature: per point, weight*detJ*thickness and gradients dN/dX
  int nqp = 4;
  std::vector<double> qweight;                          // nqp
  std::vector<std::array<double, 3>> qgrad;             // nqp * nen
  std::vector<double> qshape;                           // nqp * nen

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elems() const { return static_cast<int>(conn.size()) / nen; }
  int n_dofs() const { return dim * n_nodes(); }
  int n_qp_total() const { return n_elems() * nqp; }
  const int* elem_conn(int e) const { return conn.data() + static_cast<std::size_t>(e) * nen; }

  double selector_tol() const {
    return 1e-9 * std::max({lengths[0], lengths[1], lengths[2]});
  }

  std::array<double, 3> elem_centroid(int e) const {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    const int* cn = elem_conn(e);
    for (int a = 0; a < nen; ++a)
      for (int d = 0; d < 3; ++d) c[d] += nodes[cn[a]][d] / nen;
    return c;
  }

  std::vector<int> select_nodes(const Box& box) const {
    std::vector<int> ids;
    const double tol = selector_tol();
    for (int i = 0; i < n_nodes(); ++i)
      if (box.contains(nodes[i], tol)) ids.push_back(i);
    return ids;
  }
  std::vector<int> select_elems(const Box& box) const {
    std::vector<int> ids;
    const double tol = selector_tol();
    for (int e = 0; e < n_elems(); ++e)
      if (box.contains(elem_centroid(e), tol)) ids.push_back(e);
    return ids;
  }

  // Boundary side boxes by name (xmin, xmax, ymin, ymax, zmin, zmax).
  Box side_box(const std::string& side) const {
    Box b;
    for (int d = 0; d < 3; ++d) { b.lo[d] = 0.0; b.hi[d] = lengths[d]; }
    if (dim == 2) { b.lo[2] = -1.0; b.hi[2] = 1.0; }
    if (side == "xmin") b.hi[0] = 0.0;
    else if (side == "xmax") b.lo[0] = lengths[0];
    else if (side == "ymin") b.hi[1] = 0.0;
    else if (side == "ymax") b.lo[1] = lengths[1];
    else if (side == "zmin" && dim == 3) b.hi[2] = 0.0;
    else if (side == "zmax" && dim == 3) b.lo[2] = lengths[2];
    else throw ConfigError("unknown mesh side '" + side + "'");
    return b;
  }
};

namespace detail {
// 2-point Gauss rule per axis on the bi/tri-linear reference element.
inline void build_quadrature(Mesh& m) {
  const double g = 1.0 / std::sqrt(3.0);
  const int nax = m.dim;
  m.nqp = nax == 2 ? 4 : 8;
  m.nen = nax == 2 ? 4 : 8;
  m.qweight.assign(m.nqp, 0.0);
  m.qgrad.assign(static_cast<std::size_t>(m.nqp) * m.nen, {0.0, 0.0, 0.0});
  m.qshape.assign(static_cast<std::size_t>(m.nqp) * m.nen, 0.0);

  const double hx = m.h[0], hy = m.h[1], hz = m.h[2];
  const double detJ = nax == 2 ? 0.25 * hx * hy : 0.125 * hx * hy * hz;
  const double wthick = nax == 2 ? m.thickness : 1.0;

  // reference nodes of the quad/hex in the VTK ordering
  const int nodes2[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  const int nodes3[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                            {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

  int q = 0;
  const int nq1 = 2;
  for (int kz = 0; kz < (nax == 3 ? nq1 : 1); ++kz)
    for (int ky = 0; ky < nq1; ++ky)
      for (int kx = 0; kx < nq1; ++kx, ++q) {
        const double xi = (kx == 0 ? -g : g);
        const double eta = (ky == 0 ? -g : g);
        const double zeta = (kz == 0 ? -g : g);
        m.qweight[q] = detJ * wthick;  // unit Gauss weights (2-pt rule)
        for (int a = 0; a < m.nen; ++a) {
          double N, dxi, deta, dzeta;
          if (nax == 2) {
            const double sa = nodes2[a][0], ta = nodes2[a][1];
            N = 0.25 * (1.0 + sa * xi) * (1.0 + ta * eta);
            dxi = 0.25 * sa * (1.0 + ta * eta);
            deta = 0.25 * ta * (1.0 + sa * xi);
            dzeta = 0.0;
          } else {
            const double sa = nodes3[a][0], ta = nodes3[a][1], ua = nodes3[a][2];
            N = 0.125 * (1.0 + sa * xi) * (1.0 + ta * eta) * (1.0 + ua * zeta);
            dxi = 0.125 * sa * (1.0 + ta * eta) * (1.0 + ua * zeta);
            deta = 0.125 * ta * (1.0 + sa * xi) * (1.0 + ua * zeta);
            dzeta = 0.125 * ua * (1.0 + sa * xi) * (1.0 + ta * eta);
          }
          m.qshape[static_cast<std::size_t>(q) * m.nen + a] = N;
          // dN/dX = dN/dxi * 2/h (affine map xi = 2(X - Xc)/h)
          m.qgrad[static_cast<std::size_t>(q) * m.nen + a] = {
              dxi * 2.0 / hx, deta * 2.0 / hy, nax == 3 ? dzeta * 2.0 / hz : 0.0};
        }
      }
}
}  // namespace detail

inline Mesh build_structured_mesh(int dim, std::array<int, 3> counts,
                                  std::array<double, 3> lengths, double thickness = 1.0) {
  if (dim != 2 && dim != 3) throw ConfigError("mesh dimension must be 2 or 3");
  Mesh m;
  m.dim = dim;
  m.counts = counts;
  m.lengths = lengths;
  m.thickness = thickness;
  if (dim == 2) { m.counts[2] = 1; m.lengths[2] = 0.0; }
  for (int d = 0; d < dim; ++d) {
    if (m.counts[d] < 1) throw ConfigError("mesh counts must be >= 1");
    if (!(m.lengths[d] > 0.0)) throw ConfigError("mesh lengths must be > 0");
    m.h[d] = m.lengths[d] / m.counts[d];
  }
  if (dim == 2 && !(thickness > 0.0)) throw ConfigError("mesh thickness must be > 0");

  const int nx = m.counts[0], ny = m.counts[1], nz = dim == 3 ? m.counts[2] : 0;
  const int nnx = nx + 1, nny = ny + 1, nnz = dim == 3 ? nz + 1 : 1;
  m.nodes.reserve(static_cast<std::size_t>(nnx) * nny * nnz);
  for (int k = 0; k < nnz; ++k)
    for (int j = 0; j < nny; ++j)
      for (int i = 0; i < nnx; ++i)
        m.nodes.push_back({i * m.h[0], j * m.h[1], dim == 3 ? k * m.h[2] : 0.0});

  auto nid = [&](int i, int j, int k) { return (k * nny + j) * nnx + i; };
  if (dim == 2) {
    m.nen = 4;
    m.conn.reserve(static_cast<std::size_t>(nx) * ny * 4);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        m.conn.push_back(nid(i, j, 0));
        m.conn.push_back(nid(i + 1, j, 0));
        m.conn.push_back(nid(i + 1, j + 1, 0));
        m.conn.push_back(nid(i, j + 1, 0));
      }
    m.elem_volume = m.h[0] * m.h[1] * thickness;
  } else {
    m.nen = 8;
    m.conn.reserve(static_cast<std::size_t>(nx) * ny * nz * 8);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          m.conn.push_back(nid(i, j, k));
          m.conn.push_back(nid(i + 1, j, k));
          m.conn.push_back(nid(i + 1, j + 1, k));
          m.conn.push_back(nid(i, j + 1, k));
          m.conn.push_back(nid(i, j, k + 1));
          m.conn.push_back(nid(i + 1, j, k + 1));
          m.conn.push_back(nid(i + 1, j + 1, k + 1));
          m.conn.push_back(nid(i, j + 1, k + 1));
        }
    m.elem_volume = m.h[0] * m.h[1] * m.h[2];
  }
  detail::build_quadrature(m);
  return m;
}

// Boundary condition program. Nominal values are scaled by the per-step
// multipliers; a multi-stage program swaps boundary sets between stages and
// the state carries over.
struct DirichletSpec {
  std::string side;  // named mesh side; empty means use box
  Box box;
  std::array<bool, 3> axes{false, false, false};
  std::array<double, 3> value{0.0, 0.0, 0.0};  // nominal displacement
};

struct NeumannSpec {
  std::string side;  // named mesh side; empty means use box
  Box box;
  std::array<double, 3> traction{0.0, 0.0, 0.0};  // nominal, force/area
};

struct Stage {
  std::vector<DirichletSpec> dirichlet;
  std::vector<NeumannSpec> neumann;
  std::array<double, 3> body_force{0.0, 0.0, 0.0};  // nominal, force/volume
  std::vector<double> steps;  // multipliers applied in order
};

struct LoadProgram {
  std::vector<Stage> stages;

  void validate() const {
    if (stages.empty()) throw ConfigError("load program has no stages");
    for (const auto& st : stages)
      if (st.steps.empty()) throw ConfigError("stage has no load steps");
  }
};

// Dirichlet data resolved against a mesh: constrained dofs with nominal
// values, plus the nominal external force vector of the Neumann terms.
struct ResolvedStage {
  std::vector<int> fixed_dofs;            // sorted, unique
  std::vector<double> fixed_values;       // nominal value per fixed dof
  std::vector<double> fext_nominal;       // length n_dofs
  std::array<double, 3> body_force{0.0, 0.0, 0.0};
  std::vector<char> is_fixed;             // length n_dofs
};

inline ResolvedStage resolve_stage(const Mesh& mesh, const Stage& stage) {
  ResolvedStage r;
  const int nd = mesh.n_dofs();
  r.fext_nominal.assign(nd, 0.0);
  r.is_fixed.assign(nd, 0);
  std::vector<double> value(nd, 0.0);

  for (const auto& d : stage.dirichlet) {
    const Box box = d.side.empty() ? d.box : mesh.side_box(d.side);
    const auto ids = mesh.select_nodes(box);
    if (ids.empty()) throw ConfigError("dirichlet selector resolves to an empty node set");
    for (int n : ids)
      for (int ax = 0; ax < mesh.dim; ++ax)
        if (d.axes[ax]) {
          const int dof = n * mesh.dim + ax;
          r.is_fixed[dof] = 1;
          value[dof] = d.value[ax];
        }
  }
  for (int dof = 0; dof < nd; ++dof)
    if (r.is_fixed[dof]) {
      r.fixed_dofs.push_back(dof);
      r.fixed_values.push_back(value[dof]);
    }

  // Tractions: constant per facet, integrated exactly by equal lumping over
  // the facet nodes of each boundary element face.
  for (const auto& nm : stage.neumann) {
    const Box box = nm.side.empty() ? nm.box : mesh.side_box(nm.side);
    const auto ids = mesh.select_nodes(box);
    if (ids.empty()) throw ConfigError("neumann selector resolves to an empty node set");
    // facet area share per node: build from boundary faces fully inside box
    const double tol = mesh.selector_tol();
    auto node_in = [&](int n) { return box.contains(mesh.nodes[n], tol); };
    const int nx = mesh.counts[0], ny = mesh.counts[1], nz = mesh.dim == 3 ? mesh.counts[2] : 1;
    const int nnx = nx + 1, nny = ny + 1;
    auto nid = [&](int i, int j, int k) { return (k * nny + j) * nnx + i; };
    auto add_face = [&](const std::vector<int>& face_nodes, double area) {
      for (int n : face_nodes)
        if (!node_in(n)) return;
      for (int n : face_nodes)
        for (int ax = 0; ax < mesh.dim; ++ax)
          r.fext_nominal[n * mesh.dim + ax] +=
              nm.traction[ax] * area / static_cast<double>(face_nodes.size());
    };
    if (mesh.dim == 2) {
      const double az = mesh.thickness;
      for (int i = 0; i < nx; ++i) {  // ymin / ymax edges
        add_face({nid(i, 0, 0), nid(i + 1, 0, 0)}, mesh.h[0] * az);
        add_face({nid(i, ny, 0), nid(i + 1, ny, 0)}, mesh.h[0] * az);
      }
      for (int j = 0; j < ny; ++j) {  // xmin / xmax edges
        add_face({nid(0, j, 0), nid(0, j + 1, 0)}, mesh.h[1] * az);
        add_face({nid(nx, j, 0), nid(nx, j + 1, 0)}, mesh.h[1] * az);
      }
    } else {
      for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
          add_face({nid(0, j, k), nid(0, j + 1, k), nid(0, j + 1, k + 1), nid(0, j, k + 1)},
                   mesh.h[1] * mesh.h[2]);
          add_face({nid(nx, j, k), nid(nx, j + 1, k), nid(nx, j + 1, k + 1), nid(nx, j, k + 1)},
                   mesh.h[1] * mesh.h[2]);
        }
      for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
          add_face({nid(i, 0, k), nid(i + 1, 0, k), nid(i + 1, 0, k + 1), nid(i, 0, k + 1)},
                   mesh.h[0] * mesh.h[2]);
          add_face({nid(i, ny, k), nid(i + 1, ny, k), nid(i + 1, ny, k + 1), nid(i, ny, k + 1)},
                   mesh.h[0] * mesh.h[2]);
        }
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          add_face({nid(i, j, 0), nid(i + 1, j, 0), nid(i + 1, j + 1, 0), nid(i, j + 1, 0)},
                   mesh.h[0] * mesh.h[1]);
          add_face({nid(i, j, nz), nid(i + 1, j, nz), nid(i + 1, j + 1, nz), nid(i, j + 1, nz)},
                   mesh.h[0] * mesh.h[1]);
        }
    }
  }
  r.body_force = stage.body_force;
  return r;
}

}  // namespace plastopt
