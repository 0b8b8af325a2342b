#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "tbs/mesh.hpp"
#include "tbs/vec3.hpp"

namespace tbs {

// Tet mesh with per-vertex parameters in the unit cube.
struct ParamVolume {
  TetMesh mesh;
  PatchTopology topo;
  std::vector<Vec3> params;           // (u,v,w) per vertex
  std::vector<char> inner_vertex_mask; // true iff vertex not on the mesh boundary
};

namespace detail {

// Unique undirected edges of the tet mesh as adjacency lists.
inline std::vector<std::vector<int>> tet_edge_graph(const TetMesh &m) {
  std::vector<std::set<int>> adj(m.vertices.size());
  static const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (const auto &t : m.tets)
    for (const auto &p : pairs) {
      adj[size_t(t[size_t(p[0])])].insert(t[size_t(p[1])]);
      adj[size_t(t[size_t(p[1])])].insert(t[size_t(p[0])]);
    }
  std::vector<std::vector<int>> out(adj.size());
  for (size_t i = 0; i < adj.size(); ++i)
    out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

// Jacobi-preconditioned conjugate gradient on the uniform graph Laplacian
// with Dirichlet values eliminated. Solves one scalar field.
inline void solve_graph_laplacian(const std::vector<std::vector<int>> &adj,
                                  const std::vector<char> &is_fixed, std::vector<double> &value) {
  const int n = int(adj.size());
  std::vector<int> free_ids;
  std::vector<int> index_of(n, -1);
  for (int i = 0; i < n; ++i)
    if (!is_fixed[size_t(i)]) {
      index_of[size_t(i)] = int(free_ids.size());
      free_ids.push_back(i);
    }
  const int nf = int(free_ids.size());
  if (nf == 0)
    return;

  std::vector<double> diag(nf), b(nf, 0.0);
  for (int r = 0; r < nf; ++r) {
    int i = free_ids[size_t(r)];
    if (adj[size_t(i)].empty())
      throw Error("singular system: isolated vertex");
    diag[size_t(r)] = double(adj[size_t(i)].size());
    for (int j : adj[size_t(i)])
      if (is_fixed[size_t(j)])
        b[size_t(r)] += value[size_t(j)];
  }

  auto apply = [&](const std::vector<double> &x, std::vector<double> &out) {
    for (int r = 0; r < nf; ++r) {
      int i = free_ids[size_t(r)];
      double s = diag[size_t(r)] * x[size_t(r)];
      for (int j : adj[size_t(i)]) {
        int c = index_of[size_t(j)];
        if (c >= 0)
          s -= x[size_t(c)];
      }
      out[size_t(r)] = s;
    }
  };

  std::vector<double> x(nf, 0.0), r(nf), z(nf), p(nf), Ap(nf);
  apply(x, Ap);
  double bnorm = 0.0;
  for (int i = 0; i < nf; ++i) {
    r[size_t(i)] = b[size_t(i)] - Ap[size_t(i)];
    bnorm += b[size_t(i)] * b[size_t(i)];
  }
  bnorm = std::sqrt(bnorm);
  double tol = 1e-10 * std::max(bnorm, 1.0);
  double rz = 0.0;
  for (int i = 0; i < nf; ++i) {
    z[size_t(i)] = r[size_t(i)] / diag[size_t(i)];
    p[size_t(i)] = z[size_t(i)];
    rz += r[size_t(i)] * z[size_t(i)];
  }
  const int max_iters = 10 * std::max(n, 1);
  for (int it = 0; it < max_iters; ++it) {
    double rnorm = 0.0;
    for (double v : r)
      rnorm += v * v;
    if (std::sqrt(rnorm) <= tol)
      break;
    apply(p, Ap);
    double pAp = 0.0;
    for (int i = 0; i < nf; ++i)
      pAp += p[size_t(i)] * Ap[size_t(i)];
    if (pAp <= 0.0)
      throw Error("singular system: conjugate gradient breakdown");
    double alpha = rz / pAp;
    for (int i = 0; i < nf; ++i) {
      x[size_t(i)] += alpha * p[size_t(i)];
      r[size_t(i)] -= alpha * Ap[size_t(i)];
    }
    double rz_new = 0.0;
    for (int i = 0; i < nf; ++i) {
      z[size_t(i)] = r[size_t(i)] / diag[size_t(i)];
      rz_new += r[size_t(i)] * z[size_t(i)];
    }
    double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < nf; ++i)
      p[size_t(i)] = z[size_t(i)] + beta * p[size_t(i)];
  }
  for (int i = 0; i < nf; ++i)
    value[size_t(free_ids[size_t(i)])] = x[size_t(i)];
}

} // namespace detail

// Harmonic map of the tet mesh into [0,1]^3: corners to cube corners,
// polylines by chord length along cube edges, patch boundaries by 2D
// harmonic face maps, interior by a 3D uniform-Laplacian solve.
inline ParamVolume parameterize_volume(const TetMesh &mesh, const PatchTopology &topo) {
  ParamVolume pv;
  pv.mesh = mesh;
  pv.topo = topo;
  const int n = mesh.num_vertices();
  pv.params.assign(n, Vec3{0, 0, 0});

  std::vector<char> on_boundary(n, 0);
  for (const auto &t : mesh.boundary_tris)
    for (int v : t)
      on_boundary[size_t(v)] = 1;
  pv.inner_vertex_mask.resize(n);
  for (int i = 0; i < n; ++i)
    pv.inner_vertex_mask[size_t(i)] = !on_boundary[size_t(i)];

  std::vector<char> pinned(n, 0); // corner/polyline vertices with full params

  // corners
  for (int code = 0; code < 8; ++code) {
    int v = topo.corner_vertices[size_t(code)];
    pv.params[size_t(v)] = Vec3{double(code & 1), double((code >> 1) & 1), double((code >> 2) & 1)};
    pinned[size_t(v)] = 1;
  }

  // polylines: chord length along the free axis
  for (const Polyline &pl : topo.boundary_polylines) {
    double total = 0.0;
    std::vector<double> acc(pl.verts.size(), 0.0);
    for (size_t i = 1; i < pl.verts.size(); ++i) {
      total += norm(mesh.vertices[size_t(pl.verts[i])] - mesh.vertices[size_t(pl.verts[i - 1])]);
      acc[i] = total;
    }
    if (total <= 0.0)
      throw Error("boundary condition conflict: zero-length polyline");
    for (size_t i = 0; i < pl.verts.size(); ++i) {
      Vec3 p;
      p[pl.free_axis] = (i == 0) ? 0.0 : (i + 1 == pl.verts.size() ? 1.0 : acc[i] / total);
      p[pl.fixed_axes[0]] = double(pl.fixed_sides[0]);
      p[pl.fixed_axes[1]] = double(pl.fixed_sides[1]);
      int v = pl.verts[i];
      if (pinned[size_t(v)] && norm(pv.params[size_t(v)] - p) > 1e-12 && (i == 0 || i + 1 == pl.verts.size()))
        throw Error("boundary condition conflict at corner vertex");
      pv.params[size_t(v)] = p;
      pinned[size_t(v)] = 1;
    }
  }

  // per-patch 2D harmonic face maps
  std::vector<std::vector<int>> patch_tris(6);
  for (size_t t = 0; t < mesh.boundary_tris.size(); ++t)
    patch_tris[size_t(mesh.patch_label[t])].push_back(int(t));
  for (int l = 0; l < 6; ++l) {
    CubeFace face = topo.patch_to_face[size_t(l)];
    int a1 = (face.axis + 1) % 3, a2 = (face.axis + 2) % 3;
    if (a1 > a2)
      std::swap(a1, a2);
    std::set<int> vert_set;
    std::map<int, std::set<int>> adj;
    for (int t : patch_tris[size_t(l)]) {
      const auto &tr = mesh.boundary_tris[size_t(t)];
      for (int e = 0; e < 3; ++e) {
        adj[tr[size_t(e)]].insert(tr[size_t((e + 1) % 3)]);
        adj[tr[size_t((e + 1) % 3)]].insert(tr[size_t(e)]);
        vert_set.insert(tr[size_t(e)]);
      }
    }
    std::vector<int> verts(vert_set.begin(), vert_set.end());
    std::vector<int> local_of(n, -1);
    for (size_t i = 0; i < verts.size(); ++i)
      local_of[size_t(verts[i])] = int(i);
    std::vector<std::vector<int>> ladj(verts.size());
    std::vector<char> lfixed(verts.size(), 0);
    for (size_t i = 0; i < verts.size(); ++i) {
      for (int j : adj[verts[i]])
        ladj[i].push_back(local_of[size_t(j)]);
      lfixed[i] = pinned[size_t(verts[i])];
    }
    for (int axis : {a1, a2}) {
      std::vector<double> val(verts.size(), 0.0);
      for (size_t i = 0; i < verts.size(); ++i)
        if (lfixed[i])
          val[i] = pv.params[size_t(verts[i])][axis];
      detail::solve_graph_laplacian(ladj, lfixed, val);
      for (size_t i = 0; i < verts.size(); ++i)
        if (!lfixed[i])
          pv.params[size_t(verts[i])][axis] = val[i];
    }
    for (size_t i = 0; i < verts.size(); ++i)
      if (!lfixed[i])
        pv.params[size_t(verts[i])][face.axis] = double(face.side);
  }

  // interior: 3D harmonic with the full boundary as Dirichlet data
  std::vector<std::vector<int>> adj = detail::tet_edge_graph(mesh);
  {
    // reachability guard: interior components must see the boundary
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int i = 0; i < n; ++i)
      if (on_boundary[size_t(i)]) {
        seen[size_t(i)] = 1;
        stack.push_back(i);
      }
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int j : adj[size_t(v)])
        if (!seen[size_t(j)]) {
          seen[size_t(j)] = 1;
          stack.push_back(j);
        }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[size_t(i)])
        throw Error("singular system: interior vertex disconnected from boundary");
  }
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> val(n, 0.0);
    for (int i = 0; i < n; ++i)
      if (on_boundary[size_t(i)])
        val[size_t(i)] = pv.params[size_t(i)][axis];
    detail::solve_graph_laplacian(adj, on_boundary, val);
    for (int i = 0; i < n; ++i)
      if (!on_boundary[size_t(i)])
        pv.params[size_t(i)][axis] = val[size_t(i)];
  }
  return pv;
}

// Fraction of tets whose parameter-space orientation is positive
// (reported, not enforced; validity is carried by the fitting stages).
inline double positive_orientation_ratio(const ParamVolume &pv) {
  int pos = 0;
  for (const auto &t : pv.mesh.tets) {
    double vol = tet_volume(pv.params[size_t(t[0])], pv.params[size_t(t[1])],
                            pv.params[size_t(t[2])], pv.params[size_t(t[3])]);
    if (vol > 0.0)
      ++pos;
  }
  return pv.mesh.tets.empty() ? 1.0 : double(pos) / double(pv.mesh.tets.size());
}

// Parameters of the polyline's vertices along its cube-edge coordinate.
inline std::vector<double> polyline_parameters(const ParamVolume &pv, const Polyline &pl) {
  std::vector<double> t;
  t.reserve(pl.verts.size());
  for (int v : pl.verts)
    t.push_back(pv.params[size_t(v)][pl.free_axis]);
  if (t.empty() || t.front() != 0.0 || t.back() != 1.0)
    throw Error("polyline parameters must span [0,1]");
  for (size_t i = 1; i < t.size(); ++i) {
    if (t[i] == t[i - 1])
      throw Error("repeated parameter on polyline");
    if (t[i] < t[i - 1])
      throw Error("non-monotone edge coordinate on polyline");
  }
  return t;
}

struct PatchParam {
  int vertex = -1;
  double u = 0.0, v = 0.0; // the two free face coordinates, ascending axis order
};

// Face parameters of the patch's inner vertices (not on polylines/corners).
inline std::vector<PatchParam> patch_parameters(const ParamVolume &pv, PatchLabel label) {
  CubeFace face = pv.topo.face(label);
  int a1 = (face.axis + 1) % 3, a2 = (face.axis + 2) % 3;
  if (a1 > a2)
    std::swap(a1, a2);
  std::set<int> on_other_patch;
  std::set<int> patch_verts;
  for (size_t t = 0; t < pv.mesh.boundary_tris.size(); ++t)
    for (int v : pv.mesh.boundary_tris[t]) {
      if (pv.mesh.patch_label[t] == int(label))
        patch_verts.insert(v);
      else
        on_other_patch.insert(v);
    }
  std::vector<PatchParam> out;
  for (int v : patch_verts) {
    if (on_other_patch.count(v))
      continue; // polyline or corner vertex
    const Vec3 &p = pv.params[size_t(v)];
    if (std::fabs(p[face.axis] - double(face.side)) > 1e-9)
      throw Error("patch vertex off its cube face");
    out.push_back({v, p[a1], p[a2]});
  }
  return out;
}

// Binned point location in parameter space with barycentric interpolation
// of model positions. Queries outside every tet fall back to the nearest
// candidate when the barycentric violation stays below 1e-8.
class ParamPointLocator {
public:
  explicit ParamPointLocator(const ParamVolume &pv, int bins = 16) : pv_(pv), bins_(bins) {
    cells_.resize(size_t(bins_) * bins_ * bins_);
    for (int t = 0; t < pv.mesh.num_tets(); ++t) {
      Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
      for (int v : pv.mesh.tets[size_t(t)])
        for (int c = 0; c < 3; ++c) {
          lo[c] = std::min(lo[c], pv.params[size_t(v)][c]);
          hi[c] = std::max(hi[c], pv.params[size_t(v)][c]);
        }
      int b0[3], b1[3];
      for (int c = 0; c < 3; ++c) {
        b0[c] = std::clamp(int(lo[c] * bins_) - 0, 0, bins_ - 1);
        b1[c] = std::clamp(int(hi[c] * bins_) + 0, 0, bins_ - 1);
      }
      for (int i = b0[0]; i <= b1[0]; ++i)
        for (int j = b0[1]; j <= b1[1]; ++j)
          for (int k = b0[2]; k <= b1[2]; ++k)
            cells_[cell_index(i, j, k)].push_back(t);
    }
  }

  // Model-space position of parameter point p.
  Vec3 locate(const Vec3 &p) const {
    int bi = std::clamp(int(p.x * bins_), 0, bins_ - 1);
    int bj = std::clamp(int(p.y * bins_), 0, bins_ - 1);
    int bk = std::clamp(int(p.z * bins_), 0, bins_ - 1);
    double best_violation = 1e30;
    Vec3 best_bary;
    int best_tet = -1;
    auto try_tet = [&](int t) {
      const auto &T = pv_.mesh.tets[size_t(t)];
      const Vec3 &p0 = pv_.params[size_t(T[0])];
      Vec3 cols[3] = {pv_.params[size_t(T[1])] - p0, pv_.params[size_t(T[2])] - p0,
                      pv_.params[size_t(T[3])] - p0};
      // solve cols * b = p - p0 (columns as matrix)
      std::array<Vec3, 3> rows = {Vec3{cols[0].x, cols[1].x, cols[2].x},
                                  Vec3{cols[0].y, cols[1].y, cols[2].y},
                                  Vec3{cols[0].z, cols[1].z, cols[2].z}};
      Vec3 b;
      if (!solve3(rows, p - p0, b))
        return;
      double b0 = 1.0 - b.x - b.y - b.z;
      double viol = std::max({-b0, -b.x, -b.y, -b.z, 0.0});
      if (viol < best_violation) {
        best_violation = viol;
        best_bary = b;
        best_tet = t;
      }
    };
    for (int t : cells_[cell_index(bi, bj, bk)])
      try_tet(t);
    if (best_tet < 0 || best_violation > 1e-10) {
      // widen: scan every tet before giving up
      for (int t = 0; t < pv_.mesh.num_tets(); ++t)
        try_tet(t);
    }
    if (best_tet < 0 || best_violation > 1e-8)
      throw Error("point location failed: parameter point outside the mesh");
    const auto &T = pv_.mesh.tets[size_t(best_tet)];
    Vec3 b = best_bary;
    double b0 = 1.0 - b.x - b.y - b.z;
    return pv_.mesh.vertices[size_t(T[0])] * b0 + pv_.mesh.vertices[size_t(T[1])] * b.x +
           pv_.mesh.vertices[size_t(T[2])] * b.y + pv_.mesh.vertices[size_t(T[3])] * b.z;
  }

private:
  size_t cell_index(int i, int j, int k) const {
    return (size_t(i) * bins_ + j) * bins_ + k;
  }
  const ParamVolume &pv_;
  int bins_;
  std::vector<std::vector<int>> cells_;
};

// --- .uvw sidecar ----------------------------------------------------------

inline void save_uvw(const std::vector<Vec3> &params, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  char buf[96];
  for (const Vec3 &p : params) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    f << buf;
  }
}

inline std::vector<Vec3> load_uvw(const std::string &path, size_t expected) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open: " + path);
  std::vector<Vec3> out(expected);
  for (Vec3 &p : out)
    if (!(f >> p.x >> p.y >> p.z))
      throw Error("uvw sidecar truncated: " + path);
  return out;
}

// Bypass: adopt an externally computed parameterization.
inline ParamVolume parameterize_from_sidecar(const TetMesh &mesh, const PatchTopology &topo,
                                             const std::string &uvw_path) {
  ParamVolume pv;
  pv.mesh = mesh;
  pv.topo = topo;
  pv.params = load_uvw(uvw_path, mesh.vertices.size());
  std::vector<char> on_boundary(mesh.vertices.size(), 0);
  for (const auto &t : mesh.boundary_tris)
    for (int v : t)
      on_boundary[size_t(v)] = 1;
  pv.inner_vertex_mask.resize(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    pv.inner_vertex_mask[i] = !on_boundary[i];
    for (int c = 0; c < 3; ++c)
      if (pv.params[i][c] < -1e-9 || pv.params[i][c] > 1.0 + 1e-9)
        throw Error("uvw sidecar: parameter outside the unit cube");
  }
  return pv;
}

} // namespace tbs
