#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tbs/vec3.hpp"

namespace tbs {

// Boundary patch labels; file refs 1..6 map to U,D,L,R,F,B in this order.
enum class PatchLabel : int { U = 0, D, L, R, F, B };

inline const char *patch_name(int label) {
  static const char *names[6] = {"U", "D", "L", "R", "F", "B"};
  return names[label];
}

enum class MeshFormat { medit_mesh, tetgen_pair, vtk_legacy };

struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::array<int, 3>> boundary_tris; // outward oriented, smallest id first
  std::vector<int> patch_label;                  // per boundary tri, 0..5

  int num_vertices() const { return int(vertices.size()); }
  int num_tets() const { return int(tets.size()); }
};

inline double tet_volume(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &d) {
  return triple(b - a, c - a, d - a) / 6.0;
}

inline double tet_volume(const TetMesh &m, int t) {
  const auto &T = m.tets[t];
  return tet_volume(m.vertices[T[0]], m.vertices[T[1]], m.vertices[T[2]], m.vertices[T[3]]);
}

namespace detail {

inline std::array<int, 3> sorted_tri(std::array<int, 3> t) {
  std::sort(t.begin(), t.end());
  return t;
}

// Outward faces of a positively oriented tet v0 v1 v2 v3.
inline std::array<std::array<int, 3>, 4> tet_faces(const std::array<int, 4> &t) {
  return {{{t[1], t[2], t[3]}, {t[0], t[3], t[2]}, {t[0], t[1], t[3]}, {t[0], t[2], t[1]}}};
}

// Rotate so the smallest vertex id comes first, orientation preserved.
inline std::array<int, 3> rotate_min_first(std::array<int, 3> f) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (f[i] < f[k])
      k = i;
  return {f[k], f[(k + 1) % 3], f[(k + 2) % 3]};
}

} // namespace detail

// Outward-oriented boundary faces recomputed from the tets. Throws on a
// non-manifold face (shared by more than two tets).
inline std::vector<std::array<int, 3>> extract_boundary(const TetMesh &m) {
  std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> faces;
  for (const auto &t : m.tets)
    for (const auto &f : detail::tet_faces(t)) {
      auto key = detail::sorted_tri(f);
      auto it = faces.find(key);
      if (it == faces.end())
        faces[key] = {1, f};
      else
        it->second.first += 1;
    }
  std::vector<std::array<int, 3>> boundary;
  for (const auto &[key, v] : faces) {
    if (v.first > 2)
      throw Error("non-manifold boundary: face shared by more than two tets");
    if (v.first == 1)
      boundary.push_back(detail::rotate_min_first(v.second));
  }
  return boundary; // map iteration gives sorted-key order
}

// Canonical internal order: positively oriented tets sorted by sorted vertex
// tuple; boundary faces outward oriented, sorted by sorted tuple.
inline void canonicalize(TetMesh &m) {
  for (auto &t : m.tets) {
    double vol = tet_volume(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]],
                            m.vertices[t[3]]);
    if (vol == 0.0)
      throw Error("degenerate tet with zero volume");
    if (vol < 0.0)
      std::swap(t[2], t[3]);
  }
  std::vector<int> order(m.tets.size());
  for (size_t i = 0; i < order.size(); ++i)
    order[i] = int(i);
  auto tet_key = [&](int i) {
    std::array<int, 4> k = m.tets[i];
    std::sort(k.begin(), k.end());
    return k;
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return tet_key(a) < tet_key(b); });
  std::vector<std::array<int, 4>> tets(m.tets.size());
  for (size_t i = 0; i < order.size(); ++i)
    tets[i] = m.tets[order[i]];
  m.tets = tets;

  if (!m.boundary_tris.empty()) {
    std::vector<int> tri_order(m.boundary_tris.size());
    for (size_t i = 0; i < tri_order.size(); ++i)
      tri_order[i] = int(i);
    std::sort(tri_order.begin(), tri_order.end(), [&](int a, int b) {
      return detail::sorted_tri(m.boundary_tris[a]) < detail::sorted_tri(m.boundary_tris[b]);
    });
    std::vector<std::array<int, 3>> tris(m.boundary_tris.size());
    std::vector<int> labels(m.boundary_tris.size());
    for (size_t i = 0; i < tri_order.size(); ++i) {
      tris[i] = detail::rotate_min_first(m.boundary_tris[tri_order[i]]);
      labels[i] = m.patch_label.empty() ? -1 : m.patch_label[tri_order[i]];
    }
    m.boundary_tris = tris;
    if (!m.patch_label.empty())
      m.patch_label = labels;
  }
}

// Validates all TetMesh invariants. Patch-graph problems raise the
// "patch graph not cube-like" error the loaders surface.
inline void validate(const TetMesh &m) {
  const int nv = m.num_vertices();
  for (const auto &t : m.tets)
    for (int v : t)
      if (v < 0 || v >= nv)
        throw Error("tet vertex index out of range");
  for (int t = 0; t < m.num_tets(); ++t)
    if (tet_volume(m, t) <= 0.0)
      throw Error("tet with non-positive volume");

  std::vector<std::array<int, 3>> boundary = extract_boundary(m);
  if (boundary.size() != m.boundary_tris.size())
    throw Error("boundary triangles do not match mesh boundary");
  std::set<std::array<int, 3>> keys;
  for (const auto &f : boundary)
    keys.insert(detail::sorted_tri(f));
  for (const auto &f : m.boundary_tris)
    if (!keys.count(detail::sorted_tri(f)))
      throw Error("boundary triangles do not match mesh boundary");

  if (m.patch_label.size() != m.boundary_tris.size())
    throw Error("missing or incomplete patch labels");
  for (int l : m.patch_label)
    if (l < 0 || l > 5)
      throw Error("missing or incomplete patch labels");

  // six nonempty, edge-connected classes with cube-like adjacency
  std::array<int, 6> count{};
  for (int l : m.patch_label)
    ++count[size_t(l)];
  for (int l = 0; l < 6; ++l)
    if (count[size_t(l)] == 0)
      throw Error("patch graph not cube-like: patch " + std::string(patch_name(l)) + " empty");

  std::map<std::array<int, 2>, std::vector<int>> edge_tris; // boundary edge -> tri ids
  for (int t = 0; t < int(m.boundary_tris.size()); ++t) {
    const auto &f = m.boundary_tris[size_t(t)];
    for (int e = 0; e < 3; ++e) {
      std::array<int, 2> key{std::min(f[e], f[(e + 1) % 3]), std::max(f[e], f[(e + 1) % 3])};
      edge_tris[key].push_back(t);
    }
  }
  for (const auto &[e, ts] : edge_tris)
    if (ts.size() != 2)
      throw Error("non-manifold boundary: edge not shared by exactly two triangles");

  // connectivity per class by BFS over shared edges
  for (int l = 0; l < 6; ++l) {
    int seed = -1;
    for (int t = 0; t < int(m.boundary_tris.size()); ++t)
      if (m.patch_label[size_t(t)] == l) {
        seed = t;
        break;
      }
    std::vector<char> seen(m.boundary_tris.size(), 0);
    std::vector<int> stack{seed};
    seen[size_t(seed)] = 1;
    int reached = 0;
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      ++reached;
      const auto &f = m.boundary_tris[size_t(t)];
      for (int e = 0; e < 3; ++e) {
        std::array<int, 2> key{std::min(f[e], f[(e + 1) % 3]), std::max(f[e], f[(e + 1) % 3])};
        for (int o : edge_tris[key])
          if (!seen[size_t(o)] && m.patch_label[size_t(o)] == l) {
            seen[size_t(o)] = 1;
            stack.push_back(o);
          }
      }
    }
    if (reached != count[size_t(l)])
      throw Error("patch graph not cube-like: patch " + std::string(patch_name(l)) +
                  " not edge-connected");
  }

  // adjacency graph must be the cube face graph: 4 neighbours each, the
  // three non-adjacent pairs form a perfect matching
  std::array<std::array<bool, 6>, 6> adj{};
  for (const auto &[e, ts] : edge_tris) {
    int a = m.patch_label[size_t(ts[0])], b = m.patch_label[size_t(ts[1])];
    if (a != b)
      adj[size_t(a)][size_t(b)] = adj[size_t(b)][size_t(a)] = true;
  }
  for (int l = 0; l < 6; ++l) {
    int deg = 0;
    for (int o = 0; o < 6; ++o)
      deg += adj[size_t(l)][size_t(o)] ? 1 : 0;
    if (deg != 4)
      throw Error("patch graph not cube-like: patch " + std::string(patch_name(l)) +
                  " borders " + std::to_string(deg) + " patches");
  }
}

// --- patch topology -------------------------------------------------------

struct CubeFace {
  int axis = 0; // 0=u, 1=v, 2=w
  int side = 0; // 0 or 1
};

struct Polyline {
  std::vector<int> verts; // ordered, corner to corner
  int free_axis = 0;
  std::array<int, 2> fixed_axes{};
  std::array<int, 2> fixed_sides{};
};

struct PatchTopology {
  std::array<int, 8> corner_vertices{}; // indexed by cx | cy<<1 | cz<<2
  std::vector<Polyline> boundary_polylines; // 12, canonical cube-edge order
  std::array<CubeFace, 6> patch_to_face{};  // per PatchLabel

  CubeFace face(PatchLabel l) const { return patch_to_face[size_t(int(l))]; }

  // canonical polyline index for cube edge (free axis, sides of the two
  // other axes in ascending order)
  static int edge_index(int free_axis, int side_b, int side_c) {
    return free_axis * 4 + side_b * 2 + side_c;
  }
};

namespace detail {

// All 48 signed axis permutations as candidate face assignments.
inline std::vector<std::array<CubeFace, 6>> face_assignments() {
  static const std::array<CubeFace, 6> base = {{{2, 1}, {2, 0}, {0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  std::vector<std::array<CubeFace, 6>> out;
  int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (auto &p : perms)
    for (int flips = 0; flips < 8; ++flips) {
      std::array<CubeFace, 6> a;
      for (int l = 0; l < 6; ++l) {
        CubeFace f = base[size_t(l)];
        int axis = p[f.axis];
        int side = f.side ^ ((flips >> axis) & 1);
        a[size_t(l)] = {axis, side};
      }
      out.push_back(a);
    }
  return out;
}

} // namespace detail

// Corners, polylines and the patch -> cube-face assignment. The assignment
// starts from U->w=1, D->w=0, L->u=0, R->u=1, F->v=0, B->v=1 and is rotated
// to maximize label-adjacency consistency (lexicographically first winner).
inline PatchTopology extract_patch_topology(const TetMesh &m) {
  validate(m);

  std::map<std::array<int, 2>, std::vector<int>> edge_tris;
  for (int t = 0; t < int(m.boundary_tris.size()); ++t) {
    const auto &f = m.boundary_tris[size_t(t)];
    for (int e = 0; e < 3; ++e) {
      std::array<int, 2> key{std::min(f[e], f[(e + 1) % 3]), std::max(f[e], f[(e + 1) % 3])};
      edge_tris[key].push_back(t);
    }
  }

  // crease edges (between two differently labeled patches) and per-vertex labels
  std::map<std::array<int, 2>, std::array<int, 2>> crease; // edge -> label pair (sorted)
  std::map<int, std::set<int>> vertex_labels;
  for (const auto &[e, ts] : edge_tris) {
    int a = m.patch_label[size_t(ts[0])], b = m.patch_label[size_t(ts[1])];
    if (a != b)
      crease[e] = {std::min(a, b), std::max(a, b)};
  }
  for (int t = 0; t < int(m.boundary_tris.size()); ++t)
    for (int v : m.boundary_tris[size_t(t)])
      vertex_labels[v].insert(m.patch_label[size_t(t)]);

  // corners: vertices with three incident labels
  std::vector<int> corners;
  for (const auto &[v, ls] : vertex_labels)
    if (ls.size() >= 3) {
      if (ls.size() > 3)
        throw Error("ambiguous corner detection: vertex touches more than 3 patches");
      corners.push_back(v);
    }
  if (corners.size() != 8)
    throw Error("ambiguous corner detection: expected 8 corners, found " +
                std::to_string(corners.size()));
  for (int c : corners) {
    int valence = 0;
    for (const auto &[e, lp] : crease)
      if (e[0] == c || e[1] == c)
        ++valence;
    if (valence != 3)
      throw Error("ambiguous corner detection: corner valence != 3");
  }

  // face assignment: prefer the fixed default, rotate for consistency
  std::array<std::array<bool, 6>, 6> adj{};
  for (const auto &[e, lp] : crease)
    adj[size_t(lp[0])][size_t(lp[1])] = adj[size_t(lp[1])][size_t(lp[0])] = true;
  auto assignments = detail::face_assignments();
  int best = -1, best_score = -1;
  for (int i = 0; i < int(assignments.size()); ++i) {
    const auto &a = assignments[size_t(i)];
    int score = 0;
    for (int l1 = 0; l1 < 6; ++l1)
      for (int l2 = l1 + 1; l2 < 6; ++l2)
        if (adj[size_t(l1)][size_t(l2)] && a[size_t(l1)].axis != a[size_t(l2)].axis)
          ++score;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  if (best_score < 12)
    throw Error("patch graph not cube-like: no consistent cube-face assignment");
  PatchTopology topo;
  topo.patch_to_face = assignments[size_t(best)];

  // cube coordinates of each corner from its three incident patches
  auto corner_code = [&](int v) {
    std::array<int, 3> coord{-1, -1, -1};
    for (int l : vertex_labels[v]) {
      CubeFace f = topo.patch_to_face[size_t(l)];
      coord[size_t(f.axis)] = f.side;
    }
    if (coord[0] < 0 || coord[1] < 0 || coord[2] < 0)
      throw Error("ambiguous corner detection: corner misses an axis");
    return coord[0] | (coord[1] << 1) | (coord[2] << 2);
  };
  std::array<int, 8> corner_of;
  corner_of.fill(-1);
  for (int v : corners) {
    int code = corner_code(v);
    if (corner_of[size_t(code)] != -1)
      throw Error("ambiguous corner detection: duplicate cube corner");
    corner_of[size_t(code)] = v;
  }
  topo.corner_vertices = corner_of;

  // polylines: crease edges grouped by label pair, walked corner to corner
  topo.boundary_polylines.resize(12);
  std::map<std::array<int, 2>, std::vector<std::array<int, 2>>> by_pair;
  for (const auto &[e, lp] : crease)
    by_pair[lp].push_back(e);
  std::set<int> corner_set(corners.begin(), corners.end());
  for (const auto &[lp, edges] : by_pair) {
    CubeFace f1 = topo.patch_to_face[size_t(lp[0])], f2 = topo.patch_to_face[size_t(lp[1])];
    if (f1.axis == f2.axis)
      throw Error("patch graph not cube-like: opposite faces share a boundary");
    int free_axis = 3 - f1.axis - f2.axis;
    std::array<int, 2> fixed_axes{std::min(f1.axis, f2.axis), std::max(f1.axis, f2.axis)};
    std::array<int, 2> fixed_sides{};
    fixed_sides[0] = (fixed_axes[0] == f1.axis) ? f1.side : f2.side;
    fixed_sides[1] = (fixed_axes[1] == f1.axis) ? f1.side : f2.side;

    std::map<int, std::vector<int>> next;
    for (const auto &e : edges) {
      next[e[0]].push_back(e[1]);
      next[e[1]].push_back(e[0]);
    }
    // endpoints: the two corner vertices on this polyline
    std::vector<int> ends;
    for (const auto &[v, ns] : next)
      if (corner_set.count(v))
        ends.push_back(v);
    if (ends.size() != 2)
      throw Error("patch boundary polyline does not connect two corners");
    // orient from the corner with free-axis coordinate 0
    int start = ends[0], stop = ends[1];
    if ((corner_code(start) >> free_axis) & 1)
      std::swap(start, stop);
    if (((corner_code(start) >> free_axis) & 1) != 0 ||
        ((corner_code(stop) >> free_axis) & 1) != 1)
      throw Error("patch boundary polyline endpoints inconsistent with faces");

    Polyline pl;
    pl.free_axis = free_axis;
    pl.fixed_axes = fixed_axes;
    pl.fixed_sides = fixed_sides;
    pl.verts.push_back(start);
    int prev = -1, cur = start;
    while (cur != stop) {
      const auto &ns = next[cur];
      int nxt = -1;
      for (int cand : ns)
        if (cand != prev) {
          nxt = cand;
          break;
        }
      if (nxt == -1 || int(pl.verts.size()) > int(edges.size()) + 1)
        throw Error("patch boundary polyline is not a simple path");
      prev = cur;
      cur = nxt;
      pl.verts.push_back(cur);
    }
    if (pl.verts.size() != edges.size() + 1)
      throw Error("patch boundary polyline is not a simple path");
    int idx = PatchTopology::edge_index(free_axis, fixed_sides[0], fixed_sides[1]);
    topo.boundary_polylines[size_t(idx)] = pl;
  }
  for (const auto &pl : topo.boundary_polylines)
    if (pl.verts.empty())
      throw Error("patch graph not cube-like: missing boundary polyline");
  return topo;
}

// --- file io ---------------------------------------------------------------

namespace detail {

inline void write_coord(std::ofstream &f, const Vec3 &p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x, p.y, p.z);
  f << buf;
}

inline void save_medit(const TetMesh &m, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  f << "MeshVersionFormatted 2\nDimension 3\n";
  f << "Vertices\n" << m.vertices.size() << "\n";
  for (const Vec3 &p : m.vertices) {
    write_coord(f, p);
    f << " 0\n";
  }
  f << "Triangles\n" << m.boundary_tris.size() << "\n";
  for (size_t t = 0; t < m.boundary_tris.size(); ++t) {
    const auto &tr = m.boundary_tris[t];
    f << tr[0] + 1 << " " << tr[1] + 1 << " " << tr[2] + 1 << " " << m.patch_label[t] + 1
      << "\n";
  }
  f << "Tetrahedra\n" << m.tets.size() << "\n";
  for (const auto &t : m.tets)
    f << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << " " << t[3] + 1 << " 0\n";
  f << "End\n";
}

inline TetMesh load_medit(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open: " + path);
  TetMesh m;
  std::string tok;
  while (f >> tok) {
    if (tok == "MeshVersionFormatted" || tok == "Dimension") {
      int dummy;
      f >> dummy;
    } else if (tok == "Vertices") {
      size_t n;
      f >> n;
      m.vertices.resize(n);
      for (Vec3 &p : m.vertices) {
        int ref;
        if (!(f >> p.x >> p.y >> p.z >> ref))
          throw Error("medit parse failure in Vertices: " + path);
      }
    } else if (tok == "Triangles") {
      size_t n;
      f >> n;
      m.boundary_tris.resize(n);
      m.patch_label.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int a, b, c, ref;
        if (!(f >> a >> b >> c >> ref))
          throw Error("medit parse failure in Triangles: " + path);
        m.boundary_tris[i] = {a - 1, b - 1, c - 1};
        if (ref < 1 || ref > 6)
          throw Error("missing or incomplete patch labels");
        m.patch_label[i] = ref - 1;
      }
    } else if (tok == "Tetrahedra") {
      size_t n;
      f >> n;
      m.tets.resize(n);
      for (auto &t : m.tets) {
        int ref;
        if (!(f >> t[0] >> t[1] >> t[2] >> t[3] >> ref))
          throw Error("medit parse failure in Tetrahedra: " + path);
        for (int &v : t)
          v -= 1;
      }
    } else if (tok == "End") {
      break;
    } else {
      throw Error("medit parse failure: unknown section '" + tok + "' in " + path);
    }
  }
  if (m.vertices.empty() || m.tets.empty())
    throw Error("medit parse failure: no vertices or tets in " + path);
  return m;
}

inline void save_tetgen(const TetMesh &m, const std::string &base) {
  {
    std::ofstream f(base + ".node");
    if (!f)
      throw Error("cannot open for write: " + base + ".node");
    f << m.vertices.size() << " 3 0 0\n";
    for (size_t i = 0; i < m.vertices.size(); ++i) {
      f << i + 1 << " ";
      write_coord(f, m.vertices[i]);
      f << "\n";
    }
  }
  {
    std::ofstream f(base + ".ele");
    if (!f)
      throw Error("cannot open for write: " + base + ".ele");
    f << m.tets.size() << " 4 0\n";
    for (size_t i = 0; i < m.tets.size(); ++i)
      f << i + 1 << " " << m.tets[i][0] + 1 << " " << m.tets[i][1] + 1 << " "
        << m.tets[i][2] + 1 << " " << m.tets[i][3] + 1 << "\n";
  }
  {
    // one label per boundary triangle; triangles ordered by sorted vertex ids
    std::ofstream f(base + ".labels");
    if (!f)
      throw Error("cannot open for write: " + base + ".labels");
    f << m.boundary_tris.size() << "\n";
    for (size_t i = 0; i < m.boundary_tris.size(); ++i)
      f << m.patch_label[i] + 1 << "\n";
  }
}

inline TetMesh load_tetgen(const std::string &base) {
  TetMesh m;
  {
    std::ifstream f(base + ".node");
    if (!f)
      throw Error("cannot open: " + base + ".node");
    size_t n;
    int dim, nattr, nbnd;
    if (!(f >> n >> dim >> nattr >> nbnd) || dim != 3)
      throw Error("tetgen parse failure in .node header");
    m.vertices.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int id;
      Vec3 p;
      if (!(f >> id >> p.x >> p.y >> p.z))
        throw Error("tetgen parse failure in .node");
      for (int a = 0; a < nattr + nbnd; ++a) {
        double skip;
        f >> skip;
      }
      if (id < 1 || size_t(id) > n)
        throw Error("tetgen parse failure: node ids must be 1-based");
      m.vertices[size_t(id - 1)] = p;
    }
  }
  {
    std::ifstream f(base + ".ele");
    if (!f)
      throw Error("cannot open: " + base + ".ele");
    size_t n;
    int per, nattr;
    if (!(f >> n >> per >> nattr) || per != 4)
      throw Error("tetgen parse failure in .ele header");
    m.tets.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int id;
      std::array<int, 4> t;
      if (!(f >> id >> t[0] >> t[1] >> t[2] >> t[3]))
        throw Error("tetgen parse failure in .ele");
      for (int a = 0; a < nattr; ++a) {
        double skip;
        f >> skip;
      }
      for (int &v : t)
        v -= 1;
      m.tets[size_t(id - 1)] = t;
    }
  }
  // boundary from the tets, in the documented sorted order, then the sidecar
  for (auto &t : m.tets) {
    double vol = tet_volume(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]],
                            m.vertices[t[3]]);
    if (vol < 0.0)
      std::swap(t[2], t[3]);
  }
  m.boundary_tris = extract_boundary(m);
  {
    std::ifstream f(base + ".labels");
    if (!f)
      throw Error("missing or incomplete patch labels (no .labels sidecar)");
    size_t n;
    if (!(f >> n) || n != m.boundary_tris.size())
      throw Error("missing or incomplete patch labels (count mismatch)");
    m.patch_label.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int ref;
      if (!(f >> ref) || ref < 1 || ref > 6)
        throw Error("missing or incomplete patch labels");
      m.patch_label[i] = ref - 1;
    }
  }
  return m;
}

inline void save_vtk(const TetMesh &m, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  f << "# vtk DataFile Version 3.0\ntbs tet mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << m.vertices.size() << " double\n";
  for (const Vec3 &p : m.vertices) {
    write_coord(f, p);
    f << "\n";
  }
  size_t ncells = m.tets.size() + m.boundary_tris.size();
  f << "CELLS " << ncells << " " << 5 * m.tets.size() + 4 * m.boundary_tris.size() << "\n";
  for (const auto &t : m.tets)
    f << "4 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  for (const auto &t : m.boundary_tris)
    f << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  f << "CELL_TYPES " << ncells << "\n";
  for (size_t i = 0; i < m.tets.size(); ++i)
    f << "10\n";
  for (size_t i = 0; i < m.boundary_tris.size(); ++i)
    f << "5\n";
  f << "CELL_DATA " << ncells << "\nSCALARS patch int 1\nLOOKUP_TABLE default\n";
  for (size_t i = 0; i < m.tets.size(); ++i)
    f << "0\n";
  for (int l : m.patch_label)
    f << l + 1 << "\n";
}

inline TetMesh load_vtk(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open: " + path);
  std::string line;
  std::getline(f, line);
  if (line.rfind("# vtk DataFile", 0) != 0)
    throw Error("vtk parse failure: bad header in " + path);
  std::getline(f, line); // title
  std::getline(f, line);
  if (line.rfind("ASCII", 0) != 0)
    throw Error("vtk parse failure: only ASCII supported");
  std::getline(f, line);
  if (line.find("UNSTRUCTURED_GRID") == std::string::npos)
    throw Error("vtk parse failure: expected unstructured grid");

  TetMesh m;
  std::string tok;
  std::vector<int> cell_types;
  std::vector<std::vector<int>> cells;
  std::vector<int> patch;
  while (f >> tok) {
    if (tok == "POINTS") {
      size_t n;
      std::string type;
      f >> n >> type;
      m.vertices.resize(n);
      for (Vec3 &p : m.vertices)
        if (!(f >> p.x >> p.y >> p.z))
          throw Error("vtk parse failure in POINTS");
    } else if (tok == "CELLS") {
      size_t n, total;
      f >> n >> total;
      cells.resize(n);
      for (auto &c : cells) {
        int cnt;
        if (!(f >> cnt))
          throw Error("vtk parse failure in CELLS");
        c.resize(size_t(cnt));
        for (int &v : c)
          f >> v;
      }
    } else if (tok == "CELL_TYPES") {
      size_t n;
      f >> n;
      cell_types.resize(n);
      for (int &t : cell_types)
        f >> t;
    } else if (tok == "CELL_DATA") {
      size_t n;
      f >> n;
    } else if (tok == "SCALARS") {
      std::string name, type;
      int comps = 1;
      f >> name >> type;
      if (f.peek() != '\n')
        f >> comps;
      std::string lut, dflt;
      f >> lut >> dflt; // LOOKUP_TABLE default
      if (name != "patch")
        throw Error("vtk parse failure: expected SCALARS patch");
      patch.resize(cells.size());
      for (int &v : patch)
        f >> v;
    } else {
      // ignore unknown trailing tokens
    }
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cell_types[i] == 10) {
      if (cells[i].size() != 4)
        throw Error("vtk parse failure: tet cell with wrong vertex count");
      m.tets.push_back({cells[i][0], cells[i][1], cells[i][2], cells[i][3]});
    } else if (cell_types[i] == 5) {
      if (cells[i].size() != 3)
        throw Error("vtk parse failure: triangle cell with wrong vertex count");
      m.boundary_tris.push_back({cells[i][0], cells[i][1], cells[i][2]});
      if (patch.empty() || patch[i] < 1 || patch[i] > 6)
        throw Error("missing or incomplete patch labels");
      m.patch_label.push_back(patch[i] - 1);
    } else {
      throw Error("vtk parse failure: unsupported cell type");
    }
  }
  if (m.tets.empty())
    throw Error("vtk parse failure: no tets");
  return m;
}

} // namespace detail

// Loads, canonicalizes and validates a labeled tet mesh.
inline TetMesh load_tet_mesh(const std::string &path, MeshFormat format) {
  TetMesh m;
  switch (format) {
  case MeshFormat::medit_mesh: m = detail::load_medit(path); break;
  case MeshFormat::tetgen_pair: m = detail::load_tetgen(path); break;
  case MeshFormat::vtk_legacy: m = detail::load_vtk(path); break;
  }
  canonicalize(m);
  validate(m);
  return m;
}

inline void save_tet_mesh(const TetMesh &m, const std::string &path, MeshFormat format) {
  switch (format) {
  case MeshFormat::medit_mesh: detail::save_medit(m, path); break;
  case MeshFormat::tetgen_pair: detail::save_tetgen(m, path); break;
  case MeshFormat::vtk_legacy: detail::save_vtk(m, path); break;
  }
}

} // namespace tbs
