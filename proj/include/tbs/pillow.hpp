#pragma once

#include <array>
#include <map>
#include <vector>

#include "tbs/mesh.hpp"
#include "tbs/param.hpp"
#include "tbs/vec3.hpp"

namespace tbs {

// Seven-block pillow structure: central cube C = [1/3,2/3]^3 plus six
// square frusta. Ids follow the patch labels of the face each frustum
// touches.
enum class SubId : int { C = 0, U, D, L, R, F, B };

inline const char *sub_name(SubId s) {
  static const char *names[7] = {"C", "U", "D", "L", "R", "F", "B"};
  return names[size_t(int(s))];
}

struct SubDomain {
  SubId id = SubId::C;
  // corners indexed by local (a | b<<1 | c<<2); trilinear image of [0,1]^3
  std::array<Vec3, 8> corner_params{};

  Vec3 trilinear(const Vec3 &local) const {
    double u = local.x, v = local.y, w = local.z;
    Vec3 p{0, 0, 0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          double wgt = (a ? u : 1 - u) * (b ? v : 1 - v) * (c ? w : 1 - w);
          p += corner_params[size_t(a | (b << 1) | (c << 2))] * wgt;
        }
    return p;
  }

  void trilinear_partials(const Vec3 &local, Vec3 &du, Vec3 &dv, Vec3 &dw) const {
    double u = local.x, v = local.y, w = local.z;
    du = dv = dw = Vec3{0, 0, 0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          const Vec3 &cp = corner_params[size_t(a | (b << 1) | (c << 2))];
          double fu = a ? 1.0 : -1.0, fv = b ? 1.0 : -1.0, fw = c ? 1.0 : -1.0;
          du += cp * (fu * (b ? v : 1 - v) * (c ? w : 1 - w));
          dv += cp * ((a ? u : 1 - u) * fv * (c ? w : 1 - w));
          dw += cp * ((a ? u : 1 - u) * (b ? v : 1 - v) * fw);
        }
  }
};

namespace detail {

constexpr double kThird = 1.0 / 3.0;
constexpr double kTwoThird = 2.0 / 3.0;

// radial axis and outer side of each frustum (C has none)
inline void frustum_axis(SubId s, int &axis, int &side) {
  switch (s) {
  case SubId::U: axis = 2; side = 1; break;
  case SubId::D: axis = 2; side = 0; break;
  case SubId::L: axis = 0; side = 0; break;
  case SubId::R: axis = 0; side = 1; break;
  case SubId::F: axis = 1; side = 0; break;
  case SubId::B: axis = 1; side = 1; break;
  default: throw Error("frustum_axis: not a frustum");
  }
}

} // namespace detail

inline std::array<SubDomain, 7> build_subdomains() {
  std::array<SubDomain, 7> out;
  for (int s = 0; s < 7; ++s)
    out[size_t(s)].id = SubId(s);
  for (int code = 0; code < 8; ++code) {
    double a = code & 1, b = (code >> 1) & 1, c = (code >> 2) & 1;
    out[0].corner_params[size_t(code)] = Vec3{detail::kThird + a / 3.0, detail::kThird + b / 3.0,
                                              detail::kThird + c / 3.0};
  }
  for (int si = 1; si < 7; ++si) {
    SubId s = SubId(si);
    int axis, side;
    detail::frustum_axis(s, axis, side);
    for (int code = 0; code < 8; ++code) {
      std::array<double, 3> local = {double(code & 1), double((code >> 1) & 1),
                                     double((code >> 2) & 1)};
      // local coordinate along the radial axis: 1 is the inner face for
      // side-0 frusta, 0 is the inner face for side-1 frusta
      bool inner = side == 1 ? (local[size_t(axis)] == 0.0) : (local[size_t(axis)] == 1.0);
      Vec3 p;
      for (int ax = 0; ax < 3; ++ax) {
        if (ax == axis)
          p[ax] = inner ? (side ? detail::kTwoThird : detail::kThird) : double(side);
        else
          p[ax] = inner ? detail::kThird + local[size_t(ax)] / 3.0 : local[size_t(ax)];
      }
      out[size_t(si)].corner_params[size_t(code)] = p;
    }
  }
  return out;
}

// Deterministic classification with boundary priority C > U > D > L > R > F > B.
inline SubId classify_param(const Vec3 &p) {
  for (int c = 0; c < 3; ++c)
    if (p[c] < -1e-12 || p[c] > 1.0 + 1e-12)
      throw Error("classify_param: point outside the unit cube");
  const double x = p.x, y = p.y, z = p.z;
  auto inC = [&] {
    return x >= detail::kThird && x <= detail::kTwoThird && y >= detail::kThird &&
           y <= detail::kTwoThird && z >= detail::kThird && z <= detail::kTwoThird;
  };
  if (inC())
    return SubId::C;
  if (z >= detail::kTwoThird && z >= x && z >= 1 - x && z >= y && z >= 1 - y)
    return SubId::U;
  if (z <= detail::kThird && z <= x && z <= 1 - x && z <= y && z <= 1 - y)
    return SubId::D;
  if (x <= detail::kThird && x <= z && x <= 1 - z && x <= y && x <= 1 - y)
    return SubId::L;
  if (x >= detail::kTwoThird && x >= z && x >= 1 - z && x >= y && x >= 1 - y)
    return SubId::R;
  if (y <= detail::kThird && y <= x && y <= 1 - x && y <= z && y <= 1 - z)
    return SubId::F;
  if (y >= detail::kTwoThird && y >= x && y >= 1 - x && y >= z && y >= 1 - z)
    return SubId::B;
  throw Error("classify_param: unreachable point (outside the tiling)");
}

// Closed-form inverse of the trilinear map of each sub-domain; the frusta
// taper linearly along their radial axis. Residual is at rounding level.
inline Vec3 localize_param(SubId s, const Vec3 &p) {
  if (s == SubId::C)
    return (p - Vec3{detail::kThird, detail::kThird, detail::kThird}) * 3.0;
  int axis, side;
  detail::frustum_axis(s, axis, side);
  Vec3 local;
  double r;
  if (side == 1) {
    r = 3.0 * p[axis] - 2.0;
    local[axis] = r;
    for (int ax = 0; ax < 3; ++ax)
      if (ax != axis)
        local[ax] = (3.0 * p[ax] - (1.0 - r)) / (1.0 + 2.0 * r);
  } else {
    r = 3.0 * p[axis];
    local[axis] = r;
    for (int ax = 0; ax < 3; ++ax)
      if (ax != axis)
        local[ax] = (3.0 * p[ax] - r) / (3.0 - 2.0 * r);
  }
  return local;
}

// Volume of the sub-domain hexahedron (2x2x2 Gauss, exact for trilinear).
inline double subdomain_volume(const SubDomain &sd) {
  static const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double vol = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        Vec3 du, dv, dw;
        sd.trilinear_partials({g[i], g[j], g[k]}, du, dv, dw);
        vol += triple(du, dv, dw) / 8.0;
      }
  return vol;
}

// --- partition -------------------------------------------------------------

struct SubVolume {
  SubId id = SubId::C;
  TetMesh mesh;                    // model space, boundary labeled by local faces
  std::vector<Vec3> local_params;  // per vertex, in [0,1]^3
  std::vector<Vec3> global_params; // per vertex, in the global cube
  std::vector<int> pool_vertex;    // partition-wide vertex id (interface matching)
  int param_orientation_flips = 0; // pieces whose param/model orientations disagree
};

struct PartitionResult {
  std::array<SubVolume, 7> subvols;
  int degenerate_discarded = 0;
};

namespace detail {

struct ClipPlane {
  Vec3 n;
  double d; // plane n.p = d
};

// global plane registry: 6 box planes + 6 diagonal planes
inline const std::array<ClipPlane, 12> &clip_planes() {
  static const std::array<ClipPlane, 12> planes = {{
      {{1, 0, 0}, kThird},    // 0: x = 1/3
      {{1, 0, 0}, kTwoThird}, // 1: x = 2/3
      {{0, 1, 0}, kThird},    // 2: y = 1/3
      {{0, 1, 0}, kTwoThird}, // 3: y = 2/3
      {{0, 0, 1}, kThird},    // 4: z = 1/3
      {{0, 0, 1}, kTwoThird}, // 5: z = 2/3
      {{1, 0, -1}, 0},        // 6: x - z = 0
      {{1, 0, 1}, 1},         // 7: x + z = 1
      {{0, 1, -1}, 0},        // 8: y - z = 0
      {{0, 1, 1}, 1},         // 9: y + z = 1
      {{1, -1, 0}, 0},        // 10: x - y = 0
      {{1, 1, 0}, 1},         // 11: x + y = 1
  }};
  return planes;
}

struct HalfSpace {
  int plane;
  int keep; // +1 keeps n.p >= d, -1 keeps n.p <= d
};

inline const std::vector<HalfSpace> &subdomain_halfspaces(SubId s) {
  static const std::array<std::vector<HalfSpace>, 7> hs = {{
      /*C*/ {{0, +1}, {1, -1}, {2, +1}, {3, -1}, {4, +1}, {5, -1}},
      /*U*/ {{5, +1}, {6, -1}, {7, +1}, {8, -1}, {9, +1}},
      /*D*/ {{4, -1}, {6, +1}, {7, -1}, {8, +1}, {9, -1}},
      /*L*/ {{0, -1}, {6, -1}, {7, -1}, {10, -1}, {11, -1}},
      /*R*/ {{1, +1}, {6, +1}, {7, +1}, {10, +1}, {11, +1}},
      /*F*/ {{2, -1}, {8, -1}, {9, -1}, {10, +1}, {11, -1}},
      /*B*/ {{3, +1}, {8, +1}, {9, +1}, {10, -1}, {11, +1}},
  }};
  return hs[size_t(int(s))];
}

// Clip-side snapping tolerance: wider than parameterization solver noise so
// lattice-aligned vertices classify as on-plane instead of spawning slivers.
constexpr double kClipSnap = 1e-9;

struct ClipPool {
  std::vector<Vec3> params;
  std::vector<Vec3> models;
  std::map<std::array<int, 3>, int> cut_cache; // (min id, max id, plane) -> vertex
  std::map<std::array<long long, 3>, std::vector<int>> position_index;

  void build_position_index() {
    for (int i = 0; i < int(params.size()); ++i)
      position_index[quantize(params[size_t(i)])].push_back(i);
  }

  static std::array<long long, 3> quantize(const Vec3 &p) {
    return {llround(p.x * 1e10), llround(p.y * 1e10), llround(p.z * 1e10)};
  }

  // Position-based dedup: the same interface point may be produced through
  // different clip-plane chains; unify those copies into one pool vertex.
  int find_or_add(const Vec3 &param, const Vec3 &model) {
    std::array<long long, 3> q = quantize(param);
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = position_index.find({q[0] + dx, q[1] + dy, q[2] + dz});
          if (it == position_index.end())
            continue;
          for (int id : it->second)
            if (norm(params[size_t(id)] - param) < 1e-11)
              return id;
        }
    int id = int(params.size());
    params.push_back(param);
    models.push_back(model);
    position_index[q].push_back(id);
    return id;
  }

  int cut(int v1, int v2, int plane_id) {
    if (v1 > v2)
      std::swap(v1, v2);
    std::array<int, 3> key{v1, v2, plane_id};
    auto it = cut_cache.find(key);
    if (it != cut_cache.end())
      return it->second;
    const ClipPlane &pl = clip_planes()[size_t(plane_id)];
    double s1 = dot(pl.n, params[size_t(v1)]) - pl.d;
    double s2 = dot(pl.n, params[size_t(v2)]) - pl.d;
    double t = s1 / (s1 - s2);
    Vec3 param = params[size_t(v1)] + (params[size_t(v2)] - params[size_t(v1)]) * t;
    Vec3 model = models[size_t(v1)] + (models[size_t(v2)] - models[size_t(v1)]) * t;
    int id = find_or_add(param, model);
    cut_cache[key] = id;
    return id;
  }
};

// Convex polyhedron as face loops of pool vertex ids. Clipping cuts whole
// faces and adds one cap face per plane, so no Steiner vertices appear on
// the section; both sides of a shared plane see identical vertex sets.
struct ClipPoly {
  std::vector<std::vector<int>> faces;

  bool empty() const { return faces.size() < 4; }

  std::vector<int> vertex_set() const {
    std::vector<int> vs;
    for (const auto &f : faces)
      vs.insert(vs.end(), f.begin(), f.end());
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    return vs;
  }
};

inline ClipPoly poly_from_tet(const std::array<int, 4> &t) {
  ClipPoly p;
  p.faces = {{t[1], t[2], t[3]}, {t[0], t[3], t[2]}, {t[0], t[1], t[3]}, {t[0], t[2], t[1]}};
  return p;
}

// Sutherland-Hodgman on every face, then chain the on-plane edges into the
// cap face. Returns an empty polyhedron when nothing is kept.
inline ClipPoly clip_poly(ClipPool &pool, const ClipPoly &poly, const HalfSpace &hs) {
  const ClipPlane &pl = clip_planes()[size_t(hs.plane)];
  auto side = [&](int v) {
    double s = double(hs.keep) * (dot(pl.n, pool.params[size_t(v)]) - pl.d);
    return std::fabs(s) < kClipSnap ? 0.0 : s;
  };

  ClipPoly out;
  std::map<int, std::vector<int>> section_adj;
  bool any_negative = false;
  for (const auto &face : poly.faces) {
    std::vector<int> kept;
    const int n = int(face.size());
    for (int e = 0; e < n; ++e) {
      int a = face[size_t(e)], b = face[size_t((e + 1) % n)];
      double sa = side(a), sb = side(b);
      if (sa < 0)
        any_negative = true;
      if (sa >= 0)
        kept.push_back(a);
      if ((sa > 0 && sb < 0) || (sa < 0 && sb > 0))
        kept.push_back(pool.cut(a, b, hs.plane));
    }
    // clean consecutive duplicates
    std::vector<int> clean;
    for (int v : kept)
      if (clean.empty() || clean.back() != v)
        clean.push_back(v);
    while (clean.size() > 1 && clean.front() == clean.back())
      clean.pop_back();
    if (clean.size() < 3)
      continue;
    // record on-plane edges for the cap
    for (size_t e = 0; e < clean.size(); ++e) {
      int a = clean[e], b = clean[(e + 1) % clean.size()];
      if (side(a) == 0.0 && side(b) == 0.0) {
        section_adj[a].push_back(b);
        section_adj[b].push_back(a);
      }
    }
    out.faces.push_back(std::move(clean));
  }
  if (out.faces.empty())
    return ClipPoly{};
  if (!any_negative)
    return poly; // untouched
  // cap face: walk the section cycle
  if (section_adj.size() >= 3) {
    int start = section_adj.begin()->first;
    std::vector<int> cap{start};
    int prev = -1, cur = start;
    for (size_t guard = 0; guard <= section_adj.size(); ++guard) {
      const auto &ns = section_adj[cur];
      int nxt = -1;
      for (int cand : ns)
        if (cand != prev) {
          nxt = cand;
          break;
        }
      if (nxt == -1 || nxt == start)
        break;
      cap.push_back(nxt);
      prev = cur;
      cur = nxt;
    }
    if (cap.size() >= 3)
      out.faces.push_back(std::move(cap));
  }
  if (out.faces.size() < 4)
    return ClipPoly{};
  return out;
}

// Fan tetrahedralization from the smallest vertex id; adds no vertices.
// Every face polygon is fanned from its own smallest vertex, so two pieces
// sharing a polygon produce the same triangle set and the sub-volume meshes
// stay conforming.
inline void tetrahedralize_poly(const ClipPool &pool, const ClipPoly &poly,
                                std::vector<std::array<int, 4>> &out) {
  if (poly.empty())
    return;
  std::vector<int> vs = poly.vertex_set();
  int apex = vs.front();
  std::vector<int> loop;
  for (const auto &face : poly.faces) {
    if (std::find(face.begin(), face.end(), apex) != face.end())
      continue;
    size_t start = 0;
    for (size_t i = 1; i < face.size(); ++i)
      if (face[i] < face[start])
        start = i;
    loop.clear();
    for (size_t i = 0; i < face.size(); ++i)
      loop.push_back(face[(start + i) % face.size()]);
    for (size_t i = 1; i + 1 < loop.size(); ++i)
      out.push_back({apex, loop[0], loop[i], loop[i + 1]});
  }
  (void)pool;
}

inline double param_volume(const ClipPool &pool, const std::array<int, 4> &t) {
  return tet_volume(pool.params[size_t(t[0])], pool.params[size_t(t[1])],
                    pool.params[size_t(t[2])], pool.params[size_t(t[3])]);
}

inline void snap_unit(Vec3 &p, double tol = 1e-9) {
  for (int c = 0; c < 3; ++c) {
    if (std::fabs(p[c]) < tol)
      p[c] = 0.0;
    else if (std::fabs(p[c] - 1.0) < tol)
      p[c] = 1.0;
  }
}

} // namespace detail

// Tets straddling sub-domain boundaries are split by exact marching-tet
// clipping in parameter space; cut vertices are shared through a keyed pool
// so neighbouring sub-volumes stay conforming.
inline PartitionResult partition(const ParamVolume &pv) {
  PartitionResult result;
  std::array<SubDomain, 7> domains = build_subdomains();

  detail::ClipPool pool;
  pool.params = pv.params;
  pool.models = pv.mesh.vertices;
  pool.build_position_index();

  // sub-domain bounding boxes for a cheap prescreen
  std::array<std::array<Vec3, 2>, 7> boxes;
  for (int s = 0; s < 7; ++s) {
    Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
    for (const Vec3 &c : domains[size_t(s)].corner_params)
      for (int ax = 0; ax < 3; ++ax) {
        lo[ax] = std::min(lo[ax], c[ax]);
        hi[ax] = std::max(hi[ax], c[ax]);
      }
    boxes[size_t(s)] = {lo, hi};
  }

  std::array<std::vector<std::array<int, 4>>, 7> pieces;
  std::vector<std::array<int, 4>> tetra;
  for (const auto &tet : pv.mesh.tets) {
    Vec3 tlo{1e30, 1e30, 1e30}, thi{-1e30, -1e30, -1e30};
    for (int v : tet)
      for (int ax = 0; ax < 3; ++ax) {
        tlo[ax] = std::min(tlo[ax], pool.params[size_t(v)][ax]);
        thi[ax] = std::max(thi[ax], pool.params[size_t(v)][ax]);
      }
    for (int s = 0; s < 7; ++s) {
      bool overlap = true;
      for (int ax = 0; ax < 3; ++ax)
        if (thi[ax] < boxes[size_t(s)][0][ax] - 1e-12 ||
            tlo[ax] > boxes[size_t(s)][1][ax] + 1e-12)
          overlap = false;
      if (!overlap)
        continue;
      detail::ClipPoly poly = detail::poly_from_tet(tet);
      for (const detail::HalfSpace &hs : detail::subdomain_halfspaces(SubId(s))) {
        poly = detail::clip_poly(pool, poly, hs);
        if (poly.empty())
          break;
      }
      if (poly.empty())
        continue;
      tetra.clear();
      detail::tetrahedralize_poly(pool, poly, tetra);
      for (auto piece : tetra) {
        double vol = detail::param_volume(pool, piece);
        if (std::fabs(vol) < 1e-14) {
          ++result.degenerate_discarded;
          continue;
        }
        if (vol < 0) {
          std::swap(piece[2], piece[3]);
          vol = -vol;
        }
        Vec3 bary = (pool.params[size_t(piece[0])] + pool.params[size_t(piece[1])] +
                     pool.params[size_t(piece[2])] + pool.params[size_t(piece[3])]) /
                    4.0;
        if (classify_param(bary) != SubId(s))
          throw Error("partition: clipped piece barycenter escaped its sub-domain");
        pieces[size_t(s)].push_back(piece);
      }
    }
  }

  for (int s = 0; s < 7; ++s) {
    if (pieces[size_t(s)].empty())
      throw Error(std::string("partition: empty sub-volume ") + sub_name(SubId(s)));
    SubVolume &sub = result.subvols[size_t(s)];
    sub.id = SubId(s);

    std::map<int, int> local_of;
    for (const auto &t : pieces[size_t(s)])
      for (int v : t)
        if (!local_of.count(v)) {
          int id = int(sub.mesh.vertices.size());
          local_of[v] = id;
          sub.mesh.vertices.push_back(pool.models[size_t(v)]);
          sub.global_params.push_back(pool.params[size_t(v)]);
          sub.pool_vertex.push_back(v);
          Vec3 local = localize_param(SubId(s), pool.params[size_t(v)]);
          detail::snap_unit(local);
          sub.local_params.push_back(local);
        }
    for (const auto &t : pieces[size_t(s)]) {
      std::array<int, 4> lt = {local_of[t[0]], local_of[t[1]], local_of[t[2]], local_of[t[3]]};
      double mvol = tet_volume(sub.mesh.vertices[size_t(lt[0])], sub.mesh.vertices[size_t(lt[1])],
                               sub.mesh.vertices[size_t(lt[2])], sub.mesh.vertices[size_t(lt[3])]);
      if (mvol < 0) {
        std::swap(lt[2], lt[3]);
        ++sub.param_orientation_flips;
      }
      sub.mesh.tets.push_back(lt);
    }

    // boundary triangles labeled by the nearest local cube face
    sub.mesh.boundary_tris = extract_boundary(sub.mesh);
    sub.mesh.patch_label.resize(sub.mesh.boundary_tris.size());
    for (size_t t = 0; t < sub.mesh.boundary_tris.size(); ++t) {
      const auto &tr = sub.mesh.boundary_tris[t];
      // order U(w=1), D(w=0), L(u=0), R(u=1), F(v=0), B(v=1)
      static const int face_axis[6] = {2, 2, 0, 0, 1, 1};
      static const double face_val[6] = {1, 0, 0, 1, 0, 1};
      int best = 0;
      double best_err = 1e30;
      for (int l = 0; l < 6; ++l) {
        double err = 0.0;
        for (int v : tr)
          err = std::max(err,
                         std::fabs(sub.local_params[size_t(v)][face_axis[l]] - face_val[l]));
        if (err < best_err - 1e-15) {
          best_err = err;
          best = l;
        }
      }
      sub.mesh.patch_label[t] = best;
    }
  }
  return result;
}

// --- seven-block interface table -------------------------------------------

// Orientation map between the face grids of two adjacent blocks: coordinates
// (p,q) are the face's free axes in ascending order; apply swap first, then
// the flips.
struct BlockInterface {
  SubId a, b;
  CubeFace face_a, face_b;
  bool swap_pq, flip_p, flip_q;

  void map_coords(double p, double q, double &bp, double &bq) const {
    if (swap_pq)
      std::swap(p, q);
    bp = flip_p ? 1.0 - p : p;
    bq = flip_q ? 1.0 - q : q;
  }
};

inline const std::array<BlockInterface, 18> &block_interfaces() {
  using S = SubId;
  static const std::array<BlockInterface, 18> table = {{
      {S::C, S::U, {2, 1}, {2, 0}, false, false, false},
      {S::C, S::D, {2, 0}, {2, 1}, false, false, false},
      {S::C, S::L, {0, 0}, {0, 1}, false, false, false},
      {S::C, S::R, {0, 1}, {0, 0}, false, false, false},
      {S::C, S::F, {1, 0}, {1, 1}, false, false, false},
      {S::C, S::B, {1, 1}, {1, 0}, false, false, false},
      {S::U, S::L, {0, 0}, {2, 1}, true, true, false},
      {S::U, S::R, {0, 1}, {2, 1}, true, false, false},
      {S::U, S::F, {1, 0}, {2, 1}, false, false, true},
      {S::U, S::B, {1, 1}, {2, 1}, false, false, false},
      {S::D, S::L, {0, 0}, {2, 0}, true, false, false},
      {S::D, S::R, {0, 1}, {2, 0}, true, true, false},
      {S::D, S::F, {1, 0}, {2, 0}, false, false, false},
      {S::D, S::B, {1, 1}, {2, 0}, false, false, true},
      {S::L, S::F, {1, 0}, {0, 0}, false, false, false},
      {S::L, S::B, {1, 1}, {0, 0}, false, true, false},
      {S::R, S::F, {1, 0}, {0, 1}, false, true, false},
      {S::R, S::B, {1, 1}, {0, 1}, false, false, false},
  }};
  return table;
}

// --- sub-volume checkpoint io ----------------------------------------------

inline void save_subvolume(const SubVolume &sub, const std::string &base, MeshFormat format) {
  std::string mesh_path = base;
  if (format == MeshFormat::medit_mesh)
    mesh_path += ".mesh";
  else if (format == MeshFormat::vtk_legacy)
    mesh_path += ".vtk";
  save_tet_mesh(sub.mesh, mesh_path, format);
  save_uvw(sub.local_params, base + ".uvw");
}

inline SubVolume load_subvolume(SubId id, const std::string &base, MeshFormat format) {
  SubVolume sub;
  sub.id = id;
  std::string mesh_path = base;
  if (format == MeshFormat::medit_mesh)
    mesh_path += ".mesh";
  else if (format == MeshFormat::vtk_legacy)
    mesh_path += ".vtk";
  sub.mesh = load_tet_mesh(mesh_path, format);
  sub.local_params = load_uvw(base + ".uvw", sub.mesh.vertices.size());
  return sub;
}

} // namespace tbs
