#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tbs/param.hpp"
#include "tbs/pillow.hpp"
#include "tbs/spline.hpp"
#include "tbs/validity.hpp"

namespace tbs {

// Control counts in the Table-1 reading: central block m x n x k, frusta
// reuse two of those counts plus the radial count l.
struct GridDims {
  int m = 10, n = 10, k = 10, l = 10;
};

struct Degrees {
  int du = 3, dv = 3, dw = 3, dr = 3; // per global axis family + radial
};

// Control-point classes, by how many solid faces a node lies on.
enum class PointClass : uint8_t { corner = 0, curve = 1, surface = 2, interior = 3 };

struct CompositeSolid {
  SubId id = SubId::C;
  int nu = 0, nv = 0, nw = 0;
  KnotVector kv_u, kv_v, kv_w;
  std::vector<int> grid; // pool ids, lexicographic (i,j,k), k fastest

  int index(int i, int j, int k) const { return (i * nv + j) * nw + k; }
  int node(int i, int j, int k) const { return grid[size_t(index(i, j, k))]; }
  int count(int axis) const { return axis == 0 ? nu : (axis == 1 ? nv : nw); }
  int degree(int axis) const {
    return axis == 0 ? kv_u.degree : (axis == 1 ? kv_v.degree : kv_w.degree);
  }
};

// A wireframe curve of the seven-block composite (32 in total).
struct CompositeCurve {
  std::vector<int> nodes; // pool ids along the curve
  int degree = 3;
  SubId owner = SubId::C; // first solid in composite order containing it
  int owner_axis = 0;
  std::array<int, 2> fixed_axes{}, fixed_sides{};
  std::vector<std::pair<SubId, std::array<int, 3>>> edges; // (solid, axis+sides) slots
};

// A boundary surface of the composite (24: 18 interfaces + 6 outer).
struct CompositeSurface {
  SubId owner = SubId::C;
  CubeFace face;                 // owner-local face
  int np = 0, nq = 0;            // grid extents in owner face coords
  int dp = 3, dq = 3;            // degrees along the face coords
  std::vector<int> nodes;        // pool ids, p-major
  std::vector<std::pair<SubId, CubeFace>> solids; // all solids sharing it
  std::array<int, 4> curve_ids{-1, -1, -1, -1};

  int node(int p, int q) const { return nodes[size_t(p) * nq + q]; }
};

class TbsComposite {
public:
  GridDims dims;
  Degrees degrees;
  std::vector<Vec3> pool;
  std::vector<PointClass> point_class;
  std::vector<char> frozen; // stage-dependent mask over pool ids
  std::array<CompositeSolid, 7> solids;
  std::vector<CompositeCurve> curves;
  std::vector<CompositeSurface> surfaces;
  int stage_completed = 0; // 0 init, 1 curves, 2 surfaces, 3 solids, 4 smooth

  const CompositeSolid &solid(SubId s) const { return solids[size_t(int(s))]; }
  CompositeSolid &solid(SubId s) { return solids[size_t(int(s))]; }

  BsplineSolid materialize(SubId s) const {
    const CompositeSolid &cs = solid(s);
    BsplineSolid b;
    b.nu = cs.nu;
    b.nv = cs.nv;
    b.nw = cs.nw;
    b.kv_u = cs.kv_u;
    b.kv_v = cs.kv_v;
    b.kv_w = cs.kv_w;
    b.ctrl.resize(cs.grid.size());
    for (size_t i = 0; i < cs.grid.size(); ++i)
      b.ctrl[i] = pool[size_t(cs.grid[i])];
    return b;
  }

  // face-local coordinate axes (ascending) of a solid face
  static void face_axes(const CubeFace &f, int &a1, int &a2) {
    a1 = (f.axis + 1) % 3;
    a2 = (f.axis + 2) % 3;
    if (a1 > a2)
      std::swap(a1, a2);
  }
};

namespace detail {

inline std::array<int, 3> solid_counts(SubId s, const GridDims &d) {
  switch (s) {
  case SubId::C: return {d.m, d.n, d.k};
  case SubId::U:
  case SubId::D: return {d.m, d.n, d.l};
  case SubId::L:
  case SubId::R: return {d.l, d.n, d.k};
  case SubId::F:
  case SubId::B: return {d.m, d.l, d.k};
  }
  throw Error("solid_counts: bad id");
}

inline std::array<int, 3> solid_degrees(SubId s, const Degrees &d) {
  switch (s) {
  case SubId::C: return {d.du, d.dv, d.dw};
  case SubId::U:
  case SubId::D: return {d.du, d.dv, d.dr};
  case SubId::L:
  case SubId::R: return {d.dr, d.dv, d.dw};
  case SubId::F:
  case SubId::B: return {d.du, d.dr, d.dw};
  }
  throw Error("solid_degrees: bad id");
}

// grid index (i,j,k) of a face-local position
inline std::array<int, 3> face_to_grid(const CubeFace &f, int counts_axis_side, int p, int q,
                                       int a1, int a2) {
  std::array<int, 3> ijk{};
  ijk[size_t(f.axis)] = counts_axis_side;
  ijk[size_t(a1)] = p;
  ijk[size_t(a2)] = q;
  return ijk;
}

} // namespace detail

// Builds the pooled control structure: shared faces reference one set of
// pool ids through the interface index maps, so every boundary curve and
// surface has a unique control grid.
inline TbsComposite build_composite_structure(const GridDims &dims, const Degrees &degrees) {
  for (int c : {dims.m, dims.n, dims.k, dims.l})
    if (c < 2)
      throw Error("composite: control counts must be at least 2");
  auto check_deg = [&](int count, int deg) {
    if (deg < 1 || count < deg + 1)
      throw Error("composite: control count must exceed the degree");
  };

  TbsComposite comp;
  comp.dims = dims;
  comp.degrees = degrees;

  for (int s = 0; s < 7; ++s) {
    CompositeSolid &cs = comp.solids[size_t(s)];
    cs.id = SubId(s);
    auto cnt = detail::solid_counts(SubId(s), dims);
    auto deg = detail::solid_degrees(SubId(s), degrees);
    for (int a = 0; a < 3; ++a)
      check_deg(cnt[size_t(a)], deg[size_t(a)]);
    cs.nu = cnt[0];
    cs.nv = cnt[1];
    cs.nw = cnt[2];
    cs.kv_u = KnotVector::uniform_bezier(cs.nu, deg[0]);
    cs.kv_v = KnotVector::uniform_bezier(cs.nv, deg[1]);
    cs.kv_w = KnotVector::uniform_bezier(cs.nw, deg[2]);
    cs.grid.assign(size_t(cs.nu) * cs.nv * cs.nw, -1);
  }

  // interfaces where solid s is the later block, with the table entry
  std::array<std::vector<const BlockInterface *>, 7> incoming;
  for (const BlockInterface &bi : block_interfaces())
    incoming[size_t(int(bi.b))].push_back(&bi);

  int next_id = 0;
  for (int s = 0; s < 7; ++s) {
    CompositeSolid &cs = comp.solids[size_t(s)];
    for (int i = 0; i < cs.nu; ++i)
      for (int j = 0; j < cs.nv; ++j)
        for (int k = 0; k < cs.nw; ++k) {
          std::array<int, 3> ijk{i, j, k};
          int resolved = -1;
          for (const BlockInterface *bi : incoming[size_t(s)]) {
            const CubeFace &fb = bi->face_b;
            int side_index = fb.side ? cs.count(fb.axis) - 1 : 0;
            if (ijk[size_t(fb.axis)] != side_index)
              continue;
            int b1, b2;
            TbsComposite::face_axes(fb, b1, b2);
            int bp = ijk[size_t(b1)], bq = ijk[size_t(b2)];
            // invert the a->b orientation map
            const CompositeSolid &as = comp.solid(bi->a);
            int a1, a2;
            TbsComposite::face_axes(bi->face_a, a1, a2);
            int na_p = as.count(a1), na_q = as.count(a2);
            // forward map is (swap, then flips); invert: unflip, then unswap
            int up = bi->flip_p ? ((bi->swap_pq ? na_q : na_p) - 1 - bp) : bp;
            int uq = bi->flip_q ? ((bi->swap_pq ? na_p : na_q) - 1 - bq) : bq;
            int ap = bi->swap_pq ? uq : up;
            int aq = bi->swap_pq ? up : uq;
            if (ap < 0 || ap >= na_p || aq < 0 || aq >= na_q)
              throw Error("composite: interface index map out of range");
            int a_side = bi->face_a.side ? as.count(bi->face_a.axis) - 1 : 0;
            auto aijk = detail::face_to_grid(bi->face_a, a_side, ap, aq, a1, a2);
            int pid = as.node(aijk[0], aijk[1], aijk[2]);
            if (pid < 0)
              throw Error("composite: interface references an unallocated node");
            if (resolved >= 0 && resolved != pid)
              throw Error("composite: inconsistent interface maps");
            resolved = pid;
          }
          if (resolved < 0)
            resolved = next_id++;
          cs.grid[size_t(cs.index(i, j, k))] = resolved;
        }
  }
  comp.pool.assign(size_t(next_id), Vec3{0, 0, 0});

  // point classes from face membership
  comp.point_class.assign(comp.pool.size(), PointClass::interior);
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    for (int i = 0; i < cs.nu; ++i)
      for (int j = 0; j < cs.nv; ++j)
        for (int k = 0; k < cs.nw; ++k) {
          int nf = (i == 0 || i == cs.nu - 1) + (j == 0 || j == cs.nv - 1) +
                   (k == 0 || k == cs.nw - 1);
          PointClass pc = PointClass(3 - nf);
          PointClass &cur = comp.point_class[size_t(cs.node(i, j, k))];
          if (uint8_t(pc) < uint8_t(cur))
            cur = pc;
        }
  }
  comp.frozen.assign(comp.pool.size(), 0);

  // curve inventory: every solid edge, deduped by node sequence
  std::map<std::vector<int>, int> curve_of;
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    for (int axis = 0; axis < 3; ++axis) {
      int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
      if (o1 > o2)
        std::swap(o1, o2);
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2) {
          std::vector<int> nodes(size_t(cs.count(axis)));
          for (int t = 0; t < cs.count(axis); ++t) {
            std::array<int, 3> ijk{};
            ijk[size_t(axis)] = t;
            ijk[size_t(o1)] = s1 ? cs.count(o1) - 1 : 0;
            ijk[size_t(o2)] = s2 ? cs.count(o2) - 1 : 0;
            nodes[size_t(t)] = cs.node(ijk[0], ijk[1], ijk[2]);
          }
          std::vector<int> key = nodes;
          if (key.back() < key.front())
            std::reverse(key.begin(), key.end());
          auto it = curve_of.find(key);
          if (it == curve_of.end()) {
            CompositeCurve c;
            c.nodes = nodes;
            c.degree = cs.degree(axis);
            c.owner = SubId(s);
            c.owner_axis = axis;
            c.fixed_axes = {o1, o2};
            c.fixed_sides = {s1, s2};
            c.edges.push_back({SubId(s), {axis, s1, s2}});
            curve_of[key] = int(comp.curves.size());
            comp.curves.push_back(std::move(c));
          } else {
            comp.curves[size_t(it->second)].edges.push_back({SubId(s), {axis, s1, s2}});
          }
        }
    }
  }
  if (comp.curves.size() != 32)
    throw Error("composite: expected 32 wireframe curves, found " +
                std::to_string(comp.curves.size()));

  // surface inventory: 18 interfaces (owned by the earlier block) + 6 outer
  auto add_surface = [&](SubId owner, CubeFace face,
                         std::vector<std::pair<SubId, CubeFace>> solids_list) {
    const CompositeSolid &cs = comp.solid(owner);
    CompositeSurface sf;
    sf.owner = owner;
    sf.face = face;
    int a1, a2;
    TbsComposite::face_axes(face, a1, a2);
    sf.np = cs.count(a1);
    sf.nq = cs.count(a2);
    sf.dp = cs.degree(a1);
    sf.dq = cs.degree(a2);
    sf.solids = std::move(solids_list);
    int side = face.side ? cs.count(face.axis) - 1 : 0;
    sf.nodes.resize(size_t(sf.np) * sf.nq);
    for (int p = 0; p < sf.np; ++p)
      for (int q = 0; q < sf.nq; ++q) {
        auto ijk = detail::face_to_grid(face, side, p, q, a1, a2);
        sf.nodes[size_t(p) * sf.nq + q] = cs.node(ijk[0], ijk[1], ijk[2]);
      }
    // locate the four boundary curves
    auto find_curve = [&](std::vector<int> edge_nodes) {
      if (edge_nodes.back() < edge_nodes.front())
        std::reverse(edge_nodes.begin(), edge_nodes.end());
      auto it = curve_of.find(edge_nodes);
      if (it == curve_of.end())
        throw Error("composite: surface edge curve not found");
      return it->second;
    };
    std::vector<int> e;
    for (int p = 0; p < sf.np; ++p)
      e.push_back(sf.node(p, 0));
    sf.curve_ids[0] = find_curve(e);
    e.clear();
    for (int p = 0; p < sf.np; ++p)
      e.push_back(sf.node(p, sf.nq - 1));
    sf.curve_ids[1] = find_curve(e);
    e.clear();
    for (int q = 0; q < sf.nq; ++q)
      e.push_back(sf.node(0, q));
    sf.curve_ids[2] = find_curve(e);
    e.clear();
    for (int q = 0; q < sf.nq; ++q)
      e.push_back(sf.node(sf.np - 1, q));
    sf.curve_ids[3] = find_curve(e);
    comp.surfaces.push_back(std::move(sf));
  };

  for (const BlockInterface &bi : block_interfaces())
    add_surface(bi.a, bi.face_a, {{bi.a, bi.face_a}, {bi.b, bi.face_b}});
  for (int s = 1; s < 7; ++s) {
    int axis, side;
    detail::frustum_axis(SubId(s), axis, side);
    add_surface(SubId(s), CubeFace{axis, side}, {{SubId(s), CubeFace{axis, side}}});
  }
  if (comp.surfaces.size() != 24)
    throw Error("composite: expected 24 boundary surfaces");
  return comp;
}

// Initial TBS construction: the Greville lattice of each block is mapped
// through the sub-domain trilinear box into global parameters and located
// in the tet mesh. Shared nodes are computed once through the pool. The
// composite is rejected if any initial block fails the validity check.
inline TbsComposite build_initial_composite(const ParamVolume &pv,
                                            const std::array<SubVolume, 7> &subvols,
                                            const GridDims &dims, const Degrees &degrees) {
  TbsComposite comp = build_composite_structure(dims, degrees);
  std::array<SubDomain, 7> domains = build_subdomains();
  ParamPointLocator locator(pv);

  std::vector<char> done(comp.pool.size(), 0);
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    auto gu = cs.kv_u.greville(), gv = cs.kv_v.greville(), gw = cs.kv_w.greville();
    for (int i = 0; i < cs.nu; ++i)
      for (int j = 0; j < cs.nv; ++j)
        for (int k = 0; k < cs.nw; ++k) {
          int pid = cs.node(i, j, k);
          if (done[size_t(pid)])
            continue;
          Vec3 gp = domains[size_t(s)].trilinear(
              Vec3{gu[size_t(i)], gv[size_t(j)], gw[size_t(k)]});
          for (int c = 0; c < 3; ++c)
            gp[c] = std::clamp(gp[c], 0.0, 1.0);
          comp.pool[size_t(pid)] = locator.locate(gp);
          done[size_t(pid)] = 1;
        }
  }

  // snap the 16 block corners onto the corresponding sub-volume vertices so
  // curve endpoint interpolation holds exactly
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    const SubVolume &sub = subvols[size_t(s)];
    for (int ci = 0; ci < 2; ++ci)
      for (int cj = 0; cj < 2; ++cj)
        for (int ck = 0; ck < 2; ++ck) {
          Vec3 corner{double(ci), double(cj), double(ck)};
          int pid = cs.node(ci ? cs.nu - 1 : 0, cj ? cs.nv - 1 : 0, ck ? cs.nw - 1 : 0);
          for (size_t v = 0; v < sub.local_params.size(); ++v)
            if (sub.local_params[v] == corner) {
              comp.pool[size_t(pid)] = sub.mesh.vertices[v];
              break;
            }
        }
  }

  for (int s = 0; s < 7; ++s) {
    auto [ok, witness] = check_solid_validity(comp.materialize(SubId(s)));
    if (!ok)
      throw Error(std::string("initial TBS ") + sub_name(SubId(s)) +
                  " is not valid; the grid sampling rule should be adjusted");
  }
  comp.stage_completed = 0;
  return comp;
}

// --- composite archives ------------------------------------------------------

inline void save_composite(const TbsComposite &comp, const std::string &dir) {
  std::filesystem::create_directories(dir);
  for (int s = 0; s < 7; ++s)
    save_solid(comp.materialize(SubId(s)), dir + "/" + sub_name(SubId(s)) + ".solid");
  std::ofstream f(dir + "/manifest.txt");
  if (!f)
    throw Error("cannot open for write: " + dir + "/manifest.txt");
  f << "tbs-composite\n";
  f << "dims " << comp.dims.m << " " << comp.dims.n << " " << comp.dims.k << " " << comp.dims.l
    << "\n";
  f << "degrees " << comp.degrees.du << " " << comp.degrees.dv << " " << comp.degrees.dw << " "
    << comp.degrees.dr << "\n";
  f << "stage " << comp.stage_completed << "\n";
  f << "solids";
  for (int s = 0; s < 7; ++s)
    f << " " << sub_name(SubId(s)) << ".solid";
  f << "\n";
  // shared-boundary manifest: the interface table with orientation maps
  f << "interfaces " << block_interfaces().size() << "\n";
  for (const BlockInterface &bi : block_interfaces())
    f << sub_name(bi.a) << " " << bi.face_a.axis << " " << bi.face_a.side << " " << sub_name(bi.b)
      << " " << bi.face_b.axis << " " << bi.face_b.side << " " << int(bi.swap_pq) << " "
      << int(bi.flip_p) << " " << int(bi.flip_q) << "\n";
}

inline TbsComposite load_composite(const std::string &dir) {
  std::ifstream f(dir + "/manifest.txt");
  if (!f)
    throw Error("cannot open: " + dir + "/manifest.txt");
  std::string magic, word;
  f >> magic;
  if (magic != "tbs-composite")
    throw Error("not a composite archive: " + dir);
  GridDims dims;
  Degrees degrees;
  int stage = 0;
  f >> word >> dims.m >> dims.n >> dims.k >> dims.l;
  f >> word >> degrees.du >> degrees.dv >> degrees.dw >> degrees.dr;
  f >> word >> stage;
  TbsComposite comp = build_composite_structure(dims, degrees);
  comp.stage_completed = stage;
  std::vector<char> done(comp.pool.size(), 0);
  for (int s = 0; s < 7; ++s) {
    BsplineSolid b = load_solid(dir + "/" + sub_name(SubId(s)) + ".solid");
    const CompositeSolid &cs = comp.solids[size_t(s)];
    if (b.nu != cs.nu || b.nv != cs.nv || b.nw != cs.nw)
      throw Error("composite archive: solid dims disagree with the manifest");
    for (size_t idx = 0; idx < cs.grid.size(); ++idx) {
      int pid = cs.grid[idx];
      if (!done[size_t(pid)]) {
        comp.pool[size_t(pid)] = b.ctrl[idx];
        done[size_t(pid)] = 1;
      } else if (!(comp.pool[size_t(pid)] == b.ctrl[idx])) {
        throw Error("composite archive: shared boundary control points disagree");
      }
    }
  }
  return comp;
}

} // namespace tbs
