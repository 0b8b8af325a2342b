#include <catch2/catch.hpp>

#include <filesystem>
#include <map>

#include "tbs/composite.hpp"
#include "tbs/synthetic.hpp"

using namespace tbs;

namespace {

std::pair<ParamVolume, std::array<SubVolume, 7>> cube_pipeline_front(int res) {
  TetMesh m = make_labeled_cube_grid(res);
  PatchTopology topo = extract_patch_topology(m);
  ParamVolume pv = parameterize_volume(m, topo);
  PartitionResult pr = partition(pv);
  return {std::move(pv), std::move(pr.subvols)};
}

} // namespace

TEST_CASE("composite structure: Table-1 block layout") {
  GridDims dims{6, 7, 8, 5};
  Degrees degs{3, 3, 3, 3};
  TbsComposite comp = build_composite_structure(dims, degs);
  auto counts = [&](SubId s) {
    const CompositeSolid &cs = comp.solid(s);
    return std::array<int, 3>{cs.nu, cs.nv, cs.nw};
  };
  REQUIRE(counts(SubId::C) == std::array<int, 3>{6, 7, 8});
  REQUIRE(counts(SubId::U) == std::array<int, 3>{6, 7, 5});
  REQUIRE(counts(SubId::D) == std::array<int, 3>{6, 7, 5});
  REQUIRE(counts(SubId::L) == std::array<int, 3>{5, 7, 8});
  REQUIRE(counts(SubId::R) == std::array<int, 3>{5, 7, 8});
  REQUIRE(counts(SubId::F) == std::array<int, 3>{6, 5, 8});
  REQUIRE(counts(SubId::B) == std::array<int, 3>{6, 5, 8});
  REQUIRE(comp.curves.size() == 32);
  REQUIRE(comp.surfaces.size() == 24);

  REQUIRE_THROWS_AS(build_composite_structure(GridDims{3, 10, 10, 10}, Degrees{3, 3, 3, 3}),
                    Error);
}

TEST_CASE("composite pool: interface maps agree with the block geometry") {
  GridDims dims{6, 7, 8, 5};
  TbsComposite comp = build_composite_structure(dims, Degrees{2, 3, 2, 3});
  auto domains = build_subdomains();

  // lattice parameter of a grid node through its own block
  auto node_param = [&](const CompositeSolid &cs, int i, int j, int k) {
    auto gu = cs.kv_u.greville(), gv = cs.kv_v.greville(), gw = cs.kv_w.greville();
    return domains[size_t(int(cs.id))].trilinear(
        Vec3{gu[size_t(i)], gv[size_t(j)], gw[size_t(k)]});
  };

  // two grid nodes sharing a pool id must be the same geometric lattice point
  std::map<int, Vec3> param_of;
  int shared_nodes = 0;
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    for (int i = 0; i < cs.nu; ++i)
      for (int j = 0; j < cs.nv; ++j)
        for (int k = 0; k < cs.nw; ++k) {
          Vec3 p = node_param(cs, i, j, k);
          auto [it, inserted] = param_of.try_emplace(cs.node(i, j, k), p);
          if (!inserted) {
            ++shared_nodes;
            REQUIRE(norm(it->second - p) < 1e-12);
          }
        }
  }
  REQUIRE(shared_nodes > 0);
  REQUIRE(param_of.size() == comp.pool.size());

  // distinct lattice points got distinct pool ids
  std::map<std::array<long long, 3>, int> by_pos;
  for (const auto &[pid, p] : param_of) {
    std::array<long long, 3> key{llround(p.x * 1e9), llround(p.y * 1e9), llround(p.z * 1e9)};
    auto [it, inserted] = by_pos.try_emplace(key, pid);
    REQUIRE(inserted);
  }
}

TEST_CASE("composite point classes and curve inventory") {
  TbsComposite comp = build_composite_structure(GridDims{5, 5, 5, 5}, Degrees{2, 2, 2, 2});
  int corners = 0;
  for (PointClass pc : comp.point_class)
    if (pc == PointClass::corner)
      ++corners;
  REQUIRE(corners == 16); // 8 outer + 8 inner block corners

  for (const CompositeCurve &c : comp.curves) {
    REQUIRE(comp.point_class[size_t(c.nodes.front())] == PointClass::corner);
    REQUIRE(comp.point_class[size_t(c.nodes.back())] == PointClass::corner);
    for (size_t i = 1; i + 1 < c.nodes.size(); ++i)
      REQUIRE(comp.point_class[size_t(c.nodes[i])] == PointClass::curve);
  }

  for (const CompositeSurface &sf : comp.surfaces) {
    REQUIRE((sf.solids.size() == 1 || sf.solids.size() == 2));
    for (int cid : sf.curve_ids)
      REQUIRE(cid >= 0);
  }
}

TEST_CASE("initial composite on the cube: valid blocks, analytic scaled jacobians") {
  auto [pv, subvols] = cube_pipeline_front(6);
  TbsComposite comp =
      build_initial_composite(pv, subvols, GridDims{6, 6, 6, 6}, Degrees{3, 3, 3, 3});
  for (int s = 0; s < 7; ++s) {
    BsplineSolid b = comp.materialize(SubId(s));
    auto [ok, w] = check_solid_validity(b);
    REQUIRE(ok);
    JacobianScan scan = dense_jacobian_scan(b, 9);
    if (SubId(s) == SubId::C) {
      // the central block is affine: orthonormal frame everywhere
      REQUIRE(scan.min_scaled > 0.999);
    } else {
      // frusta taper 45 degrees in two directions at their corner rays,
      // which caps the scaled jacobian at exactly 1/sqrt(3) there
      REQUIRE(scan.min_scaled > 1.0 / std::sqrt(3.0) - 1e-6);
      REQUIRE(scan.min_scaled < 1.0 / std::sqrt(3.0) + 0.05);
    }
  }
}

TEST_CASE("shared boundary control points are single-ownership") {
  auto [pv, subvols] = cube_pipeline_front(4);
  TbsComposite comp =
      build_initial_composite(pv, subvols, GridDims{5, 5, 5, 5}, Degrees{2, 2, 2, 2});
  // C's top face node is the same pool entry as U's bottom face node
  const CompositeSolid &c = comp.solid(SubId::C);
  const CompositeSolid &u = comp.solid(SubId::U);
  int pid = c.node(2, 3, c.nw - 1);
  REQUIRE(pid == u.node(2, 3, 0));
  Vec3 moved{9, 9, 9};
  comp.pool[size_t(pid)] = moved;
  REQUIRE(comp.materialize(SubId::C).at(2, 3, c.nw - 1) == moved);
  REQUIRE(comp.materialize(SubId::U).at(2, 3, 0) == moved);
}

TEST_CASE("composite archive round-trip is exact and deterministic") {
  auto [pv, subvols] = cube_pipeline_front(4);
  TbsComposite comp =
      build_initial_composite(pv, subvols, GridDims{5, 6, 7, 4}, Degrees{2, 2, 2, 2});
  comp.stage_completed = 2;
  std::string dir = "/tmp/tbs_composite_archive";
  save_composite(comp, dir);
  TbsComposite r = load_composite(dir);
  REQUIRE(r.stage_completed == 2);
  REQUIRE(r.pool.size() == comp.pool.size());
  for (size_t i = 0; i < comp.pool.size(); ++i)
    REQUIRE(r.pool[i] == comp.pool[i]);

  // a second save produces byte-identical files
  std::string dir2 = "/tmp/tbs_composite_archive2";
  save_composite(r, dir2);
  for (const char *name : {"C.solid", "U.solid", "manifest.txt"}) {
    std::ifstream a(dir + "/" + name), b(dir2 + "/" + name);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    REQUIRE(sa == sb);
  }
}
