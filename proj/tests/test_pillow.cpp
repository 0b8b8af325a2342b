#include <catch2/catch.hpp>

#include <map>
#include <random>
#include <set>

#include "tbs/pillow.hpp"
#include "tbs/synthetic.hpp"

using namespace tbs;

namespace {

ParamVolume param_cube(int res) {
  TetMesh m = make_labeled_cube_grid(res);
  PatchTopology topo = extract_patch_topology(m);
  return parameterize_volume(m, topo);
}

// Newton inversion of the trilinear map: the independent localization oracle.
bool newton_localize(const SubDomain &sd, const Vec3 &target, Vec3 &local) {
  local = Vec3{0.5, 0.5, 0.5};
  for (int it = 0; it < 60; ++it) {
    Vec3 r = sd.trilinear(local) - target;
    if (norm(r) < 1e-14)
      return true;
    Vec3 du, dv, dw;
    sd.trilinear_partials(local, du, dv, dw);
    std::array<Vec3, 3> rows = {Vec3{du.x, dv.x, dw.x}, Vec3{du.y, dv.y, dw.y},
                                Vec3{du.z, dv.z, dw.z}};
    Vec3 step;
    if (!solve3(rows, r, step))
      return false;
    local -= step;
  }
  return norm(sd.trilinear(local) - target) < 1e-10;
}

} // namespace

TEST_CASE("sub-domain construction") {
  auto domains = build_subdomains();
  // C corners are the corners of [1/3,2/3]^3
  for (int code = 0; code < 8; ++code) {
    Vec3 expect{1.0 / 3.0 + (code & 1) / 3.0, 1.0 / 3.0 + ((code >> 1) & 1) / 3.0,
                1.0 / 3.0 + ((code >> 2) & 1) / 3.0};
    REQUIRE(norm(domains[0].corner_params[size_t(code)] - expect) < 1e-15);
  }

  // the U frustum contains (0.5, 0.5, 0.9)
  Vec3 probe{0.5, 0.5, 0.9};
  REQUIRE(classify_param(probe) == SubId::U);
  Vec3 local;
  REQUIRE(newton_localize(domains[size_t(int(SubId::U))], probe, local));
  for (int c = 0; c < 3; ++c) {
    REQUIRE(local[c] > -1e-12);
    REQUIRE(local[c] < 1.0 + 1e-12);
  }

  // volumes tile the unit cube; vol(C) = 1/27
  double total = 0.0;
  for (const SubDomain &sd : domains)
    total += subdomain_volume(sd);
  REQUIRE(total == Approx(1.0).margin(1e-12));
  REQUIRE(subdomain_volume(domains[0]) == Approx(1.0 / 27.0).margin(1e-12));
}

TEST_CASE("classification: center, priority ties, random oracle") {
  REQUIRE(classify_param(Vec3{0.5, 0.5, 0.5}) == SubId::C);
  // boundary point goes to C by the priority rule
  REQUIRE(classify_param(Vec3{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}) == SubId::C);
  REQUIRE_THROWS_AS(classify_param(Vec3{1.2, 0.5, 0.5}), Error);

  auto domains = build_subdomains();
  std::mt19937 rng(83);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    Vec3 p{uni(rng), uni(rng), uni(rng)};
    SubId got = classify_param(p);
    // point-in-hexahedron oracle via trilinear inversion
    bool inside = false;
    Vec3 local;
    if (newton_localize(domains[size_t(int(got))], p, local)) {
      inside = true;
      for (int c = 0; c < 3; ++c)
        if (local[c] < -1e-9 || local[c] > 1.0 + 1e-9)
          inside = false;
    }
    REQUIRE(inside);
  }
}

TEST_CASE("localization: closed forms match the trilinear inverse") {
  auto domains = build_subdomains();
  // C is affine: local = 3 (global - 1/3)
  Vec3 p{0.4, 0.52, 0.61};
  Vec3 lc = localize_param(SubId::C, p);
  REQUIRE(norm(lc - (p - Vec3{1.0 / 3, 1.0 / 3, 1.0 / 3}) * 3.0) < 1e-15);

  // frustum corners map to local {0,1}^3
  for (int s = 1; s < 7; ++s)
    for (int code = 0; code < 8; ++code) {
      Vec3 corner = domains[size_t(s)].corner_params[size_t(code)];
      Vec3 local = localize_param(SubId(s), corner);
      Vec3 expect{double(code & 1), double((code >> 1) & 1), double((code >> 2) & 1)};
      REQUIRE(norm(local - expect) < 1e-12);
    }

  // round-trip: forward(trilinear) of localize(p) returns p
  std::mt19937 rng(89);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int checked = 0;
  while (checked < 1000) {
    Vec3 q{uni(rng), uni(rng), uni(rng)};
    SubId s = classify_param(q);
    Vec3 local = localize_param(s, q);
    Vec3 back = domains[size_t(int(s))].trilinear(local);
    REQUIRE(norm(back - q) < 1e-10);
    ++checked;
  }
}

TEST_CASE("partition of the 6-tet cube conserves volume and splits every tet") {
  ParamVolume pv = param_cube(1);
  PartitionResult pr = partition(pv);
  double total = 0.0;
  for (const SubVolume &sub : pr.subvols) {
    REQUIRE(!sub.mesh.tets.empty());
    for (int t = 0; t < sub.mesh.num_tets(); ++t)
      total += tet_volume(sub.mesh, t);
  }
  REQUIRE(total == Approx(1.0).margin(1e-9));
  // each piece count exceeds the input tet count: every tet was split
  int pieces = 0;
  for (const SubVolume &sub : pr.subvols)
    pieces += sub.mesh.num_tets();
  REQUIRE(pieces > 6);
}

TEST_CASE("9x9x9 grid: the central block keeps whole cells") {
  ParamVolume pv = param_cube(9);
  PartitionResult pr = partition(pv);
  const SubVolume &c = pr.subvols[0];
  // C covers exactly 3^3 lattice cells -> 27 * 6 unsplit tets
  REQUIRE(c.mesh.num_tets() == 27 * 6);
  double vol = 0.0;
  for (int t = 0; t < c.mesh.num_tets(); ++t)
    vol += tet_volume(c.mesh, t);
  REQUIRE(vol == Approx(1.0 / 27.0).margin(1e-10));

  double total = 0.0;
  for (const SubVolume &sub : pr.subvols)
    for (int t = 0; t < sub.mesh.num_tets(); ++t)
      total += tet_volume(sub.mesh, t);
  REQUIRE(total == Approx(1.0).margin(1e-8));
}

TEST_CASE("partitioned sub-volumes conform on interfaces") {
  ParamVolume pv = param_cube(4);
  PartitionResult pr = partition(pv);

  // local params of interface vertices agree under the orientation maps
  for (const BlockInterface &bi : block_interfaces()) {
    const SubVolume &A = pr.subvols[size_t(int(bi.a))];
    const SubVolume &B = pr.subvols[size_t(int(bi.b))];
    std::map<int, int> b_of_pool;
    for (size_t i = 0; i < B.pool_vertex.size(); ++i)
      b_of_pool[B.pool_vertex[i]] = int(i);

    int face_axis_a = bi.face_a.axis;
    int pa1 = (face_axis_a + 1) % 3, pa2 = (face_axis_a + 2) % 3;
    if (pa1 > pa2)
      std::swap(pa1, pa2);
    int face_axis_b = bi.face_b.axis;
    int pb1 = (face_axis_b + 1) % 3, pb2 = (face_axis_b + 2) % 3;
    if (pb1 > pb2)
      std::swap(pb1, pb2);

    int shared = 0;
    for (size_t i = 0; i < A.pool_vertex.size(); ++i) {
      if (std::fabs(A.local_params[i][face_axis_a] - double(bi.face_a.side)) > 1e-12)
        continue;
      auto it = b_of_pool.find(A.pool_vertex[i]);
      if (it == b_of_pool.end())
        continue;
      ++shared;
      const Vec3 &bl = B.local_params[size_t(it->second)];
      REQUIRE(std::fabs(bl[face_axis_b] - double(bi.face_b.side)) < 1e-12);
      double bp, bq;
      bi.map_coords(A.local_params[i][pa1], A.local_params[i][pa2], bp, bq);
      REQUIRE(std::fabs(bl[pb1] - bp) < 1e-9);
      REQUIRE(std::fabs(bl[pb2] - bq) < 1e-9);
    }
    REQUIRE(shared >= 4); // at least the interface quad corners
  }

  // interface vertex sets are identical as pool-id sets
  for (const BlockInterface &bi : block_interfaces()) {
    const SubVolume &A = pr.subvols[size_t(int(bi.a))];
    const SubVolume &B = pr.subvols[size_t(int(bi.b))];
    auto face_set = [](const SubVolume &S, const CubeFace &f) {
      std::set<int> out;
      for (size_t i = 0; i < S.pool_vertex.size(); ++i)
        if (std::fabs(S.local_params[i][f.axis] - double(f.side)) < 1e-12)
          out.insert(S.pool_vertex[i]);
      return out;
    };
    REQUIRE(face_set(A, bi.face_a) == face_set(B, bi.face_b));
  }
}

TEST_CASE("partition classifies piece barycenters into their blocks") {
  ParamVolume pv = param_cube(3);
  PartitionResult pr = partition(pv);
  for (const SubVolume &sub : pr.subvols)
    for (const auto &t : sub.mesh.tets) {
      Vec3 bary = (sub.global_params[size_t(t[0])] + sub.global_params[size_t(t[1])] +
                   sub.global_params[size_t(t[2])] + sub.global_params[size_t(t[3])]) /
                  4.0;
      REQUIRE(classify_param(bary) == sub.id);
    }
}

TEST_CASE("sub-volume dumps round-trip") {
  ParamVolume pv = param_cube(3);
  PartitionResult pr = partition(pv);
  const SubVolume &c = pr.subvols[0];
  save_subvolume(c, "/tmp/tbs_subvol_C", MeshFormat::medit_mesh);
  SubVolume r = load_subvolume(SubId::C, "/tmp/tbs_subvol_C", MeshFormat::medit_mesh);
  // loading runs the mesh module's canonical ordering; compare against it
  TetMesh canon = c.mesh;
  canonicalize(canon);
  REQUIRE(r.mesh.tets == canon.tets);
  REQUIRE(r.mesh.patch_label == canon.patch_label);
  for (size_t i = 0; i < r.local_params.size(); ++i)
    REQUIRE(r.local_params[i] == c.local_params[i]);
}

TEST_CASE("degenerate parameterization with an empty block is an error") {
  // collapse all params into the U frustum: every other block is empty
  ParamVolume pv = param_cube(2);
  for (Vec3 &p : pv.params)
    p = Vec3{0.4 + 0.2 * p.x, 0.4 + 0.2 * p.y, 0.85 + 0.1 * p.z};
  REQUIRE_THROWS_WITH(partition(pv), Catch::Matchers::Contains("empty sub-volume"));
}
