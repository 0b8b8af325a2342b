#pragma once

#include <string>

#include "tbs/mesh.hpp"
#include "tbs/vec3.hpp"

namespace tbs {

enum class SyntheticModel { cube, twisted_bar, bent_L, sphereish };

inline SyntheticModel synthetic_model_from_name(const std::string &name) {
  if (name == "cube")
    return SyntheticModel::cube;
  if (name == "twisted_bar")
    return SyntheticModel::twisted_bar;
  if (name == "bent_L")
    return SyntheticModel::bent_L;
  if (name == "sphereish")
    return SyntheticModel::sphereish;
  throw Error("unknown synthetic model: " + name);
}

inline const char *synthetic_model_name(SyntheticModel m) {
  switch (m) {
  case SyntheticModel::cube: return "cube";
  case SyntheticModel::twisted_bar: return "twisted_bar";
  case SyntheticModel::bent_L: return "bent_L";
  case SyntheticModel::sphereish: return "sphereish";
  }
  return "?";
}

// Deformation constants (documented here, fixed for reproducibility).
// The twist and bend angles are the largest desk-scale magnitudes whose
// initial seven-block control grids still satisfy the solid validity
// condition; steeper deformations make the tapered side blocks' sub-grid
// windows mix rotated frames beyond the triple-product bound.
constexpr double kTwistAngle = M_PI / 4;   // twisted_bar: total twist over the height
constexpr double kTwistStretch = 1.5;      // twisted_bar: z stretch factor
constexpr double kBendRadius = 1.0;        // bent_L: bend radius of the centre fibre
constexpr double kBendAngle = M_PI / 3;    // bent_L: total bend angle
constexpr double kSphereBlend = 0.6;       // sphereish: cube-to-ball blend weight

// Kuhn-split cube grid with `resolution` cells per edge, boundary faces
// labeled by outward axis: x->L/R, y->F/B, z->D/U.
inline TetMesh make_labeled_cube_grid(int resolution) {
  if (resolution < 1)
    throw Error("cube grid: resolution must be >= 1");
  const int n = resolution;
  TetMesh m;
  auto vid = [&](int i, int j, int k) { return (i * (n + 1) + j) * (n + 1) + k; };
  m.vertices.resize(size_t(n + 1) * (n + 1) * (n + 1));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k)
        m.vertices[size_t(vid(i, j, k))] =
            Vec3{double(i) / n, double(j) / n, double(k) / n};

  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (const auto &p : perms) {
          int c[3] = {i, j, k};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          c[p[0]] += 1;
          tet[1] = vid(c[0], c[1], c[2]);
          c[p[1]] += 1;
          tet[2] = vid(c[0], c[1], c[2]);
          c[p[2]] += 1;
          tet[3] = vid(c[0], c[1], c[2]);
          m.tets.push_back(tet);
        }

  // orient before extracting so boundary faces come out outward
  for (auto &t : m.tets)
    if (tet_volume(m.vertices[size_t(t[0])], m.vertices[size_t(t[1])],
                   m.vertices[size_t(t[2])], m.vertices[size_t(t[3])]) < 0.0)
      std::swap(t[2], t[3]);
  m.boundary_tris = extract_boundary(m);
  m.patch_label.resize(m.boundary_tris.size());
  auto lattice = [&](int v, int axis) {
    int k = v % (n + 1), j = (v / (n + 1)) % (n + 1), i = v / ((n + 1) * (n + 1));
    return axis == 0 ? i : (axis == 1 ? j : k);
  };
  for (size_t t = 0; t < m.boundary_tris.size(); ++t) {
    const auto &tr = m.boundary_tris[t];
    int label = -1;
    for (int axis = 0; axis < 3 && label < 0; ++axis)
      for (int side = 0; side < 2 && label < 0; ++side) {
        bool on = true;
        for (int v : tr)
          if (lattice(v, axis) != (side ? n : 0))
            on = false;
        if (on) {
          static const int face_label[3][2] = {{int(PatchLabel::L), int(PatchLabel::R)},
                                               {int(PatchLabel::F), int(PatchLabel::B)},
                                               {int(PatchLabel::D), int(PatchLabel::U)}};
          label = face_label[axis][side];
        }
      }
    if (label < 0)
      throw Error("cube grid: boundary triangle off every face");
    m.patch_label[t] = label;
  }
  canonicalize(m);
  return m;
}

// Parameterized deformations, also usable standalone in tests.
inline TetMesh make_twisted_bar(int resolution, double twist_angle,
                                double stretch = kTwistStretch) {
  TetMesh m = make_labeled_cube_grid(resolution);
  for (Vec3 &p : m.vertices) {
    double theta = twist_angle * p.z;
    double cx = p.x - 0.5, cy = p.y - 0.5;
    p = Vec3{0.5 + cx * std::cos(theta) - cy * std::sin(theta),
             0.5 + cx * std::sin(theta) + cy * std::cos(theta), stretch * p.z};
  }
  canonicalize(m);
  return m;
}

inline TetMesh make_bent_bar(int resolution, double bend_angle, double radius = kBendRadius) {
  TetMesh m = make_labeled_cube_grid(resolution);
  for (Vec3 &p : m.vertices) {
    double phi = bend_angle * p.z;
    double r = radius + (p.x - 0.5);
    p = Vec3{(0.5 - radius) + r * std::cos(phi), p.y, r * std::sin(phi)};
  }
  canonicalize(m);
  return m;
}

inline TetMesh make_sphereish(int resolution, double blend = kSphereBlend) {
  TetMesh m = make_labeled_cube_grid(resolution);
  for (Vec3 &p : m.vertices) {
    Vec3 c = p * 2.0 - Vec3{1, 1, 1};
    double rinf = std::max({std::fabs(c.x), std::fabs(c.y), std::fabs(c.z)});
    double r2 = norm(c);
    if (r2 > 0.0) {
      double f = (1.0 - blend) + blend * rinf / r2;
      c = c * f;
    }
    p = (c + Vec3{1, 1, 1}) * 0.5;
  }
  canonicalize(m);
  return m;
}

// Deterministic analytic deformations of the labeled cube grid. Labels and
// topology are inherited from the undeformed grid.
inline TetMesh make_synthetic_model(SyntheticModel model, int resolution) {
  if (resolution < 3)
    throw Error("synthetic model: resolution must be >= 3");
  switch (model) {
  case SyntheticModel::cube: return make_labeled_cube_grid(resolution);
  case SyntheticModel::twisted_bar: return make_twisted_bar(resolution, kTwistAngle);
  case SyntheticModel::bent_L: return make_bent_bar(resolution, kBendAngle);
  case SyntheticModel::sphereish: return make_sphereish(resolution, kSphereBlend);
  }
  throw Error("unknown synthetic model");
}

} // namespace tbs
