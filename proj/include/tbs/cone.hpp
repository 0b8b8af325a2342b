#pragma once

#include <span>
#include <vector>

#include "tbs/vec3.hpp"

namespace tbs {

// Circular cone with apex at the origin enclosing a set of unit vectors.
// The aperture referred to by the validity bounds is the full opening
// angle, i.e. 2 * half_aperture.
struct Cone {
  Vec3 axis{0, 0, 1};
  double half_aperture = 0.0;
  std::vector<int> support; // indices of vectors on the cone boundary

  bool contains(const Vec3 &v, double tol = 1e-12) const {
    return dot(axis, v) >= std::cos(half_aperture) - tol;
  }
};

namespace detail {

inline Cone cap1(const Vec3 &a, int ia) {
  Cone c;
  c.axis = a;
  c.half_aperture = 0.0;
  c.support = {ia};
  return c;
}

inline bool cap2(const Vec3 &a, const Vec3 &b, int ia, int ib, Cone &out) {
  Vec3 s = a + b;
  double n = norm(s);
  if (n < 1e-12)
    return false; // antipodal pair, no cap below a hemisphere
  out.axis = s / n;
  out.half_aperture = angle_between(out.axis, a);
  out.support = {ia, ib};
  return true;
}

// Cap with all three vectors on the boundary: axis equidistant in angle.
inline bool cap3(const Vec3 &a, const Vec3 &b, const Vec3 &c, int ia, int ib, int ic, Cone &out) {
  Vec3 n;
  if (!solve3({a, b, c}, Vec3{1, 1, 1}, n))
    return false; // linearly dependent generators
  double len = norm(n);
  if (len < 1e-300)
    return false;
  n = n / len;
  double h = dot(n, a);
  if (h < 0) {
    n = -n;
    h = -h;
  }
  out.axis = n;
  out.half_aperture = angle_between(n, a);
  out.support = {ia, ib, ic};
  return true;
}

inline Cone cone_md2(std::span<const Vec3> pts, int limit, int qi1, int qi2) {
  Cone c;
  if (!cap2(pts[qi1], pts[qi2], qi1, qi2, c))
    throw Error("min_enclosing_cone: vectors span a hemisphere or more");
  for (int j = 0; j < limit; ++j) {
    if (!c.contains(pts[j])) {
      Cone c3;
      if (!cap3(pts[qi1], pts[qi2], pts[j], qi1, qi2, j, c3))
        throw Error("min_enclosing_cone: vectors span a hemisphere or more");
      c = c3;
    }
  }
  return c;
}

inline Cone cone_md1(std::span<const Vec3> pts, int limit, int qi) {
  Cone c = cap1(pts[qi], qi);
  for (int j = 0; j < limit; ++j) {
    if (!c.contains(pts[j]))
      c = cone_md2(pts, j, qi, j);
  }
  return c;
}

} // namespace detail

// Minimal circular cone (minimal spherical cap) enclosing unit vectors.
// Deterministic Welzl-type incremental construction; the support set
// certifies minimality. Throws when no cone with half-aperture < pi/2
// exists (vectors not inside an open hemisphere).
inline Cone min_enclosing_cone(std::span<const Vec3> vectors) {
  if (vectors.empty())
    throw Error("min_enclosing_cone: empty input");
  Cone c = detail::cap1(vectors[0], 0);
  for (int i = 1; i < int(vectors.size()); ++i) {
    if (!c.contains(vectors[i]))
      c = detail::cone_md1(vectors, i, i);
  }
  if (!(c.half_aperture < M_PI / 2))
    throw Error("min_enclosing_cone: vectors span a hemisphere or more");
  return c;
}

inline Cone min_enclosing_cone(const std::vector<Vec3> &vectors) {
  return min_enclosing_cone(std::span<const Vec3>(vectors.data(), vectors.size()));
}

} // namespace tbs
