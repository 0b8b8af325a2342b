#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tbs {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double &operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  Vec3 &operator+=(const Vec3 &o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3 &operator-=(const Vec3 &o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3 &operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  bool operator==(const Vec3 &o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator!=(const Vec3 &o) const { return !(*this == o); }
};

inline Vec3 operator*(double s, const Vec3 &v) { return v * s; }

inline double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3 &a, const Vec3 &b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double triple(const Vec3 &a, const Vec3 &b, const Vec3 &c) { return dot(a, cross(b, c)); }

inline double norm2(const Vec3 &v) { return dot(v, v); }
inline double norm(const Vec3 &v) { return std::sqrt(norm2(v)); }

inline Vec3 normalized(const Vec3 &v) {
  double n = norm(v);
  if (n == 0.0)
    throw Error("cannot normalize zero vector");
  return v / n;
}

// Angle between two unit vectors, clamped against rounding.
inline double angle_between(const Vec3 &a, const Vec3 &b) {
  double c = dot(a, b);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

// Solves the 3x3 system A x = b by partial-pivot elimination.
// Returns false if the matrix is numerically singular.
inline bool solve3(const std::array<Vec3, 3> &rows, const Vec3 &b, Vec3 &out) {
  double a[3][4] = {{rows[0].x, rows[0].y, rows[0].z, b.x},
                    {rows[1].x, rows[1].y, rows[1].z, b.y},
                    {rows[2].x, rows[2].y, rows[2].z, b.z}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col]))
        piv = r;
    if (std::fabs(a[piv][col]) < 1e-300)
      return false;
    if (piv != col)
      for (int c = 0; c < 4; ++c)
        std::swap(a[piv][c], a[col][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col)
        continue;
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c)
        a[r][c] -= f * a[col][c];
    }
  }
  out = {a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]};
  return true;
}

inline std::ostream &operator<<(std::ostream &os, const Vec3 &v) {
  return os << v.x << " " << v.y << " " << v.z;
}

} // namespace tbs
