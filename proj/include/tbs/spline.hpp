#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <vector>

#include "tbs/vec3.hpp"

namespace tbs {

// Knot vector with Bezier end conditions: multiplicity degree+1 at 0 and 1,
// uniform interior knots.
struct KnotVector {
  int degree = 0;
  std::vector<double> knots;

  int num_ctrl() const { return int(knots.size()) - degree - 1; }

  static KnotVector uniform_bezier(int num_ctrl, int degree) {
    if (degree < 1)
      throw Error("knot vector: degree must be >= 1");
    if (num_ctrl < degree + 1)
      throw Error("knot vector: need at least degree+1 control points");
    KnotVector kv;
    kv.degree = degree;
    int interior = num_ctrl - degree - 1; // m - d uniform interior knots
    kv.knots.assign(degree + 1, 0.0);
    for (int i = 1; i <= interior; ++i)
      kv.knots.push_back(double(i) / double(interior + 1));
    kv.knots.insert(kv.knots.end(), degree + 1, 1.0);
    return kv;
  }

  // Index of the knot span containing u; the last span is closed at u = 1.
  int find_span(double u) const {
    if (!(u >= 0.0 && u <= 1.0))
      throw Error("parameter out of domain [0,1]");
    int n = num_ctrl() - 1;
    if (u >= knots[n + 1])
      return n;
    int lo = degree, hi = n + 1;
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      if (u < knots[mid])
        hi = mid;
      else
        lo = mid;
    }
    return lo;
  }

  // Nonzero basis functions at u: values[j] = B_{first+j}(u), j = 0..degree.
  int basis(double u, double *values) const {
    int span = find_span(u);
    double left[16], right[16];
    values[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = u - knots[span + 1 - j];
      right[j] = knots[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        double tmp = values[r] / (right[r + 1] + left[j - r]);
        values[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      values[j] = saved;
    }
    return span - degree;
  }

  // Basis functions and derivatives up to max_order (<= 2 used here).
  // ders[k*(degree+1) + j] = d^k/du^k B_{first+j}(u).
  int basis_derivs(double u, int max_order, double *ders) const {
    int span = find_span(u);
    const int d = degree;
    double ndu[16][16], left[16], right[16];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= d; ++j) {
      left[j] = u - knots[span + 1 - j];
      right[j] = knots[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        ndu[j][r] = right[r + 1] + left[j - r];
        double tmp = ndu[r][j - 1] / ndu[j][r];
        ndu[r][j] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      ndu[j][j] = saved;
    }
    for (int j = 0; j <= d; ++j)
      ders[0 * (d + 1) + j] = ndu[j][d];
    double a[2][16];
    for (int r = 0; r <= d; ++r) {
      int s1 = 0, s2 = 1;
      a[0][0] = 1.0;
      for (int k = 1; k <= max_order; ++k) {
        double dv = 0.0;
        int rk = r - k, pk = d - k;
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
          dv = a[s2][0] * ndu[rk][pk];
        }
        int j1 = (rk >= -1) ? 1 : -rk;
        int j2 = (r - 1 <= pk) ? k - 1 : d - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
          dv += a[s2][j] * ndu[rk + j][pk];
        }
        if (r <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
          dv += a[s2][k] * ndu[r][pk];
        }
        ders[k * (d + 1) + r] = dv;
        std::swap(s1, s2);
      }
    }
    double f = d;
    for (int k = 1; k <= max_order; ++k) {
      for (int j = 0; j <= d; ++j)
        ders[k * (d + 1) + j] *= f;
      f *= d - k;
    }
    return span - d;
  }

  // Greville abscissae: xi_i = (t_{i+1} + ... + t_{i+d}) / d.
  std::vector<double> greville() const {
    std::vector<double> xi(num_ctrl());
    for (int i = 0; i < num_ctrl(); ++i) {
      double s = 0.0;
      for (int k = 1; k <= degree; ++k)
        s += knots[i + k];
      xi[i] = s / degree;
    }
    return xi;
  }
};

// Basis values of a single derivative order (0, 1 or 2).
inline std::pair<int, std::vector<double>> eval_basis(const KnotVector &kv, double u,
                                                      int derivative_order) {
  if (derivative_order < 0 || derivative_order > 2)
    throw Error("derivative order must be 0, 1 or 2");
  std::vector<double> vals(kv.degree + 1);
  int first;
  if (derivative_order == 0) {
    first = kv.basis(u, vals.data());
  } else {
    std::vector<double> ders(3 * (kv.degree + 1));
    first = kv.basis_derivs(u, derivative_order, ders.data());
    for (int j = 0; j <= kv.degree; ++j)
      vals[j] = ders[derivative_order * (kv.degree + 1) + j];
  }
  return {first, vals};
}

struct BsplineCurve {
  std::vector<Vec3> ctrl;
  KnotVector kv;

  int num_ctrl() const { return int(ctrl.size()); }

  Vec3 eval(double u) const {
    double b[16];
    int first = kv.basis(u, b);
    Vec3 p{0, 0, 0};
    for (int j = 0; j <= kv.degree; ++j)
      p += ctrl[first + j] * b[j];
    return p;
  }

  Vec3 derivative(double u) const {
    double ders[3 * 16];
    int first = kv.basis_derivs(u, 1, ders);
    Vec3 p{0, 0, 0};
    for (int j = 0; j <= kv.degree; ++j)
      p += ctrl[first + j] * ders[(kv.degree + 1) + j];
    return p;
  }
};

struct BsplineSurface {
  std::vector<Vec3> ctrl; // row-major, index = i * nv + j
  int nu = 0, nv = 0;
  KnotVector kv_u, kv_v;

  const Vec3 &at(int i, int j) const { return ctrl[i * nv + j]; }
  Vec3 &at(int i, int j) { return ctrl[i * nv + j]; }

  Vec3 eval(double u, double v) const {
    double bu[16], bv[16];
    int fu = kv_u.basis(u, bu), fv = kv_v.basis(v, bv);
    Vec3 p{0, 0, 0};
    for (int a = 0; a <= kv_u.degree; ++a)
      for (int b = 0; b <= kv_v.degree; ++b)
        p += at(fu + a, fv + b) * (bu[a] * bv[b]);
    return p;
  }

  // Position and first partials.
  void eval_partials(double u, double v, Vec3 &pos, Vec3 &su, Vec3 &sv) const {
    double du[2 * 16], dv[2 * 16];
    int fu = kv_u.basis_derivs(u, 1, du), fv = kv_v.basis_derivs(v, 1, dv);
    const int pu = kv_u.degree + 1, pv = kv_v.degree + 1;
    pos = su = sv = Vec3{0, 0, 0};
    for (int a = 0; a < pu; ++a)
      for (int b = 0; b < pv; ++b) {
        const Vec3 &c = at(fu + a, fv + b);
        pos += c * (du[a] * dv[b]);
        su += c * (du[pu + a] * dv[b]);
        sv += c * (du[a] * dv[pv + b]);
      }
  }
};

struct SolidFrame {
  Vec3 pos, du, dv, dw;
  double jacobian() const { return triple(du, dv, dw); }
  const Vec3 &partial(int axis) const { return axis == 0 ? du : (axis == 1 ? dv : dw); }
};

struct BsplineSolid {
  std::vector<Vec3> ctrl; // lexicographic (i,j,k), k fastest
  int nu = 0, nv = 0, nw = 0;
  KnotVector kv_u, kv_v, kv_w;

  int index(int i, int j, int k) const { return (i * nv + j) * nw + k; }
  const Vec3 &at(int i, int j, int k) const { return ctrl[index(i, j, k)]; }
  Vec3 &at(int i, int j, int k) { return ctrl[index(i, j, k)]; }

  Vec3 eval(double u, double v, double w) const {
    double bu[16], bv[16], bw[16];
    int fu = kv_u.basis(u, bu), fv = kv_v.basis(v, bv), fw = kv_w.basis(w, bw);
    Vec3 p{0, 0, 0};
    for (int a = 0; a <= kv_u.degree; ++a)
      for (int b = 0; b <= kv_v.degree; ++b) {
        double bab = bu[a] * bv[b];
        for (int c = 0; c <= kv_w.degree; ++c)
          p += at(fu + a, fv + b, fw + c) * (bab * bw[c]);
      }
    return p;
  }

  SolidFrame frame(double u, double v, double w) const {
    double du[2 * 16], dv[2 * 16], dw[2 * 16];
    int fu = kv_u.basis_derivs(u, 1, du);
    int fv = kv_v.basis_derivs(v, 1, dv);
    int fw = kv_w.basis_derivs(w, 1, dw);
    const int pu = kv_u.degree + 1, pv = kv_v.degree + 1, pw = kv_w.degree + 1;
    SolidFrame f;
    f.pos = f.du = f.dv = f.dw = Vec3{0, 0, 0};
    for (int a = 0; a < pu; ++a)
      for (int b = 0; b < pv; ++b)
        for (int c = 0; c < pw; ++c) {
          const Vec3 &cp = at(fu + a, fv + b, fw + c);
          f.pos += cp * (du[a] * dv[b] * dw[c]);
          f.du += cp * (du[pu + a] * dv[b] * dw[c]);
          f.dv += cp * (du[a] * dv[pv + b] * dw[c]);
          f.dw += cp * (du[a] * dv[b] * dw[pw + c]);
        }
    return f;
  }

  double jacobian(double u, double v, double w) const { return frame(u, v, w).jacobian(); }

  // Jacobian divided by the product of partial norms; nullopt at a degenerate
  // frame (zero partial), which is distinct from a zero Jacobian.
  std::optional<double> scaled_jacobian(double u, double v, double w) const {
    SolidFrame f = frame(u, v, w);
    double nu_ = norm(f.du), nv_ = norm(f.dv), nw_ = norm(f.dw);
    if (nu_ == 0.0 || nv_ == 0.0 || nw_ == 0.0)
      return std::nullopt;
    return f.jacobian() / (nu_ * nv_ * nw_);
  }
};

// --- control grid file io (format documented in docs/formats.md) ---

inline void save_solid(const BsplineSolid &s, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  f << "tbs-solid\n";
  f << "degrees " << s.kv_u.degree << " " << s.kv_v.degree << " " << s.kv_w.degree << "\n";
  f << "counts " << s.nu << " " << s.nv << " " << s.nw << "\n";
  char buf[96];
  for (const Vec3 &p : s.ctrl) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    f << buf;
  }
}

inline BsplineSolid load_solid(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open: " + path);
  std::string magic, word;
  f >> magic;
  if (magic != "tbs-solid")
    throw Error("not a tbs-solid file: " + path);
  BsplineSolid s;
  int du, dv, dw;
  f >> word >> du >> dv >> dw;
  if (word != "degrees")
    throw Error("malformed solid file (degrees): " + path);
  f >> word >> s.nu >> s.nv >> s.nw;
  if (word != "counts")
    throw Error("malformed solid file (counts): " + path);
  s.kv_u = KnotVector::uniform_bezier(s.nu, du);
  s.kv_v = KnotVector::uniform_bezier(s.nv, dv);
  s.kv_w = KnotVector::uniform_bezier(s.nw, dw);
  s.ctrl.resize(size_t(s.nu) * s.nv * s.nw);
  for (Vec3 &p : s.ctrl)
    if (!(f >> p.x >> p.y >> p.z))
      throw Error("truncated solid file: " + path);
  return s;
}

} // namespace tbs
