#pragma once

#include <span>
#include <vector>

#include "tbs/cone.hpp"
#include "tbs/spline.hpp"
#include "tbs/vec3.hpp"

namespace tbs {

// Strictness margins for the validity inequalities.
constexpr double kTolTriple = 1e-10; // triple products (solids)
constexpr double kTolSep = 1e-10;    // cone separation (surfaces)
// Curve windows bound the full cone aperture by pi/2, i.e. half < pi/4.
constexpr double kCurveHalfApertureMax = M_PI / 4;

struct CurveCheck {
  bool ok = true;
  int window = -1;
};

struct SurfaceCheck {
  bool ok = true;
  int I = -1, J = -1;
};

struct SolidCheck {
  bool ok = true;
  int I = -1, J = -1, K = -1;
};

namespace detail {

inline bool unit_diff(const Vec3 &a, const Vec3 &b, Vec3 &out) {
  Vec3 d = b - a;
  double n2 = norm2(d);
  if (n2 < 1e-300)
    return false;
  out = d / std::sqrt(n2);
  return true;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Curve validity: every sliding window of d consecutive difference
// vectors fits in a cone of half-aperture < pi/4.
// ---------------------------------------------------------------------------

class CurveValiditySession {
public:
  CurveValiditySession(int num_ctrl, int degree) : n_(num_ctrl), d_(degree) {
    diffs_.resize(n_ - 1);
    diff_ok_.resize(n_ - 1);
    int windows = n_ - 1 - d_ + 1; // i = 0 .. m-d
    window_ok_.assign(std::max(windows, 0), true);
  }

  int num_windows() const { return int(window_ok_.size()); }

  void reset(std::span<const Vec3> pts) {
    pts_.assign(pts.begin(), pts.end());
    for (int i = 0; i < n_ - 1; ++i)
      diff_ok_[i] = detail::unit_diff(pts_[i], pts_[i + 1], diffs_[i]);
    violated_ = 0;
    for (int w = 0; w < num_windows(); ++w) {
      window_ok_[w] = check_window(w, nullptr, -1);
      if (!window_ok_[w])
        ++violated_;
    }
  }

  // windows touching point i, re-evaluated with the candidate position
  bool probe_point(int i, const Vec3 &p) const {
    if (violated_ != 0)
      return false;
    for (int w = std::max(0, i - d_); w <= std::min(num_windows() - 1, i); ++w)
      if (!check_window(w, &p, i))
        return false;
    return true;
  }

  bool feasible() const { return violated_ == 0; }

  CurveCheck first_violation() const {
    for (int w = 0; w < num_windows(); ++w)
      if (!window_ok_[w])
        return {false, w};
    return {true, -1};
  }

  bool has_degenerate_diff() const {
    for (bool ok : diff_ok_)
      if (!ok)
        return true;
    return false;
  }

private:
  bool check_window(int w, const Vec3 *probe, int probe_i) const {
    // window w uses diffs T_w .. T_{w+d-1}
    std::vector<Vec3> vs;
    vs.reserve(d_);
    for (int i = w; i < w + d_; ++i) {
      if (probe && (i == probe_i || i + 1 == probe_i)) {
        Vec3 a = i == probe_i ? *probe : pts_[size_t(i)];
        Vec3 b = i + 1 == probe_i ? *probe : pts_[size_t(i + 1)];
        Vec3 t;
        if (!detail::unit_diff(a, b, t))
          return false;
        vs.push_back(t);
      } else {
        if (!diff_ok_[i])
          return false;
        vs.push_back(diffs_[i]);
      }
    }
    try {
      Cone c = min_enclosing_cone(vs);
      return c.half_aperture < kCurveHalfApertureMax;
    } catch (const Error &) {
      return false; // hemisphere spread certainly exceeds the bound
    }
  }

  int n_, d_;
  std::vector<Vec3> pts_, diffs_;
  std::vector<char> diff_ok_;
  std::vector<char> window_ok_;
  int violated_ = 0;
};

inline std::pair<bool, CurveCheck> check_curve_validity(const BsplineCurve &curve) {
  const int n = curve.num_ctrl(), d = curve.kv.degree;
  for (int i = 0; i + 1 < n; ++i)
    if (norm2(curve.ctrl[i + 1] - curve.ctrl[i]) < 1e-300)
      throw Error("curve validity: coincident consecutive control points");
  CurveValiditySession s(n, d);
  s.reset(curve.ctrl);
  CurveCheck c = s.first_violation();
  return {c.ok, c};
}

// ---------------------------------------------------------------------------
// Surface validity: every sub-control-polygon's cross normals lie
// on one side of the plane spanned by the minimum-cone axes.
// ---------------------------------------------------------------------------

// Window form of the surface validity condition: with U, V the minimum-cone
// axes of the window's u- and v-difference vectors, every cross normal
// T^u x T^v must lie strictly on the U x V side, which keeps the surface
// normal away from zero. The form holds on planar trapezoid grids (frusta
// side quads) and is invariant under reversing a whole parameter direction.
inline bool normals_one_sided(std::span<const Vec3> us, std::span<const Vec3> vs, const Vec3 &U,
                              const Vec3 &V) {
  Vec3 W = cross(U, V);
  if (norm2(W) < 1e-24)
    return false; // cone axes (anti)parallel: no separating normal plane
  for (const Vec3 &tu : us)
    for (const Vec3 &tv : vs)
      if (dot(cross(tu, tv), W) <= kTolSep)
        return false;
  return true;
}


class SurfaceValiditySession {
public:
  SurfaceValiditySession(int nu, int nv, int du, int dv)
      : nu_(nu), nv_(nv), du_(du), dv_(dv) {
    tu_.resize(size_t(nu_ - 1) * nv_);
    tu_ok_.resize(tu_.size());
    tv_.resize(size_t(nu_) * (nv_ - 1));
    tv_ok_.resize(tv_.size());
    wI_ = nu_ - du_, wJ_ = nv_ - dv_; // windows per axis
    window_ok_.assign(size_t(std::max(wI_, 0)) * std::max(wJ_, 0), true);
  }

  void reset(std::span<const Vec3> pts) {
    pts_.assign(pts.begin(), pts.end());
    for (int i = 0; i + 1 < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        tu_ok_[tu_idx(i, j)] =
            detail::unit_diff(at(i, j), at(i + 1, j), tu_[tu_idx(i, j)]);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j + 1 < nv_; ++j)
        tv_ok_[tv_idx(i, j)] =
            detail::unit_diff(at(i, j), at(i, j + 1), tv_[tv_idx(i, j)]);
    violated_ = 0;
    for (int I = 0; I < wI_; ++I)
      for (int J = 0; J < wJ_; ++J) {
        bool ok = check_window(I, J, nullptr, -1);
        window_ok_[I * wJ_ + J] = ok;
        if (!ok)
          ++violated_;
      }
  }

  bool probe_point(int flat, const Vec3 &p) const {
    if (violated_ != 0)
      return false;
    int i = flat / nv_, j = flat % nv_;
    for (int I = std::max(0, i - du_); I <= std::min(wI_ - 1, i); ++I)
      for (int J = std::max(0, j - dv_); J <= std::min(wJ_ - 1, j); ++J)
        if (!check_window(I, J, &p, flat))
          return false;
    return true;
  }

  bool feasible() const { return violated_ == 0; }

  SurfaceCheck first_violation() const {
    for (int I = 0; I < wI_; ++I)
      for (int J = 0; J < wJ_; ++J)
        if (!window_ok_[I * wJ_ + J])
          return {false, I, J};
    return {true, -1, -1};
  }

  bool has_degenerate_diff() const {
    for (char ok : tu_ok_)
      if (!ok)
        return true;
    for (char ok : tv_ok_)
      if (!ok)
        return true;
    return false;
  }

private:
  size_t tu_idx(int i, int j) const { return size_t(i) * nv_ + j; }
  size_t tv_idx(int i, int j) const { return size_t(i) * (nv_ - 1) + j; }
  const Vec3 &at(int i, int j) const { return pts_[size_t(i) * nv_ + j]; }

  bool check_window(int I, int J, const Vec3 *probe, int probe_flat) const {
    std::vector<Vec3> us, vs;
    us.reserve(du_ * (dv_ + 1));
    vs.reserve((du_ + 1) * dv_);
    auto position = [&](int i, int j) {
      int flat = i * nv_ + j;
      return (probe && flat == probe_flat) ? *probe : pts_[size_t(flat)];
    };
    auto touched = [&](int i, int j, int i2, int j2) {
      if (!probe)
        return false;
      return i * nv_ + j == probe_flat || i2 * nv_ + j2 == probe_flat;
    };
    for (int i = I; i < I + du_; ++i)
      for (int j = J; j <= J + dv_; ++j) {
        if (touched(i, j, i + 1, j)) {
          Vec3 t;
          if (!detail::unit_diff(position(i, j), position(i + 1, j), t))
            return false;
          us.push_back(t);
          continue;
        }
        if (!tu_ok_[tu_idx(i, j)])
          return false;
        us.push_back(tu_[tu_idx(i, j)]);
      }
    for (int i = I; i <= I + du_; ++i)
      for (int j = J; j < J + dv_; ++j) {
        if (touched(i, j, i, j + 1)) {
          Vec3 t;
          if (!detail::unit_diff(position(i, j), position(i, j + 1), t))
            return false;
          vs.push_back(t);
          continue;
        }
        if (!tv_ok_[tv_idx(i, j)])
          return false;
        vs.push_back(tv_[tv_idx(i, j)]);
      }
    Cone cu, cv;
    try {
      cu = min_enclosing_cone(us);
      cv = min_enclosing_cone(vs);
    } catch (const Error &) {
      return false; // hemisphere spread certainly violates the condition
    }
    return normals_one_sided(us, vs, cu.axis, cv.axis);
  }

  int nu_, nv_, du_, dv_, wI_ = 0, wJ_ = 0;
  std::vector<Vec3> pts_, tu_, tv_;
  std::vector<char> tu_ok_, tv_ok_;
  std::vector<char> window_ok_;
  int violated_ = 0;
};

inline std::pair<bool, SurfaceCheck> check_surface_validity(const BsplineSurface &s) {
  for (int i = 0; i + 1 < s.nu; ++i)
    for (int j = 0; j < s.nv; ++j)
      if (norm2(s.at(i + 1, j) - s.at(i, j)) < 1e-300)
        throw Error("surface validity: coincident adjacent control points");
  for (int i = 0; i < s.nu; ++i)
    for (int j = 0; j + 1 < s.nv; ++j)
      if (norm2(s.at(i, j + 1) - s.at(i, j)) < 1e-300)
        throw Error("surface validity: coincident adjacent control points");
  SurfaceValiditySession sess(s.nu, s.nv, s.kv_u.degree, s.kv_v.degree);
  sess.reset(s.ctrl);
  SurfaceCheck c = sess.first_violation();
  return {c.ok, c};
}

// ---------------------------------------------------------------------------
// Solid validity: on each (du+1)x(dv+1)x(dw+1) sub-grid every
// triple product T^u . (T^v x T^w) is positive.
// ---------------------------------------------------------------------------

class SolidValiditySession {
public:
  SolidValiditySession(int nu, int nv, int nw, int du, int dv, int dw)
      : nu_(nu), nv_(nv), nw_(nw), du_(du), dv_(dv), dw_(dw) {
    tu_.resize(size_t(nu_ - 1) * nv_ * nw_);
    tu_ok_.resize(tu_.size());
    tu_len_.resize(tu_.size());
    tv_.resize(size_t(nu_) * (nv_ - 1) * nw_);
    tv_ok_.resize(tv_.size());
    tv_len_.resize(tv_.size());
    tw_.resize(size_t(nu_) * nv_ * (nw_ - 1));
    tw_ok_.resize(tw_.size());
    tw_len_.resize(tw_.size());
    wI_ = nu_ - du_, wJ_ = nv_ - dv_, wK_ = nw_ - dw_;
    size_t windows = size_t(std::max(wI_, 0)) * std::max(wJ_, 0) * std::max(wK_, 0);
    window_ok_.assign(windows, true);
    window_slack_.assign(windows, 0.0);
    window_lmin_.assign(windows, 0.0);
  }

  void reset(std::span<const Vec3> pts) {
    pts_.assign(pts.begin(), pts.end());
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        for (int k = 0; k < nw_; ++k)
          update_diffs_at(i, j, k);
    violated_ = 0;
    for (int I = 0; I < wI_; ++I)
      for (int J = 0; J < wJ_; ++J)
        for (int K = 0; K < wK_; ++K) {
          size_t w = widx(I, J, K);
          window_ok_[w] = check_window(I, J, K, nullptr, -1, window_slack_[w], window_lmin_[w]);
          if (!window_ok_[w])
            ++violated_;
        }
  }

  bool feasible() const { return violated_ == 0; }

  // Would replacing point flat with p keep every window valid? Windows whose
  // cached slack exceeds the perturbation bound are accepted without any
  // recomputation; only boundary-tight windows are re-scanned.
  bool probe_point(int flat, const Vec3 &p) const {
    if (violated_ != 0)
      return false;
    int i = flat / (nv_ * nw_), j = (flat / nw_) % nv_, k = flat % nw_;
    double delta = norm(p - pts_[size_t(flat)]);
    if (delta == 0.0)
      return true;
    for (int I = std::max(0, i - du_); I <= std::min(wI_ - 1, i); ++I)
      for (int J = std::max(0, j - dv_); J <= std::min(wJ_ - 1, j); ++J)
        for (int K = std::max(0, k - dw_); K <= std::min(wK_ - 1, k); ++K) {
          size_t w = widx(I, J, K);
          double lmin = window_lmin_[w];
          // unit-diff chord bound: each of the <=3 changed vectors in a
          // triple moves by at most 2*delta/lmin
          if (lmin > 2.0 * delta && 6.0 * delta / lmin < window_slack_[w])
            continue;
          double slack, lm;
          if (!check_window(I, J, K, &p, flat, slack, lm))
            return false;
        }
    return true;
  }

  SolidCheck first_violation() const {
    for (int I = 0; I < wI_; ++I)
      for (int J = 0; J < wJ_; ++J)
        for (int K = 0; K < wK_; ++K)
          if (!window_ok_[widx(I, J, K)])
            return {false, I, J, K};
    return {true, -1, -1, -1};
  }

  bool has_degenerate_diff() const {
    for (char ok : tu_ok_)
      if (!ok)
        return true;
    for (char ok : tv_ok_)
      if (!ok)
        return true;
    for (char ok : tw_ok_)
      if (!ok)
        return true;
    return false;
  }

private:
  size_t tu_idx(int i, int j, int k) const { return (size_t(i) * nv_ + j) * nw_ + k; }
  size_t tv_idx(int i, int j, int k) const { return (size_t(i) * (nv_ - 1) + j) * nw_ + k; }
  size_t tw_idx(int i, int j, int k) const { return (size_t(i) * nv_ + j) * (nw_ - 1) + k; }
  size_t widx(int I, int J, int K) const { return (size_t(I) * wJ_ + J) * wK_ + K; }
  int flat_index(int i, int j, int k) const { return (i * nv_ + j) * nw_ + k; }

  void update_diffs_at(int i, int j, int k) {
    if (i + 1 < nu_)
      refresh_diff(0, i, j, k);
    if (j + 1 < nv_)
      refresh_diff(1, i, j, k);
    if (k + 1 < nw_)
      refresh_diff(2, i, j, k);
  }

  void refresh_diff(int family, int i, int j, int k) {
    const Vec3 &a = pts_[size_t(flat_index(i, j, k))];
    const Vec3 &b = pts_[size_t(flat_index(i + (family == 0), j + (family == 1),
                               k + (family == 2)))];
    Vec3 d = b - a;
    double L = norm(d);
    size_t e = family == 0 ? tu_idx(i, j, k) : (family == 1 ? tv_idx(i, j, k) : tw_idx(i, j, k));
    if (family == 0) {
      tu_ok_[e] = L * L > 1e-300;
      tu_len_[e] = L;
      if (tu_ok_[e])
        tu_[e] = d / L;
    } else if (family == 1) {
      tv_ok_[e] = L * L > 1e-300;
      tv_len_[e] = L;
      if (tv_ok_[e])
        tv_[e] = d / L;
    } else {
      tw_ok_[e] = L * L > 1e-300;
      tw_len_[e] = L;
      if (tw_ok_[e])
        tw_[e] = d / L;
    }
  }

  // Gather one family's window vectors, substituting diffs adjacent to an
  // optional probed point. Returns false on a degenerate diff.
  bool gather(int family, int I, int J, int K, const Vec3 *probe_pos, int probe_flat,
              std::vector<Vec3> &out, double &lmin) const {
    out.clear();
    int i1 = I + (family == 0 ? du_ - 1 : du_);
    int j1 = J + (family == 1 ? dv_ - 1 : dv_);
    int k1 = K + (family == 2 ? dw_ - 1 : dw_);
    for (int i = I; i <= i1; ++i)
      for (int j = J; j <= j1; ++j)
        for (int k = K; k <= k1; ++k) {
          int fa = flat_index(i, j, k);
          int fb = flat_index(i + (family == 0), j + (family == 1), k + (family == 2));
          if (probe_pos && (fa == probe_flat || fb == probe_flat)) {
            Vec3 a = fa == probe_flat ? *probe_pos : pts_[size_t(fa)];
            Vec3 b = fb == probe_flat ? *probe_pos : pts_[size_t(fb)];
            Vec3 d = b - a;
            double L = norm(d);
            if (L * L < 1e-300)
              return false;
            out.push_back(d / L);
            lmin = std::min(lmin, L);
          } else {
            size_t e = family == 0 ? tu_idx(i, j, k)
                                   : (family == 1 ? tv_idx(i, j, k) : tw_idx(i, j, k));
            bool ok = family == 0 ? bool(tu_ok_[e]) : (family == 1 ? bool(tv_ok_[e]) : bool(tw_ok_[e]));
            if (!ok)
              return false;
            out.push_back(family == 0 ? tu_[e] : (family == 1 ? tv_[e] : tw_[e]));
            lmin = std::min(lmin, family == 0 ? tu_len_[e]
                                              : (family == 1 ? tv_len_[e] : tw_len_[e]));
          }
        }
    return true;
  }

  // Layered validity check of one window; on success slack_out holds a
  // conservative lower bound of (min triple - tol) and lmin_out the shortest
  // difference length.
  bool check_window(int I, int J, int K, const Vec3 *probe_pos, int probe_flat,
                    double &slack_out, double &lmin_out) const {
    static thread_local std::vector<Vec3> fam[3];
    double lmin = std::numeric_limits<double>::infinity();
    for (int f = 0; f < 3; ++f)
      if (!gather(f, I, J, K, probe_pos, probe_flat, fam[f], lmin)) {
        slack_out = 0.0;
        lmin_out = 0.0;
        return false;
      }
    lmin_out = lmin;

    // provisional cones per family
    Vec3 axis[3];
    double chord[3];
    for (int f = 0; f < 3; ++f) {
      Vec3 sum{0, 0, 0};
      for (const Vec3 &v : fam[f])
        sum += v;
      double len = norm(sum);
      if (len < 1e-12) {
        axis[f] = Vec3{0, 0, 1};
        chord[f] = 2.0;
      } else {
        axis[f] = sum / len;
        double cmin = 1.0;
        for (const Vec3 &v : fam[f])
          cmin = std::min(cmin, dot(axis[f], v));
        chord[f] = std::sqrt(std::max(0.0, 2.0 - 2.0 * cmin));
      }
    }
    double det = triple(axis[0], axis[1], axis[2]);
    double whole = det - (chord[0] + chord[1] + chord[2]);
    if (whole > kTolTriple) {
      slack_out = whole - kTolTriple;
      return true;
    }

    // pair level: dot the tightest family's cone against cross products of
    // the other two, with exact fallback per uncertified pair
    int a = 0;
    if (chord[1] < chord[a])
      a = 1;
    if (chord[2] < chord[a])
      a = 2;
    // cyclic order keeps the triple-product sign: dot(fam_a, cross(fam_b, fam_c))
    int b = (a + 1) % 3, c = (a + 2) % 3;
    double slack = std::numeric_limits<double>::infinity();
    for (const Vec3 &vb : fam[b])
      for (const Vec3 &vc : fam[c]) {
        Vec3 n = cross(vb, vc);
        double nn = norm(n);
        double da = dot(axis[a], n);
        double bound = da - chord[a] * nn;
        if (bound > kTolTriple) {
          slack = std::min(slack, bound - kTolTriple);
          continue;
        }
        for (const Vec3 &va : fam[a]) {
          double t = dot(va, n);
          if (t <= kTolTriple) {
            slack_out = 0.0;
            return false;
          }
          slack = std::min(slack, t - kTolTriple);
        }
      }
    slack_out = slack;
    return true;
  }

  int nu_, nv_, nw_, du_, dv_, dw_, wI_ = 0, wJ_ = 0, wK_ = 0;
  std::vector<Vec3> pts_, tu_, tv_, tw_;
  std::vector<char> tu_ok_, tv_ok_, tw_ok_;
  std::vector<double> tu_len_, tv_len_, tw_len_;
  std::vector<char> window_ok_;
  std::vector<double> window_slack_, window_lmin_;
  int violated_ = 0;
};

inline std::pair<bool, SolidCheck> check_solid_validity(const BsplineSolid &s) {
  for (int i = 0; i < s.nu; ++i)
    for (int j = 0; j < s.nv; ++j)
      for (int k = 0; k < s.nw; ++k) {
        if (i + 1 < s.nu && norm2(s.at(i + 1, j, k) - s.at(i, j, k)) < 1e-300)
          throw Error("solid validity: coincident adjacent control points");
        if (j + 1 < s.nv && norm2(s.at(i, j + 1, k) - s.at(i, j, k)) < 1e-300)
          throw Error("solid validity: coincident adjacent control points");
        if (k + 1 < s.nw && norm2(s.at(i, j, k + 1) - s.at(i, j, k)) < 1e-300)
          throw Error("solid validity: coincident adjacent control points");
      }
  SolidValiditySession sess(s.nu, s.nv, s.nw, s.kv_u.degree, s.kv_v.degree, s.kv_w.degree);
  sess.reset(s.ctrl);
  SolidCheck c = sess.first_violation();
  return {c.ok, c};
}

// ---------------------------------------------------------------------------
// Compatibility conditions (Fig. 5).
// ---------------------------------------------------------------------------

// Corner-window form of the surface condition between a new curve and an
// adjacent fixed curve of the same surface. Both sequences start at the
// shared corner control point.
inline bool check_curve_compatibility(std::span<const Vec3> new_ctrl,
                                      std::span<const Vec3> adj_ctrl) {
  if (new_ctrl.size() < 2 || adj_ctrl.size() < 2)
    throw Error("curve compatibility: need at least two control points per curve");
  if (norm(new_ctrl[0] - adj_ctrl[0]) > 1e-9)
    throw Error("curve compatibility: curves do not share a corner");
  std::vector<Vec3> us, vs;
  for (size_t i = 0; i + 1 < new_ctrl.size(); ++i) {
    Vec3 t;
    if (!detail::unit_diff(new_ctrl[i], new_ctrl[i + 1], t))
      return false;
    us.push_back(t);
  }
  for (size_t j = 0; j + 1 < adj_ctrl.size(); ++j) {
    Vec3 t;
    if (!detail::unit_diff(adj_ctrl[j], adj_ctrl[j + 1], t))
      return false;
    vs.push_back(t);
  }
  Cone cu, cv;
  try {
    cu = min_enclosing_cone(us);
    cv = min_enclosing_cone(vs);
  } catch (const Error &) {
    return false;
  }
  return normals_one_sided(us, vs, cu.axis, cv.axis);
}

// Corner assembly for surface compatibility: up to three face grids of the
// same solid corner. Each grid is stored row-major (first index x second
// index) and oriented away from the shared corner, i.e. element (0,0) is the
// shared corner control point.
struct CornerFaceGrid {
  std::vector<Vec3> pts;
  int n1 = 0, n2 = 0;  // grid extents
  int axis1 = 0, axis2 = 1; // which solid axes the grid directions follow (0=u,1=v,2=w)
  // grid-direction signs: -1 when the block was assembled away from the
  // far corner, so difference vectors keep the solid's orientation
  double sign1 = 1.0, sign2 = 1.0;
  const Vec3 &at(int a, int b) const { return pts[size_t(a) * n2 + b]; }
};

// Solid-validity triple products restricted to a corner populated on the
// given faces. Difference vectors are collected per solid axis from every
// face that carries that axis.
inline bool check_corner_triples(std::span<const CornerFaceGrid> faces) {
  std::vector<Vec3> t[3];
  for (const CornerFaceGrid &f : faces) {
    for (int a = 0; a + 1 < f.n1; ++a)
      for (int b = 0; b < f.n2; ++b) {
        Vec3 d;
        if (!detail::unit_diff(f.at(a, b), f.at(a + 1, b), d))
          return false;
        t[f.axis1].push_back(d * f.sign1);
      }
    for (int a = 0; a < f.n1; ++a)
      for (int b = 0; b + 1 < f.n2; ++b) {
        Vec3 d;
        if (!detail::unit_diff(f.at(a, b), f.at(a, b + 1), d))
          return false;
        t[f.axis2].push_back(d * f.sign2);
      }
  }
  if (t[0].empty() || t[1].empty() || t[2].empty())
    return true; // not enough directions to constrain
  for (const Vec3 &a : t[0])
    for (const Vec3 &b : t[1])
      for (const Vec3 &c : t[2])
        if (triple(a, b, c) <= kTolTriple)
          return false;
  return true;
}

// Three corner sub-control-polygons sized (du+1)x(dv+1), (dv+1)x(dw+1) and
// (du+1)x(dw+1), sharing the corner control point.
inline bool check_surface_compatibility(const CornerFaceGrid &uv, const CornerFaceGrid &vw,
                                        const CornerFaceGrid &uw) {
  if (norm(uv.at(0, 0) - vw.at(0, 0)) > 1e-9 || norm(uv.at(0, 0) - uw.at(0, 0)) > 1e-9)
    throw Error("surface compatibility: mismatched corner");
  std::array<CornerFaceGrid, 3> faces = {uv, vw, uw};
  return check_corner_triples(faces);
}

// ---------------------------------------------------------------------------
// Dense sampling oracles.
// ---------------------------------------------------------------------------

inline double curve_min_derivative_norm(const BsplineCurve &c, int samples) {
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double u = double(i) / (samples - 1);
    mn = std::min(mn, norm(c.derivative(u)));
  }
  return mn;
}

inline double surface_min_normal_norm(const BsplineSurface &s, int samples) {
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j) {
      double u = double(i) / (samples - 1), v = double(j) / (samples - 1);
      Vec3 p, su, sv;
      s.eval_partials(u, v, p, su, sv);
      mn = std::min(mn, norm(cross(su, sv)));
    }
  return mn;
}

struct JacobianScan {
  double min_scaled = std::numeric_limits<double>::infinity();
  double avg_scaled = 0.0;
  double ratio_low = 0.0; // volume fraction with scaled J in (0, 0.2]
  std::array<double, 20> histogram{}; // volume-weighted, bins over [-1, 1]
  int degenerate_samples = 0;
  double min_jacobian = std::numeric_limits<double>::infinity();
  double volume = 0.0; // approximated model-space volume of the block

  bool degenerate() const { return degenerate_samples > 0; }
};

// Statistics over a uniform parameter lattice. Volume integrals use the
// pullback |J| du dv dw with composite-trapezoid weights per axis; the
// minimum is taken over raw samples. Degenerate frames set the sentinel.
inline JacobianScan dense_jacobian_scan(const BsplineSolid &s, int samples_per_axis) {
  if (samples_per_axis < 2)
    throw Error("dense_jacobian_scan: need at least 2 samples per axis");
  JacobianScan r;
  const int n = samples_per_axis;
  double wsum = 0.0, wlow = 0.0, javg = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double u = double(i) / (n - 1), v = double(j) / (n - 1), w = double(k) / (n - 1);
        SolidFrame f = s.frame(u, v, w);
        double nu_ = norm(f.du), nv_ = norm(f.dv), nw_ = norm(f.dw);
        double J = f.jacobian();
        r.min_jacobian = std::min(r.min_jacobian, J);
        if (nu_ == 0.0 || nv_ == 0.0 || nw_ == 0.0) {
          ++r.degenerate_samples;
          continue;
        }
        double sj = J / (nu_ * nv_ * nw_);
        r.min_scaled = std::min(r.min_scaled, sj);
        double wt = ((i == 0 || i == n - 1) ? 0.5 : 1.0) *
                    ((j == 0 || j == n - 1) ? 0.5 : 1.0) *
                    ((k == 0 || k == n - 1) ? 0.5 : 1.0) * std::fabs(J);
        wsum += wt;
        javg += wt * sj;
        if (sj > 0.0 && sj <= 0.2)
          wlow += wt;
        int bin = int((sj + 1.0) / 2.0 * 20.0);
        bin = std::clamp(bin, 0, 19);
        r.histogram[size_t(bin)] += wt;
      }
  if (wsum > 0.0) {
    r.avg_scaled = javg / wsum;
    r.ratio_low = wlow / wsum;
    for (double &h : r.histogram)
      h /= wsum;
  }
  double cell = 1.0 / double((n - 1) * (n - 1)) / double(n - 1);
  r.volume = wsum * cell;
  if (r.degenerate_samples > 0)
    r.min_scaled = -2.0; // sentinel: scan hit a degenerate frame
  return r;
}

} // namespace tbs
