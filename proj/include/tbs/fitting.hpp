#pragma once

#include <map>
#include <memory>
#include <set>

#include "tbs/composite.hpp"
#include "tbs/gfd.hpp"

namespace tbs {

struct StageWeights {
  double lambda_c = 0.1;
  double lambda_s = 0.1, mu_s = 0.1;
  double lambda_h = 0.1, mu_h = 0.1;
  double lambda_f = 0.6;

  void validate() const {
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(lambda_c) || !in01(lambda_s) || !in01(mu_s) || !in01(lambda_h) || !in01(mu_h) ||
        !in01(lambda_f))
      throw Error("stage weights must lie in [0,1]");
    if (lambda_s + mu_s > 1.0 || lambda_h + mu_h > 1.0)
      throw Error("stage weights: lambda + mu must not exceed 1");
  }
};

// gradient helper: ((I - T T^t) / L) w
inline Vec3 unit_diff_jacobian_apply(const Vec3 &T, double L, const Vec3 &w) {
  return (w - T * dot(T, w)) / L;
}

inline std::vector<Vec3> gather(const TbsComposite &comp, const std::vector<int> &ids) {
  std::vector<Vec3> out(ids.size());
  for (size_t i = 0; i < ids.size(); ++i)
    out[i] = comp.pool[size_t(ids[i])];
  return out;
}

inline void scatter(TbsComposite &comp, const std::vector<int> &ids, std::span<const Vec3> X) {
  for (size_t i = 0; i < ids.size(); ++i)
    comp.pool[size_t(ids[i])] = X[i];
}

// --- fitting data gathered from the sub-volumes ------------------------------

struct CurveData {
  std::vector<double> t;
  std::vector<Vec3> pos;
};

struct SurfaceData {
  std::vector<double> p, q;
  std::vector<Vec3> pos;
};

struct SolidData {
  std::vector<Vec3> uvw;
  std::vector<Vec3> pos;
};

inline CurveData gather_curve_data(const TbsComposite &comp, int curve_id,
                                   const std::array<SubVolume, 7> &subvols) {
  const CompositeCurve &c = comp.curves[size_t(curve_id)];
  const SubVolume &sub = subvols[size_t(int(c.owner))];
  std::vector<std::pair<double, Vec3>> pts;
  for (size_t v = 0; v < sub.local_params.size(); ++v) {
    const Vec3 &lp = sub.local_params[v];
    if (lp[c.fixed_axes[0]] != double(c.fixed_sides[0]) ||
        lp[c.fixed_axes[1]] != double(c.fixed_sides[1]))
      continue;
    pts.push_back({lp[c.owner_axis], sub.mesh.vertices[v]});
  }
  std::sort(pts.begin(), pts.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });
  CurveData data;
  for (const auto &[t, p] : pts) {
    if (!data.t.empty() && t - data.t.back() < 1e-12)
      continue; // duplicate clip vertices collapse to one sample
    data.t.push_back(t);
    data.pos.push_back(p);
  }
  if (data.t.size() < 2 || data.t.front() != 0.0 || data.t.back() != 1.0)
    throw Error("curve data must span the [0,1] edge");
  return data;
}

inline SurfaceData gather_surface_data(const TbsComposite &comp, int surface_id,
                                       const std::array<SubVolume, 7> &subvols) {
  const CompositeSurface &sf = comp.surfaces[size_t(surface_id)];
  const SubVolume &sub = subvols[size_t(int(sf.owner))];
  int a1, a2;
  TbsComposite::face_axes(sf.face, a1, a2);
  SurfaceData data;
  for (size_t v = 0; v < sub.local_params.size(); ++v) {
    const Vec3 &lp = sub.local_params[v];
    if (lp[sf.face.axis] != double(sf.face.side))
      continue;
    double p = lp[a1], q = lp[a2];
    if (p <= 0.0 || p >= 1.0 || q <= 0.0 || q >= 1.0)
      continue; // boundary vertices belong to the curve stage
    data.p.push_back(p);
    data.q.push_back(q);
    data.pos.push_back(sub.mesh.vertices[v]);
  }
  return data;
}

inline SolidData gather_solid_data(const std::array<SubVolume, 7> &subvols, SubId id) {
  const SubVolume &sub = subvols[size_t(int(id))];
  SolidData data;
  for (size_t v = 0; v < sub.local_params.size(); ++v) {
    const Vec3 &lp = sub.local_params[v];
    bool inner = true;
    for (int c = 0; c < 3; ++c)
      if (lp[c] <= 0.0 || lp[c] >= 1.0)
        inner = false;
    if (!inner)
      continue;
    data.uvw.push_back(lp);
    data.pos.push_back(sub.mesh.vertices[v]);
  }
  return data;
}


// Guards the solid validity of the blocks containing a curve or surface
// while its control points move. Keeping every block's triple products valid
// through the early stages guarantees the later stages start feasible.
struct SolidGuard {
  const CompositeSolid *cs = nullptr;
  std::vector<int> flat_of_x; // problem X index -> grid flat index (-1 if absent)
};

inline std::vector<SolidGuard> build_solid_guards(const TbsComposite &comp,
                                                  const std::vector<int> &pool_nodes,
                                                  const std::vector<SubId> &solids) {
  std::vector<SolidGuard> guards;
  for (SubId sd : solids) {
    const CompositeSolid &cs = comp.solid(sd);
    std::map<int, int> flat_of_pool;
    for (size_t f = 0; f < cs.grid.size(); ++f)
      flat_of_pool[cs.grid[f]] = int(f);
    SolidGuard g;
    g.cs = &cs;
    g.flat_of_x.assign(pool_nodes.size(), -1);
    for (size_t i = 0; i < pool_nodes.size(); ++i) {
      auto it = flat_of_pool.find(pool_nodes[i]);
      if (it != flat_of_pool.end())
        g.flat_of_x[i] = it->second;
    }
    guards.push_back(std::move(g));
  }
  return guards;
}

// Incremental solid-validity sessions over the guarded blocks; nodes outside
// the problem's X stay at their pooled positions.
class GuardSessions {
public:
  GuardSessions(const TbsComposite &comp, const std::vector<SolidGuard> &guards)
      : comp_(comp), guards_(guards) {
    for (const SolidGuard &g : guards_)
      sessions_.emplace_back(g.cs->nu, g.cs->nv, g.cs->nw, g.cs->kv_u.degree,
                             g.cs->kv_v.degree, g.cs->kv_w.degree);
  }

  void reset(std::span<const Vec3> X) {
    for (size_t gi = 0; gi < guards_.size(); ++gi) {
      const SolidGuard &g = guards_[gi];
      std::vector<Vec3> grid(g.cs->grid.size());
      for (size_t f = 0; f < g.cs->grid.size(); ++f)
        grid[f] = comp_.pool[size_t(g.cs->grid[f])];
      for (size_t i = 0; i < g.flat_of_x.size(); ++i)
        if (g.flat_of_x[i] >= 0)
          grid[size_t(g.flat_of_x[i])] = X[i];
      sessions_[gi].reset(grid);
    }
  }

  bool probe_point(int i, const Vec3 &p) {
    for (size_t gi = 0; gi < guards_.size(); ++gi)
      if (guards_[gi].flat_of_x[size_t(i)] >= 0 &&
          !sessions_[gi].probe_point(guards_[gi].flat_of_x[size_t(i)], p))
        return false;
    return true;
  }

  bool feasible() {
    for (auto &s : sessions_)
      if (!s.feasible())
        return false;
    return true;
  }

  bool feasible_at(std::span<const Vec3> X) {
    reset(X);
    return feasible();
  }

private:
  const TbsComposite &comp_;
  std::vector<SolidGuard> guards_;
  std::vector<SolidValiditySession> sessions_;
};

// --- curve fitting (stage 1) -------------------------------------------------

struct CurveCompatPartner {
  int end = 0;                // 0: corner at node 0, 1: corner at the last node
  std::vector<Vec3> adj_ctrl; // frozen partner window, oriented from the corner
};

class CurveFitProblem : public GfdProblem {
public:
  CurveFitProblem(const KnotVector &kv, CurveData data, double lambda_c,
                  std::vector<CurveCompatPartner> partners, const TbsComposite *comp = nullptr,
                  std::vector<SolidGuard> guards = {})
      : kv_(kv), data_(std::move(data)), lambda_(lambda_c), partners_(std::move(partners)),
        comp_(comp), guards_(std::move(guards)) {
    n_ = kv_.num_ctrl();
    fixed_.assign(size_t(n_), 0);
    fixed_[0] = fixed_[size_t(n_ - 1)] = 1;
    rows_.resize(data_.t.size());
    firsts_.resize(data_.t.size());
    for (size_t j = 0; j < data_.t.size(); ++j) {
      rows_[j].resize(size_t(kv_.degree + 1));
      firsts_[j] = kv_.basis(data_.t[j], rows_[j].data());
    }
  }

  int num_points() const override { return n_; }
  const std::vector<char> &fixed_mask() const override { return fixed_; }

  double fit_energy(std::span<const Vec3> X) const {
    double e = 0.0;
    for (size_t j = 0; j < data_.t.size(); ++j) {
      Vec3 p{0, 0, 0};
      for (int a = 0; a <= kv_.degree; ++a)
        p += X[size_t(firsts_[j] + a)] * rows_[j][size_t(a)];
      e += norm2(p - data_.pos[j]);
    }
    return e;
  }

  double validity_energy(std::span<const Vec3> X) const {
    Vec3 S{0, 0, 0};
    for (int i = 0; i + 1 < n_; ++i)
      S += normalized(X[size_t(i + 1)] - X[size_t(i)]);
    return 1.0 - norm(S) / double(n_ - 1);
  }

  double energy(std::span<const Vec3> X) const override {
    return (1.0 - lambda_) * fit_energy(X) + lambda_ * validity_energy(X);
  }

  void gradient(std::span<const Vec3> X, std::span<Vec3> out) const override {
    for (Vec3 &g : out)
      g = Vec3{0, 0, 0};
    for (size_t j = 0; j < data_.t.size(); ++j) {
      Vec3 p{0, 0, 0};
      for (int a = 0; a <= kv_.degree; ++a)
        p += X[size_t(firsts_[j] + a)] * rows_[j][size_t(a)];
      Vec3 r = (p - data_.pos[j]) * (2.0 * (1.0 - lambda_));
      for (int a = 0; a <= kv_.degree; ++a)
        out[size_t(firsts_[j] + a)] += r * rows_[j][size_t(a)];
    }
    // validity part: E_val = 1 - |S|/m with S the sum of unit differences
    Vec3 S{0, 0, 0};
    std::vector<Vec3> T(size_t(n_ - 1));
    std::vector<double> L(size_t(n_ - 1));
    for (int i = 0; i + 1 < n_; ++i) {
      Vec3 d = X[size_t(i + 1)] - X[size_t(i)];
      L[size_t(i)] = norm(d);
      T[size_t(i)] = d / L[size_t(i)];
      S += T[size_t(i)];
    }
    double rho = norm(S);
    if (rho > 0.0) {
      Vec3 Tbar = S / rho;
      double scale = lambda_ / double(n_ - 1);
      for (int i = 0; i + 1 < n_; ++i) {
        Vec3 contrib = unit_diff_jacobian_apply(T[size_t(i)], L[size_t(i)], Tbar) * scale;
        out[size_t(i + 1)] -= contrib;
        out[size_t(i)] += contrib;
      }
    }
  }

  bool compat_ok(std::span<const Vec3> X) const {
    for (const CurveCompatPartner &cp : partners_) {
      std::vector<Vec3> ours;
      int d = kv_.degree;
      for (int a = 0; a <= d; ++a)
        ours.push_back(cp.end == 0 ? X[size_t(a)] : X[size_t(n_ - 1 - a)]);
      try {
        if (!check_curve_compatibility(ours, cp.adj_ctrl))
          return false;
      } catch (const Error &) {
        return false;
      }
    }
    return true;
  }

  bool feasible(std::span<const Vec3> X) const override {
    CurveValiditySession s(n_, kv_.degree);
    s.reset(X);
    if (!s.feasible() || !compat_ok(X))
      return false;
    if (comp_ && !guards_.empty()) {
      GuardSessions guard(*comp_, guards_);
      if (!guard.feasible_at(X))
        return false;
    }
    return true;
  }

  std::unique_ptr<ProbeSession> make_session() override;

  const KnotVector &kv_;
  CurveData data_;
  double lambda_;
  std::vector<CurveCompatPartner> partners_;
  const TbsComposite *comp_ = nullptr;
  std::vector<SolidGuard> guards_;
  int n_ = 0;
  std::vector<char> fixed_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> firsts_;
};


class CurveProbeSession final : public ProbeSession {
public:
  explicit CurveProbeSession(const CurveFitProblem &p)
      : p_(p), validity_(p.n_, p.kv_.degree) {
    if (p_.comp_ && !p_.guards_.empty())
      guards_ = std::make_unique<GuardSessions>(*p_.comp_, p_.guards_);
  }

  void reset(std::span<const Vec3> pts) override {
    pts_.assign(pts.begin(), pts.end());
    validity_.reset(pts);
    if (guards_)
      guards_->reset(pts);
    compat_ok_ = p_.compat_ok(pts_);
  }

  bool probe_point(int i, const Vec3 &p) override {
    if (!validity_.probe_point(i, p))
      return false;
    if (guards_ && !guards_->probe_point(i, p))
      return false;
    // corner windows involve the first/last degree+1 points
    if (i <= p_.kv_.degree || i >= p_.n_ - 1 - p_.kv_.degree) {
      Vec3 saved = pts_[size_t(i)];
      pts_[size_t(i)] = p;
      bool ok = p_.compat_ok(pts_);
      pts_[size_t(i)] = saved;
      if (!ok)
        return false;
    }
    return true;
  }

  bool feasible() override {
    return validity_.feasible() && compat_ok_ && (!guards_ || guards_->feasible());
  }

private:
  const CurveFitProblem &p_;
  CurveValiditySession validity_;
  std::unique_ptr<GuardSessions> guards_;
  std::vector<Vec3> pts_;
  bool compat_ok_ = true;
};

inline std::unique_ptr<ProbeSession> CurveFitProblem::make_session() {
  return std::make_unique<CurveProbeSession>(*this);
}

// --- surface fitting (stage 2) -------------------------------------------------

// Corner compatibility record: the surface is face `face` of solid `sd`;
// `frozen_faces` are the already fitted faces meeting the same solid corner.
struct SurfaceCompatCheck {
  SubId sd;
  std::array<int, 3> corner{}; // 0/1 per solid axis
  CubeFace face;               // our face within sd
  std::vector<CubeFace> frozen_faces;
};

class SurfaceFitProblem;

class SurfaceProbeSession final : public ProbeSession {
public:
  explicit SurfaceProbeSession(const SurfaceFitProblem &p);
  void reset(std::span<const Vec3> pts) override;
  bool probe_point(int i, const Vec3 &p) override;
  bool feasible() override;

private:
  const SurfaceFitProblem &p_;
  SurfaceValiditySession validity_;
  std::unique_ptr<GuardSessions> guards_;
  std::vector<Vec3> pts_;
  std::vector<char> compat_ok_;
};

class SurfaceFitProblem : public GfdProblem {
public:
  SurfaceFitProblem(const TbsComposite &comp, int surface_id, SurfaceData data,
                    const StageWeights &w, std::vector<SurfaceCompatCheck> checks)
      : comp_(comp), sf_(comp.surfaces[size_t(surface_id)]), data_(std::move(data)),
        lambda_(w.lambda_s), mu_(w.mu_s), checks_(std::move(checks)) {
    std::vector<SubId> owner_blocks;
    for (const auto &[sd, face] : sf_.solids)
      owner_blocks.push_back(sd);
    guards_ = build_solid_guards(comp, sf_.nodes, owner_blocks);
    np_ = sf_.np;
    nq_ = sf_.nq;
    kv_p_ = KnotVector::uniform_bezier(np_, sf_.dp);
    kv_q_ = KnotVector::uniform_bezier(nq_, sf_.dq);
    fixed_.assign(size_t(np_) * nq_, 0);
    for (int p = 0; p < np_; ++p)
      for (int q = 0; q < nq_; ++q)
        if (p == 0 || p == np_ - 1 || q == 0 || q == nq_ - 1)
          fixed_[size_t(p) * nq_ + q] = 1;
    for (size_t i = 0; i < sf_.nodes.size(); ++i)
      x_of_pool_[sf_.nodes[i]] = int(i);
    rows_p_.resize(data_.p.size());
    rows_q_.resize(data_.p.size());
    firsts_p_.resize(data_.p.size());
    firsts_q_.resize(data_.p.size());
    for (size_t j = 0; j < data_.p.size(); ++j) {
      rows_p_[j].resize(size_t(sf_.dp + 1));
      rows_q_[j].resize(size_t(sf_.dq + 1));
      firsts_p_[j] = kv_p_.basis(data_.p[j], rows_p_[j].data());
      firsts_q_[j] = kv_q_.basis(data_.q[j], rows_q_[j].data());
    }
    // X indices participating in each corner-compat check
    compat_nodes_.resize(checks_.size());
    for (size_t c = 0; c < checks_.size(); ++c) {
      const SurfaceCompatCheck &cc = checks_[c];
      const CompositeSolid &cs = comp_.solid(cc.sd);
      int a1, a2;
      TbsComposite::face_axes(cc.face, a1, a2);
      int d1 = cs.degree(a1), d2 = cs.degree(a2);
      for (int t1 = 0; t1 <= d1; ++t1)
        for (int t2 = 0; t2 <= d2; ++t2) {
          std::array<int, 3> ijk{};
          ijk[size_t(cc.face.axis)] =
              cc.corner[size_t(cc.face.axis)] ? cs.count(cc.face.axis) - 1 : 0;
          ijk[size_t(a1)] = cc.corner[size_t(a1)] ? cs.count(a1) - 1 - t1 : t1;
          ijk[size_t(a2)] = cc.corner[size_t(a2)] ? cs.count(a2) - 1 - t2 : t2;
          auto it = x_of_pool_.find(cs.node(ijk[0], ijk[1], ijk[2]));
          if (it == x_of_pool_.end())
            throw Error("surface compat: corner block node outside the surface grid");
          compat_nodes_[c].insert(it->second);
        }
    }
  }

  int num_points() const override { return np_ * nq_; }
  const std::vector<char> &fixed_mask() const override { return fixed_; }

  double fit_energy(std::span<const Vec3> X) const {
    double e = 0.0;
    for (size_t j = 0; j < data_.p.size(); ++j)
      e += norm2(eval_data_point(X, j) - data_.pos[j]);
    return e;
  }

  // aperture and orthogonality energies over the mean-direction cone axes
  void aperture_terms(std::span<const Vec3> X, double &e_u, double &e_v, double &e_uv,
                      std::span<Vec3> grad, double lam, double mu) const {
    const int mu_count = (np_ - 1) * nq_, mv_count = np_ * (nq_ - 1);
    std::vector<Vec3> Tu, Tv;
    std::vector<double> Lu, Lv;
    Tu.resize(size_t(mu_count));
    Tv.resize(size_t(mv_count));
    Lu.resize(size_t(mu_count));
    Lv.resize(size_t(mv_count));
    Vec3 Su{0, 0, 0}, Sv{0, 0, 0};
    for (int p = 0; p + 1 < np_; ++p)
      for (int q = 0; q < nq_; ++q) {
        size_t e = size_t(p) * nq_ + q;
        Vec3 d = X[size_t((p + 1) * nq_ + q)] - X[size_t(p * nq_ + q)];
        Lu[e] = norm(d);
        Tu[e] = d / Lu[e];
        Su += Tu[e];
      }
    for (int p = 0; p < np_; ++p)
      for (int q = 0; q + 1 < nq_; ++q) {
        size_t e = size_t(p) * (nq_ - 1) + q;
        Vec3 d = X[size_t(p * nq_ + q + 1)] - X[size_t(p * nq_ + q)];
        Lv[e] = norm(d);
        Tv[e] = d / Lv[e];
        Sv += Tv[e];
      }
    double rho_u = norm(Su), rho_v = norm(Sv);
    e_u = 1.0 - rho_u / mu_count;
    e_v = 1.0 - rho_v / mv_count;
    Vec3 Au = Su / rho_u, Av = Sv / rho_v;
    double c = dot(Au, Av);
    e_uv = c * c;
    if (grad.empty())
      return;
    // weight vectors each unit-diff jacobian is applied to
    Vec3 Wu = Au * (-lam / mu_count) + (Av - Au * c) * (mu * 2.0 * c / rho_u);
    Vec3 Wv = Av * (-lam / mv_count) + (Au - Av * c) * (mu * 2.0 * c / rho_v);
    for (int p = 0; p + 1 < np_; ++p)
      for (int q = 0; q < nq_; ++q) {
        size_t e = size_t(p) * nq_ + q;
        Vec3 contrib = unit_diff_jacobian_apply(Tu[e], Lu[e], Wu);
        grad[size_t((p + 1) * nq_ + q)] += contrib;
        grad[size_t(p * nq_ + q)] -= contrib;
      }
    for (int p = 0; p < np_; ++p)
      for (int q = 0; q + 1 < nq_; ++q) {
        size_t e = size_t(p) * (nq_ - 1) + q;
        Vec3 contrib = unit_diff_jacobian_apply(Tv[e], Lv[e], Wv);
        grad[size_t(p * nq_ + q + 1)] += contrib;
        grad[size_t(p * nq_ + q)] -= contrib;
      }
  }

  double energy(std::span<const Vec3> X) const override {
    double e_u, e_v, e_uv;
    aperture_terms(X, e_u, e_v, e_uv, {}, 0, 0);
    return (1.0 - lambda_ - mu_) * fit_energy(X) + lambda_ * (e_u + e_v) + mu_ * e_uv;
  }

  void gradient(std::span<const Vec3> X, std::span<Vec3> out) const override {
    for (Vec3 &g : out)
      g = Vec3{0, 0, 0};
    double wfit = 2.0 * (1.0 - lambda_ - mu_);
    for (size_t j = 0; j < data_.p.size(); ++j) {
      Vec3 r = (eval_data_point(X, j) - data_.pos[j]) * wfit;
      for (int a = 0; a <= sf_.dp; ++a)
        for (int b = 0; b <= sf_.dq; ++b)
          out[size_t((firsts_p_[j] + a) * nq_ + firsts_q_[j] + b)] +=
              r * (rows_p_[j][size_t(a)] * rows_q_[j][size_t(b)]);
    }
    double e_u, e_v, e_uv;
    aperture_terms(X, e_u, e_v, e_uv, out, lambda_, mu_);
  }

  bool compat_ok_at(std::span<const Vec3> X, size_t check_index) const {
    const SurfaceCompatCheck &cc = checks_[check_index];
    const CompositeSolid &cs = comp_.solid(cc.sd);
    auto position = [&](int pool_id) {
      auto it = x_of_pool_.find(pool_id);
      return it == x_of_pool_.end() ? comp_.pool[size_t(pool_id)] : X[size_t(it->second)];
    };
    auto block = [&](const CubeFace &f) {
      CornerFaceGrid g;
      int a1, a2;
      TbsComposite::face_axes(f, a1, a2);
      g.axis1 = a1;
      g.axis2 = a2;
      g.sign1 = cc.corner[size_t(a1)] ? -1.0 : 1.0;
      g.sign2 = cc.corner[size_t(a2)] ? -1.0 : 1.0;
      g.n1 = cs.degree(a1) + 1;
      g.n2 = cs.degree(a2) + 1;
      g.pts.resize(size_t(g.n1) * g.n2);
      for (int t1 = 0; t1 < g.n1; ++t1)
        for (int t2 = 0; t2 < g.n2; ++t2) {
          std::array<int, 3> ijk{};
          ijk[size_t(f.axis)] = cc.corner[size_t(f.axis)] ? cs.count(f.axis) - 1 : 0;
          ijk[size_t(a1)] = cc.corner[size_t(a1)] ? cs.count(a1) - 1 - t1 : t1;
          ijk[size_t(a2)] = cc.corner[size_t(a2)] ? cs.count(a2) - 1 - t2 : t2;
          g.pts[size_t(t1) * g.n2 + t2] = position(cs.node(ijk[0], ijk[1], ijk[2]));
        }
      return g;
    };
    std::vector<CornerFaceGrid> faces;
    faces.push_back(block(cc.face));
    for (const CubeFace &f : cc.frozen_faces)
      faces.push_back(block(f));
    return check_corner_triples(faces);
  }

  bool feasible(std::span<const Vec3> X) const override {
    SurfaceValiditySession s(np_, nq_, sf_.dp, sf_.dq);
    s.reset(X);
    if (!s.feasible())
      return false;
    for (size_t c = 0; c < checks_.size(); ++c)
      if (!compat_ok_at(X, c))
        return false;
    GuardSessions guard(comp_, guards_);
    return guard.feasible_at(X);
  }

  std::unique_ptr<ProbeSession> make_session() override {
    return std::make_unique<SurfaceProbeSession>(*this);
  }

  Vec3 eval_data_point(std::span<const Vec3> X, size_t j) const {
    Vec3 p{0, 0, 0};
    for (int a = 0; a <= sf_.dp; ++a)
      for (int b = 0; b <= sf_.dq; ++b)
        p += X[size_t((firsts_p_[j] + a) * nq_ + firsts_q_[j] + b)] *
             (rows_p_[j][size_t(a)] * rows_q_[j][size_t(b)]);
    return p;
  }

  const TbsComposite &comp_;
  const CompositeSurface &sf_;
  SurfaceData data_;
  double lambda_, mu_;
  std::vector<SurfaceCompatCheck> checks_;
  std::vector<SolidGuard> guards_;
  std::vector<std::set<int>> compat_nodes_;
  int np_ = 0, nq_ = 0;
  KnotVector kv_p_, kv_q_;
  std::vector<char> fixed_;
  std::map<int, int> x_of_pool_;
  std::vector<std::vector<double>> rows_p_, rows_q_;
  std::vector<int> firsts_p_, firsts_q_;
};

inline SurfaceProbeSession::SurfaceProbeSession(const SurfaceFitProblem &p)
    : p_(p), validity_(p.np_, p.nq_, p.sf_.dp, p.sf_.dq),
      guards_(std::make_unique<GuardSessions>(p.comp_, p.guards_)) {
  compat_ok_.assign(p_.checks_.size(), 1);
}

inline void SurfaceProbeSession::reset(std::span<const Vec3> pts) {
  pts_.assign(pts.begin(), pts.end());
  validity_.reset(pts);
  guards_->reset(pts);
  for (size_t c = 0; c < p_.checks_.size(); ++c)
    compat_ok_[c] = p_.compat_ok_at(pts_, c);
}

inline bool SurfaceProbeSession::probe_point(int i, const Vec3 &p) {
  if (!validity_.probe_point(i, p) || !guards_->probe_point(i, p))
    return false;
  for (size_t c = 0; c < p_.checks_.size(); ++c)
    if (p_.compat_nodes_[c].count(i)) {
      Vec3 saved = pts_[size_t(i)];
      pts_[size_t(i)] = p;
      bool ok = p_.compat_ok_at(pts_, c);
      pts_[size_t(i)] = saved;
      if (!ok)
        return false;
    }
  return true;
}

inline bool SurfaceProbeSession::feasible() {
  if (!validity_.feasible())
    return false;
  for (char ok : compat_ok_)
    if (!ok)
      return false;
  return guards_->feasible();
}

// --- solid fitting (stage 3) ---------------------------------------------------

class SolidFitProblem;

class SolidProbeSession final : public ProbeSession {
public:
  SolidProbeSession(int nu, int nv, int nw, int du, int dv, int dw)
      : validity_(nu, nv, nw, du, dv, dw) {}
  void reset(std::span<const Vec3> pts) override { validity_.reset(pts); }
  bool probe_point(int i, const Vec3 &p) override { return validity_.probe_point(i, p); }
  bool feasible() override { return validity_.feasible(); }

private:
  SolidValiditySession validity_;
};

class SolidFitProblem : public GfdProblem {
public:
  SolidFitProblem(const CompositeSolid &cs, SolidData data, const StageWeights &w)
      : cs_(cs), data_(std::move(data)), lambda_(w.lambda_h), mu_(w.mu_h) {
    nu_ = cs.nu;
    nv_ = cs.nv;
    nw_ = cs.nw;
    du_ = cs.kv_u.degree;
    dv_ = cs.kv_v.degree;
    dw_ = cs.kv_w.degree;
    fixed_.assign(size_t(nu_) * nv_ * nw_, 0);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        for (int k = 0; k < nw_; ++k)
          if (i == 0 || i == nu_ - 1 || j == 0 || j == nv_ - 1 || k == 0 || k == nw_ - 1)
            fixed_[size_t(cs.index(i, j, k))] = 1;
    rows_u_.resize(data_.uvw.size());
    rows_v_.resize(data_.uvw.size());
    rows_w_.resize(data_.uvw.size());
    firsts_.resize(data_.uvw.size());
    for (size_t j = 0; j < data_.uvw.size(); ++j) {
      rows_u_[j].resize(size_t(du_ + 1));
      rows_v_[j].resize(size_t(dv_ + 1));
      rows_w_[j].resize(size_t(dw_ + 1));
      firsts_[j][0] = cs.kv_u.basis(data_.uvw[j].x, rows_u_[j].data());
      firsts_[j][1] = cs.kv_v.basis(data_.uvw[j].y, rows_v_[j].data());
      firsts_[j][2] = cs.kv_w.basis(data_.uvw[j].z, rows_w_[j].data());
    }
  }

  int num_points() const override { return nu_ * nv_ * nw_; }
  const std::vector<char> &fixed_mask() const override { return fixed_; }

  Vec3 eval_data_point(std::span<const Vec3> X, size_t j) const {
    Vec3 p{0, 0, 0};
    for (int a = 0; a <= du_; ++a)
      for (int b = 0; b <= dv_; ++b) {
        double rab = rows_u_[j][size_t(a)] * rows_v_[j][size_t(b)];
        for (int c = 0; c <= dw_; ++c)
          p += X[size_t(cs_.index(firsts_[j][0] + a, firsts_[j][1] + b, firsts_[j][2] + c))] *
               (rab * rows_w_[j][size_t(c)]);
      }
    return p;
  }

  double fit_energy(std::span<const Vec3> X) const {
    double e = 0.0;
    for (size_t j = 0; j < data_.uvw.size(); ++j)
      e += norm2(eval_data_point(X, j) - data_.pos[j]);
    return e;
  }

  // three aperture energies and three axis-orthogonality energies
  void aperture_terms(std::span<const Vec3> X, double e_ap[3], double e_orth[3],
                      std::span<Vec3> grad) const {
    struct Axis {
      std::vector<Vec3> T;
      std::vector<double> L;
      Vec3 S{0, 0, 0};
      double rho = 0;
      Vec3 A;
      int count = 0;
    };
    Axis ax[3];
    ax[0].count = (nu_ - 1) * nv_ * nw_;
    ax[1].count = nu_ * (nv_ - 1) * nw_;
    ax[2].count = nu_ * nv_ * (nw_ - 1);
    for (int d = 0; d < 3; ++d) {
      ax[d].T.resize(size_t(ax[d].count));
      ax[d].L.resize(size_t(ax[d].count));
    }
    auto edge_index = [&](int d, int i, int j, int k) {
      if (d == 0)
        return (size_t(i) * nv_ + j) * nw_ + k;
      if (d == 1)
        return (size_t(i) * (nv_ - 1) + j) * nw_ + k;
      return (size_t(i) * nv_ + j) * (nw_ - 1) + k;
    };
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        for (int k = 0; k < nw_; ++k) {
          const Vec3 &base = X[size_t(cs_.index(i, j, k))];
          if (i + 1 < nu_) {
            size_t e = edge_index(0, i, j, k);
            Vec3 d = X[size_t(cs_.index(i + 1, j, k))] - base;
            ax[0].L[e] = norm(d);
            ax[0].T[e] = d / ax[0].L[e];
            ax[0].S += ax[0].T[e];
          }
          if (j + 1 < nv_) {
            size_t e = edge_index(1, i, j, k);
            Vec3 d = X[size_t(cs_.index(i, j + 1, k))] - base;
            ax[1].L[e] = norm(d);
            ax[1].T[e] = d / ax[1].L[e];
            ax[1].S += ax[1].T[e];
          }
          if (k + 1 < nw_) {
            size_t e = edge_index(2, i, j, k);
            Vec3 d = X[size_t(cs_.index(i, j, k + 1))] - base;
            ax[2].L[e] = norm(d);
            ax[2].T[e] = d / ax[2].L[e];
            ax[2].S += ax[2].T[e];
          }
        }
    for (int d = 0; d < 3; ++d) {
      ax[d].rho = norm(ax[d].S);
      ax[d].A = ax[d].S / ax[d].rho;
      e_ap[d] = 1.0 - ax[d].rho / ax[d].count;
    }
    double c_uv = dot(ax[0].A, ax[1].A), c_uw = dot(ax[0].A, ax[2].A),
           c_vw = dot(ax[1].A, ax[2].A);
    e_orth[0] = c_uv * c_uv;
    e_orth[1] = c_uw * c_uw;
    e_orth[2] = c_vw * c_vw;
    if (grad.empty())
      return;
    Vec3 W[3];
    // dE/dA contributions: aperture pulls along -A, orthogonality couples axes
    W[0] = ax[0].A * (-lambda_ / ax[0].count);
    W[1] = ax[1].A * (-lambda_ / ax[1].count);
    W[2] = ax[2].A * (-lambda_ / ax[2].count);
    auto add_orth = [&](int a, int b, double c) {
      W[a] += (ax[b].A - ax[a].A * c) * (mu_ * 2.0 * c / ax[a].rho);
      W[b] += (ax[a].A - ax[b].A * c) * (mu_ * 2.0 * c / ax[b].rho);
    };
    add_orth(0, 1, c_uv);
    add_orth(0, 2, c_uw);
    add_orth(1, 2, c_vw);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        for (int k = 0; k < nw_; ++k) {
          if (i + 1 < nu_) {
            size_t e = edge_index(0, i, j, k);
            Vec3 contrib = unit_diff_jacobian_apply(ax[0].T[e], ax[0].L[e], W[0]);
            grad[size_t(cs_.index(i + 1, j, k))] += contrib;
            grad[size_t(cs_.index(i, j, k))] -= contrib;
          }
          if (j + 1 < nv_) {
            size_t e = edge_index(1, i, j, k);
            Vec3 contrib = unit_diff_jacobian_apply(ax[1].T[e], ax[1].L[e], W[1]);
            grad[size_t(cs_.index(i, j + 1, k))] += contrib;
            grad[size_t(cs_.index(i, j, k))] -= contrib;
          }
          if (k + 1 < nw_) {
            size_t e = edge_index(2, i, j, k);
            Vec3 contrib = unit_diff_jacobian_apply(ax[2].T[e], ax[2].L[e], W[2]);
            grad[size_t(cs_.index(i, j, k + 1))] += contrib;
            grad[size_t(cs_.index(i, j, k))] -= contrib;
          }
        }
  }

  double energy(std::span<const Vec3> X) const override {
    double e_ap[3], e_orth[3];
    aperture_terms(X, e_ap, e_orth, {});
    return (1.0 - lambda_ - mu_) * fit_energy(X) + lambda_ * (e_ap[0] + e_ap[1] + e_ap[2]) +
           mu_ * (e_orth[0] + e_orth[1] + e_orth[2]);
  }

  void gradient(std::span<const Vec3> X, std::span<Vec3> out) const override {
    for (Vec3 &g : out)
      g = Vec3{0, 0, 0};
    double wfit = 2.0 * (1.0 - lambda_ - mu_);
    for (size_t j = 0; j < data_.uvw.size(); ++j) {
      Vec3 r = (eval_data_point(X, j) - data_.pos[j]) * wfit;
      for (int a = 0; a <= du_; ++a)
        for (int b = 0; b <= dv_; ++b) {
          double rab = rows_u_[j][size_t(a)] * rows_v_[j][size_t(b)];
          for (int c = 0; c <= dw_; ++c)
            out[size_t(cs_.index(firsts_[j][0] + a, firsts_[j][1] + b, firsts_[j][2] + c))] +=
                r * (rab * rows_w_[j][size_t(c)]);
        }
    }
    double e_ap[3], e_orth[3];
    aperture_terms(X, e_ap, e_orth, out);
  }

  bool feasible(std::span<const Vec3> X) const override {
    SolidValiditySession s(nu_, nv_, nw_, du_, dv_, dw_);
    s.reset(X);
    return s.feasible();
  }

  std::unique_ptr<ProbeSession> make_session() override {
    return std::make_unique<SolidProbeSession>(nu_, nv_, nw_, du_, dv_, dw_);
  }

  const CompositeSolid &cs_;
  SolidData data_;
  double lambda_, mu_;
  int nu_ = 0, nv_ = 0, nw_ = 0, du_ = 0, dv_ = 0, dw_ = 0;
  std::vector<char> fixed_;
  std::vector<std::vector<double>> rows_u_, rows_v_, rows_w_;
  std::vector<std::array<int, 3>> firsts_;
};

// --- smoothness and fairness improvement (stage 4) ------------------------------

// banded Gram matrix of the thin-plate fairness integral of one block,
// assembled once by composite trapezoid quadrature
class FairnessGram {
public:
  FairnessGram() = default;

  void assemble(const CompositeSolid &cs) {
    nu_ = cs.nu;
    nv_ = cs.nv;
    nw_ = cs.nw;
    du_ = cs.kv_u.degree;
    dv_ = cs.kv_v.degree;
    dw_ = cs.kv_w.degree;
    bw_u_ = 2 * du_ + 1;
    bw_v_ = 2 * dv_ + 1;
    bw_w_ = 2 * dw_ + 1;
    values_.assign(size_t(nu_) * nv_ * nw_ * bw_u_ * bw_v_ * bw_w_, 0.0);

    auto quad_points = [](int count, int degree) { return 2 * (count - 1 + degree) + 1; };
    int qn_u = quad_points(nu_, du_), qn_v = quad_points(nv_, dv_), qn_w = quad_points(nw_, dw_);
    auto trap_w = [](int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };

    std::vector<double> bu(size_t(qn_u) * 3 * (du_ + 1)), bv(size_t(qn_v) * 3 * (dv_ + 1)),
        bwv(size_t(qn_w) * 3 * (dw_ + 1));
    std::vector<int> fu, fv, fw;
    fu.resize(size_t(qn_u));
    fv.resize(size_t(qn_v));
    fw.resize(size_t(qn_w));
    for (int i = 0; i < qn_u; ++i)
      fu[size_t(i)] = cs.kv_u.basis_derivs(double(i) / (qn_u - 1), 2,
                                           &bu[size_t(i) * 3 * (du_ + 1)]);
    for (int i = 0; i < qn_v; ++i)
      fv[size_t(i)] = cs.kv_v.basis_derivs(double(i) / (qn_v - 1), 2,
                                           &bv[size_t(i) * 3 * (dv_ + 1)]);
    for (int i = 0; i < qn_w; ++i)
      fw[size_t(i)] = cs.kv_w.basis_derivs(double(i) / (qn_w - 1), 2,
                                           &bwv[size_t(i) * 3 * (dw_ + 1)]);

    double hu = 1.0 / (qn_u - 1), hv = 1.0 / (qn_v - 1), hw = 1.0 / (qn_w - 1);
    const int su = du_ + 1, sv = dv_ + 1, sw = dw_ + 1;
    std::vector<double> c(size_t(su) * sv * sw * 6);
    for (int qi = 0; qi < qn_u; ++qi)
      for (int qj = 0; qj < qn_v; ++qj)
        for (int qk = 0; qk < qn_w; ++qk) {
          double wq = trap_w(qi, qn_u) * trap_w(qj, qn_v) * trap_w(qk, qn_w) * hu * hv * hw;
          const double *BU = &bu[size_t(qi) * 3 * su];
          const double *BV = &bv[size_t(qj) * 3 * sv];
          const double *BW = &bwv[size_t(qk) * 3 * sw];
          // per-local-node coefficients of the 6 second-derivative fields
          for (int a = 0; a < su; ++a)
            for (int b = 0; b < sv; ++b)
              for (int g = 0; g < sw; ++g) {
                double *cc = &c[(size_t(a) * sv * sw + size_t(b) * sw + g) * 6];
                cc[0] = BU[2 * su + a] * BV[b] * BW[g];          // Huu
                cc[1] = BU[a] * BV[2 * sv + b] * BW[g];          // Hvv
                cc[2] = BU[a] * BV[b] * BW[2 * sw + g];          // Hww
                cc[3] = BU[su + a] * BV[sv + b] * BW[g];         // Huv
                cc[4] = BU[su + a] * BV[b] * BW[sw + g];         // Huw
                cc[5] = BU[a] * BV[sv + b] * BW[sw + g];         // Hvw
              }
          const int nloc = su * sv * sw;
          for (int la = 0; la < nloc; ++la) {
            int ga_i = fu[size_t(qi)] + la / (sv * sw);
            int ga_j = fv[size_t(qj)] + (la / sw) % sv;
            int ga_k = fw[size_t(qk)] + la % sw;
            const double *ca = &c[size_t(la) * 6];
            for (int lb = 0; lb < nloc; ++lb) {
              int gb_i = fu[size_t(qi)] + lb / (sv * sw);
              int gb_j = fv[size_t(qj)] + (lb / sw) % sv;
              int gb_k = fw[size_t(qk)] + lb % sw;
              const double *cb = &c[size_t(lb) * 6];
              double acc = ca[0] * cb[0] + ca[1] * cb[1] + ca[2] * cb[2] +
                           2.0 * (ca[3] * cb[3] + ca[4] * cb[4] + ca[5] * cb[5]);
              values_[band_index(ga_i, ga_j, ga_k, gb_i, gb_j, gb_k)] += wq * acc;
            }
          }
        }
  }

  // y = A x per coordinate; x holds the block's control points
  void matvec(std::span<const Vec3> x, std::span<Vec3> y) const {
    for (Vec3 &v : y)
      v = Vec3{0, 0, 0};
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nv_; ++j)
        for (int k = 0; k < nw_; ++k) {
          Vec3 acc{0, 0, 0};
          for (int di = -du_; di <= du_; ++di) {
            int ii = i + di;
            if (ii < 0 || ii >= nu_)
              continue;
            for (int dj = -dv_; dj <= dv_; ++dj) {
              int jj = j + dj;
              if (jj < 0 || jj >= nv_)
                continue;
              for (int dk = -dw_; dk <= dw_; ++dk) {
                int kk = k + dk;
                if (kk < 0 || kk >= nw_)
                  continue;
                double a = values_[band_index(i, j, k, ii, jj, kk)];
                if (a != 0.0)
                  acc += x[size_t((ii * nv_ + jj) * nw_ + kk)] * a;
              }
            }
          }
          y[size_t((i * nv_ + j) * nw_ + k)] = acc;
        }
  }

  double energy(std::span<const Vec3> x, std::span<Vec3> scratch) const {
    matvec(x, scratch);
    double e = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
      e += dot(x[i], scratch[i]);
    return e;
  }

private:
  size_t band_index(int i, int j, int k, int ii, int jj, int kk) const {
    int oi = ii - i + du_, oj = jj - j + dv_, ok = kk - k + dw_;
    size_t row = (size_t(i) * nv_ + j) * nw_ + k;
    return ((row * bw_u_ + oi) * bw_v_ + oj) * bw_w_ + ok;
  }

  int nu_ = 0, nv_ = 0, nw_ = 0, du_ = 0, dv_ = 0, dw_ = 0;
  int bw_u_ = 0, bw_v_ = 0, bw_w_ = 0;
  std::vector<double> values_;
};

// one G1 alignment term per interface face node
struct SmoothTerm {
  int shared, inner_a, inner_b; // pool ids
};

inline std::vector<SmoothTerm> smoothness_terms(const TbsComposite &comp) {
  std::vector<SmoothTerm> terms;
  for (const BlockInterface &bi : block_interfaces()) {
    const CompositeSolid &A = comp.solid(bi.a);
    const CompositeSolid &B = comp.solid(bi.b);
    int a1, a2, b1, b2;
    TbsComposite::face_axes(bi.face_a, a1, a2);
    TbsComposite::face_axes(bi.face_b, b1, b2);
    int na_p = A.count(a1), na_q = A.count(a2);
    for (int p = 0; p < na_p; ++p)
      for (int q = 0; q < na_q; ++q) {
        std::array<int, 3> ai{}, ai_in{};
        int aside = bi.face_a.side ? A.count(bi.face_a.axis) - 1 : 0;
        int aside_in = bi.face_a.side ? A.count(bi.face_a.axis) - 2 : 1;
        ai[size_t(bi.face_a.axis)] = aside;
        ai_in[size_t(bi.face_a.axis)] = aside_in;
        ai[size_t(a1)] = ai_in[size_t(a1)] = p;
        ai[size_t(a2)] = ai_in[size_t(a2)] = q;

        // map to B's face indices through the interface orientation
        int tp = p, tq = q, np = na_p, nq = na_q;
        if (bi.swap_pq) {
          std::swap(tp, tq);
          std::swap(np, nq);
        }
        int bp = bi.flip_p ? np - 1 - tp : tp;
        int bq = bi.flip_q ? nq - 1 - tq : tq;
        std::array<int, 3> bin{};
        int bside_in = bi.face_b.side ? B.count(bi.face_b.axis) - 2 : 1;
        bin[size_t(bi.face_b.axis)] = bside_in;
        bin[size_t(b1)] = bp;
        bin[size_t(b2)] = bq;

        std::array<int, 3> bface{};
        bface[size_t(bi.face_b.axis)] = bi.face_b.side ? B.count(bi.face_b.axis) - 1 : 0;
        bface[size_t(b1)] = bp;
        bface[size_t(b2)] = bq;
        int shared = A.node(ai[0], ai[1], ai[2]);
        if (shared != B.node(bface[0], bface[1], bface[2]))
          throw Error("smoothness: interface map mismatch");
        terms.push_back({shared, A.node(ai_in[0], ai_in[1], ai_in[2]),
                         B.node(bin[0], bin[1], bin[2])});
      }
  }
  return terms;
}

class SmoothProbeSession final : public ProbeSession {
public:
  explicit SmoothProbeSession(const TbsComposite &comp) : comp_(comp) {
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp.solids[size_t(s)];
      sessions_.emplace_back(cs.nu, cs.nv, cs.nw, cs.kv_u.degree, cs.kv_v.degree,
                             cs.kv_w.degree);
    }
    // pool id -> (solid, grid flat index); interior nodes live in one block
    owner_.assign(comp.pool.size(), {-1, -1});
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp.solids[size_t(s)];
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        if (comp.point_class[size_t(cs.grid[idx])] == PointClass::interior)
          owner_[size_t(cs.grid[idx])] = {s, int(idx)};
    }
  }

  void reset(std::span<const Vec3> pts) override {
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp_.solids[size_t(s)];
      std::vector<Vec3> grid(cs.grid.size());
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        grid[idx] = pts[size_t(cs.grid[idx])];
      sessions_[size_t(s)].reset(grid);
    }
  }

  bool probe_point(int pool_id, const Vec3 &p) override {
    auto [s, idx] = owner_[size_t(pool_id)];
    if (s < 0)
      return feasible();
    return sessions_[size_t(s)].probe_point(idx, p);
  }

  bool feasible() override {
    for (auto &s : sessions_)
      if (!s.feasible())
        return false;
    return true;
  }

private:
  const TbsComposite &comp_;
  std::vector<SolidValiditySession> sessions_;
  std::vector<std::pair<int, int>> owner_;
};

class SmoothFairProblem : public GfdProblem {
public:
  SmoothFairProblem(const TbsComposite &comp, const StageWeights &w)
      : comp_(comp), lambda_f_(w.lambda_f) {
    terms_ = smoothness_terms(comp);
    // The objective is scaled by 1/#terms. A positive constant changes
    // neither the minimizers nor the relative-decrease termination, but it
    // brings the raw alignment gradients (which grow like the inverse layer
    // spacing) down to the scale the tau grid can step.
    scale_ = terms_.empty() ? 1.0 : 1.0 / double(terms_.size());
    fixed_.assign(comp.pool.size(), 0);
    for (size_t i = 0; i < comp.pool.size(); ++i)
      if (comp.point_class[i] != PointClass::interior)
        fixed_[i] = 1;
    for (int s = 0; s < 7; ++s)
      grams_[size_t(s)].assemble(comp.solids[size_t(s)]);
  }

  int num_points() const override { return int(comp_.pool.size()); }
  const std::vector<char> &fixed_mask() const override { return fixed_; }

  double smooth_energy(std::span<const Vec3> X) const {
    double e = 0.0;
    for (const SmoothTerm &t : terms_) {
      Vec3 ta = X[size_t(t.shared)] - X[size_t(t.inner_a)];
      Vec3 tb = X[size_t(t.inner_b)] - X[size_t(t.shared)];
      e += 1.0 - dot(normalized(ta), normalized(tb));
    }
    return e;
  }

  double fair_energy(std::span<const Vec3> X) const {
    double e = 0.0;
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp_.solids[size_t(s)];
      std::vector<Vec3> grid(cs.grid.size()), scratch(cs.grid.size());
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        grid[idx] = X[size_t(cs.grid[idx])];
      e += grams_[size_t(s)].energy(grid, scratch);
    }
    return e;
  }

  double energy(std::span<const Vec3> X) const override {
    return scale_ * ((1.0 - lambda_f_) * smooth_energy(X) + lambda_f_ * fair_energy(X));
  }

  void gradient(std::span<const Vec3> X, std::span<Vec3> out) const override {
    for (Vec3 &g : out)
      g = Vec3{0, 0, 0};
    double ws = scale_ * (1.0 - lambda_f_);
    for (const SmoothTerm &t : terms_) {
      Vec3 da = X[size_t(t.shared)] - X[size_t(t.inner_a)];
      Vec3 db = X[size_t(t.inner_b)] - X[size_t(t.shared)];
      double la = norm(da), lb = norm(db);
      Vec3 ta = da / la, tb = db / lb;
      // d(1 - ta.tb): inner_a moves -ta side, inner_b moves +tb side
      out[size_t(t.inner_a)] += unit_diff_jacobian_apply(ta, la, tb) * ws;
      out[size_t(t.inner_b)] -= unit_diff_jacobian_apply(tb, lb, ta) * ws;
      // shared nodes are frozen in this stage; skip their entries
    }
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp_.solids[size_t(s)];
      std::vector<Vec3> grid(cs.grid.size()), Ax(cs.grid.size());
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        grid[idx] = X[size_t(cs.grid[idx])];
      grams_[size_t(s)].matvec(grid, Ax);
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        if (!fixed_[size_t(cs.grid[idx])])
          out[size_t(cs.grid[idx])] += Ax[idx] * (2.0 * scale_ * lambda_f_);
    }
  }

  bool feasible(std::span<const Vec3> X) const override {
    for (int s = 0; s < 7; ++s) {
      const CompositeSolid &cs = comp_.solids[size_t(s)];
      SolidValiditySession sess(cs.nu, cs.nv, cs.nw, cs.kv_u.degree, cs.kv_v.degree,
                                cs.kv_w.degree);
      std::vector<Vec3> grid(cs.grid.size());
      for (size_t idx = 0; idx < cs.grid.size(); ++idx)
        grid[idx] = X[size_t(cs.grid[idx])];
      sess.reset(grid);
      if (!sess.feasible())
        return false;
    }
    return true;
  }

  std::unique_ptr<ProbeSession> make_session() override {
    return std::make_unique<SmoothProbeSession>(comp_);
  }

  const TbsComposite &comp_;
  double lambda_f_;
  double scale_ = 1.0;
  std::vector<SmoothTerm> terms_;
  std::vector<char> fixed_;
  std::array<FairnessGram, 7> grams_;
};

// --- stage drivers ---------------------------------------------------------------

struct StageResult {
  std::vector<std::string> object_names;
  std::vector<GfdTrace> traces;
};

namespace detail {

inline void assert_blocks_valid(const TbsComposite &comp, const char *stage) {
  for (int s = 0; s < 7; ++s) {
    auto [ok, w] = check_solid_validity(comp.materialize(SubId(s)));
    if (!ok)
      throw Error(std::string(stage) + ": block " + sub_name(SubId(s)) +
                  " lost validity at sub-grid (" + std::to_string(w.I) + "," +
                  std::to_string(w.J) + "," + std::to_string(w.K) + ")");
  }
}

} // namespace detail

inline StageResult fit_boundary_curves(TbsComposite &comp,
                                       const std::array<SubVolume, 7> &subvols,
                                       const StageWeights &weights, GfdOptions opts) {
  StageResult result;
  std::vector<char> curve_frozen(comp.curves.size(), 0);
  for (size_t cid = 0; cid < comp.curves.size(); ++cid) {
    const CompositeCurve &c = comp.curves[size_t(cid)];
    CurveData data = gather_curve_data(comp, int(cid), subvols);

    // compatibility partners: frozen curves of the same surface sharing a corner
    std::vector<CurveCompatPartner> partners;
    for (const CompositeSurface &sf : comp.surfaces) {
      bool contains = false;
      for (int e : sf.curve_ids)
        if (e == int(cid))
          contains = true;
      if (!contains)
        continue;
      for (int e : sf.curve_ids) {
        if (e == int(cid) || !curve_frozen[size_t(e)])
          continue;
        const CompositeCurve &other = comp.curves[size_t(e)];
        for (int our_end = 0; our_end < 2; ++our_end) {
          int corner = our_end == 0 ? c.nodes.front() : c.nodes.back();
          int other_end = -1;
          if (other.nodes.front() == corner)
            other_end = 0;
          else if (other.nodes.back() == corner)
            other_end = 1;
          if (other_end < 0)
            continue;
          CurveCompatPartner cp;
          cp.end = our_end;
          for (int a = 0; a <= other.degree; ++a) {
            int idx = other_end == 0 ? a : int(other.nodes.size()) - 1 - a;
            cp.adj_ctrl.push_back(comp.pool[size_t(other.nodes[size_t(idx)])]);
          }
          partners.push_back(std::move(cp));
        }
      }
    }

    KnotVector kv = KnotVector::uniform_bezier(int(c.nodes.size()), c.degree);
    std::vector<SubId> owner_blocks;
    for (const auto &[sd, slot] : c.edges)
      owner_blocks.push_back(sd);
    CurveFitProblem problem(kv, std::move(data), weights.lambda_c, std::move(partners), &comp,
                            build_solid_guards(comp, c.nodes, owner_blocks));
    problem.options = opts;
    std::vector<Vec3> X0 = gather(comp, c.nodes);
    if (!problem.feasible(X0))
      throw Error(std::string("curve fitting: infeasible initial curve ") +
                  std::to_string(cid));
    MinimizeResult res = minimize(problem, X0);
    scatter(comp, c.nodes, res.X);
    curve_frozen[size_t(cid)] = 1;
    result.object_names.push_back("curve_" + std::to_string(cid));
    result.traces.push_back(std::move(res.trace));
  }
  for (size_t i = 0; i < comp.pool.size(); ++i)
    comp.frozen[i] = comp.point_class[i] == PointClass::corner ||
                     comp.point_class[i] == PointClass::curve;
  comp.stage_completed = 1;
  detail::assert_blocks_valid(comp, "curve stage");
  return result;
}

inline StageResult fit_boundary_surfaces(TbsComposite &comp,
                                         const std::array<SubVolume, 7> &subvols,
                                         const StageWeights &weights, GfdOptions opts) {
  if (comp.stage_completed < 1)
    throw Error("surface fitting requires fitted boundary curves");
  StageResult result;
  std::vector<char> surface_frozen(comp.surfaces.size(), 0);
  for (size_t sid = 0; sid < comp.surfaces.size(); ++sid) {
    const CompositeSurface &sf = comp.surfaces[size_t(sid)];
    SurfaceData data = gather_surface_data(comp, int(sid), subvols);

    // corner checks against already fitted faces of the same block(s)
    std::vector<SurfaceCompatCheck> checks;
    for (const auto &[sd, face] : sf.solids) {
      const CompositeSolid &cs = comp.solid(sd);
      for (int c1 = 0; c1 < 2; ++c1)
        for (int c2 = 0; c2 < 2; ++c2) {
          int a1, a2;
          TbsComposite::face_axes(face, a1, a2);
          SurfaceCompatCheck cc;
          cc.sd = sd;
          cc.face = face;
          cc.corner[size_t(face.axis)] = face.side;
          cc.corner[size_t(a1)] = c1;
          cc.corner[size_t(a2)] = c2;
          // the other two faces meeting this corner
          for (int axis : {a1, a2}) {
            CubeFace other{axis, cc.corner[size_t(axis)]};
            // find that face among fitted surfaces of this block
            for (size_t oid = 0; oid < comp.surfaces.size(); ++oid) {
              if (!surface_frozen[size_t(oid)])
                continue;
              for (const auto &[osd, oface] : comp.surfaces[size_t(oid)].solids)
                if (osd == sd && oface.axis == other.axis && oface.side == other.side)
                  cc.frozen_faces.push_back(other);
            }
          }
          if (!cc.frozen_faces.empty())
            checks.push_back(std::move(cc));
        }
    }

    SurfaceFitProblem problem(comp, int(sid), std::move(data), weights, std::move(checks));
    problem.options = opts;
    std::vector<Vec3> X0 = gather(comp, sf.nodes);
    if (!problem.feasible(X0))
      throw Error(std::string("surface fitting: infeasible initial surface ") +
                  std::to_string(sid));
    MinimizeResult res = minimize(problem, X0);
    scatter(comp, sf.nodes, res.X);
    surface_frozen[size_t(sid)] = 1;
    result.object_names.push_back("surface_" + std::to_string(sid));
    result.traces.push_back(std::move(res.trace));
  }
  for (size_t i = 0; i < comp.pool.size(); ++i)
    comp.frozen[i] = comp.point_class[i] != PointClass::interior;
  comp.stage_completed = 2;
  detail::assert_blocks_valid(comp, "surface stage");
  return result;
}

inline StageResult fit_solids(TbsComposite &comp, const std::array<SubVolume, 7> &subvols,
                              const StageWeights &weights, GfdOptions opts) {
  if (comp.stage_completed < 2)
    throw Error("solid fitting requires fitted boundary surfaces");
  StageResult result;
  for (int s = 0; s < 7; ++s) {
    const CompositeSolid &cs = comp.solids[size_t(s)];
    SolidData data = gather_solid_data(subvols, SubId(s));
    SolidFitProblem problem(cs, std::move(data), weights);
    problem.options = opts;
    std::vector<Vec3> X0 = gather(comp, cs.grid);
    if (!problem.feasible(X0))
      throw Error(std::string("solid fitting: infeasible initial block ") + sub_name(SubId(s)));
    MinimizeResult res = minimize(problem, X0);
    scatter(comp, cs.grid, res.X);
    result.object_names.push_back(std::string("solid_") + sub_name(SubId(s)));
    result.traces.push_back(std::move(res.trace));
  }
  comp.stage_completed = 3;
  detail::assert_blocks_valid(comp, "solid stage");
  return result;
}

inline StageResult improve_smoothness_fairness(TbsComposite &comp, const StageWeights &weights,
                                               GfdOptions opts) {
  if (comp.stage_completed < 3)
    throw Error("smoothness improvement requires fitted blocks");
  for (size_t i = 0; i < comp.pool.size(); ++i)
    comp.frozen[i] = comp.point_class[i] != PointClass::interior;
  SmoothFairProblem problem(comp, weights);
  problem.options = opts;
  std::vector<Vec3> X0 = comp.pool;
  if (!problem.feasible(X0))
    throw Error("smoothness improvement: infeasible initial composite");
  MinimizeResult res = minimize(problem, X0);
  comp.pool = res.X;
  comp.stage_completed = 4;
  detail::assert_blocks_valid(comp, "smoothness stage");
  StageResult result;
  result.object_names.push_back("smooth_fair");
  result.traces.push_back(std::move(res.trace));
  return result;
}

// --- G1 deficit diagnostics ----------------------------------------------------

struct InterfaceDeficit {
  SubId a, b;
  double max_angle = 0.0;  // radians between the cross-boundary directions
  double mean_angle = 0.0;
  int flipped = 0;         // nodes whose continuity constant would be <= 0
  bool exact = false;
  double max_isocurve_angle = 0.0; // Def.-2 style sampled diagnostic
};

inline std::vector<InterfaceDeficit> g1_deficit(const TbsComposite &comp) {
  std::vector<InterfaceDeficit> out;
  std::vector<SmoothTerm> terms = smoothness_terms(comp);
  size_t term_idx = 0;
  std::array<BsplineSolid, 7> mats;
  for (int s = 0; s < 7; ++s)
    mats[size_t(s)] = comp.materialize(SubId(s));
  for (const BlockInterface &bi : block_interfaces()) {
    const CompositeSolid &A = comp.solid(bi.a);
    int a1, a2;
    TbsComposite::face_axes(bi.face_a, a1, a2);
    size_t count = size_t(A.count(a1)) * A.count(a2);
    InterfaceDeficit d;
    d.a = bi.a;
    d.b = bi.b;
    double sum = 0.0;
    for (size_t t = 0; t < count; ++t, ++term_idx) {
      const SmoothTerm &st = terms[term_idx];
      Vec3 ta = comp.pool[size_t(st.shared)] - comp.pool[size_t(st.inner_a)];
      Vec3 tb = comp.pool[size_t(st.inner_b)] - comp.pool[size_t(st.shared)];
      double ang = angle_between(normalized(ta), normalized(tb));
      d.max_angle = std::max(d.max_angle, ang);
      sum += ang;
      if (dot(ta, tb) <= 0.0)
        ++d.flipped;
    }
    d.mean_angle = count ? sum / double(count) : 0.0;
    d.exact = d.max_angle < 1e-12 && d.flipped == 0;

    // Def. 2 sampled check on a 5x5 grid of iso-curve constants
    const BsplineSolid &MA = mats[size_t(int(bi.a))];
    const BsplineSolid &MB = mats[size_t(int(bi.b))];
    for (int si = 0; si < 5; ++si)
      for (int sj = 0; sj < 5; ++sj) {
        double p = double(si) / 4, q = double(sj) / 4;
        Vec3 pa;
        pa[bi.face_a.axis] = double(bi.face_a.side);
        pa[a1] = p;
        pa[a2] = q;
        double bp, bq;
        bi.map_coords(p, q, bp, bq);
        int b1, b2;
        TbsComposite::face_axes(bi.face_b, b1, b2);
        Vec3 pb;
        pb[bi.face_b.axis] = double(bi.face_b.side);
        pb[b1] = bp;
        pb[b2] = bq;
        SolidFrame fa = MA.frame(pa.x, pa.y, pa.z);
        SolidFrame fb = MB.frame(pb.x, pb.y, pb.z);
        Vec3 da = fa.partial(bi.face_a.axis) * (bi.face_a.side ? 1.0 : -1.0);
        Vec3 db = fb.partial(bi.face_b.axis) * (bi.face_b.side ? -1.0 : 1.0);
        d.max_isocurve_angle =
            std::max(d.max_isocurve_angle, angle_between(normalized(da), normalized(db)));
      }
    out.push_back(d);
  }
  return out;
}

} // namespace tbs
