#pragma once

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbs/vec3.hpp"

namespace tbs {

enum class GfdStatus {
  converged,  // relative energy decrease below eps_e
  stalled,    // no feasible descent direction or Armijo cap reached
  max_iters,
  gradient_zero,
};

inline const char *to_string(GfdStatus s) {
  switch (s) {
  case GfdStatus::converged: return "converged";
  case GfdStatus::stalled: return "stalled";
  case GfdStatus::max_iters: return "max_iters";
  case GfdStatus::gradient_zero: return "gradient_zero";
  }
  return "?";
}

struct GfdRecord {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  double mean_tau = 0.0;
  double direction_cosine = 0.0; // -D.grad / (|D| |grad|) of the accepted direction
  bool feasible_confirmed = false;
};

struct GfdTrace {
  std::vector<GfdRecord> records;
  GfdStatus status = GfdStatus::converged;
  double initial_energy = 0.0;
  double final_energy = 0.0;
};

struct GfdOptions {
  double eps_e = 1e-6;   // relative-decrease termination threshold
  int n_tau = 20;        // tau grid resolution
  double delta_d = 0.3;  // descent-angle threshold
  int max_iters = 2000;
  double armijo_c = 1e-4;
  double armijo_rho = 0.5;
  int armijo_max_halvings = 40;
};

// Feasibility oracle for the optimizer. reset() anchors the session at a
// configuration; probe_point() asks, without mutating the anchor, whether
// replacing one control point keeps the constraints.
class ProbeSession {
public:
  virtual ~ProbeSession() = default;
  virtual void reset(std::span<const Vec3> pts) = 0;
  virtual bool probe_point(int i, const Vec3 &p) = 0;
  virtual bool feasible() = 0;
};

class GfdProblem {
public:
  virtual ~GfdProblem() = default;

  virtual int num_points() const = 0;
  virtual double energy(std::span<const Vec3> pts) const = 0;
  virtual bool feasible(std::span<const Vec3> pts) const = 0;

  // Per-point mask of frozen control points; their direction entries stay 0.
  virtual const std::vector<char> &fixed_mask() const = 0;

  // Analytic gradient when overridden; the base implementation falls back to
  // central finite differences with h = 1e-6 * (1 + |X|_inf).
  virtual void gradient(std::span<const Vec3> pts, std::span<Vec3> out) const {
    std::vector<Vec3> work(pts.begin(), pts.end());
    double xinf = 0.0;
    for (const Vec3 &p : pts)
      for (int c = 0; c < 3; ++c)
        xinf = std::max(xinf, std::fabs(p[c]));
    double h = 1e-6 * (1.0 + xinf);
    for (int i = 0; i < num_points(); ++i)
      for (int c = 0; c < 3; ++c) {
        double saved = work[i][c];
        work[i][c] = saved + h;
        double ep = energy(work);
        work[i][c] = saved - h;
        double em = energy(work);
        work[i][c] = saved;
        out[i][c] = (ep - em) / (2 * h);
      }
  }

  virtual std::unique_ptr<ProbeSession> make_session();

  GfdOptions options;
};

namespace detail {

class GenericSession final : public ProbeSession {
public:
  explicit GenericSession(const GfdProblem &p) : problem_(p) {}
  void reset(std::span<const Vec3> pts) override { pts_.assign(pts.begin(), pts.end()); }
  bool probe_point(int i, const Vec3 &p) override {
    Vec3 saved = pts_[size_t(i)];
    pts_[size_t(i)] = p;
    bool ok = problem_.feasible(pts_);
    pts_[size_t(i)] = saved;
    return ok;
  }
  bool feasible() override { return problem_.feasible(pts_); }

private:
  const GfdProblem &problem_;
  std::vector<Vec3> pts_;
};

} // namespace detail

inline std::unique_ptr<ProbeSession> GfdProblem::make_session() {
  return std::make_unique<detail::GenericSession>(*this);
}

// Gradient with the non-finite guard from the operation contract.
inline std::vector<Vec3> gradient(const GfdProblem &p, std::span<const Vec3> pts) {
  std::vector<Vec3> g(p.num_points());
  p.gradient(pts, g);
  for (const Vec3 &v : g)
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
      throw Error("gradient: non-finite component");
  return g;
}

struct FeasibleDirection {
  bool ok = false;
  std::vector<Vec3> dir;      // tau-weighted direction per point
  std::vector<double> tau;    // per-point weights (0 for fixed points)
  double dir_dot_grad = 0.0;  // D . grad(E)
  double cosine = 0.0;        // -D.grad / (|D| |grad|)
  double mean_tau = 0.0;      // over free points
};

// One-by-one largest-first tau search under the two direction requirements
// (per-point feasibility, descent angle).
// Requirement 1 probes each control point's replacement individually at the
// current iterate; the Armijo step later re-checks feasibility of the
// combined move at the accepted step length.
inline FeasibleDirection feasible_direction(const GfdProblem &problem, std::span<const Vec3> X,
                                            std::span<const Vec3> grad, ProbeSession &session) {
  const GfdOptions &opt = problem.options;
  const int m = problem.num_points();
  const std::vector<char> &fixed = problem.fixed_mask();

  FeasibleDirection out;
  out.tau.assign(m, 0.0);
  out.dir.assign(m, Vec3{0, 0, 0});

  double g2_total = 0.0;
  std::vector<double> g2(m, 0.0);
  for (int i = 0; i < m; ++i) {
    g2[i] = norm2(grad[i]);
    g2_total += g2[i];
  }
  double grad_norm = std::sqrt(g2_total);
  if (grad_norm == 0.0)
    return out;

  // running angle-condition sums with not-yet-visited weights at 1
  double s1 = 0.0, s2 = 0.0; // sum tau*g2, sum tau^2*g2 over free points
  for (int i = 0; i < m; ++i)
    if (!fixed[i]) {
      out.tau[i] = 1.0;
      s1 += g2[i];
      s2 += g2[i];
    }
  auto angle_ok = [&](double s1v, double s2v) {
    if (s2v <= 0.0)
      return false;
    return s1v / (std::sqrt(s2v) * grad_norm) > opt.delta_d;
  };

  session.reset(X);
  for (int i = 0; i < m; ++i) {
    if (fixed[i])
      continue;
    bool accepted = false;
    for (int step = opt.n_tau; step >= 1; --step) {
      double t = double(step) / opt.n_tau;
      double s1c = s1 + (t - out.tau[i]) * g2[i];
      double s2c = s2 + (t * t - out.tau[i] * out.tau[i]) * g2[i];
      out.tau[i] = t;
      s1 = s1c;
      s2 = s2c;
      if (session.probe_point(i, X[i] - grad[i] * t) && angle_ok(s1, s2)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      s1 -= out.tau[i] * g2[i];
      s2 -= out.tau[i] * out.tau[i] * g2[i];
      out.tau[i] = 0.0;
    }
  }

  int free_count = 0;
  double tau_sum = 0.0, d2 = 0.0;
  for (int i = 0; i < m; ++i) {
    if (fixed[i])
      continue;
    ++free_count;
    tau_sum += out.tau[i];
    out.dir[i] = -grad[i] * out.tau[i];
    d2 += norm2(out.dir[i]);
  }
  if (d2 == 0.0)
    return out; // all points blocked
  out.dir_dot_grad = -s1;
  out.cosine = s1 / (std::sqrt(d2) * grad_norm);
  out.mean_tau = free_count ? tau_sum / free_count : 0.0;
  if (out.cosine <= opt.delta_d)
    return out;
  out.ok = true;
  return out;
}

// Backtracking Armijo step: largest alpha in {rho^j} with sufficient
// decrease and a feasible landing point.
inline std::optional<double> armijo_step(const GfdProblem &problem, ProbeSession &session,
                                         std::span<const Vec3> X, std::span<const Vec3> D,
                                         double E0, double dir_dot_grad) {
  const GfdOptions &opt = problem.options;
  const int m = problem.num_points();
  std::vector<Vec3> probe(m);
  double alpha = 1.0;
  for (int j = 0; j <= opt.armijo_max_halvings; ++j, alpha *= opt.armijo_rho) {
    for (int i = 0; i < m; ++i)
      probe[i] = X[i] + D[i] * alpha;
    double E = problem.energy(probe);
    if (E <= E0 + opt.armijo_c * alpha * dir_dot_grad) {
      session.reset(probe);
      if (session.feasible())
        return alpha;
    }
  }
  return std::nullopt;
}

struct MinimizeResult {
  std::vector<Vec3> X;
  GfdTrace trace;
};

// Algorithm 1: gradient, per-point tau-weighted feasible direction, Armijo
// step, relative-decrease termination. Every iterate stays feasible and the
// energy is nonincreasing.
inline MinimizeResult minimize(GfdProblem &problem, std::span<const Vec3> X0) {
  const GfdOptions &opt = problem.options;
  if (!problem.feasible(X0))
    throw Error("gfd minimize: infeasible initial configuration");

  MinimizeResult res;
  res.X.assign(X0.begin(), X0.end());
  std::unique_ptr<ProbeSession> session = problem.make_session();

  double E0 = problem.energy(res.X);
  res.trace.initial_energy = E0;
  res.trace.status = GfdStatus::max_iters;

  for (int k = 0; k < opt.max_iters; ++k) {
    std::vector<Vec3> g = gradient(problem, res.X);
    double gn = 0.0;
    for (const Vec3 &v : g)
      gn += norm2(v);
    gn = std::sqrt(gn);
    if (gn == 0.0) {
      res.trace.status = GfdStatus::gradient_zero;
      break;
    }

    FeasibleDirection fd = feasible_direction(problem, res.X, g, *session);
    if (!fd.ok) {
      res.trace.status = GfdStatus::stalled;
      break;
    }

    std::optional<double> alpha =
        armijo_step(problem, *session, res.X, fd.dir, E0, fd.dir_dot_grad);
    if (!alpha) {
      res.trace.status = GfdStatus::stalled;
      break;
    }

    for (int i = 0; i < problem.num_points(); ++i)
      res.X[i] += fd.dir[i] * *alpha;
    double E1 = problem.energy(res.X);

    session->reset(res.X);
    bool feas = session->feasible();
    if (!feas)
      throw Error("gfd minimize: iterate left the feasible region");
    if (E1 > E0)
      throw Error("gfd minimize: energy increased along an Armijo step");

    res.trace.records.push_back(
        {k, E1, gn, *alpha, fd.mean_tau, fd.cosine, feas});

    double denom = std::max(std::fabs(E0), 1e-300);
    if (std::fabs(E1 - E0) / denom < opt.eps_e) {
      res.trace.status = GfdStatus::converged;
      E0 = E1;
      break;
    }
    E0 = E1;
  }
  res.trace.final_energy = E0;
  return res;
}

// Line-delimited trace export for convergence plots.
inline void export_trace(const GfdTrace &trace, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open for write: " + path);
  f << "# iter energy grad_norm alpha mean_tau status\n";
  char buf[160];
  for (const GfdRecord &r : trace.records) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g running\n", r.iter, r.energy,
                  r.grad_norm, r.alpha, r.mean_tau);
    f << buf;
  }
  f << "# final " << to_string(trace.status) << " " << trace.final_energy << "\n";
}

} // namespace tbs
