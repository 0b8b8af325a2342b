#include <catch2/catch.hpp>

#include <random>

#include "tbs/gfd.hpp"

using namespace tbs;

namespace {

// E = |X - X*|^2 with optional per-point box feasibility
class QuadraticProblem : public GfdProblem {
public:
  QuadraticProblem(std::vector<Vec3> target, double box = 1e30)
      : target_(std::move(target)), box_(box) {
    fixed_.assign(target_.size(), 0);
  }

  int num_points() const override { return int(target_.size()); }

  double energy(std::span<const Vec3> pts) const override {
    double e = 0.0;
    for (size_t i = 0; i < target_.size(); ++i)
      e += norm2(pts[i] - target_[i]);
    return offset_ + scale_ * e;
  }

  bool feasible(std::span<const Vec3> pts) const override {
    for (const Vec3 &p : pts)
      for (int c = 0; c < 3; ++c)
        if (std::fabs(p[c]) > box_)
          return false;
    return true;
  }

  const std::vector<char> &fixed_mask() const override { return fixed_; }

  void gradient(std::span<const Vec3> pts, std::span<Vec3> out) const override {
    if (use_fd_) {
      GfdProblem::gradient(pts, out);
      return;
    }
    for (size_t i = 0; i < target_.size(); ++i)
      out[i] = (pts[i] - target_[i]) * (2.0 * scale_);
  }

  std::vector<char> fixed_;
  std::vector<Vec3> target_;
  double box_;
  bool use_fd_ = false;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

// Rosenbrock in the (x,y) coordinates of a single control point
class RosenbrockProblem : public GfdProblem {
public:
  RosenbrockProblem() { fixed_.assign(1, 0); }
  int num_points() const override { return 1; }
  double energy(std::span<const Vec3> pts) const override {
    double x = pts[0].x, y = pts[0].y;
    return (1 - x) * (1 - x) + 100.0 * (y - x * x) * (y - x * x);
  }
  bool feasible(std::span<const Vec3> pts) const override {
    return std::fabs(pts[0].x) <= 2.0 && std::fabs(pts[0].y) <= 2.0 && pts[0].z == 0.0;
  }
  const std::vector<char> &fixed_mask() const override { return fixed_; }
  void gradient(std::span<const Vec3> pts, std::span<Vec3> out) const override {
    double x = pts[0].x, y = pts[0].y;
    out[0] = Vec3{-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x), 0};
  }
  std::vector<char> fixed_;
};

} // namespace

TEST_CASE("gradient: analytic quadratic is exact, FD fallback close") {
  std::vector<Vec3> target = {{1, 2, 3}, {-1, 0, 0.5}};
  QuadraticProblem p(target);
  std::vector<Vec3> X = {{0, 0, 0}, {1, 1, 1}};
  auto g = gradient(p, X);
  REQUIRE(norm(g[0] - Vec3{-2, -4, -6}) < 1e-14);
  REQUIRE(norm(g[1] - Vec3{4, 2, 1}) < 1e-14);

  p.use_fd_ = true;
  auto gfd = gradient(p, X);
  for (int i = 0; i < 2; ++i)
    REQUIRE(norm(gfd[size_t(i)] - g[size_t(i)]) < 1e-5 * (1 + norm(g[size_t(i)])));
}

TEST_CASE("feasible_direction: unconstrained quadratic takes full steps") {
  QuadraticProblem p({{1, 1, 1}, {2, 0, -1}});
  std::vector<Vec3> X = {{0, 0, 0}, {0, 0, 0}};
  auto g = gradient(p, X);
  auto session = p.make_session();
  FeasibleDirection fd = feasible_direction(p, X, g, *session);
  REQUIRE(fd.ok);
  for (double t : fd.tau)
    REQUIRE(t == 1.0);
  for (size_t i = 0; i < X.size(); ++i)
    REQUIRE(norm(fd.dir[i] + g[i]) < 1e-14); // D = -gradient
  REQUIRE(fd.cosine == Approx(1.0));
}

TEST_CASE("feasible_direction: active box constraint shrinks one weight") {
  // two points; the first would leave the box at full step
  QuadraticProblem p({{2.0, 0, 0}, {0.3, 0, 0}}, /*box=*/1.0);
  std::vector<Vec3> X = {{0.5, 0, 0}, {0, 0, 0}};
  REQUIRE(p.feasible(X));
  auto g = gradient(p, X); // g0 = (-3,0,0), full step lands at 3.5 -> infeasible
  auto session = p.make_session();
  FeasibleDirection fd = feasible_direction(p, X, g, *session);
  REQUIRE(fd.ok);
  REQUIRE(fd.tau[1] == 1.0);
  REQUIRE(fd.tau[0] < 1.0);

  // exhaustive tau-grid oracle: largest tau0 with X + D feasible
  double expect = -1;
  for (int s = p.options.n_tau; s >= 0; --s) {
    double t = double(s) / p.options.n_tau;
    Vec3 probe = X[0] - g[0] * t;
    std::vector<Vec3> probe_all = {probe, X[1] - g[1] * 1.0};
    if (p.feasible(probe_all)) {
      expect = t;
      break;
    }
  }
  REQUIRE(fd.tau[0] == Approx(expect));
}

TEST_CASE("feasible_direction: all points blocked reports failure") {
  // X sits at the box corner and the gradient pushes straight outside
  QuadraticProblem p({{5, 5, 5}}, /*box=*/1.0);
  std::vector<Vec3> X = {{1, 1, 1}};
  auto g = gradient(p, X);
  auto session = p.make_session();
  FeasibleDirection fd = feasible_direction(p, X, g, *session);
  REQUIRE(!fd.ok);
}

TEST_CASE("armijo on the quadratic accepts the exact line minimum") {
  QuadraticProblem p({{0, 0, 0}});
  std::vector<Vec3> X = {{1, 2, -1}};
  auto g = gradient(p, X);
  std::vector<Vec3> D = {-g[0]};
  double E0 = p.energy(X);
  double gdotD = -norm2(g[0]);
  auto session = p.make_session();
  auto alpha = armijo_step(p, *session, X, D, E0, gdotD);
  REQUIRE(alpha.has_value());
  REQUIRE(*alpha == Approx(0.5)); // exact minimizer of E((1-2a)X)
}

TEST_CASE("armijo halves until the landing point is feasible") {
  QuadraticProblem p({{3, 0, 0}}, /*box=*/1.0);
  std::vector<Vec3> X = {{0.0, 0, 0}};
  std::vector<Vec3> D = {{1.6, 0, 0}}; // full step leaves the box
  double E0 = p.energy(X);
  std::vector<Vec3> g = gradient(p, X);
  double gdotD = dot(g[0], D[0]);
  REQUIRE(gdotD < 0);
  auto session = p.make_session();
  auto alpha = armijo_step(p, *session, X, D, E0, gdotD);
  REQUIRE(alpha.has_value());
  REQUIRE(*alpha * 1.6 <= 1.0 + 1e-12);
  REQUIRE(*alpha == Approx(0.5)); // one halving restores feasibility
}

TEST_CASE("minimize: quadratic converges near the optimum") {
  QuadraticProblem p({{1, -2, 0.5}, {0, 3, 1}});
  p.options.eps_e = 1e-8;
  p.options.max_iters = 200;
  std::vector<Vec3> X0 = {{0, 0, 0}, {0, 0, 0}};
  auto res = minimize(p, X0);
  bool done = res.trace.status == GfdStatus::converged ||
              res.trace.status == GfdStatus::gradient_zero;
  REQUIRE(done);
  REQUIRE(int(res.trace.records.size()) < 200);
  REQUIRE(norm(res.X[0] - Vec3{1, -2, 0.5}) < 1e-6);
  REQUIRE(norm(res.X[1] - Vec3{0, 3, 1}) < 1e-6);
}

TEST_CASE("minimize: near-flat energy terminates after one iteration") {
  QuadraticProblem p({{1, 0, 0}});
  p.offset_ = 1.0;
  p.scale_ = 1e-9;
  p.options.eps_e = 1e-4;
  std::vector<Vec3> X0 = {{0, 0, 0}};
  auto res = minimize(p, X0);
  REQUIRE(res.trace.records.size() == 1);
  REQUIRE(res.trace.status == GfdStatus::converged);
}

TEST_CASE("minimize: Rosenbrock stays in the box with monotone energy") {
  RosenbrockProblem p;
  p.options.eps_e = 1e-10;
  p.options.max_iters = 400;
  std::vector<Vec3> X0 = {{0.5, 0.25, 0}};
  auto res = minimize(p, X0);
  double prev = res.trace.initial_energy;
  for (const GfdRecord &r : res.trace.records) {
    REQUIRE(r.energy <= prev + 1e-14);
    REQUIRE(r.direction_cosine > p.options.delta_d);
    prev = r.energy;
  }
  REQUIRE(std::fabs(res.X[0].x) <= 2.0);
  REQUIRE(std::fabs(res.X[0].y) <= 2.0);
}

TEST_CASE("minimize: fixed points never move") {
  QuadraticProblem p({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
  p.fixed_[1] = 1;
  std::vector<Vec3> X0 = {{0, 0, 0}, {0.25, 0.5, 0.75}, {0, 0, 0}};
  auto res = minimize(p, X0);
  REQUIRE(res.X[1] == X0[1]); // bit-identical
  REQUIRE(norm(res.X[0] - Vec3{1, 1, 1}) < 1e-5);
}

TEST_CASE("minimize: deterministic traces") {
  RosenbrockProblem p1, p2;
  std::vector<Vec3> X0 = {{0.5, 0.25, 0}};
  auto r1 = minimize(p1, X0);
  auto r2 = minimize(p2, X0);
  REQUIRE(r1.trace.records.size() == r2.trace.records.size());
  for (size_t i = 0; i < r1.trace.records.size(); ++i) {
    REQUIRE(r1.trace.records[i].energy == r2.trace.records[i].energy);
    REQUIRE(r1.trace.records[i].alpha == r2.trace.records[i].alpha);
  }
  REQUIRE(r1.X[0] == r2.X[0]);
}

TEST_CASE("minimize: infeasible start throws, stall reports status") {
  QuadraticProblem p({{5, 0, 0}}, /*box=*/1.0);
  std::vector<Vec3> bad = {{3, 0, 0}};
  REQUIRE_THROWS_AS(minimize(p, bad), Error);

  // start at the box corner pushed outward: no feasible descent direction
  std::vector<Vec3> corner = {{1, 0, 0}};
  auto res = minimize(p, corner);
  REQUIRE(res.trace.status == GfdStatus::stalled);
  REQUIRE(res.X[0] == corner[0]);
}

TEST_CASE("trace export writes one line per iteration") {
  QuadraticProblem p({{1, 0, 0}});
  auto res = minimize(p, std::vector<Vec3>{{0, 0, 0}});
  export_trace(res.trace, "/tmp/tbs_trace_test.txt");
  std::ifstream f("/tmp/tbs_trace_test.txt");
  REQUIRE(f.good());
  std::string line;
  int lines = 0;
  while (std::getline(f, line))
    ++lines;
  REQUIRE(lines == int(res.trace.records.size()) + 2); // header + records + footer
}
