#include <catch2/catch.hpp>

#include <random>

#include "oracles.hpp"
#include "tbs/spline.hpp"

using namespace tbs;

TEST_CASE("uniform Bezier knot vectors") {
  KnotVector kv = KnotVector::uniform_bezier(4, 3);
  REQUIRE(kv.knots == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});

  kv = KnotVector::uniform_bezier(6, 3);
  std::vector<double> expect = {0, 0, 0, 0, 1.0 / 3.0, 2.0 / 3.0, 1, 1, 1, 1};
  REQUIRE(kv.knots.size() == expect.size());
  for (size_t i = 0; i < expect.size(); ++i)
    REQUIRE(kv.knots[i] == Approx(expect[i]).margin(1e-15));

  REQUIRE_THROWS_AS(KnotVector::uniform_bezier(3, 3), Error);
}

TEST_CASE("basis end conditions and partition of unity") {
  KnotVector kv = KnotVector::uniform_bezier(4, 3);
  double b[4];
  int first = kv.basis(0.0, b);
  REQUIRE(first == 0);
  REQUIRE(b[0] == Approx(1.0));
  REQUIRE(b[1] == Approx(0.0).margin(1e-15));
  REQUIRE(b[2] == Approx(0.0).margin(1e-15));
  REQUIRE(b[3] == Approx(0.0).margin(1e-15));

  kv = KnotVector::uniform_bezier(9, 3);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    double u = uni(rng);
    auto [f0, v0] = eval_basis(kv, u, 0);
    double sum = 0.0;
    for (double x : v0) {
      REQUIRE(x >= -1e-14);
      sum += x;
    }
    REQUIRE(sum == Approx(1.0).epsilon(1e-12));
    auto [f1, v1] = eval_basis(kv, u, 1);
    REQUIRE(f1 == f0);
    double dsum = 0.0;
    for (double x : v1)
      dsum += x;
    REQUIRE(dsum == Approx(0.0).margin(1e-9));
  }
  REQUIRE_THROWS_AS(eval_basis(kv, 1.5, 0), Error);
  REQUIRE_THROWS_AS(eval_basis(kv, -0.1, 0), Error);
}

TEST_CASE("basis matches independent recursive evaluation") {
  for (int nctrl : {6, 9, 12}) {
    KnotVector kv = KnotVector::uniform_bezier(nctrl, 3);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> us = {0.0, 0.5, 1.0};
    for (int t = 0; t < 30; ++t)
      us.push_back(uni(rng));
    for (double u : us) {
      auto [first, vals] = eval_basis(kv, u, 0);
      for (int i = 0; i < nctrl; ++i) {
        double expect = oracle::recursive_basis(kv.knots, i, 3, u);
        double got = (i >= first && i <= first + 3) ? vals[size_t(i - first)] : 0.0;
        REQUIRE(got == Approx(expect).margin(1e-12));
      }
    }
  }
}

TEST_CASE("basis derivatives match finite differences at 201 samples") {
  KnotVector kv = KnotVector::uniform_bezier(8, 3);
  const double h = 1e-6;
  for (int s = 0; s <= 200; ++s) {
    double u = h + (1.0 - 2 * h) * double(s) / 200; // keep the stencil in-domain
    auto [f1, d1] = eval_basis(kv, u, 1);
    for (int j = 0; j <= 3; ++j) {
      int i = f1 + j;
      auto value_at = [&](double uu) {
        auto [f0, v0] = eval_basis(kv, uu, 0);
        return (i >= f0 && i <= f0 + 3) ? v0[size_t(i - f0)] : 0.0;
      };
      double fd = (value_at(u + h) - value_at(u - h)) / (2 * h);
      REQUIRE(d1[size_t(j)] == Approx(fd).margin(1e-6));
    }
  }
}

TEST_CASE("degree-1 lattice solid is the identity map") {
  BsplineSolid s;
  s.nu = s.nv = s.nw = 5;
  s.kv_u = KnotVector::uniform_bezier(5, 1);
  s.kv_v = KnotVector::uniform_bezier(5, 1);
  s.kv_w = KnotVector::uniform_bezier(5, 1);
  s.ctrl.resize(125);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k)
        s.at(i, j, k) = Vec3{i / 4.0, j / 4.0, k / 4.0};
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vec3 p{uni(rng), uni(rng), uni(rng)};
    Vec3 q = s.eval(p.x, p.y, p.z);
    REQUIRE(norm(q - p) < 1e-12);
  }
}

TEST_CASE("Greville lattice solid reproduces the identity for cubic degree") {
  BsplineSolid s = oracle::greville_box_solid(7, 6, 5, 3);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vec3 p{uni(rng), uni(rng), uni(rng)};
    Vec3 q = s.eval(p.x, p.y, p.z);
    REQUIRE(norm(q - p) < 1e-12);
  }
}

TEST_CASE("constant-control curve evaluates to the point") {
  BsplineCurve c;
  c.kv = KnotVector::uniform_bezier(6, 3);
  c.ctrl.assign(6, Vec3{1.5, -2.0, 0.25});
  for (double u : {0.0, 0.3, 0.77, 1.0})
    REQUIRE(norm(c.eval(u) - Vec3{1.5, -2.0, 0.25}) < 1e-14);
}

TEST_CASE("solid partials match finite differences") {
  std::mt19937 rng(17);
  BsplineSolid s = oracle::greville_box_solid(6, 6, 6, 3, 0.03, &rng);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  const double h = 1e-6;
  for (int t = 0; t < 25; ++t) {
    double u = uni(rng), v = uni(rng), w = uni(rng);
    SolidFrame f = s.frame(u, v, w);
    Vec3 fdu = (s.eval(u + h, v, w) - s.eval(u - h, v, w)) / (2 * h);
    Vec3 fdv = (s.eval(u, v + h, w) - s.eval(u, v - h, w)) / (2 * h);
    Vec3 fdw = (s.eval(u, v, w + h) - s.eval(u, v, w - h)) / (2 * h);
    REQUIRE(norm(f.du - fdu) < 1e-6 * (1 + norm(f.du)));
    REQUIRE(norm(f.dv - fdv) < 1e-6 * (1 + norm(f.dv)));
    REQUIRE(norm(f.dw - fdw) < 1e-6 * (1 + norm(f.dw)));
    REQUIRE(norm(f.pos - s.eval(u, v, w)) < 1e-14);
  }
}

TEST_CASE("jacobian basics") {
  // identity box at degree 1
  BsplineSolid s;
  s.nu = s.nv = s.nw = 2;
  s.kv_u = s.kv_v = s.kv_w = KnotVector::uniform_bezier(2, 1);
  s.ctrl.resize(8);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        s.at(i, j, k) = Vec3{double(i), double(j), double(k)};
  for (double u : {0.0, 0.5, 1.0})
    REQUIRE(s.jacobian(u, u * 0.7, 1 - u) == Approx(1.0));

  // doubling x doubles the jacobian everywhere
  BsplineSolid sx = s;
  for (Vec3 &p : sx.ctrl)
    p.x *= 2.0;
  for (double u : {0.1, 0.4, 0.9})
    REQUIRE(sx.jacobian(u, 0.3, 0.6) == Approx(2.0 * s.jacobian(u, 0.3, 0.6)));

  // FD cross-check on a random cubic solid
  std::mt19937 rng(23);
  BsplineSolid r = oracle::greville_box_solid(6, 6, 6, 3, 0.02, &rng);
  std::uniform_real_distribution<double> uni(0.1, 0.9);
  const double h = 1e-6;
  for (int t = 0; t < 5; ++t) {
    double u = uni(rng), v = uni(rng), w = uni(rng);
    Vec3 fdu = (r.eval(u + h, v, w) - r.eval(u - h, v, w)) / (2 * h);
    Vec3 fdv = (r.eval(u, v + h, w) - r.eval(u, v - h, w)) / (2 * h);
    Vec3 fdw = (r.eval(u, v, w + h) - r.eval(u, v, w - h)) / (2 * h);
    REQUIRE(r.jacobian(u, v, w) == Approx(triple(fdu, fdv, fdw)).epsilon(1e-5));
  }
}

TEST_CASE("scaled jacobian") {
  BsplineSolid s;
  s.nu = s.nv = s.nw = 2;
  s.kv_u = s.kv_v = s.kv_w = KnotVector::uniform_bezier(2, 1);
  s.ctrl.resize(8);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        s.at(i, j, k) = Vec3{double(i), double(j), double(k)};
  REQUIRE(*s.scaled_jacobian(0.5, 0.5, 0.5) == Approx(1.0));

  // shear H(u,v,w) = (u, v+u, w): scaled jacobian 1/sqrt(2)
  BsplineSolid sh = s;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        sh.at(i, j, k) = Vec3{double(i), double(j) + double(i), double(k)};
  for (double u : {0.0, 0.33, 1.0})
    REQUIRE(*sh.scaled_jacobian(u, 0.5, 0.5) == Approx(1.0 / std::sqrt(2.0)));

  // definition cross-check on a random solid
  std::mt19937 rng(29);
  BsplineSolid r = oracle::greville_box_solid(5, 5, 5, 2, 0.02, &rng);
  SolidFrame f = r.frame(0.37, 0.58, 0.21);
  double expect = f.jacobian() / (norm(f.du) * norm(f.dv) * norm(f.dw));
  REQUIRE(*r.scaled_jacobian(0.37, 0.58, 0.21) == Approx(expect).margin(1e-12));

  // degenerate frame signals instead of returning zero
  BsplineSolid flat = s;
  for (Vec3 &p : flat.ctrl)
    p.z = 0.0;
  REQUIRE(!flat.scaled_jacobian(0.5, 0.5, 0.5).has_value());
}

TEST_CASE("affine invariance of evaluation") {
  std::mt19937 rng(31);
  BsplineSolid s = oracle::greville_box_solid(5, 6, 7, 3, 0.05, &rng);
  auto affine = [](const Vec3 &p) {
    return Vec3{2 * p.x - p.y + 0.5, 0.25 * p.y + 3, p.x + p.y + p.z - 1};
  };
  BsplineSolid sa = s;
  for (Vec3 &p : sa.ctrl)
    p = affine(p);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    double u = uni(rng), v = uni(rng), w = uni(rng);
    REQUIRE(norm(sa.eval(u, v, w) - affine(s.eval(u, v, w))) < 1e-10);
  }
}

TEST_CASE("solid control grid file round-trip") {
  std::mt19937 rng(37);
  BsplineSolid s = oracle::greville_box_solid(5, 4, 6, 2, 0.1, &rng);
  std::string path = "/tmp/tbs_test_solid.txt";
  save_solid(s, path);
  BsplineSolid t = load_solid(path);
  REQUIRE(t.nu == s.nu);
  REQUIRE(t.nv == s.nv);
  REQUIRE(t.nw == s.nw);
  REQUIRE(t.kv_u.degree == 2);
  for (size_t i = 0; i < s.ctrl.size(); ++i)
    REQUIRE(s.ctrl[i] == t.ctrl[i]); // %.17g round-trips doubles exactly
}
