#include <catch2/catch.hpp>

#include <random>

#include "oracles.hpp"
#include "tbs/cone.hpp"

using namespace tbs;

TEST_CASE("single vector gives a zero-aperture cone") {
  Vec3 v = normalized(Vec3{1, 2, 3});
  Cone c = min_enclosing_cone(std::vector<Vec3>{v});
  REQUIRE(c.half_aperture == 0.0);
  REQUIRE(norm(c.axis - v) < 1e-15);
  REQUIRE(c.support.size() == 1);
}

TEST_CASE("two vectors: bisector axis, half the angle") {
  double theta = 0.7;
  Vec3 a{1, 0, 0};
  Vec3 b{std::cos(theta), std::sin(theta), 0};
  Cone c = min_enclosing_cone(std::vector<Vec3>{a, b});
  Vec3 bisector = normalized(a + b);
  REQUIRE(norm(c.axis - bisector) < 1e-12);
  REQUIRE(c.half_aperture == Approx(theta / 2).margin(1e-12));
}

TEST_CASE("random caps match the brute-force minimal cap") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    Vec3 axis = normalized(Vec3{uni(rng), uni(rng), uni(rng)});
    auto vs = oracle::random_cap_vectors(rng, 50, axis, 20.0 * M_PI / 180.0); // 40 deg cap
    Cone c = min_enclosing_cone(vs);
    oracle::BruteCone b = oracle::brute_min_cone(vs);
    REQUIRE(c.half_aperture == Approx(b.half_aperture).margin(1e-9));
    for (const Vec3 &v : vs)
      REQUIRE(c.contains(v, 1e-9));
  }
}

TEST_CASE("support certification: non-support vectors are redundant") {
  std::mt19937 rng(43);
  auto vs = oracle::random_cap_vectors(rng, 25, Vec3{0, 0, 1}, 0.5);
  Cone c = min_enclosing_cone(vs);
  REQUIRE(c.support.size() >= 1);
  std::vector<char> is_support(vs.size(), 0);
  for (int s : c.support)
    is_support[size_t(s)] = 1;
  std::vector<Vec3> reduced;
  for (size_t i = 0; i < vs.size(); ++i)
    if (is_support[i])
      reduced.push_back(vs[i]);
  Cone c2 = min_enclosing_cone(reduced);
  REQUIRE(c2.half_aperture == Approx(c.half_aperture).margin(1e-12));
  REQUIRE(norm(c2.axis - c.axis) < 1e-9);
}

TEST_CASE("aperture is monotone under adding vectors") {
  std::mt19937 rng(47);
  auto vs = oracle::random_cap_vectors(rng, 30, Vec3{1, 1, 0}, 0.6);
  double prev = 0.0;
  for (size_t n = 1; n <= vs.size(); ++n) {
    std::vector<Vec3> prefix(vs.begin(), vs.begin() + long(n));
    Cone c = min_enclosing_cone(prefix);
    REQUIRE(c.half_aperture >= prev - 1e-12);
    prev = c.half_aperture;
  }
}

TEST_CASE("hemisphere spread is an error") {
  std::vector<Vec3> vs = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
  REQUIRE_THROWS_AS(min_enclosing_cone(vs), Error);
  std::vector<Vec3> vs2 = {{1, 0, 0}, {-1, 0, 0}};
  REQUIRE_THROWS_AS(min_enclosing_cone(vs2), Error);
  REQUIRE_THROWS_AS(min_enclosing_cone(std::vector<Vec3>{}), Error);
}
