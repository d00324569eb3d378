#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "adsv/geometry.hpp"

using namespace adsv;

TEST_CASE("hawking mass closed forms") {
  // AdS vacuum point: m = -0.5, mt = 0 at Lambda=-3, r=1
  double m = hawking_mass(1.0, -1.0, 1.0, 2.0);
  CHECK(m == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(renormalised_mass(m, 1.0, -3.0) == doctest::Approx(0.0).epsilon(1e-14));

  // du_r dv_r = -omega2/4 gives m = 0 identically
  CHECK(hawking_mass(3.7, -0.5, 1.3, 4.0 * 0.5 * 1.3) == doctest::Approx(0.0));

  // direct substitution
  CHECK(hawking_mass(2.0, -0.5, 0.3, 1.0) == doctest::Approx(0.4).epsilon(1e-14));

  CHECK_THROWS_AS(hawking_mass(1.0, 0.0, 0.0, -1.0), DomainError);
  CHECK_THROWS_AS(hawking_mass(NAN, 0.0, 0.0, 1.0), DomainError);
}

TEST_CASE("ads reference solution") {
  PointState p = ads_reference(0.0, 0.5 * kPi, -3.0);
  CHECK(p.r == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.omega2 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.dv_r == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.du_r == doctest::Approx(-1.0).epsilon(1e-14));

  CHECK(ads_reference(0.3, 0.3, -3.0).r == doctest::Approx(0.0));

  // boundary limit: 1/r -> 0
  PointState q = ads_reference(0.0, kPi * (1.0 - 1e-9), -3.0);
  CHECK(1.0 / q.r < 1e-8);

  CHECK_THROWS_AS(ads_reference(0.0, kPi + 0.1, -3.0), DomainError);
  CHECK_THROWS_AS(ads_reference(0.1, 0.0, -3.0), DomainError);
}

TEST_CASE("hawking mass of the ads reference vanishes after renormalisation") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> uu(0.0, 5.0), xx(1e-3, kPi - 1e-3);
  for (int it = 0; it < 200; ++it) {
    double u = uu(rng), v = u + xx(rng);
    PointState p = ads_reference(u, v, -3.0);
    double m = hawking_mass(p.r, p.du_r, p.dv_r, p.omega2);
    double mt = renormalised_mass(m, p.r, -3.0);
    double scale = std::max(1.0, std::abs(m));
    CHECK(std::abs(mt) <= 1e-12 * scale);
  }
}

TEST_CASE("compactified radius") {
  CHECK(compactify(1.0, -3.0) == doctest::Approx(0.25 * kPi).epsilon(1e-14));
  CHECK(compactify(0.0, -3.0) == doctest::Approx(0.0));
  CHECK(compactify(1e12, -3.0) > 0.5 * kPi - 1e-11);
  CHECK_THROWS_AS(compactify(-1.0, -3.0), DomainError);

  // roundtrip on [0, pi/2 - 1e-6]
  for (int i = 0; i <= 100; ++i) {
    double rho = (0.5 * kPi - 1e-6) * i / 100.0;
    double r = uncompactify(rho, -3.0);
    CHECK(compactify(r, -3.0) == doctest::Approx(rho).epsilon(1e-12));
  }

  // renormalised conformal factor of AdS is identically 1
  PointState p = ads_reference(0.0, 1.1, -3.0);
  CHECK(omega_tilde_sq(p.omega2, p.r, -3.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("trapped predicate") {
  PointState ads = ads_reference(0.0, 0.5 * kPi, -3.0);
  CHECK_FALSE(is_trapped(ads));  // 2m/r = -1 < 1

  PointState p;
  p.r = 1.0;
  p.m = 0.6;
  CHECK(is_trapped(p));

  p.m = 0.5;  // exactly 2m/r = 1: strict inequality
  CHECK_FALSE(is_trapped(p));

  p.r = 0.0;
  p.m = 0.0;
  CHECK_FALSE(is_trapped(p));

  // invariance under (r, m) -> (c r, c m)
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> rr(0.01, 10.0), mm(-2.0, 2.0), cc(0.1, 50.0);
  for (int it = 0; it < 200; ++it) {
    PointState a;
    a.r = rr(rng);
    a.m = mm(rng);
    PointState b = a;
    double c = cc(rng);
    b.r *= c;
    b.m *= c;
    CHECK(is_trapped(a) == is_trapped(b));
  }
}

TEST_CASE("cosmology and grid invariants") {
  Cosmology c = Cosmology::make(-3.0);
  CHECK(c.v_infinity == doctest::Approx(kPi).epsilon(1e-15));
  c.validate();
  CHECK_THROWS_AS(Cosmology::make(1.0), ConfigError);

  Cosmology c2 = Cosmology::make(-0.42);
  CHECK(c2.v_infinity == doctest::Approx(kPi * std::sqrt(3.0 / 0.42)).epsilon(1e-15));

  NullGrid g = NullGrid::make(c, 64);
  CHECK(g.h * 64 == doctest::Approx(c.v_infinity));
  CHECK(g.contains(0.5, 0.7));
  CHECK_FALSE(g.contains(0.7, 0.5));
  CHECK_FALSE(g.contains(0.0, kPi + 1e-9));
  CHECK_THROWS_AS(NullGrid::make(c, 2), ConfigError);
}
