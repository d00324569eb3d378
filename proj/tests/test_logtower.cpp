#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adsv/logtower.hpp"

using namespace adsv;

TEST_CASE("plain arithmetic stays exact") {
  BigReal a = BigReal::from(3.5), b = BigReal::from(-1.25);
  CHECK((a + b).to_double() == doctest::Approx(2.25).epsilon(1e-15));
  CHECK((a * b).to_double() == doctest::Approx(-4.375).epsilon(1e-15));
  CHECK((a - a).is_zero());
  CHECK(BigReal::exp(BigReal::from(1.0)).to_double() ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(BigReal::from(100.0).log_mag().to_double() ==
        doctest::Approx(std::log(100.0)).epsilon(1e-15));
}

TEST_CASE("tower construction and comparison") {
  BigReal big = BigReal::tower(2, 1000.0);   // exp(exp(1000))
  BigReal bigger = BigReal::tower(3, 999.0); // exp(exp(exp(999)))
  CHECK(big > BigReal::from(1e308));
  CHECK(bigger > big);
  CHECK(big < bigger);
  CHECK(big == big);

  // canonicalisation: exp^2(2) is an ordinary number
  BigReal small_tower = BigReal::tower(2, 2.0);
  CHECK(small_tower.is_plain());
  CHECK(small_tower.to_double() == doctest::Approx(std::exp(std::exp(2.0))));
}

TEST_CASE("dominance semantics for incommensurate scales") {
  BigReal big = BigReal::tower(2, 1000.0);
  BigReal one = BigReal::one();
  CHECK((big + one) == big);   // absorbed
  CHECK((big - one) == big);
  // at level 1 a factor 2 still moves the log; at level 2 it is absorbed
  // (log exp(exp(1000)) shifts by ~5e-435 relative, below double resolution)
  BigReal lv1 = BigReal::tower(1, 1000.0);
  CHECK((lv1 + lv1) > lv1);
  CHECK((big + big) == big);
  BigReal neg = -big;
  CHECK((big + neg).is_zero());
}

TEST_CASE("log and exp climb the tower") {
  BigReal x = BigReal::tower(3, 1234.0);
  CHECK(x.log_mag() == BigReal::tower(2, 1234.0));
  CHECK(BigReal::exp(x) == BigReal::tower(4, 1234.0));
  // exp of a large negative value underflows to zero by dominance
  CHECK(BigReal::exp(-x).is_zero());
  // pow via logs: (exp(exp(50)))^2 = exp(2 exp(50))
  BigReal y = BigReal::tower(2, 50.0);
  BigReal y2 = BigReal::pow(y, 2.0);
  CHECK(y2.log_mag().to_double() == doctest::Approx(2.0 * std::exp(50.0)).epsilon(1e-13));
}

TEST_CASE("moderate additions keep relative precision") {
  // exp(700) + exp(699) = exp(700)(1 + 1/e)
  BigReal a = BigReal::tower(1, 700.0), b = BigReal::tower(1, 699.0);
  BigReal s = a + b;
  double expect = 700.0 + std::log1p(std::exp(-1.0));
  CHECK(s.log_mag().to_double() == doctest::Approx(expect).epsilon(1e-14));
  BigReal d = a - b;
  CHECK(d.log_mag().to_double() ==
        doctest::Approx(700.0 + std::log1p(-std::exp(-1.0))).epsilon(1e-14));
}
