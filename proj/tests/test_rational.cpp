#include "topocb/rational.hpp"

#include "doctest.h"

using topocb::Rational;

TEST_CASE("rational arithmetic is exact and canonical") {
  Rational a(1, 3), b(2, 6);
  CHECK(a == b);
  CHECK((a + b) == Rational(2, 3));
  CHECK((a * Rational(3, 4)) == Rational(1, 4));
  CHECK((Rational(7, 2) - Rational(1, 2)) == Rational(3));
  CHECK((Rational(1) / Rational(8)).str() == "1/8");
  CHECK(Rational(-4, 8).str() == "-1/2");
  CHECK(Rational(6, 3).str() == "2");
}

TEST_CASE("infinity absorbs and dominates") {
  Rational inf = Rational::infinity();
  CHECK(inf.isInfinite());
  CHECK((inf + Rational(5)).isInfinite());
  CHECK(Rational(1'000'000) < inf);
  CHECK(inf == Rational::infinity());
  CHECK((inf * Rational(1, 2)).isInfinite());
}

TEST_CASE("parsing accepts p/q and integers only") {
  CHECK(Rational::parse("3/4") == Rational(3, 4));
  CHECK(Rational::parse("-6/4") == Rational(-3, 2));
  CHECK(Rational::parse("12") == Rational(12));
  CHECK_THROWS_AS(Rational::parse("3/0"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("0.5"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("a/b"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("1/"), std::invalid_argument);
}

TEST_CASE("pow2inv") {
  CHECK(topocb::pow2inv(0) == Rational(1));
  CHECK(topocb::pow2inv(10) == Rational(1, 1024));
}
