#include <doctest.h>

#include "support.hpp"

using namespace hmcfs;
using namespace testing;

TEST_CASE("rational parsing and formatting") {
  CHECK(parse_rational("3/4") == q(3, 4));
  CHECK(parse_rational("6/8") == q(3, 4));
  CHECK(parse_rational("-2/6") == q(-1, 3));
  CHECK(parse_rational("0.125") == q(1, 8));
  CHECK(parse_rational("-3.5e-2") == q(-7, 200));
  CHECK(parse_rational("1e3") == q(1000));
  CHECK(parse_rational(".5") == q(1, 2));
  CHECK(parse_rational("0.5") == q(1, 2));
  CHECK(parse_rational("010/3") == q(10, 3));
  CHECK(parse_rational("2.5e-02") == q(1, 40));
  CHECK(parse_rational("0") == q(0));
  CHECK(parse_rational("-0.0") == q(0));
  CHECK(parse_rational(" 7 ") == q(7));
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("1.2.3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_double("nan"), std::invalid_argument);
  CHECK(parse_double("1/4") == 0.25);
  CHECK(parse_double("0.1") == 0.1);
  CHECK(parse_double("0.8074319657411244") == 0.8074319657411244);

  CHECK(format_rational(q(3, 4)) == "3/4");
  CHECK(format_rational(q(4, 2)) == "2");
  CHECK(format_rational(q(0)) == "0");
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("rational arithmetic reduces") {
  CHECK(q(1, 2) + q(1, 3) == q(5, 6));
  CHECK(format_rational(q(1, 6) + q(1, 3)) == "1/2");
}

TEST_CASE("kron") {
  Mat<Rational> one(1, 1), five(1, 1);
  one << 1;
  five << 5;
  CHECK(kron(one, five) == five);

  // e_2 (x) ... : state i=2 with output j=1 sits at (j-1)n+i = 2.
  const Vec<Rational> e1 = basis<Rational>(2, 0), e2 = basis<Rational>(2, 1);
  CHECK(Vec<Rational>(kron(e1, e2)) == basis<Rational>(4, 1));
  CHECK(joint_index(1, 0, 2) == 1);

  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_matrix(rng, 2, 2), b = random_matrix(rng, 2, 2);
    const auto c = random_matrix(rng, 2, 3), d = random_matrix(rng, 2, 1);
    CHECK(Mat<Rational>(kron(a, b) * kron(c, d)) == kron(Mat<Rational>(a * c), Mat<Rational>(b * d)));
  }

  Mat<Rational> a(2, 2);
  a << 1, 2, 3, 4;
  const Mat<Rational> k = kron(a, identity(3));
  CHECK(k.rows() == 6);
  CHECK(k.cols() == 6);
  CHECK(k.block(3, 0, 3, 3) == 3 * identity(3));
}

TEST_CASE("vec") {
  Mat<Rational> m(2, 2);
  m << 1, 2, 3, 4;
  CHECK(vec(m) == vec_of({1, 3, 2, 4}));

  const Vec<Rational> e2 = basis<Rational>(2, 1), f1 = basis<Rational>(2, 0);
  CHECK(vec(Mat<Rational>(e2 * f1.transpose())) == vec_of({0, 1, 0, 0}));

  // vec(x y^T) = y (x) x, exhaustively over basis vectors.
  for (Index n = 1; n <= 4; ++n)
    for (Index mm = 1; mm <= 4; ++mm)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < mm; ++j) {
          const auto x = basis<Rational>(n, i);
          const auto y = basis<Rational>(mm, j);
          CHECK(vec(Mat<Rational>(x * y.transpose())) == Vec<Rational>(kron(y, x)));
        }
}

TEST_CASE("delta") {
  Mat<Rational> one(1, 1);
  one << 1;
  CHECK(delta(one) == one);

  Mat<Rational> expected(4, 2);
  expected << 1, 0, 0, 0, 0, 0, 0, 1;
  CHECK(delta(identity(2)) == expected);

  Rng rng(5);
  const auto g = random_matrix(rng, 2, 3);
  const Mat<Rational> d = delta(g);
  for (Index k = 0; k < 2; ++k) {
    const Mat<Rational> block = d.block(k * 3, 0, 3, 3);
    CHECK(block == Mat<Rational>(g.row(k).transpose().asDiagonal()));
  }
}

TEST_CASE("Delta identities hold exactly on random shapes") {
  Rng rng(2024);
  for (Index m = 1; m <= 4; ++m) {
    for (Index n = 1; n <= 4; ++n) {
      const auto g = random_matrix(rng, m, n);
      const Vec<Rational> w = random_matrix(rng, n, 1).col(0);
      const auto mm = random_matrix(rng, uniform_int(rng, 1, 4), m);
      // M G = (M (x) 1_n^T) Delta(G)
      CHECK(Mat<Rational>(mm * g) == Mat<Rational>(kron(mm, ones_row<Rational>(n)) * delta(g)));
      // (I_m (x) diag(w)) vec(G^T) = Delta(G) w
      const Mat<Rational> lhs = kron(identity(m), diag(w)) * vec(Mat<Rational>(g.transpose()));
      CHECK(lhs == Mat<Rational>(delta(g) * w));
      // vec(diag(w) G^T) = Delta(G) w
      CHECK(vec(Mat<Rational>(diag(w) * g.transpose())) == Vec<Rational>(delta(g) * w));
    }
  }
}

TEST_CASE("selectors") {
  Mat<Rational> one(1, 1);
  one << 1;
  CHECK(x_selector<Rational>(1, 1) == one);
  const Vec<Rational> z = kron(basis<Rational>(2, 1), basis<Rational>(2, 0));  // f_2 (x) e_1
  CHECK(Vec<Rational>(x_selector<Rational>(2, 2) * z) == basis<Rational>(2, 0));
  CHECK(Vec<Rational>(y_selector<Rational>(2, 2) * z) == basis<Rational>(2, 1));
  CHECK(x_selector<Rational>(3, 2) == kron(ones_row<Rational>(2), identity(3)));
  CHECK(y_selector<Rational>(3, 2) == kron(identity(2), ones_row<Rational>(3)));
}

TEST_CASE("stochastic validation") {
  Mat<Rational> bad(2, 2);
  bad << q(1, 2), 1, q(1, 3), 0;
  CHECK_FALSE(is_column_stochastic(bad));
  try {
    StochMatrix<Rational> s(bad, "A");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "A");
    CHECK(e.index() == "col 1");
  }
  Mat<Rational> neg(2, 1);
  neg << q(3, 2), q(-1, 2);
  try {
    ProbVector<Rational> p(neg.col(0), "p0");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "p0");
    CHECK(e.index() == "2,1");
  }
  Mat<double> near(2, 1);
  near << 0.5, 0.5 + 1e-13;
  CHECK(is_column_stochastic(near));
  near << 0.5, 0.5 + 1e-9;
  CHECK_FALSE(is_column_stochastic(near));
}

TEST_CASE("float and exact evaluations agree on dyadic inputs") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_dyadic_stochastic(rng, 3, 2);
    const auto a = random_dyadic_stochastic(rng, 2, 2);
    const Mat<Rational> exact = delta(g) * a * x_selector<Rational>(2, 3);
    const Mat<double> flt = delta(cast_matrix<double>(g)) * cast_matrix<double>(a) * x_selector<double>(2, 3);
    CHECK((cast_matrix<double>(exact) - flt).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
