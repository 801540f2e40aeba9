#include "doctest.h"

#include <cmath>

#include "finsler/taylor.hpp"

using namespace finsler;

TEST_SUITE_BEGIN("taylor");

TEST_CASE("polynomial coefficients in two blocks") {
  // f(x, y) = x0^2 * y1 + 3 x1 y0 y1^2, n = 2
  const TaylorShape* s = TaylorShape::get(2, 2, 4, 5);
  TaylorXY x0 = TaylorXY::x_variable(s, 0, 1.5);
  TaylorXY x1 = TaylorXY::x_variable(s, 1, -0.5);
  TaylorXY y0 = TaylorXY::y_variable(s, 0, 2.0);
  TaylorXY y1 = TaylorXY::y_variable(s, 1, 0.75);
  TaylorXY f = x0 * x0 * y1 + 3.0 * (x1 * y0 * (y1 * y1));

  auto d = [&](std::initializer_list<int> xs, std::initializer_list<int> ys) {
    std::array<uint8_t, kMaxDim> ax{}, by{};
    for (int a : xs) ax[a]++;
    for (int b : ys) by[b]++;
    int idx = s->index_of(ax, by);
    REQUIRE(idx >= 0);
    return f.coeff(idx) * s->dfact[idx];
  };

  CHECK(d({}, {}) == doctest::Approx(1.5 * 1.5 * 0.75 + 3.0 * (-0.5) * 2.0 * 0.75 * 0.75));
  CHECK(d({0, 0}, {1}) == doctest::Approx(2.0));             // d^2/dx0^2 d/dy1 = 2
  CHECK(d({1}, {0, 1, 1}) == doctest::Approx(6.0));          // 3 * 1 * 2
  CHECK(d({0}, {0}) == doctest::Approx(0.0));
  CHECK(d({1}, {1, 1}) == doctest::Approx(3.0 * 2.0 * 2.0));  // 3 * y0 * 2
}

TEST_CASE("analytic compositions against closed forms") {
  const TaylorShape* s = TaylorShape::get(1, 2, 4, 5);
  double a = 0.8;
  TaylorXY y = TaylorXY::y_variable(s, 0, a);

  SUBCASE("sqrt") {
    TaylorXY f = sqrt(1.0 + y * y);
    // d/dy sqrt(1 + y^2) = y / sqrt(1 + y^2)
    std::array<uint8_t, kMaxDim> none{}, one{};
    one[0] = 1;
    double d1 = f.coeff(s->index_of(none, one)) * 1.0;
    CHECK(d1 == doctest::Approx(a / std::sqrt(1 + a * a)).epsilon(1e-12));
  }
  SUBCASE("exp log sin cos consistency") {
    TaylorXY g = exp(log(2.0 + sin(y) * sin(y) + cos(y)));
    TaylorXY h = 2.0 + sin(y) * sin(y) + cos(y);
    for (int i = 0; i < s->count; ++i) CHECK(g.coeff(i) == doctest::Approx(h.coeff(i)).epsilon(1e-12));
  }
  SUBCASE("reciprocal and pow") {
    TaylorXY r = 1.0 / (1.0 + y * y);
    TaylorXY p = pow(1.0 + y * y, -1.0);
    for (int i = 0; i < s->count; ++i) CHECK(r.coeff(i) == doctest::Approx(p.coeff(i)).epsilon(1e-12));
  }
}

TEST_CASE("fourth y-derivative of a quartic is exact") {
  const TaylorShape* s = TaylorShape::get(3, 0, 4, 4);
  TaylorXY y0 = TaylorXY::y_variable(s, 0, 0.3);
  TaylorXY y1 = TaylorXY::y_variable(s, 1, -1.2);
  TaylorXY f = (y0 * y0) * (y1 * y1);
  std::array<uint8_t, kMaxDim> ax{}, by{};
  by[0] = 2;
  by[1] = 2;
  int idx = s->index_of(ax, by);
  REQUIRE(idx >= 0);
  CHECK(f.coeff(idx) * s->dfact[idx] == doctest::Approx(4.0));
}

TEST_SUITE_END();
