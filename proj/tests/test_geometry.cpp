#include "doctest.h"

#include <cmath>
#include <random>

#include "finsler/checks.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/errors.hpp"
#include "finsler/geometry.hpp"
#include "finsler/spaces.hpp"

using namespace finsler;

namespace {

// Independent assembly of g, C, G from plain L values and central stencils;
// deliberately avoids the jet/Taylor path.
struct StencilGeometry {
  const FinslerSpace* space;
  double h2 = 1e-3;  // second-derivative step
  double h3 = 5e-3;  // outer step for the third derivative

  double L(const Vec& x, const Vec& y) const { return space->L_value(x, y); }

  double d2L_dyy(const Vec& x, const Vec& y, int i, int j) const {
    auto at = [&](double di, double dj) {
      Vec yy = y;
      yy[i] += di;
      yy[j] += dj;
      return L(x, yy);
    };
    const double h = h2;
    if (i == j)
      return (-at(2 * h, 0) + 16 * at(h, 0) - 30 * at(0, 0) + 16 * at(-h, 0) - at(-2 * h, 0)) /
             (12 * h * h);
    // Richardson over the 4-point cross pattern.
    auto cross = [&](double hh) {
      return (at(hh, hh) - at(hh, -hh) - at(-hh, hh) + at(-hh, -hh)) / (4 * hh * hh);
    };
    return (16.0 * cross(h) - cross(2 * h)) / 15.0;
  }

  Mat metric(const Vec& x, const Vec& y) const {
    Mat g(space->n);
    for (int i = 0; i < space->n; ++i)
      for (int j = 0; j < space->n; ++j) g(i, j) = 0.5 * d2L_dyy(x, y, i, j);
    return g;
  }

  Ten3 cartan(const Vec& x, const Vec& y) const {
    // C = 1/2 dg/dy with a 5-point outer derivative over metric stencils.
    Ten3 c(space->n);
    for (int k = 0; k < space->n; ++k) {
      auto g_at = [&](double t) {
        Vec yy = y;
        yy[k] += t;
        return metric(x, yy);
      };
      Mat gp2 = g_at(2 * h3), gp1 = g_at(h3), gm1 = g_at(-h3), gm2 = g_at(-2 * h3);
      for (int i = 0; i < space->n; ++i)
        for (int j = 0; j < space->n; ++j)
          c(i, j, k) =
              0.5 * (-gp2(i, j) + 8 * gp1(i, j) - 8 * gm1(i, j) + gm2(i, j)) / (12 * h3);
    }
    return c;
  }

  Vec spray(const Vec& x, const Vec& y) const {
    const int n = space->n;
    const double h = h2;
    Mat ginv = inverse(metric(x, y));
    Vec rhs(n);
    for (int la = 0; la < n; ++la) {
      double acc = 0;
      for (int si = 0; si < n; ++si) {
        auto mixed = [&](double dx, double dy) {
          Vec xx = x, yy = y;
          xx[si] += dx;
          yy[la] += dy;
          return L(xx, yy);
        };
        auto cross = [&](double hh) {
          return (mixed(hh, hh) - mixed(hh, -hh) - mixed(-hh, hh) + mixed(-hh, -hh)) /
                 (4 * hh * hh);
        };
        acc += (16.0 * cross(h) - cross(2 * h)) / 15.0 * y[si];
      }
      auto at_x = [&](double t) {
        Vec xx = x;
        xx[la] += t;
        return L(xx, y);
      };
      acc -= (-at_x(2 * h) + 8 * at_x(h) - 8 * at_x(-h) + at_x(-2 * h)) / (12 * h);
      rhs[la] = acc;
    }
    Vec G(n);
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      for (int la = 0; la < n; ++la) v += ginv(nu, la) * rhs[la];
      G[nu] = 0.5 * v;
    }
    return G;
  }
};

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("flat frames vanish") {
  for (const char* name : {"flat2", "flat3", "flat4"}) {
    FinslerSpace s = make_catalog_space(name);
    Vec x(s.n), y(s.n);
    y[0] = 1.0;
    if (s.n > 1) y[s.n - 1] = 0.3;
    GeometryFrame fr = frame_at(s, x, y, kFrameAll & ~kFrameNorm);
    for (int i = 0; i < s.n; ++i)
      for (int j = 0; j < s.n; ++j) {
        double expect = i == j ? (s.signature == Signature::Lorentzian && i > 0 ? -1.0 : 1.0) : 0.0;
        CHECK(fr.g(i, j) == doctest::Approx(expect).epsilon(1e-14));
      }
    CHECK(max_abs(fr.G) == doctest::Approx(0.0));
    CHECK(max_abs(fr.N) == doctest::Approx(0.0));
    double gmax = 0, rmax = 0;
    for (int a = 0; a < s.n; ++a)
      for (int b = 0; b < s.n; ++b)
        for (int c = 0; c < s.n; ++c) {
          gmax = std::max(gmax, std::abs(fr.Gamma(a, b, c)));
          for (int d = 0; d < s.n; ++d) rmax = std::max(rmax, std::abs(fr.R(a, b, c, d)));
        }
    CHECK(gmax <= 1e-14);
    CHECK(rmax <= 1e-14);
  }
}

TEST_CASE("sphere connection and curvature match closed forms") {
  FinslerSpace s = make_catalog_space("sphere2");
  double th = 1.1;
  Vec x{th, 0.4}, y{0.3, -0.8};
  GeometryFrame fr = frame_at(s, x, y, kFrameAll);

  double st = std::sin(th), ct = std::cos(th);
  CHECK(fr.Gamma(0, 1, 1) == doctest::Approx(-st * ct).epsilon(1e-10));
  CHECK(fr.Gamma(1, 0, 1) == doctest::Approx(ct / st).epsilon(1e-10));
  CHECK(fr.Gamma(1, 1, 0) == doctest::Approx(ct / st).epsilon(1e-10));
  CHECK(fr.Gamma(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));

  // Standard lowered curvature R_{theta phi theta phi} = sin^2(theta): with
  // the storage R(nu, mu, la, si) = R_nu{}^mu{}_{la si} this is
  // g_{theta theta} R(phi, theta, theta, phi).
  double lowered = fr.g(0, 0) * fr.R(1, 0, 0, 1);
  CHECK(lowered == doctest::Approx(st * st).epsilon(1e-8));
  double cmax = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) cmax = std::max(cmax, std::abs(fr.C(a, b, c)));
  CHECK(cmax <= 1e-13);
}

TEST_CASE("randers frame matches the stencil assembly oracle") {
  FinslerSpace s = make_catalog_space("randers2_var");
  StencilGeometry oracle{&s};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    Vec x, y;
    s.sample_admissible(rng, x, y);
    GeometryFrame fr = frame_at(s, x, y, kFrameMetric | kFrameCartan | kFrameSpray);

    Mat g0 = oracle.metric(x, y);
    Ten3 c0 = oracle.cartan(x, y);
    Vec G0 = oracle.spray(x, y);
    for (int i = 0; i < 2; ++i) {
      CHECK(fr.G[i] == doctest::Approx(G0[i]).epsilon(1e-6).scale(1.0));
      for (int j = 0; j < 2; ++j) {
        CHECK(fr.g(i, j) == doctest::Approx(g0(i, j)).epsilon(1e-6));
        for (int k = 0; k < 2; ++k)
          CHECK(fr.C(i, j, k) == doctest::Approx(c0(i, j, k)).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("riemannian limit of the hv machinery") {
  FinslerSpace s = make_catalog_space("sphere2");
  Vec x{1.0, 0.5}, y{0.7, 0.2};
  GeometryFrame fr = frame_at(s, x, y, kFrameAll);
  SpinTensor S;
  S.S = Mat(2);
  S.S(0, 1) = 0.37;
  S.S(1, 0) = -0.37;
  CurvatureContractions cc = curvature_contractions(fr, S, true);
  CHECK(max_abs(cc.P_S) <= 1e-10);
  CHECK(max_abs(cc.Qhat_S) <= 1e-10);
  CHECK(max_abs(cc.R_S) > 1e-4);
  // The hv curvature tensor itself vanishes, so both sides of the
  // horizontal/vertical interchange relation are zero here.
  double pmax = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) pmax = std::max(pmax, std::abs(fr.P_inhom(a, b, c, d)));
  CHECK(pmax <= 1e-11);
}

TEST_CASE("hv contraction agrees with the hv curvature tensor") {
  // The Cartan-derivative expression for P_I(S) must equal the contraction of
  // the stored hv curvature -dGamma/dy over its first index pair.
  FinslerSpace s = make_catalog_space("randers3_axis");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Vec x, y;
    s.sample_admissible(rng, x, y);
    GeometryFrame fr = frame_at(s, x, y, kFrameAll);
    SpinTensor S;
    S.S = Mat(3);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        S.S(i, j) = u(rng);
        S.S(j, i) = -S.S(i, j);
      }
    CurvatureContractions cc = curvature_contractions(fr, S, false);
    for (int mu = 0; mu < 3; ++mu)
      for (int nu = 0; nu < 3; ++nu) {
        double direct = 0;
        for (int la = 0; la < 3; ++la)
          for (int si = 0; si < 3; ++si) {
            double plow = 0;
            for (int rho = 0; rho < 3; ++rho) plow += fr.g(si, rho) * fr.P_inhom(la, rho, mu, nu);
            direct += plow * S.S(la, si);
          }
        CHECK(cc.P_S(mu, nu) == doctest::Approx(direct).epsilon(1e-8).scale(1.0));
      }
  }
}

TEST_CASE("hv contraction annihilates the direction in both slots") {
  FinslerSpace s = make_catalog_space("randers2");
  Vec x{0.1, -0.4}, y{1.0, 0.4};
  GeometryFrame fr = frame_at(s, x, y, kFrameAll);
  SpinTensor S;
  S.S = Mat(2);
  S.S(0, 1) = 1e-3;
  S.S(1, 0) = -1e-3;
  CurvatureContractions cc = curvature_contractions(fr, S, false);
  Vec left(2), right(2);
  for (int mu = 0; mu < 2; ++mu)
    for (int nu = 0; nu < 2; ++nu) {
      left[mu] += cc.P_S(nu, mu) * y[nu];
      right[mu] += cc.P_S(mu, nu) * y[nu];
    }
  CHECK(max_abs(left) <= 1e-9);
  CHECK(max_abs(right) <= 1e-9);
}

TEST_CASE("cartan connection split and metric compatibility") {
  SUBCASE("riemannian: vertical part vanishes") {
    FinslerSpace s = make_catalog_space("sphere2");
    Vec x{1.2, 0.1}, y{0.5, 0.5};
    GeometryFrame fr = frame_at(s, x, y, kFrameAll);
    CartanConnection cc = cartan_connection_at(fr);
    double vmax = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) vmax = std::max(vmax, std::abs(cc.vertical(a, b, c)));
    CHECK(vmax <= 1e-13);
  }
  SUBCASE("randers: the full covariant rate of g vanishes along random curves") {
    FinslerSpace s = make_catalog_space("randers2_var");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Vec x, y;
      s.sample_admissible(rng, x, y);
      GeometryFrame fr = frame_at(s, x, y, kFrameAll);
      CartanConnection conn = cartan_connection_at(fr);
      Vec xdot{u(rng), u(rng)}, ydot{u(rng), u(rng)};
      const double h = 2e-5;
      auto g_at = [&](double t) {
        Vec xs = x, ys = y;
        Vec dy = ydot - matvec(fr.N, xdot);  // dy/dtau = Ydot - N Xdot
        for (int i = 0; i < 2; ++i) {
          xs[i] += t * xdot[i];
          ys[i] += t * dy[i];
        }
        return frame_at(s, xs, ys, kFrameMetric).g;
      };
      Mat gp2 = g_at(2 * h), gp1 = g_at(h), gm1 = g_at(-h), gm2 = g_at(-2 * h);
      double worst = 0;
      for (int mu = 0; mu < 2; ++mu)
        for (int nu = 0; nu < 2; ++nu) {
          double d = (-gp2(mu, nu) + 8 * gp1(mu, nu) - 8 * gm1(mu, nu) + gm2(mu, nu)) / (12 * h);
          for (int rho = 0; rho < 2; ++rho)
            for (int la = 0; la < 2; ++la) {
              d -= (conn.horizontal(rho, mu, la) * xdot[la] +
                    conn.vertical(rho, mu, la) * ydot[la]) *
                   fr.g(rho, nu);
              d -= (conn.horizontal(rho, nu, la) * xdot[la] +
                    conn.vertical(rho, nu, la) * ydot[la]) *
                   fr.g(mu, rho);
            }
          worst = std::max(worst, std::abs(d));
        }
      CHECK(worst <= 1e-8);
    }
  }
  SUBCASE("flat: everything zero") {
    FinslerSpace s = make_catalog_space("flat3");
    Vec x(3), y{1.0, 0.0, 0.2};
    GeometryFrame fr = frame_at(s, x, y, kFrameAll);
    CartanConnection cc = cartan_connection_at(fr);
    double m = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c)
          m = std::max({m, std::abs(cc.horizontal(a, b, c)), std::abs(cc.vertical(a, b, c))});
    CHECK(m <= 1e-14);
  }
}

TEST_CASE("covariant rate along curves") {
  SUBCASE("flat space: covariant rate equals raw rate") {
    FinslerSpace s = make_catalog_space("flat3");
    Vec x(3), y{1.0, 0.2, 0.0};
    GeometryFrame fr = frame_at(s, x, y, kFrameAll);
    Vec t{0.3, -0.5, 0.9}, raw{1.0, 2.0, 3.0}, xd{0.1, 0.2, 0.3}, yd{0.4, 0.5, 0.6};
    Vec out = covariant_rate_along(fr, t, raw, xd, yd, Connection::Cartan);
    CHECK(max_abs(out - raw) <= 1e-14);
  }
  SUBCASE("sphere: parallel transport holonomy around a latitude quarter") {
    FinslerSpace s = make_catalog_space("sphere2");
    const double th0 = 1.0;
    const double om = std::cos(th0);
    Vec v0{0.4, -0.7};

    Vec v = v0;
    const int steps = 400;
    const double T = M_PI / 2, dt = T / steps;
    Vec xdot{0.0, 1.0};
    auto rate = [&](double tau, const Vec& vv) {
      Vec x{th0, tau};
      GeometryFrame fr = frame_at(s, x, xdot, kFrameMetric | kFrameSpray | kFrameConnection);
      Vec zero(2);
      Vec cov = covariant_rate_along(fr, vv, zero, xdot, zero, Connection::Chern);
      return -1.0 * cov;
    };
    for (int k = 0; k < steps; ++k) {
      double tau = k * dt;
      Vec k1 = rate(tau, v);
      Vec k2 = rate(tau + dt / 2, v + (dt / 2) * k1);
      Vec k3 = rate(tau + dt / 2, v + (dt / 2) * k2);
      Vec k4 = rate(tau + dt, v + dt * k3);
      v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    // Closed form: W = (V^th / sin th0, V^ph) rotates with rate cos th0.
    double w1 = v0[0] / std::sin(th0), w2 = v0[1];
    double c = std::cos(om * T), sn = std::sin(om * T);
    Vec expect{(w1 * c + w2 * sn) * std::sin(th0), -w1 * sn + w2 * c};
    CHECK(v[0] == doctest::Approx(expect[0]).epsilon(1e-8));
    CHECK(v[1] == doctest::Approx(expect[1]).epsilon(1e-8));
  }
  SUBCASE("riemannian: chern and cartan variants coincide") {
    FinslerSpace s = make_catalog_space("riem2_diag");
    Vec x{0.5, 0.0}, y{1.0, 0.5};
    GeometryFrame fr = frame_at(s, x, y, kFrameAll);
    Vec t{0.2, 0.9}, raw{-1.0, 0.5}, xd{0.3, 0.1}, yd{0.7, -0.2};
    Vec a = covariant_rate_along(fr, t, raw, xd, yd, Connection::Chern);
    Vec b = covariant_rate_along(fr, t, raw, xd, yd, Connection::Cartan);
    CHECK(max_abs(a - b) <= 1e-12);
  }
}

TEST_CASE("killing residuals") {
  SUBCASE("flat translations, rotations, boosts") {
    for (const char* name : {"flat3", "flat4"}) {
      FinslerSpace s = make_catalog_space(name);
      std::mt19937_64 rng(3);
      Vec x, y;
      s.sample_admissible(rng, x, y);
      for (const auto& Z : s.killing_fields) {
        INFO(name, " field ", Z.name);
        CHECK(killing_residual(s, Z, x, y) <= 1e-12);
      }
    }
  }
  SUBCASE("randers translation along the constant axis") {
    FinslerSpace s = make_catalog_space("randers2");
    std::mt19937_64 rng(4);
    Vec x, y;
    s.sample_admissible(rng, x, y);
    for (const auto& Z : s.killing_fields) CHECK(killing_residual(s, Z, x, y) <= 1e-9);
  }
  SUBCASE("non-killing field is flagged by a large residual") {
    FinslerSpace s = make_catalog_space("riem2_diag");
    KillingField bad;
    bad.name = "not_killing";
    bad.eval = [](const Vec&, Vec& Z, Mat& dZ) {
      Z = Vec(2);
      dZ = Mat(2);
      Z[0] = 1.0;
    };
    CHECK(killing_residual(s, bad, Vec{0.3, 0.0}, Vec{1.0, 0.2}) > 1e-3);
  }
}

TEST_CASE("geometry identity suite passes on the catalog") {
  for (const char* name :
       {"sphere2", "randers2_var", "randers3_axis", "schw4_iso", "randers4_curved"}) {
    FinslerSpace s = make_catalog_space(name);
    SuiteReport rep = run_geometry_identity_suite(s, 99, 10);
    for (const auto& r : rep.results) {
      INFO(name, " :: ", r.name, " worst ", r.worst, " tol ", r.tolerance);
      CHECK(r.pass());
    }
  }
}

TEST_CASE("degenerate metric is reported") {
  FinslerSpace s;
  s.n = 2;
  s.signature = Signature::PositiveDefinite;
  set_finsler_function(s, [](auto x, auto y) {
    return (1e-15 + x[0] * x[0]) * y[0] * y[0] + y[1] * y[1];
  });
  Vec y{1.0, 1.0};
  CHECK_THROWS_AS(frame_at(s, Vec{0.0, 0.0}, y, kFrameMetric), GeometryDegeneracyError);
  CHECK_NOTHROW(frame_at(s, Vec{1.0, 0.0}, y, kFrameMetric));
}

TEST_CASE("null direction errors name the field") {
  FinslerSpace s = make_catalog_space("flat4");
  Vec x(4), y{1.0, 1.0, 0.0, 0.0};  // null
  CHECK_THROWS_AS(frame_at(s, x, y, kFrameMetric | kFrameNorm), NullDirectionError);
  GeometryFrame fr = frame_at(s, x, y, kFrameAll & ~kFrameNorm);
  CHECK(!fr.has_norm);
  SpinTensor S = SpinTensor::zero(4);
  CHECK_THROWS_AS(curvature_contractions(fr, S, true), NullDirectionError);
  CHECK_NOTHROW(curvature_contractions(fr, S, false));
}

TEST_SUITE_END();
