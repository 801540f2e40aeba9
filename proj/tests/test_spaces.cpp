#include "doctest.h"

#include <cmath>
#include <random>

#include "finsler/errors.hpp"
#include "finsler/geometry.hpp"
#include "finsler/spaces.hpp"

using namespace finsler;

TEST_SUITE_BEGIN("spaces");

TEST_CASE("flat spaces") {
  FinslerSpace s3 = make_flat(3, Signature::PositiveDefinite);
  Vec x(3), y{0.0, 1.0, 0.0};
  GeometryFrame fr = frame_at(s3, x, y, kFrameMetric);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(fr.g(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));

  FinslerSpace s4 = make_flat(4, Signature::Lorentzian);
  Vec p{1.0, 0.0, 0.0, 0.0};
  GeometryFrame fr4 = frame_at(s4, Vec(4), p, kFrameMetric);
  CHECK(inner(fr4.g, p, p) == doctest::Approx(1.0));
  CHECK_THROWS_AS(make_flat(5, Signature::PositiveDefinite), InputError);
}

TEST_CASE("declared killing fields pass the residual test everywhere sampled") {
  for (const std::string& name : catalog_names()) {
    FinslerSpace s = make_catalog_space(name);
    std::mt19937_64 rng(2718);
    for (int i = 0; i < 20; ++i) {
      Vec x, y;
      s.sample_admissible(rng, x, y);
      for (const auto& Z : s.killing_fields) {
        INFO(name, " :: ", Z.name, " at sample ", i);
        CHECK(killing_residual(s, Z, x, y) <= 1e-8);
      }
    }
  }
}

TEST_CASE("riemannian catalog entries have no vertical structure") {
  for (const char* name : {"sphere2", "riem2_diag", "riem3_medium", "schw4_iso"}) {
    FinslerSpace s = make_catalog_space(name);
    REQUIRE(s.is_riemannian);
    std::mt19937_64 rng(12);
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
      Vec x, y;
      s.sample_admissible(rng, x, y);
      GeometryFrame fr = frame_at(s, x, y, kFrameMetric | kFrameCartan);
      for (int a = 0; a < s.n; ++a)
        for (int b = 0; b < s.n; ++b)
          for (int c = 0; c < s.n; ++c) worst = std::max(worst, std::abs(fr.C(a, b, c)));
    }
    INFO(name, " max |C| = ", worst);
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("randers reduces to the base metric when b = 0") {
  FinslerSpace r = make_catalog_space("randers2", {{"b", 0.0}});
  FinslerSpace f = make_catalog_space("flat2");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    Vec x, y;
    f.sample_admissible(rng, x, y);
    CHECK(r.L_value(x, y) == doctest::Approx(f.L_value(x, y)).epsilon(1e-14));
  }
}

TEST_CASE("randers construction rejects |b| >= 1") {
  auto a = [](auto xs, auto* e) {
    e[0] = constant_like(xs[0], 1.0);
    e[1] = constant_like(xs[0], 0.0);
    e[2] = constant_like(xs[0], 0.0);
    e[3] = constant_like(xs[0], 1.0);
  };
  auto b_bad = [](auto xs, auto* e) {
    e[0] = constant_like(xs[0], 1.1);
    e[1] = constant_like(xs[0], 0.0);
  };
  std::vector<Vec> probes = {Vec{0.0, 0.0}};
  CHECK_THROWS_AS(make_randers(2, a, b_bad, probes), InputError);
}

TEST_CASE("riemannian construction rejects degenerate metrics") {
  auto g_bad = [](auto xs, auto* e) {
    e[0] = constant_like(xs[0], 1.0);
    e[1] = constant_like(xs[0], 1.0);
    e[2] = constant_like(xs[0], 1.0);
    e[3] = constant_like(xs[0], 1.0);
  };
  std::vector<Vec> probes = {Vec{0.0, 0.0}};
  CHECK_THROWS_AS(make_riemannian(2, Signature::PositiveDefinite, g_bad, probes), InputError);
}

TEST_CASE("generic constructors feed the full frame stack") {
  // A riemannian space built through the public constructor supports frames
  // and matches the closed-form entry it mirrors.
  auto metric = [](auto xs, auto* e) {
    e[0] = 1.0 + xs[0];
    e[1] = constant_like(xs[0], 0.0);
    e[2] = constant_like(xs[0], 0.0);
    e[3] = constant_like(xs[0], 1.0);
  };
  std::vector<Vec> probes = {Vec{0.0, 0.0}, Vec{1.0, 0.0}};
  FinslerSpace s = make_riemannian(2, Signature::PositiveDefinite, metric, probes);
  s.name = "riem2_diag_generic";
  FinslerSpace ref = make_catalog_space("riem2_diag");
  Vec x{0.5, 0.2}, y{0.8, -0.3};
  GeometryFrame fa = frame_at(s, x, y, kFrameAll);
  GeometryFrame fb = frame_at(ref, x, y, kFrameAll);
  CHECK(max_abs(fa.g - fb.g) <= 1e-13);
  // Hand value: Gamma^0_{00} = 1 / (2 (1 + x^0)).
  CHECK(fa.Gamma(0, 0, 0) == doctest::Approx(0.5 / 1.5).epsilon(1e-12));
  // The stencil-backed plain-metric derivatives drive the oracle path.
  Mat g;
  Ten3 dg;
  s.riemannian_metric(x, g, dg);
  CHECK(dg(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("unknown catalog name") {
  CHECK_THROWS_AS(make_catalog_space("no_such_space"), ConfigError);
}

TEST_SUITE_END();
