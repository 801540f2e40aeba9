#include "finsler/checks.hpp"

#include <cmath>
#include <random>

#include "finsler/dynamics.hpp"
#include "finsler/errors.hpp"
#include "finsler/jets.hpp"

namespace finsler {

namespace {

constexpr unsigned kFullFrame = kFrameAll;
constexpr unsigned kFullFrameNull = kFrameAll & ~kFrameNorm;

// A_{mu nu la} = F C_{mu nu la}
double A_of(const GeometryFrame& fr, int mu, int nu, int la) {
  return fr.F * fr.C(mu, nu, la);
}

// Lowered h-h curvature on its second slot: R_{mu nu la si} = g_{nu rho} R_mu{}^rho{}_{la si}.
double R_low(const GeometryFrame& fr, int mu, int nu, int la, int si) {
  double v = 0;
  for (int rho = 0; rho < fr.x.n; ++rho) v += fr.g(nu, rho) * fr.R(mu, rho, la, si);
  return v;
}

}  // namespace

double euler_identity_residual(const GeometryFrame& fr) {
  double gyy = inner(fr.g, fr.y, fr.y);
  return std::abs(gyy - fr.L) / std::max(1.0, std::abs(fr.L));
}

double cartan_orthogonality_residual(const GeometryFrame& fr) {
  const int n = fr.x.n;
  double worst = 0;
  for (int nu = 0; nu < n; ++nu)
    for (int la = 0; la < n; ++la) {
      double v = 0;
      for (int mu = 0; mu < n; ++mu) v += fr.C(mu, nu, la) * fr.y[mu];
      worst = std::max(worst, std::abs(v));
    }
  return worst;
}

double horizontal_metricity_residual(const FinslerSpace& space, const GeometryFrame& fr) {
  const int n = fr.x.n;
  const double h = 8e-3;
  double worst = 0;

  for (int la = 0; la < n; ++la) {
    // Horizontal lift of the coordinate direction e_la through (x, y):
    // x(t) = x + t e_la, dy^nu/dt = -N^nu_la(x(t), y(t)).
    auto lifted_metric = [&](double t) {
      Vec xs = fr.x, ys = fr.y;
      int substeps = 2;
      double dt = t / substeps;
      for (int s = 0; s < substeps; ++s) {
        auto f = [&](const Vec& xa, const Vec& ya) {
          GeometryFrame loc = frame_at(space, xa, ya, kFrameMetric | kFrameSpray);
          Vec d(n);
          for (int nu = 0; nu < n; ++nu) d[nu] = -loc.N(nu, la);
          return d;
        };
        Vec k1 = f(xs, ys);
        Vec x2 = xs;
        x2[la] += 0.5 * dt;
        Vec k2 = f(x2, ys + (0.5 * dt) * k1);
        Vec k3 = f(x2, ys + (0.5 * dt) * k2);
        Vec x4 = xs;
        x4[la] += dt;
        Vec k4 = f(x4, ys + dt * k3);
        ys = ys + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        xs[la] += dt;
      }
      return frame_at(space, xs, ys, kFrameMetric).g;
    };

    Mat gp2 = lifted_metric(2 * h), gp1 = lifted_metric(h);
    Mat gm1 = lifted_metric(-h), gm2 = lifted_metric(-2 * h);
    for (int mu = 0; mu < n; ++mu)
      for (int nu = mu; nu < n; ++nu) {
        double d = (-gp2(mu, nu) + 8.0 * gp1(mu, nu) - 8.0 * gm1(mu, nu) + gm2(mu, nu)) / (12.0 * h);
        for (int rho = 0; rho < n; ++rho)
          d -= fr.Gamma(rho, mu, la) * fr.g(rho, nu) + fr.Gamma(rho, nu, la) * fr.g(mu, rho);
        worst = std::max(worst, std::abs(d));
      }
  }
  return worst;
}

double vertical_metricity_residual(const FinslerSpace& space, const GeometryFrame& fr) {
  const int n = fr.x.n;
  const double h = 2e-4 * std::max(1.0, max_abs(fr.y));
  double worst = 0;
  for (int la = 0; la < n; ++la) {
    auto g_at = [&](double t) {
      Vec ys = fr.y;
      ys[la] += t;
      return frame_at(space, fr.x, ys, kFrameMetric).g;
    };
    Mat gp2 = g_at(2 * h), gp1 = g_at(h), gm1 = g_at(-h), gm2 = g_at(-2 * h);
    for (int mu = 0; mu < n; ++mu)
      for (int nu = mu; nu < n; ++nu) {
        double d = (-gp2(mu, nu) + 8.0 * gp1(mu, nu) - 8.0 * gm1(mu, nu) + gm2(mu, nu)) / (12.0 * h);
        // g_{mu nu ; la} = F dg/dy = 2 A_{mu nu la}; both sides carry one F.
        double resid = fr.F * d - 2.0 * A_of(fr, mu, nu, la);
        worst = std::max(worst, std::abs(resid));
      }
  }
  return worst;
}

double bianchi_first_residual(const GeometryFrame& fr) {
  const int n = fr.x.n;
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          double v = fr.R(nu, mu, la, si) + fr.R(la, mu, si, nu) + fr.R(si, mu, nu, la);
          worst = std::max(worst, std::abs(v));
        }
  return worst;
}

double antisymmetry_defect_residual(const GeometryFrame& fr) {
  const int n = fr.x.n;
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          double v = R_low(fr, mu, nu, la, si) + R_low(fr, nu, mu, la, si);
          for (int ka = 0; ka < n; ++ka) {
            double rk = 0;
            for (int rho = 0; rho < n; ++rho) rk += fr.R(rho, ka, la, si) * fr.y[rho];
            v += 2.0 * fr.C(mu, nu, ka) * rk;
          }
          worst = std::max(worst, std::abs(v));
        }
  return worst;
}

double l_vertical_derivative_residual(const FinslerSpace& space, const GeometryFrame& fr) {
  const int n = fr.x.n;
  Jet jet = jet_evaluate(space, fr.x, fr.y, 0, 1);
  Vec dL(n);
  for (int la = 0; la < n; ++la) {
    int slot[1] = {la};
    dL[la] = jet.partial({}, std::span<const int>(slot, 1));
  }
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double dFdy = dL[la] / (2.0 * fr.F);
      double dl = (mu == la ? 1.0 / fr.F : 0.0) - fr.y[mu] * dFdy / (fr.L);
      double expect = (mu == la ? 1.0 : 0.0) - fr.l[mu] * fr.l_low[la];
      worst = std::max(worst, std::abs(fr.F * dl - expect));
    }
  return worst;
}

double l_horizontal_derivative_residual(const FinslerSpace& space, const GeometryFrame& fr) {
  const int n = fr.x.n;
  Jet jet = jet_evaluate(space, fr.x, fr.y, 1, 1);
  Vec dLx(n), dLy(n);
  for (int la = 0; la < n; ++la) {
    int slot[1] = {la};
    dLx[la] = jet.partial(std::span<const int>(slot, 1), {});
    dLy[la] = jet.partial({}, std::span<const int>(slot, 1));
  }
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      // l^mu_{|la} = dl/dx^la - N^rho_la dl/dy^rho + Gamma^mu_{nu la} l^nu
      double v = -0.5 * fr.l[mu] * dLx[la] / fr.L;
      for (int rho = 0; rho < n; ++rho) {
        double dl_dy = (mu == rho ? 1.0 / fr.F : 0.0) - fr.y[mu] * dLy[rho] / (2.0 * fr.F * fr.L);
        v -= fr.N(rho, la) * dl_dy;
      }
      for (int nu = 0; nu < n; ++nu) v += fr.Gamma(mu, nu, la) * fr.l[nu];
      worst = std::max(worst, std::abs(v));
    }
  return worst;
}

double interchange_hh_residual(const GeometryFrame& fr) {
  // Interchange of horizontal derivatives applied to T = l (x) l-dual; both
  // horizontal derivatives of T vanish, so the curvature terms must cancel.
  const int n = fr.x.n;
  double worst = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la)
        for (int si = la + 1; si < n; ++si) {
          double v = 0;
          for (int ka = 0; ka < n; ++ka) {
            v += fr.l[ka] * fr.l_low[nu] * fr.R(ka, mu, la, si);
            v -= fr.l[mu] * fr.l_low[ka] * fr.R(nu, ka, la, si);
            double t_vert = (mu == ka ? 1.0 : 0.0) * fr.l_low[nu] -
                            fr.l[mu] * fr.l_low[ka] * fr.l_low[nu] +
                            fr.l[mu] * (fr.g(nu, ka) - fr.l_low[nu] * fr.l_low[ka]);
            double rk = 0;
            for (int ga = 0; ga < n; ++ga) rk += fr.R(ga, ka, la, si) * fr.l[ga];
            v -= t_vert * rk;
          }
          worst = std::max(worst, std::abs(v));
        }
  return worst;
}

double spray_connection_consistency(const FinslerSpace& space, const GeometryFrame& fr) {
  const int n = fr.x.n;
  const double h = 1e-4 * std::max(1.0, max_abs(fr.y));
  double worst = 0;
  for (int mu = 0; mu < n; ++mu) {
    auto G_at = [&](double t) {
      Vec ys = fr.y;
      ys[mu] += t;
      return frame_at(space, fr.x, ys, kFrameMetric | kFrameSpray).G;
    };
    Vec gp2 = G_at(2 * h), gp1 = G_at(h), gm1 = G_at(-h), gm2 = G_at(-2 * h);
    for (int nu = 0; nu < n; ++nu) {
      double d = (-gp2[nu] + 8.0 * gp1[nu] - 8.0 * gm1[nu] + gm2[nu]) / (12.0 * h);
      worst = std::max(worst, std::abs(0.5 * d - fr.N(nu, mu)) / std::max(1.0, std::abs(fr.N(nu, mu))));
    }
  }
  return worst;
}

double homogeneity_residual(const FinslerSpace& space, const Vec& x, const Vec& y) {
  GeometryFrame f1 = frame_at(space, x, y, kFullFrame);
  GeometryFrame f2 = frame_at(space, x, 2.0 * y, kFullFrame);
  const int n = space.n;
  double worst = 0;
  auto cmp = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  };
  for (int i = 0; i < n; ++i) {
    cmp(f1.l[i], f2.l[i]);
    cmp(f1.G[i] / (f1.F * f1.F), f2.G[i] / (f2.F * f2.F));
    for (int j = 0; j < n; ++j) {
      cmp(f1.g(i, j), f2.g(i, j));
      cmp(f1.N(i, j) / f1.F, f2.N(i, j) / f2.F);
      for (int k2 = 0; k2 < n; ++k2) {
        cmp(f1.F * f1.C(i, j, k2), f2.F * f2.C(i, j, k2));
        cmp(f1.Gamma(i, j, k2), f2.Gamma(i, j, k2));
        for (int m = 0; m < n; ++m) {
          cmp(f1.R(i, j, k2, m), f2.R(i, j, k2, m));
          cmp(f1.F * f1.P_inhom(i, j, k2, m), f2.F * f2.P_inhom(i, j, k2, m));
        }
      }
    }
  }
  return worst;
}

SuiteReport run_geometry_identity_suite(const FinslerSpace& space, uint64_t seed, int points) {
  SuiteReport rep;
  rep.space = space.name;
  std::mt19937_64 rng(seed);

  CheckResult euler{"euler_identity", 0, 1e-10, points};
  CheckResult cartan{"cartan_orthogonality", 0, 1e-10, points};
  CheckResult hmet{"horizontal_metricity", 0, 1e-7, points};
  CheckResult vmet{"vertical_metricity", 0, 1e-7, points};
  CheckResult bianchi{"bianchi_first", 0, 1e-6, points};
  CheckResult defect{"antisymmetry_defect", 0, 1e-6, points};
  CheckResult lvert{"l_vertical_derivative", 0, 1e-9, points};
  CheckResult lhor{"l_horizontal_derivative", 0, 1e-8, points};
  CheckResult inter{"interchange_hh", 0, 1e-5, points};
  CheckResult spray{"spray_connection_consistency", 0, 1e-9, points};
  CheckResult homog{"homogeneity", 0, 1e-9, points};

  for (int i = 0; i < points; ++i) {
    Vec x, y;
    space.sample_admissible(rng, x, y);
    GeometryFrame fr = frame_at(space, x, y, kFullFrame);
    euler.worst = std::max(euler.worst, euler_identity_residual(fr));
    cartan.worst = std::max(cartan.worst, cartan_orthogonality_residual(fr));
    bianchi.worst = std::max(bianchi.worst, bianchi_first_residual(fr));
    defect.worst = std::max(defect.worst, antisymmetry_defect_residual(fr));
    lvert.worst = std::max(lvert.worst, l_vertical_derivative_residual(space, fr));
    lhor.worst = std::max(lhor.worst, l_horizontal_derivative_residual(space, fr));
    inter.worst = std::max(inter.worst, interchange_hh_residual(fr));
    homog.worst = std::max(homog.worst, homogeneity_residual(space, x, y));
    // Stencil-based cross checks are costlier; subsample.
    if (i % 5 == 0) {
      hmet.worst = std::max(hmet.worst, horizontal_metricity_residual(space, fr));
      vmet.worst = std::max(vmet.worst, vertical_metricity_residual(space, fr));
      spray.worst = std::max(spray.worst, spray_connection_consistency(space, fr));
    }
  }
  rep.results = {euler, cartan, hmet, vmet, bianchi, defect, lvert, lhor, inter, spray, homog};
  return rep;
}

SuiteReport run_jet_suite(const FinslerSpace& space, uint64_t seed, int points) {
  SuiteReport rep;
  rep.space = space.name;
  std::mt19937_64 rng(seed);
  CheckResult stencil{"jet_stencil_agreement", 0, 1e-6, points};
  CheckResult ladder{"jet_homogeneity_ladder", 0, 1e-9, points};
  for (int i = 0; i < points; ++i) {
    Vec x, y;
    space.sample_admissible(rng, x, y);
    JetCheckReport jc = jet_check(space, x, y, seed + i);
    stencil.worst = std::max(stencil.worst, jc.overall);

    Jet base = jet_evaluate(space, x, y, kMaxOrderX, kMaxOrderY);
    for (double lam : {0.5, 2.0, 7.0}) {
      Jet scaled = jet_evaluate(space, x, lam * y, kMaxOrderX, kMaxOrderY);
      for (int m = 0; m < base.shape->count; ++m) {
        double expect = std::pow(lam, 2.0 - base.shape->monos[m].degy) * base.coeff[m] *
                        base.shape->dfact[m];
        double got = scaled.coeff[m] * scaled.shape->dfact[m];
        double rel = std::abs(got - expect) / std::max(1.0, std::abs(expect));
        ladder.worst = std::max(ladder.worst, rel);
      }
    }
  }
  rep.results = {stencil, ladder};
  return rep;
}

SuiteReport run_pfaffian_suite(uint64_t seed, int pairs) {
  SuiteReport rep;
  rep.space = "(antisymmetric 4x4 algebra)";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  CheckResult identity{"pfaffian_hodge_identity", 0, 1e-10, pairs};
  CheckResult pfdet{"pfaffian_squared_equals_det", 0, 1e-10, pairs};

  auto random_antisym = [&]() {
    Mat m(4);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        m(i, j) = u(rng);
        m(j, i) = -m(i, j);
      }
    return m;
  };
  auto random_metric = [&](bool lorentz) {
    Mat g(4);
    // Positive (or Lorentzian) base plus a random symmetric perturbation
    // small enough to keep it nondegenerate.
    for (int i = 0; i < 4; ++i) g(i, i) = lorentz && i > 0 ? -1.0 : 1.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        double p = 0.15 * u(rng);
        g(i, j) += p;
        if (j != i) g(j, i) += p;
      }
    return g;
  };

  for (int it = 0; it < pairs; ++it) {
    Mat omega = random_antisym();
    Mat f = random_antisym();
    Mat g = random_metric(it % 2 == 1);
    Mat ginv = inverse(g);

    // (Omega g^-1 F g^-1 Omega) = Pf_w(Omega) * (star F) + 1/2 tr_op(Omega F) * Omega
    Mat lhs = matmul(omega, matmul(ginv, matmul(f, matmul(ginv, omega))));
    Mat star = hodge_dual(f, g);
    double pfw = pfaffian4_weighted(omega, g);
    double tr_op = 0;
    Mat of = matmul(ginv, matmul(omega, matmul(ginv, f)));
    for (int i = 0; i < 4; ++i) tr_op += of(i, i);
    double scale = std::max(1.0, max_abs(lhs));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double r = lhs(i, j) - pfw * star(i, j) - 0.5 * tr_op * omega(i, j);
        identity.worst = std::max(identity.worst, std::abs(r) / scale);
      }

    double pf = pfaffian4(omega);
    double d = det(omega);
    pfdet.worst = std::max(pfdet.worst,
                           std::abs(pf * pf - d) / std::max(1.0, std::abs(d)));
  }
  rep.results = {identity, pfdet};
  return rep;
}

// --- Christoffel-only oracle -----------------------------------------------------

RiemannOracle::RiemannOracle(const FinslerSpace& s) : space(&s) {
  if (!s.riemannian_metric)
    throw InputError("RiemannOracle: space does not provide a plain metric function");
}

Mat RiemannOracle::metric(const Vec& x) const {
  Mat g;
  Ten3 dg;
  space->riemannian_metric(x, g, dg);
  return g;
}

Ten3 RiemannOracle::christoffel(const Vec& x) const {
  const int n = space->n;
  Mat g;
  Ten3 dg;
  space->riemannian_metric(x, g, dg);
  Mat ginv = inverse(g);
  Ten3 gamma(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la) {
        double v = 0;
        for (int si = 0; si < n; ++si)
          v += 0.5 * ginv(mu, si) * (dg(si, la, nu) + dg(nu, si, la) - dg(nu, la, si));
        gamma(mu, nu, la) = v;
      }
  return gamma;
}

Ten4 RiemannOracle::riemann(const Vec& x) const {
  const int n = space->n;
  Ten3 gamma = christoffel(x);
  // dGamma/dx by Richardson-extrapolated central differences of the exact
  // Christoffel symbols.
  Ten4 dgamma(n);  // (mu, nu, la, k) = d Gamma^mu_{nu la} / dx^k
  for (int k2 = 0; k2 < n; ++k2) {
    double h = 5e-3 * std::max(1.0, std::abs(x[k2]));
    auto diff = [&](double hh) {
      auto gam_at = [&](double off) {
        Vec xs = x;
        xs[k2] += off;
        return christoffel(xs);
      };
      Ten3 gp2 = gam_at(2 * hh), gp1 = gam_at(hh), gm1 = gam_at(-hh), gm2 = gam_at(-2 * hh);
      Ten3 d(n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            d(a, b, c) = (-gp2(a, b, c) + 8.0 * gp1(a, b, c) - 8.0 * gm1(a, b, c) +
                          gm2(a, b, c)) /
                         (12.0 * hh);
      return d;
    };
    Ten3 c1 = diff(h), c2 = diff(0.5 * h);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          dgamma(a, b, c, k2) = (16.0 * c2(a, b, c) - c1(a, b, c)) / 15.0;
  }

  Ten4 R(n);  // R^mu{}_{nu la si}
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          double v = dgamma(mu, si, nu, la) - dgamma(mu, la, nu, si);
          for (int ka = 0; ka < n; ++ka)
            v += gamma(mu, la, ka) * gamma(ka, si, nu) - gamma(mu, si, ka) * gamma(ka, la, nu);
          R(mu, nu, la, si) = v;
        }
  return R;
}

Mat RiemannOracle::curvature_contraction(const Vec& x, const Mat& S_upper) const {
  const int n = space->n;
  Ten4 R = riemann(x);
  Mat g = metric(x);
  Mat out(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      // R(S)_{mu nu} = -(g_{la rho} R^rho{}_{si mu nu}) S^{la si}
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          double rl = 0;
          for (int rho = 0; rho < n; ++rho) rl += g(la, rho) * R(rho, si, mu, nu);
          v -= rl * S_upper(la, si);
        }
      out(mu, nu) = v;
    }
  return out;
}

SuiteReport run_dynamics_suite(const FinslerSpace& space, uint64_t seed, int points) {
  SuiteReport rep;
  rep.space = space.name;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  auto random_antisym = [&](int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        m(i, j) = u(rng);
        m(j, i) = -m(i, j);
      }
    return m;
  };

  if (space.is_riemannian && space.riemannian_metric) {
    // Momentum/dipole transport against the Christoffel-only classical form.
    RiemannOracle oracle(space);
    CheckResult mpd{"riemannian_mpd_rates", 0, 1e-8, points};
    for (int i = 0; i < points; ++i) {
      Vec x, y;
      space.sample_admissible(rng, x, y);
      GeometryFrame fr = frame_at(space, x, y, kFullFrame);

      WorldlineState st;
      st.X = x;
      st.y = y;
      st.P = Vec(space.n);
      Vec xdot(space.n), ydot(space.n);
      for (int k2 = 0; k2 < space.n; ++k2) {
        st.P[k2] = u(rng);
        xdot[k2] = u(rng);
        ydot[k2] = u(rng);
      }
      st.S.S = random_antisym(space.n);

      FmpdRates eng = fmpd_rates(fr, st, xdot, ydot, FmpdForm::Cartan);

      Ten4 R = oracle.riemann(x);
      Vec covp(space.n);
      for (int mu = 0; mu < space.n; ++mu) {
        double v = 0;
        for (int rho = 0; rho < space.n; ++rho)
          for (int la = 0; la < space.n; ++la)
            for (int si = 0; si < space.n; ++si)
              v += R(mu, rho, la, si) * st.S.S(la, si) * xdot[rho];
        covp[mu] = -0.5 * v;
      }
      // On flat charts both sides are pure roundoff; keep the comparison
      // relative to the physical input magnitude.
      double floor = 1e-4 * (1.0 + max_abs(st.S.S) * max_abs(xdot));
      double scale = std::max({floor, max_abs(covp), max_abs(eng.covP)});
      mpd.worst = std::max(mpd.worst, max_abs(eng.covP - covp) / scale);
      Mat covs(space.n);
      for (int mu = 0; mu < space.n; ++mu)
        for (int nu = 0; nu < space.n; ++nu)
          covs(mu, nu) = st.P[mu] * xdot[nu] - st.P[nu] * xdot[mu];
      double sscale = std::max({1e-8, max_abs(covs), max_abs(eng.covS)});
      mpd.worst = std::max(mpd.worst, max_abs(eng.covS - covs) / sscale);
    }
    rep.results.push_back(mpd);
  }

  if (space.n == 3 && space.signature == Signature::PositiveDefinite) {
    // Ray-system consistency: the closed-form outputs must satisfy the two
    // implicit pre-closure equations.
    CheckResult pre1{"spinoptics_momentum_residual", 0, 1e-8, points};
    CheckResult pre2{"spinoptics_kernel_residual", 0, 1e-8, points};
    CheckResult det_adj{"spinoptics_det_adjugate", 0, 1e-10, points};
    std::uniform_real_distribution<double> su(0.02, 0.3);
    for (int i = 0; i < points; ++i) {
      Vec x, y;
      space.sample_admissible(rng, x, y);
      double s = su(rng) * (u(rng) > 0 ? 1.0 : -1.0);
      WorldlineState st = init_spinoptics3(space, x, y, 1.0);
      GeometryFrame fr = frame_at(space, st.X, st.y, kFullFrame);
      ClosureRates cr;
      try {
        cr = close_spinoptics3(fr, st, 1.0, s);
      } catch (const ClosureSingularityError&) {
        continue;
      }
      SpinTensor S = spin_axial_3d(fr, s);
      CurvatureContractions cc = curvature_contractions(fr, S, true);
      const double p = fr.F;
      const int n = 3;

      // covP - R(S) Xdot / 2 - P(S) covP / (2 p) = 0
      Vec r1 = cr.covP;
      for (int la = 0; la < n; ++la)
        for (int a = 0; a < n; ++a)
          for (int nu = 0; nu < n; ++nu) {
            r1[la] -= 0.5 * fr.g_inv(la, a) * cc.R_S(a, nu) * cr.Xdot[nu];
            r1[la] -= fr.g_inv(la, a) * cc.P_S(a, nu) * cr.covP[nu] / (2.0 * p);
          }
      double scale1 = std::max(1e-4 * p * p, max_abs(cr.covP));
      pre1.worst = std::max(pre1.worst, max_abs(r1) / scale1);

      // p (p (l l. - I) + P(S)^T/2) Xdot + (S + Qhat(S)/2) covP = 0
      double lx = dot(fr.l_low, cr.Xdot);
      Vec r2(n);
      for (int mu = 0; mu < n; ++mu) {
        double v = p * (p * (fr.l[mu] * lx - cr.Xdot[mu]));
        for (int la = 0; la < n; ++la) {
          double pst = 0;
          for (int a = 0; a < n; ++a) pst += cc.P_S(la, a) * fr.g_inv(a, mu);
          v += 0.5 * p * pst * cr.Xdot[la];
        }
        Mat sm = S.mixed(fr.g);
        for (int la = 0; la < n; ++la) {
          double q = 0;
          for (int a = 0; a < n; ++a) q += fr.g_inv(mu, a) * cc.Qhat_S(a, la);
          v += (sm(mu, la) + 0.5 * q) * cr.covP[la];
        }
        r2[mu] = v;
      }
      double scale2 = std::max(1e-4, p * p * max_abs(cr.Xdot));
      pre2.worst = std::max(pre2.worst, max_abs(r2) / scale2);

      // Sigma_tilde and the adjugate expression against generic linear algebra.
      Mat M(n);
      for (int mu = 0; mu < n; ++mu)
        for (int la = 0; la < n; ++la) {
          double v = (mu == la) ? 1.0 : 0.0;
          for (int a = 0; a < n; ++a) v -= fr.g_inv(mu, a) * cc.P_S(a, la) / (2.0 * p);
          M(mu, la) = v;
        }
      double generic = p * p * det(M);
      det_adj.worst = std::max(det_adj.worst,
                               std::abs(generic - cr.diag.sigma_tilde) / std::max(1.0, p * p));
      Mat adj_generic = adjugate(M);
      double tr_p = 0;
      for (int mu = 0; mu < n; ++mu)
        for (int a = 0; a < n; ++a) tr_p += fr.g_inv(mu, a) * cc.P_S(a, mu);
      double quart = 0;
      for (int mu = 0; mu < n; ++mu)
        for (int nu = 0; nu < n; ++nu)
          for (int la = 0; la < n; ++la)
            for (int rho = 0; rho < n; ++rho)
              quart += cc.P_S(mu, nu) * cc.P_S(la, rho) * S.S(mu, la) * S.S(nu, rho);
      for (int mu = 0; mu < n; ++mu)
        for (int nu = 0; nu < n; ++nu) {
          double pup = 0;
          for (int a = 0; a < n; ++a) pup += fr.g_inv(mu, a) * cc.P_S(a, nu);
          double formula = (mu == nu ? 1.0 - tr_p / (2.0 * p) : 0.0) + pup / (2.0 * p) +
                           quart / (8.0 * p * p * s * s) * fr.l[mu] * fr.l_low[nu];
          det_adj.worst = std::max(det_adj.worst, std::abs(formula - adj_generic(mu, nu)));
        }
    }
    rep.results.push_back(pre1);
    rep.results.push_back(pre2);
    rep.results.push_back(det_adj);
  }

  if (space.n == 4 && space.signature == Signature::Lorentzian && space.is_riemannian &&
      space.riemannian_metric) {
    // Closure specializations against the Christoffel-only forms.
    RiemannOracle oracle(space);
    CheckResult cl_massive{"massive_closure_riemannian_limit", 0, 1e-8, points};
    CheckResult cl_exact{"massless_exact_riemannian_limit", 0, 1e-8, points};
    CheckResult cl_obs{"massless_observer_riemannian_limit", 0, 1e-8, points};
    ObserverField obs;
    obs.eval = [](const Vec&, Vec& t, Mat& dt) {
      t = Vec(4);
      dt = Mat(4);
      t[0] = 1.0;
    };
    auto rel = [](const Vec& a, const Vec& b) {
      return max_abs(a - b) / std::max({1e-30, max_abs(a), max_abs(b)});
    };
    auto rel_m = [](const Mat& a, const Mat& b) {
      return max_abs(a - b) / std::max({1e-30, max_abs(a), max_abs(b)});
    };
    int done_massive = 0, done_exact = 0, done_obs = 0;
    for (int i = 0; i < 4 * points && (done_massive < points || done_obs < points); ++i) {
      Vec x, dir;
      space.sample_admissible(rng, x, dir);
      Mat g = oracle.metric(x);
      Ten3 gamma = oracle.christoffel(x);

      if (done_massive < points) {
        Vec j{u(rng), u(rng), u(rng)};
        try {
          WorldlineState st = init_massive4(space, x, dir, 1.0, 0.05, 1, j);
          GeometryFrame fr = frame_at(space, st.X, st.y, kFullFrame);
          ClosureRates r = close_massive4(fr, st, 1.0, 0.05);
          Mat RS = oracle.curvature_contraction(x, st.S.S);
          double m2 = inner(g, st.P, st.P);
          Vec rp = matvec(RS, st.P);
          Vec srp = matvec(st.S.S, rp);
          Vec xdot = st.P + (1.0 / (2.0 * m2)) * srp;
          Vec covp = 0.5 * matvec(inverse(g), rp);
          Mat covs(4);
          for (int mu = 0; mu < 4; ++mu)
            for (int la = 0; la < 4; ++la)
              covs(mu, la) = (st.P[mu] * srp[la] - st.P[la] * srp[mu]) / (2.0 * m2);
          cl_massive.worst = std::max({cl_massive.worst, rel(r.Xdot, xdot), rel(r.covP, covp),
                                       rel_m(r.covS, covs)});
          ++done_massive;
        } catch (const Error&) {
        }
      }

      if (done_obs < points) {
        Vec k{u(rng), u(rng), u(rng)};
        try {
          WorldlineState st = init_massless4(space, x, k, 2e-3, 1, obs);
          GeometryFrame fr = frame_at(space, st.X, st.y, kFullFrameNull);
          Vec t;
          Mat dt;
          obs.eval(x, t, dt);
          double pt = inner(g, st.P, t);
          ClosureRates r = close_massless4_observer(fr, st, obs, 2e-3);
          Mat RS = oracle.curvature_contraction(x, st.S.S);
          Mat D(4);
          for (int rho = 0; rho < 4; ++rho)
            for (int la = 0; la < 4; ++la) {
              double v = dt(rho, la);
              for (int nu = 0; nu < 4; ++nu) v += gamma(rho, nu, la) * t[nu];
              D(rho, la) = v;
            }
          Mat A = Mat::identity(4);
          Mat SD = matmul(matmul(st.S.S, g), D);
          for (int a2 = 0; a2 < 4; ++a2)
            for (int b2 = 0; b2 < 4; ++b2) A(a2, b2) -= SD(a2, b2) / pt;
          Vec xdot = Lu(A).solve(st.P);
          Vec covp = 0.5 * matvec(inverse(g), matvec(RS, xdot));
          cl_obs.worst = std::max({cl_obs.worst, rel(r.Xdot, xdot), rel(r.covP, covp)});
          ++done_obs;

          if (done_exact < points) {
            try {
              ClosureRates re = close_massless4_exact(fr, st, 2e-3);
              double rss = 0;
              for (int a2 = 0; a2 < 4; ++a2)
                for (int b2 = 0; b2 < 4; ++b2) rss += RS(a2, b2) * st.S.S(a2, b2);
              Vec srp = matvec(st.S.S, matvec(RS, st.P));
              Vec xde = st.P + (2.0 / rss) * srp;
              Vec cpe = (2e-3 * pfaffian4_weighted(RS, g) / rss) * st.P;
              double cscale = 2e-3 * frobenius(RS) * frobenius(RS) / std::abs(rss) *
                              max_abs(st.P);
              cl_exact.worst = std::max(
                  {cl_exact.worst, rel(re.Xdot, xde),
                   max_abs(re.covP - cpe) / std::max(cscale, max_abs(re.covP))});
              ++done_exact;
            } catch (const ClosureSingularityError&) {
            }
          }
        } catch (const Error&) {
        }
      }
    }
    cl_massive.points = done_massive;
    cl_exact.points = done_exact;
    cl_obs.points = done_obs;
    rep.results.push_back(cl_massive);
    if (done_exact > 0) rep.results.push_back(cl_exact);
    rep.results.push_back(cl_obs);
  }

  if (space.n == 4 && space.signature == Signature::Lorentzian && !space.is_flat_spray &&
      space.massless_cone_regular) {
    // Orthogonality of the massless observer-free velocity, Xdot . P = 0, and
    // the agreement of the Pfaffian form of the momentum rate with the
    // curvature form evaluated at the closure velocity.
    CheckResult orth{"massless_exact_orthogonality", 0, 1e-9, points};
    CheckResult prate{"massless_exact_momentum_rate", 0, 1e-9, points};
    ObserverField obs;
    obs.eval = [](const Vec&, Vec& t, Mat& dt) {
      t = Vec(4);
      dt = Mat(4);
      t[0] = 1.0;
    };
    std::uniform_real_distribution<double> su(1e-4, 1e-2);
    int done = 0;
    for (int i = 0; i < 4 * points && done < points; ++i) {
      Vec x, yy;
      space.sample_admissible(rng, x, yy);
      Vec k(3);
      for (int j = 0; j < 3; ++j) k[j] = u(rng);
      if (max_abs(k) == 0) continue;
      try {
        WorldlineState st = init_massless4(space, x, k, su(rng), u(rng) > 0 ? 1 : -1, obs);
        GeometryFrame fr = frame_at(space, st.X, st.y, kFullFrameNull);
        ClosureRates cr = close_massless4_exact(fr, st, su(rng));
        double xp = inner(fr.g, cr.Xdot, st.P);
        double scale = std::max(1.0, max_abs(cr.Xdot) * max_abs(st.P));
        orth.worst = std::max(orth.worst, std::abs(xp) / scale);

        CurvatureContractions cc = curvature_contractions(fr, st.S, false);
        Vec rhs(4), half_rp(4);
        for (int la = 0; la < 4; ++la)
          for (int a = 0; a < 4; ++a)
            for (int nu = 0; nu < 4; ++nu) {
              rhs[la] += 0.5 * fr.g_inv(la, a) * cc.R_S(a, nu) * cr.Xdot[nu];
              half_rp[la] += 0.5 * fr.g_inv(la, a) * cc.R_S(a, nu) * st.P[nu];
            }
        // The curvature route cancels almost completely when the momentum
        // rate is physically suppressed; floor the comparison at a fraction
        // of the uncancelled term.
        double pscale = std::max({max_abs(cr.covP), max_abs(rhs), 1e-5 * max_abs(half_rp)});
        prate.worst = std::max(prate.worst, max_abs(cr.covP - rhs) / std::max(pscale, 1e-20));
        ++done;
      } catch (const Error&) {
        continue;
      }
    }
    orth.points = done;
    prate.points = done;
    rep.results.push_back(orth);
    rep.results.push_back(prate);
  }

  return rep;
}

std::vector<SuiteReport> run_all_suites(const FinslerSpace& space, uint64_t seed, int points) {
  std::vector<SuiteReport> out;
  out.push_back(run_jet_suite(space, seed, std::max(1, points / 4)));
  out.push_back(run_geometry_identity_suite(space, seed + 1, points));
  if (space.n == 4) out.push_back(run_pfaffian_suite(seed + 2, 200));
  SuiteReport dyn = run_dynamics_suite(space, seed + 3, std::max(1, points / 2));
  if (!dyn.results.empty()) out.push_back(dyn);
  return out;
}

}  // namespace finsler
