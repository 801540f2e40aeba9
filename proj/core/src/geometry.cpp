#include "finsler/geometry.hpp"

#include <cmath>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

constexpr double kCondLimit = 1e12;

// Taylor coefficients of the derived function d^{(ax0, by0)} L read out of a
// master jet: coeff'(a, b) = coeff(a + ax0, b + by0) * (a+ax0)!(b+by0)! / (a! b!).
TaylorXY read_subseries(const Jet& jet, const std::array<uint8_t, kMaxDim>& ax0,
                        const std::array<uint8_t, kMaxDim>& by0, const TaylorShape* tgt) {
  TaylorXY out(tgt);
  for (int m = 0; m < tgt->count; ++m) {
    const auto& mono = tgt->monos[m];
    std::array<uint8_t, kMaxDim> ax{}, by{};
    for (int i = 0; i < kMaxDim; ++i) {
      ax[i] = static_cast<uint8_t>(mono.ex[i] + ax0[i]);
      by[i] = static_cast<uint8_t>(mono.ey[i] + by0[i]);
    }
    int src = jet.shape->index_of(ax, by);
    if (src < 0) throw InputError("frame assembly requires jet orders that were not populated");
    out.set_coeff(m, jet.coeff[src] * jet.shape->dfact[src] / tgt->dfact[m]);
  }
  return out;
}

std::array<uint8_t, kMaxDim> exps(std::initializer_list<int> axes) {
  std::array<uint8_t, kMaxDim> e{};
  for (int a : axes) e[a]++;
  return e;
}

// n x n matrix of series entries.
struct SeriesMat {
  int n = 0;
  std::vector<TaylorXY> e;
  SeriesMat() = default;
  SeriesMat(int dim, const TaylorShape* s) : n(dim), e(static_cast<size_t>(dim) * dim, TaylorXY(s)) {}
  TaylorXY& operator()(int i, int j) { return e[static_cast<size_t>(i) * n + j]; }
  const TaylorXY& operator()(int i, int j) const { return e[static_cast<size_t>(i) * n + j]; }
};

// Inverse of a series matrix by the nilpotent Neumann expansion around the
// numeric inverse of the value part.
SeriesMat invert_series_mat(const SeriesMat& gs, const TaylorShape* shape) {
  const int n = gs.n;
  Mat g0(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g0(i, j) = gs(i, j).value();
  Lu lu(g0);
  if (lu.singular) throw GeometryDegeneracyError("singular metric in series inversion");
  Mat g0inv = lu.inverse();

  // D = g0inv * Delta (nilpotent); inverse = (sum_k (-D)^k) * g0inv.
  SeriesMat D(n, shape);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      TaylorXY acc(shape);
      for (int k = 0; k < n; ++k) {
        TaylorXY delta = gs(k, j);
        delta.set_coeff(0, 0.0);
        acc += g0inv(i, k) * delta;
      }
      D(i, j) = acc;
    }

  SeriesMat series_sum(n, shape);  // sum_k (-D)^k, starts at identity
  SeriesMat power(n, shape);       // (-D)^k
  for (int i = 0; i < n; ++i) {
    series_sum(i, i) += 1.0;
    power(i, i) += 1.0;
  }
  for (int k = 0; k < shape->max_total; ++k) {
    SeriesMat next(n, shape);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        TaylorXY acc(shape);
        for (int m = 0; m < n; ++m) acc += power(i, m) * (-D(m, j));
        next(i, j) = acc;
      }
    power = next;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) series_sum(i, j) += power(i, j);
  }

  SeriesMat inv(n, shape);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      TaylorXY acc(shape);
      for (int m = 0; m < n; ++m) acc += series_sum(i, m) * g0inv(m, j);
      inv(i, j) = acc;
    }
  return inv;
}

// Spray coefficients as series over `shape`:
// G^nu = 1/2 g^{nu la} (d2L/dy^la dx^si * y^si - dL/dx^la).
std::vector<TaylorXY> spray_series(const Jet& jet, const TaylorShape* shape) {
  const int n = jet.x.n;
  SeriesMat g(n, shape);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      g(i, j) = 0.5 * read_subseries(jet, exps({}), exps({i, j}), shape);
      if (j != i) g(j, i) = g(i, j);
    }
  SeriesMat ginv = invert_series_mat(g, shape);

  std::vector<TaylorXY> yvar;
  yvar.reserve(n);
  for (int i = 0; i < n; ++i) yvar.push_back(TaylorXY::y_variable(shape, i, jet.y[i]));

  std::vector<TaylorXY> rhs(n, TaylorXY(shape));
  for (int la = 0; la < n; ++la) {
    TaylorXY acc(shape);
    for (int si = 0; si < n; ++si)
      acc += read_subseries(jet, exps({si}), exps({la}), shape) * yvar[si];
    acc -= read_subseries(jet, exps({la}), exps({}), shape);
    rhs[la] = acc;
  }

  std::vector<TaylorXY> G(n, TaylorXY(shape));
  for (int nu = 0; nu < n; ++nu) {
    TaylorXY acc(shape);
    for (int la = 0; la < n; ++la) acc += ginv(nu, la) * rhs[la];
    G[nu] = 0.5 * acc;
  }
  return G;
}

// Formal y-derivative of a series, re-expressed over a (smaller) target shape.
TaylorXY series_dy(const TaylorXY& src, int mu, const TaylorShape* tgt) {
  TaylorXY out(tgt);
  const TaylorShape* ss = src.shape();
  for (int m = 0; m < tgt->count; ++m) {
    const auto& mono = tgt->monos[m];
    std::array<uint8_t, kMaxDim> by = mono.ey;
    by[mu]++;
    int idx = ss->index_of(mono.ex, by);
    if (idx < 0) throw InputError("series_dy: source shape too small");
    out.set_coeff(m, src.coeff(idx) * (mono.ey[mu] + 1));
  }
  return out;
}

}  // namespace

GeometryFrame frame_at(const FinslerSpace& space, const Vec& x, const Vec& y, unsigned needs) {
  const int n = space.n;

  // Dependency closure.
  if (needs & (kFrameCurvR | kFrameCurvP | kFrameCartanDer))
    needs |= kFrameConnection | kFrameCartan;
  if (needs & kFrameConnection) needs |= kFrameSpray;
  if (needs & kFrameSpray) needs |= kFrameMetric;
  if (needs & (kFrameCartan | kFrameNorm)) needs |= kFrameMetric;

  int order_x = 0, order_y = 2;
  if (needs & (kFrameCurvR | kFrameCurvP | kFrameCartanDer)) {
    order_x = 2;
    order_y = 4;
  } else if (needs & (kFrameSpray | kFrameConnection)) {
    order_x = 1;
    order_y = 3;
  } else if (needs & kFrameCartan) {
    order_y = 3;
  }

  Jet jet = jet_evaluate(space, x, y, order_x, order_y);

  GeometryFrame fr;
  fr.space = &space;
  fr.x = x;
  fr.y = y;
  fr.L = jet.value();

  // Metric block.
  fr.g = Mat(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      int slots[2] = {i, j};
      double v = 0.5 * jet.partial({}, std::span<const int>(slots, 2));
      fr.g(i, j) = v;
      fr.g(j, i) = v;
    }
  Lu lu(fr.g);
  if (lu.singular || cond1(fr.g) > kCondLimit)
    throw GeometryDegeneracyError("fundamental metric numerically degenerate (condition number above 1e12)");
  fr.g_inv = lu.inverse();
  fr.det_g = lu.det();
  fr.sqrt_abs_det_g = std::sqrt(std::abs(fr.det_g));
  fr.valid |= kFrameMetric;

  if (needs & kFrameNorm) {
    if (!(fr.L > 0.0))
      throw NullDirectionError("normalized field requested at L <= 0 (field: F)");
    fr.F = std::sqrt(fr.L);
    fr.l = (1.0 / fr.F) * y;
    fr.l_low = fr.lower(fr.l);
    fr.has_norm = true;
    fr.valid |= kFrameNorm;
  } else if (fr.L > 0.0) {
    fr.F = std::sqrt(fr.L);
    fr.l = (1.0 / fr.F) * y;
    fr.l_low = fr.lower(fr.l);
    fr.has_norm = true;
  }

  if (needs & kFrameCartan) {
    fr.C = Ten3(n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k) {
          int slots[3] = {i, j, k};
          double v = 0.25 * jet.partial({}, std::span<const int>(slots, 3));
          fr.C(i, j, k) = fr.C(i, k, j) = fr.C(j, i, k) = v;
          fr.C(j, k, i) = fr.C(k, i, j) = fr.C(k, j, i) = v;
        }
    fr.valid |= kFrameCartan;
  }

  const bool want_curv = needs & (kFrameCurvR | kFrameCurvP | kFrameCartanDer);
  const TaylorShape* s11 = TaylorShape::get(n, 1, 1, 2);
  const TaylorShape* s12 = TaylorShape::get(n, 1, 2, 3);
  const TaylorShape* s01 = TaylorShape::get(n, 0, 1, 1);

  if (needs & kFrameSpray) {
    // Spray pointwise and the nonlinear connection from the y-expansion of G.
    const TaylorShape* gshape = want_curv ? s12 : s01;
    std::vector<TaylorXY> G = spray_series(jet, gshape);
    fr.G = Vec(n);
    fr.N = Mat(n);
    for (int nu = 0; nu < n; ++nu) {
      fr.G[nu] = G[nu].value();
      for (int mu = 0; mu < n; ++mu)
        fr.N(nu, mu) = 0.5 * G[nu].coeff(gshape->y_seed_index(mu));
    }
    fr.valid |= kFrameSpray;

    if (needs & kFrameConnection) {
      // Chern coefficients; as a first-order series in (x, y) when curvature
      // is requested, pointwise otherwise.
      const TaylorShape* cshape = want_curv ? s11 : TaylorShape::get(n, 0, 0, 0);

      SeriesMat g_s(n, cshape);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          g_s(i, j) = 0.5 * read_subseries(jet, exps({}), exps({i, j}), cshape);
          if (j != i) g_s(j, i) = g_s(i, j);
        }
      SeriesMat ginv_s = invert_series_mat(g_s, cshape);

      // N as a series over cshape (y-derivative of the spray series).
      SeriesMat N_s(n, cshape);
      if (want_curv) {
        for (int nu = 0; nu < n; ++nu)
          for (int mu = 0; mu < n; ++mu) N_s(nu, mu) = 0.5 * series_dy(G[nu], mu, cshape);
      } else {
        for (int nu = 0; nu < n; ++nu)
          for (int mu = 0; mu < n; ++mu) N_s(nu, mu) = TaylorXY(cshape, fr.N(nu, mu));
      }

      // delta g_{ab} / delta x^nu = dg/dx^nu - 2 N^rho_nu C_{ab rho}.
      std::vector<SeriesMat> dg(n);  // dg[nu](a, b)
      for (int nu = 0; nu < n; ++nu) {
        dg[nu] = SeriesMat(n, cshape);
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b) {
            TaylorXY acc = 0.5 * read_subseries(jet, exps({nu}), exps({a, b}), cshape);
            for (int rho = 0; rho < n; ++rho) {
              TaylorXY c_abr = 0.25 * read_subseries(jet, exps({}), exps({a, b, rho}), cshape);
              acc -= 2.0 * (N_s(rho, nu) * c_abr);
            }
            dg[nu](a, b) = acc;
            if (b != a) dg[nu](b, a) = acc;
          }
      }

      std::vector<TaylorXY> Gamma_s(static_cast<size_t>(n) * n * n, TaylorXY(cshape));
      auto gam = [&](int mu, int nu, int la) -> TaylorXY& {
        return Gamma_s[(static_cast<size_t>(mu) * n + nu) * n + la];
      };
      fr.Gamma = Ten3(n);
      for (int nu = 0; nu < n; ++nu)
        for (int la = nu; la < n; ++la) {
          std::vector<TaylorXY> comb(n, TaylorXY(cshape));
          for (int si = 0; si < n; ++si)
            comb[si] = dg[nu](si, la) + dg[la](nu, si) - dg[si](nu, la);
          for (int mu = 0; mu < n; ++mu) {
            TaylorXY acc(cshape);
            for (int si = 0; si < n; ++si) acc += ginv_s(mu, si) * comb[si];
            acc = 0.5 * acc;
            gam(mu, nu, la) = acc;
            if (la != nu) gam(mu, la, nu) = acc;
            fr.Gamma(mu, nu, la) = acc.value();
            fr.Gamma(mu, la, nu) = acc.value();
          }
        }
      fr.valid |= kFrameConnection;

      if (want_curv) {
        // First derivatives of Gamma from the series coefficients.
        Ten4 dGdx(n), dGdy(n);
        for (int mu = 0; mu < n; ++mu)
          for (int nu = 0; nu < n; ++nu)
            for (int la = 0; la < n; ++la) {
              const TaylorXY& s = gam(mu, nu, la);
              for (int k = 0; k < n; ++k) {
                dGdx(mu, nu, la, k) = s.coeff(cshape->x_seed_index(k));
                dGdy(mu, nu, la, k) = s.coeff(cshape->y_seed_index(k));
              }
            }
        auto delta_gamma = [&](int mu, int nu, int la, int k) {
          double v = dGdx(mu, nu, la, k);
          for (int rho = 0; rho < n; ++rho) v -= fr.N(rho, k) * dGdy(mu, nu, la, rho);
          return v;
        };

        if (needs & kFrameCurvR) {
          fr.R = Ten4(n);
          for (int nu = 0; nu < n; ++nu)
            for (int mu = 0; mu < n; ++mu)
              for (int la = 0; la < n; ++la)
                for (int si = la + 1; si < n; ++si) {
                  double v = delta_gamma(mu, nu, si, la) - delta_gamma(mu, nu, la, si);
                  for (int ka = 0; ka < n; ++ka)
                    v += fr.Gamma(mu, ka, la) * fr.Gamma(ka, si, nu) -
                         fr.Gamma(mu, ka, si) * fr.Gamma(ka, la, nu);
                  fr.R(nu, mu, la, si) = v;
                  fr.R(nu, mu, si, la) = -v;
                }
          fr.valid |= kFrameCurvR;
        }

        if (needs & kFrameCurvP) {
          fr.P_inhom = Ten4(n);
          for (int nu = 0; nu < n; ++nu)
            for (int mu = 0; mu < n; ++mu)
              for (int la = 0; la < n; ++la)
                for (int si = 0; si < n; ++si)
                  fr.P_inhom(nu, mu, la, si) = -dGdy(mu, nu, la, si);
          fr.valid |= kFrameCurvP;
        }

        if (needs & kFrameCartanDer) {
          // C_{mu nu la | si} = delta C / delta x^si - three Gamma corrections.
          fr.C_hder = Ten4(n);
          for (int mu = 0; mu < n; ++mu)
            for (int nu = mu; nu < n; ++nu)
              for (int la = nu; la < n; ++la) {
                TaylorXY c_s = 0.25 * read_subseries(jet, exps({}), exps({mu, nu, la}), s11);
                for (int si = 0; si < n; ++si) {
                  double v = c_s.coeff(s11->x_seed_index(si));
                  for (int rho = 0; rho < n; ++rho)
                    v -= fr.N(rho, si) * c_s.coeff(s11->y_seed_index(rho));
                  for (int rho = 0; rho < n; ++rho)
                    v -= fr.Gamma(rho, mu, si) * fr.C(rho, nu, la) +
                         fr.Gamma(rho, nu, si) * fr.C(mu, rho, la) +
                         fr.Gamma(rho, la, si) * fr.C(mu, nu, rho);
                  // Total symmetry in the first three slots.
                  fr.C_hder(mu, nu, la, si) = v;
                  fr.C_hder(mu, la, nu, si) = v;
                  fr.C_hder(nu, mu, la, si) = v;
                  fr.C_hder(nu, la, mu, si) = v;
                  fr.C_hder(la, mu, nu, si) = v;
                  fr.C_hder(la, nu, mu, si) = v;
                }
              }
          fr.valid |= kFrameCartanDer;
        }
      }
    }
  }

  return fr;
}

SpinTensor SpinTensor::from_matrix(const Mat& m) {
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j)
      if (m(i, j) != -m(j, i))
        throw InputError("SpinTensor: matrix is not exactly antisymmetric");
  SpinTensor t;
  t.S = m;
  return t;
}

CurvatureContractions curvature_contractions(const GeometryFrame& frame, const SpinTensor& S,
                                             bool homogeneous) {
  const int n = frame.x.n;
  if (S.dim() != n) throw InputError("curvature_contractions: dipole tensor dimension mismatch");
  if (!frame.has(kFrameCurvR | kFrameCartanDer | kFrameCartan))
    throw InputError("curvature_contractions: frame lacks curvature fields");
  if (homogeneous && !frame.has_norm)
    throw NullDirectionError("curvature_contractions: homogeneous contraction requested at L <= 0");

  CurvatureContractions out;
  out.homogeneous = homogeneous;
  Mat sm = S.mixed(frame.g);  // S^la{}_rho

  // R(S)_{mu nu} = R_{la si mu nu} S^{la si} = S^la{}_rho R_la{}^rho{}_{mu nu}
  out.R_S = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = mu + 1; nu < n; ++nu) {
      double v = 0;
      for (int la = 0; la < n; ++la)
        for (int rho = 0; rho < n; ++rho) v += sm(la, rho) * frame.R(la, rho, mu, nu);
      out.R_S(mu, nu) = v;
      out.R_S(nu, mu) = -v;
    }

  // W(ka, si, nu) = C^ka{}_{si nu | rho} y^rho
  Ten3 W(n);
  for (int ka = 0; ka < n; ++ka)
    for (int si = 0; si < n; ++si)
      for (int nu = 0; nu < n; ++nu) {
        double v = 0;
        for (int al = 0; al < n; ++al)
          for (int rho = 0; rho < n; ++rho)
            v += frame.g_inv(ka, al) * frame.C_hder(al, si, nu, rho) * frame.y[rho];
        W(ka, si, nu) = v;
      }

  // P_I(S)_{mu nu} = 2 (C_{mu nu la | si} - C_{la mu ka} C^ka{}_{si nu | rho} y^rho) S^{la si}
  out.P_S = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          if (S.S(la, si) == 0.0) continue;
          double term = frame.C_hder(mu, nu, la, si);
          for (int ka = 0; ka < n; ++ka) term -= frame.C(la, mu, ka) * W(ka, si, nu);
          v += 2.0 * term * S.S(la, si);
        }
      out.P_S(mu, nu) = v;
    }

  // Qhat_I(S)_{mu nu} = -2 C_{la ka mu} C^ka{}_{si nu} S^{la si}
  Ten3 c_up(n);  // C^ka{}_{si nu}
  for (int ka = 0; ka < n; ++ka)
    for (int si = 0; si < n; ++si)
      for (int nu = 0; nu < n; ++nu) {
        double v = 0;
        for (int al = 0; al < n; ++al) v += frame.g_inv(ka, al) * frame.C(al, si, nu);
        c_up(ka, si, nu) = v;
      }
  out.Qhat_S = Mat(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      for (int la = 0; la < n; ++la)
        for (int si = 0; si < n; ++si) {
          if (S.S(la, si) == 0.0) continue;
          double term = 0;
          for (int ka = 0; ka < n; ++ka) term += frame.C(la, ka, mu) * c_up(ka, si, nu);
          v += -2.0 * term * S.S(la, si);
        }
      out.Qhat_S(mu, nu) = v;
    }

  if (homogeneous) {
    out.P_S = frame.F * out.P_S;
    out.Qhat_S = (frame.F * frame.F) * out.Qhat_S;
  }
  return out;
}

CartanConnection cartan_connection_at(const GeometryFrame& frame) {
  if (!frame.has(kFrameConnection | kFrameCartan))
    throw InputError("cartan_connection_at: frame lacks connection or Cartan tensor");
  if (!frame.has_norm)
    throw NullDirectionError("cartan_connection_at: Cartan connection split requested at L <= 0");
  const int n = frame.x.n;
  CartanConnection cc;
  cc.horizontal = frame.Gamma;
  cc.vertical = Ten3(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la) {
        double v = 0;
        for (int a = 0; a < n; ++a) v += frame.g_inv(mu, a) * frame.C(a, nu, la);
        cc.vertical(mu, nu, la) = v;
      }
  return cc;
}

namespace {

// Vertical coefficient of the Cartan connection with a raised first index.
double vertical_coeff(const GeometryFrame& fr, int mu, int nu, int la) {
  double v = 0;
  for (int a = 0; a < fr.x.n; ++a) v += fr.g_inv(mu, a) * fr.C(a, nu, la);
  return v;
}

}  // namespace

Vec covariant_rate_along(const GeometryFrame& frame, const Vec& tensor, const Vec& raw_rate,
                         const Vec& Xdot, const Vec& Ydot, Connection conn) {
  if (!frame.has(kFrameConnection)) throw InputError("covariant_rate_along: frame lacks the connection");
  const int n = frame.x.n;
  Vec out = raw_rate;
  for (int mu = 0; mu < n; ++mu) {
    double acc = 0;
    for (int nu = 0; nu < n; ++nu)
      for (int la = 0; la < n; ++la) {
        acc += frame.Gamma(mu, nu, la) * tensor[nu] * Xdot[la];
        if (conn == Connection::Cartan)
          acc += vertical_coeff(frame, mu, nu, la) * tensor[nu] * Ydot[la];
      }
    out[mu] += acc;
  }
  return out;
}

Mat covariant_rate_along(const GeometryFrame& frame, const Mat& tensor, const Mat& raw_rate,
                         const Vec& Xdot, const Vec& Ydot, Connection conn) {
  if (!frame.has(kFrameConnection)) throw InputError("covariant_rate_along: frame lacks the connection");
  const int n = frame.x.n;
  Mat out = raw_rate;
  for (int mu = 0; mu < n; ++mu)
    for (int la = 0; la < n; ++la) {
      double acc = 0;
      for (int nu = 0; nu < n; ++nu)
        for (int si = 0; si < n; ++si) {
          acc += frame.Gamma(mu, nu, si) * tensor(nu, la) * Xdot[si] +
                 frame.Gamma(la, nu, si) * tensor(mu, nu) * Xdot[si];
          if (conn == Connection::Cartan)
            acc += vertical_coeff(frame, mu, nu, si) * tensor(nu, la) * Ydot[si] +
                   vertical_coeff(frame, la, nu, si) * tensor(mu, nu) * Ydot[si];
        }
      out(mu, la) += acc;
    }
  return out;
}

Mat horizontal_derivative(const GeometryFrame& frame, const Vec& Z, const Mat& dZ) {
  const int n = frame.x.n;
  Mat out(n);
  for (int ka = 0; ka < n; ++ka)
    for (int nu = 0; nu < n; ++nu) {
      double v = dZ(ka, nu);
      for (int si = 0; si < n; ++si) v += frame.Gamma(ka, si, nu) * Z[si];
      out(ka, nu) = v;
    }
  return out;
}

double killing_residual(const GeometryFrame& frame, const KillingField& Z) {
  const int n = frame.x.n;
  Vec Zv;
  Mat dZ;
  Z.eval(frame.x, Zv, dZ);
  if (Zv.n != n || dZ.n != n) throw InputError("killing_residual: field dimension mismatch");

  Mat Zh = horizontal_derivative(frame, Zv, dZ);  // Z^ka_{|nu}
  // xi_{mu|nu} = g_{mu ka} Z^ka_{|nu}
  Mat xi(n);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0;
      for (int ka = 0; ka < n; ++ka) v += frame.g(mu, ka) * Zh(ka, nu);
      xi(mu, nu) = v;
    }

  // Lie derivative of g along the natural lift:
  // xi_{mu|nu} + xi_{nu|mu} + 2 C^la{}_{mu nu} y^si xi_{la|si}.
  double resid = 0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double v = xi(mu, nu) + xi(nu, mu);
      for (int la = 0; la < n; ++la) {
        double c_up = vertical_coeff(frame, la, mu, nu);
        double inner_term = 0;
        for (int si = 0; si < n; ++si) inner_term += frame.y[si] * xi(la, si);
        v += 2.0 * c_up * inner_term;
      }
      resid = std::max(resid, std::abs(v));
    }
  return resid;
}

double killing_residual(const FinslerSpace& space, const KillingField& Z,
                        const Vec& x, const Vec& y) {
  GeometryFrame fr = frame_at(space, x, y,
                              kFrameMetric | kFrameCartan | kFrameSpray | kFrameConnection);
  return killing_residual(fr, Z);
}

}  // namespace finsler
