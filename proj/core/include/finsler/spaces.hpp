#pragma once

// Catalog of concrete Finsler spaces with known structure, plus the generic
// constructors they are built from.  Every catalog entry carries admissibility
// sampling and its declared Killing fields.

#include <map>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/space.hpp"

namespace finsler {

FinslerSpace make_flat(int n, Signature signature);

// g must be callable as g(std::span<const T> x, T* entries) filling a row-major
// n x n symmetric matrix, for T = double and T = TaylorXY.
template <class MatFn>
FinslerSpace make_riemannian(int n, Signature signature, MatFn g,
                             const std::vector<Vec>& probe_points);

// Randers structure L = (sqrt(a_ij y^i y^j) + b_i y^i)^2 on a positive-definite
// base metric a; requires |b|_a < 1 at the probe points.
template <class MatFn, class CovFn>
FinslerSpace make_randers(int n, MatFn a, CovFn b, const std::vector<Vec>& probe_points);

// Named catalog.  Unknown names throw ConfigError.  Parameters override the
// entry defaults (each entry documents which keys it reads).
std::vector<std::string> catalog_names();
FinslerSpace make_catalog_space(const std::string& name,
                                const std::map<std::string, double>& params = {});

// ---------------------------------------------------------------------------
// Template implementations.

namespace detail {

inline void check_probe_metric(const Mat& g, const Vec& x, const char* what) {
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-12 * std::max(1.0, max_abs(g)))
        throw InputError(std::string(what) + ": metric function is not symmetric");
  if (cond1(g) > 1e12) {
    std::string msg = std::string(what) + ": metric degenerate at probe point (";
    for (int i = 0; i < x.n; ++i) msg += (i ? ", " : "") + std::to_string(x[i]);
    throw InputError(msg + ")");
  }
}

// First x-derivatives of a plain matrix function by Richardson-extrapolated
// central differences; used as the fallback when no closed form is supplied.
template <class MatValueFn>
void stencil_dgdx(MatValueFn&& value, const Vec& x, int n, Ten3& dgdx) {
  dgdx = Ten3(n);
  Mat gp(n), gm(n);
  for (int k = 0; k < n; ++k) {
    double h = 1e-3 * std::max(1.0, std::abs(x[k]));
    auto diff = [&](double hh) {
      Vec xp = x, xm = x;
      xp[k] += hh;
      xm[k] -= hh;
      value(xp, gp);
      value(xm, gm);
      return std::make_pair(gp, gm);
    };
    auto [p1, m1] = diff(h);
    auto [p2, m2] = diff(0.5 * h);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double c = (p1(i, j) - m1(i, j)) / (2.0 * h);
        double f = (p2(i, j) - m2(i, j)) / h;
        dgdx(i, j, k) = (4.0 * f - c) / 3.0;
      }
  }
}

}  // namespace detail

template <class MatFn>
FinslerSpace make_riemannian(int n, Signature signature, MatFn g,
                             const std::vector<Vec>& probe_points) {
  FinslerSpace s;
  s.n = n;
  s.signature = signature;
  s.is_riemannian = true;

  set_finsler_function(s, [n, g](auto x, auto y) {
    using T = std::remove_cvref_t<decltype(y[0])>;
    std::vector<T> ge(static_cast<size_t>(n) * n);
    g(x, ge.data());
    T acc = ge[0] * y[0] * y[0];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == 0 && j == 0) continue;
        acc += ge[i * n + j] * y[i] * y[j];
      }
    return acc;
  });

  auto metric_value = [n, g](const Vec& x, Mat& out) {
    std::array<double, kMaxDim> xs{};
    for (int i = 0; i < n; ++i) xs[i] = x[i];
    std::array<double, kMaxDim * kMaxDim> ge{};
    g(std::span<const double>(xs.data(), n), ge.data());
    out = Mat(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = ge[i * n + j];
  };
  s.riemannian_metric = [metric_value, n](const Vec& x, Mat& out, Ten3& dgdx) {
    metric_value(x, out);
    detail::stencil_dgdx(metric_value, x, n, dgdx);
  };

  for (const Vec& p : probe_points) {
    Mat gm(n);
    metric_value(p, gm);
    detail::check_probe_metric(gm, p, "make_riemannian");
  }
  return s;
}

template <class MatFn, class CovFn>
FinslerSpace make_randers(int n, MatFn a, CovFn b, const std::vector<Vec>& probe_points) {
  FinslerSpace s;
  s.n = n;
  s.signature = Signature::PositiveDefinite;

  set_finsler_function(s, [n, a, b](auto x, auto y) {
    using T = std::remove_cvref_t<decltype(y[0])>;
    std::vector<T> ae(static_cast<size_t>(n) * n), be(static_cast<size_t>(n));
    a(x, ae.data());
    b(x, be.data());
    T ayy = ae[0] * y[0] * y[0];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == 0 && j == 0) continue;
        ayy += ae[i * n + j] * y[i] * y[j];
      }
    T by = be[0] * y[0];
    for (int i = 1; i < n; ++i) by += be[i] * y[i];
    using std::sqrt;
    T root = sqrt(ayy) + by;
    return root * root;
  });

  for (const Vec& p : probe_points) {
    std::array<double, kMaxDim> xs{};
    for (int i = 0; i < n; ++i) xs[i] = p[i];
    std::array<double, kMaxDim * kMaxDim> ae{};
    std::array<double, kMaxDim> be{};
    a(std::span<const double>(xs.data(), n), ae.data());
    b(std::span<const double>(xs.data(), n), be.data());
    Mat am(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) am(i, j) = ae[i * n + j];
    detail::check_probe_metric(am, p, "make_randers");
    Mat ainv = inverse(am);
    double b2 = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b2 += ainv(i, j) * be[i] * be[j];
    if (!(b2 < 1.0)) {
      std::string msg = "make_randers: |b|_a >= 1 at probe point (";
      for (int i = 0; i < n; ++i) msg += (i ? ", " : "") + std::to_string(p[i]);
      throw InputError(msg + ")");
    }
  }
  return s;
}

}  // namespace finsler
