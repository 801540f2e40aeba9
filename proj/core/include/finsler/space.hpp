#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "finsler/linalg.hpp"
#include "finsler/taylor.hpp"

namespace finsler {

enum class Signature {
  PositiveDefinite,
  Lorentzian,  // (+, -, -, -): timelike directions have L > 0
};

// A vector field Z(x) together with its Jacobian dZ(i, j) = dZ^i/dx^j.
struct KillingField {
  std::string name;
  std::function<void(const Vec& x, Vec& Z, Mat& dZ)> eval;
};

// A Finsler space is defined by a scalar function L(x, y), smooth for y != 0
// and positively homogeneous of degree 2 in y.  The function is provided in
// two arithmetics: plain doubles and truncated Taylor series, built from a
// single generic definition via set_finsler_function().
struct FinslerSpace {
  std::string name;
  int n = 0;
  Signature signature = Signature::PositiveDefinite;

  std::function<double(const Vec& x, const Vec& y)> L_value;
  // Extended-precision channel for the finite-difference oracle, where the
  // per-evaluation rounding of plain doubles would dominate the high-order
  // stencils.  Takes long-double coordinates so the stencil offsets stay
  // exact at that precision too.
  std::function<long double(std::span<const long double> x, std::span<const long double> y)>
      L_value_ld;
  std::function<TaylorXY(std::span<const TaylorXY> x, std::span<const TaylorXY> y)> L_series;

  std::vector<KillingField> killing_fields;

  // Admissibility predicate and a sampler of random admissible (x, y) pairs.
  std::function<bool(const Vec& x, const Vec& y)> admissible;
  std::function<void(std::mt19937_64& rng, Vec& x, Vec& y)> sample_admissible;

  // Structure known by construction; used to route tests and oracles.
  bool is_riemannian = false;         // Cartan tensor vanishes identically
  bool is_flat_spray = false;         // spray coefficients vanish identically
  bool massless_cone_regular = false; // Hessian nondegenerate on the L = 0 cone

  // For Riemannian-type catalog entries: the x-only metric and its exact
  // x-derivatives (dgdx(i,j,k) = d g_ij / d x^k).  Independent of the jet
  // path; used by the Christoffel-only oracles.
  std::function<void(const Vec& x, Mat& g, Ten3& dgdx)> riemannian_metric;

  const KillingField* find_killing(const std::string& kname) const {
    for (const auto& k : killing_fields)
      if (k.name == kname) return &k;
    return nullptr;
  }
};

// Wires a single generic callable L(x, y) into both the double and the
// Taylor-series evaluation channels.
template <class F>
void set_finsler_function(FinslerSpace& space, F f) {
  const int n = space.n;
  space.L_value = [f, n](const Vec& x, const Vec& y) -> double {
    std::array<double, kMaxDim> xs{}, ys{};
    for (int i = 0; i < n; ++i) {
      xs[i] = x[i];
      ys[i] = y[i];
    }
    return f(std::span<const double>(xs.data(), n), std::span<const double>(ys.data(), n));
  };
  space.L_value_ld = [f](std::span<const long double> x,
                         std::span<const long double> y) -> long double { return f(x, y); };
  space.L_series = [f](std::span<const TaylorXY> x, std::span<const TaylorXY> y) -> TaylorXY {
    return f(x, y);
  };
}

}  // namespace finsler
