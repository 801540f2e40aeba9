#include "finsler/spaces.hpp"

#include <cmath>

namespace finsler {

namespace {

KillingField translation(int n, int axis) {
  KillingField k;
  k.name = "trans" + std::to_string(axis);
  k.eval = [n, axis](const Vec&, Vec& Z, Mat& dZ) {
    Z = Vec(n);
    dZ = Mat(n);
    Z[axis] = 1.0;
  };
  return k;
}

// Spatial rotation in the (i, j) coordinate plane: Z = x^i e_j - x^j e_i.
KillingField rotation(int n, int i, int j) {
  KillingField k;
  k.name = "rot" + std::to_string(i) + std::to_string(j);
  k.eval = [n, i, j](const Vec& x, Vec& Z, Mat& dZ) {
    Z = Vec(n);
    dZ = Mat(n);
    Z[j] = x[i];
    Z[i] = -x[j];
    dZ(j, i) = 1.0;
    dZ(i, j) = -1.0;
  };
  return k;
}

// Lorentz boost along spatial axis i (time coordinate is slot 0).
KillingField boost(int n, int i) {
  KillingField k;
  k.name = "boost" + std::to_string(i);
  k.eval = [n, i](const Vec& x, Vec& Z, Mat& dZ) {
    Z = Vec(n);
    dZ = Mat(n);
    Z[0] = x[i];
    Z[i] = x[0];
    dZ(0, i) = 1.0;
    dZ(i, 0) = 1.0;
  };
  return k;
}

Vec box_sample(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

double param(const std::map<std::string, double>& params, const std::string& key, double def) {
  auto it = params.find(key);
  return it == params.end() ? def : it->second;
}

// Samples a direction with unit Euclidean norm, biased away from axes-aligned
// degeneracies by rejection on tiny norms.
Vec random_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  while (true) {
    Vec y(n);
    double norm2 = 0;
    for (int i = 0; i < n; ++i) {
      y[i] = g(rng);
      norm2 += y[i] * y[i];
    }
    if (norm2 > 1e-4) {
      double inv = 1.0 / std::sqrt(norm2);
      for (int i = 0; i < n; ++i) y[i] *= inv;
      return y;
    }
  }
}

FinslerSpace build_flat(int n, Signature sig) {
  FinslerSpace s;
  s.n = n;
  s.signature = sig;
  s.is_riemannian = true;
  s.is_flat_spray = true;
  s.massless_cone_regular = sig == Signature::Lorentzian;
  const bool lorentz = sig == Signature::Lorentzian;

  set_finsler_function(s, [n, lorentz](auto, auto y) {
    using T = std::remove_cvref_t<decltype(y[0])>;
    T acc = y[0] * y[0];
    for (int i = 1; i < n; ++i) {
      if (lorentz)
        acc -= y[i] * y[i];
      else
        acc += y[i] * y[i];
    }
    return acc;
  });
  s.riemannian_metric = [n, lorentz](const Vec&, Mat& g, Ten3& dgdx) {
    g = Mat(n);
    dgdx = Ten3(n);
    for (int i = 0; i < n; ++i) g(i, i) = (lorentz && i > 0) ? -1.0 : 1.0;
  };

  for (int i = 0; i < n; ++i) s.killing_fields.push_back(translation(n, i));
  int first_spatial = lorentz ? 1 : 0;
  for (int i = first_spatial; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s.killing_fields.push_back(rotation(n, i, j));
  if (lorentz)
    for (int i = 1; i < n; ++i) s.killing_fields.push_back(boost(n, i));

  s.admissible = [](const Vec&, const Vec& y) { return max_abs(y) > 0.0; };
  s.sample_admissible = [n, lorentz](std::mt19937_64& rng, Vec& x, Vec& y) {
    x = box_sample(rng, n, -2.0, 2.0);
    if (!lorentz) {
      y = random_direction(rng, n);
      return;
    }
    // Timelike sample: unit time component plus a small spatial part.
    Vec dir = random_direction(rng, n);
    y = Vec(n);
    y[0] = 1.0;
    for (int i = 1; i < n; ++i) y[i] = 0.4 * dir[i];
  };
  return s;
}

FinslerSpace build_sphere2() {
  std::vector<Vec> probes = {Vec{1.0, 0.0}, Vec{2.0, 1.0}, Vec{0.7, -1.0}};
  auto metric = [](auto x, auto* e) {
    using std::sin;
    auto s = sin(x[0]);
    e[0] = constant_like(s, 1.0);  // g_theta_theta
    e[1] = constant_like(s, 0.0);
    e[2] = constant_like(s, 0.0);
    e[3] = s * s;
  };
  FinslerSpace s = make_riemannian(2, Signature::PositiveDefinite, metric, probes);
  s.name = "sphere2";
  // Exact metric derivatives for the Christoffel-only oracle.
  s.riemannian_metric = [](const Vec& x, Mat& g, Ten3& dgdx) {
    g = Mat(2);
    dgdx = Ten3(2);
    double st = std::sin(x[0]), ct = std::cos(x[0]);
    g(0, 0) = 1.0;
    g(1, 1) = st * st;
    dgdx(1, 1, 0) = 2.0 * st * ct;
  };

  KillingField kz;
  kz.name = "rot_z";
  kz.eval = [](const Vec&, Vec& Z, Mat& dZ) {
    Z = Vec(2);
    dZ = Mat(2);
    Z[1] = 1.0;
  };
  KillingField kx;
  kx.name = "rot_x";
  kx.eval = [](const Vec& x, Vec& Z, Mat& dZ) {
    double th = x[0], ph = x[1];
    double cot = std::cos(th) / std::sin(th);
    Z = Vec(2);
    dZ = Mat(2);
    Z[0] = -std::sin(ph);
    Z[1] = -cot * std::cos(ph);
    dZ(0, 1) = -std::cos(ph);
    dZ(1, 0) = std::cos(ph) / (std::sin(th) * std::sin(th));
    dZ(1, 1) = cot * std::sin(ph);
  };
  KillingField ky;
  ky.name = "rot_y";
  ky.eval = [](const Vec& x, Vec& Z, Mat& dZ) {
    double th = x[0], ph = x[1];
    double cot = std::cos(th) / std::sin(th);
    Z = Vec(2);
    dZ = Mat(2);
    Z[0] = std::cos(ph);
    Z[1] = -cot * std::sin(ph);
    dZ(0, 1) = -std::sin(ph);
    dZ(1, 0) = std::sin(ph) / (std::sin(th) * std::sin(th));
    dZ(1, 1) = -cot * std::cos(ph);
  };
  s.killing_fields = {kz, kx, ky};

  s.admissible = [](const Vec& x, const Vec& y) {
    return x[0] > 0.3 && x[0] < M_PI - 0.3 && max_abs(y) > 0.0;
  };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    std::uniform_real_distribution<double> th(0.5, M_PI - 0.5), ph(-3.0, 3.0);
    x = Vec(2);
    x[0] = th(rng);
    x[1] = ph(rng);
    y = random_direction(rng, 2);
  };
  return s;
}

FinslerSpace build_riem2_diag() {
  std::vector<Vec> probes = {Vec{0.0, 0.0}, Vec{1.0, 1.0}, Vec{-0.5, 2.0}};
  auto metric = [](auto x, auto* e) {
    e[0] = 1.0 + x[0];
    e[1] = constant_like(x[0], 0.0);
    e[2] = constant_like(x[0], 0.0);
    e[3] = constant_like(x[0], 1.0);
  };
  FinslerSpace s = make_riemannian(2, Signature::PositiveDefinite, metric, probes);
  s.name = "riem2_diag";
  s.riemannian_metric = [](const Vec& x, Mat& g, Ten3& dgdx) {
    g = Mat(2);
    dgdx = Ten3(2);
    g(0, 0) = 1.0 + x[0];
    g(1, 1) = 1.0;
    dgdx(0, 0, 0) = 1.0;
  };
  s.killing_fields = {translation(2, 1)};
  s.admissible = [](const Vec& x, const Vec& y) { return x[0] > -0.8 && max_abs(y) > 0.0; };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    std::uniform_real_distribution<double> u(-0.5, 2.0);
    x = Vec(2);
    x[0] = u(rng);
    x[1] = u(rng);
    y = random_direction(rng, 2);
  };
  return s;
}

// Isotropic optical medium n(rho)^2 delta_ij with a Gaussian bump around the
// axis rho = 0; axisymmetric and z-independent.
FinslerSpace build_riem3_medium(double amp) {
  std::vector<Vec> probes = {Vec{0.0, 0.0, 0.0}, Vec{1.0, -1.0, 0.5}};
  auto metric = [amp](auto x, auto* e) {
    using std::exp;
    auto rho2 = x[0] * x[0] + x[1] * x[1];
    auto nidx = 1.0 + amp * exp(-0.5 * rho2);
    auto n2 = nidx * nidx;
    for (int i = 0; i < 9; ++i) e[i] = constant_like(n2, 0.0);
    e[0] = n2;
    e[4] = n2;
    e[8] = n2;
  };
  FinslerSpace s = make_riemannian(3, Signature::PositiveDefinite, metric, probes);
  s.name = "riem3_medium";
  s.riemannian_metric = [amp](const Vec& x, Mat& g, Ten3& dgdx) {
    g = Mat(3);
    dgdx = Ten3(3);
    double rho2 = x[0] * x[0] + x[1] * x[1];
    double bump = amp * std::exp(-0.5 * rho2);
    double nidx = 1.0 + bump;
    double n2 = nidx * nidx;
    // d(n^2)/dx_k = 2 n * dn/dx_k, dn/dx_k = -x_k * bump for k in {0, 1}
    for (int i = 0; i < 3; ++i) {
      g(i, i) = n2;
      for (int k = 0; k < 2; ++k) dgdx(i, i, k) = 2.0 * nidx * (-x[k] * bump);
    }
  };
  s.killing_fields = {rotation(3, 0, 1), translation(3, 2)};
  s.admissible = [](const Vec&, const Vec& y) { return max_abs(y) > 0.0; };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    x = box_sample(rng, 3, -1.5, 1.5);
    y = random_direction(rng, 3);
  };
  return s;
}

FinslerSpace build_randers2(double b1) {
  std::vector<Vec> probes = {Vec{0.0, 0.0}};
  auto a = [](auto x, auto* e) {
    e[0] = constant_like(x[0], 1.0);
    e[1] = constant_like(x[0], 0.0);
    e[2] = constant_like(x[0], 0.0);
    e[3] = constant_like(x[0], 1.0);
  };
  auto b = [b1](auto x, auto* e) {
    e[0] = constant_like(x[0], b1);
    e[1] = constant_like(x[0], 0.0);
  };
  FinslerSpace s = make_randers(2, a, b, probes);
  s.name = "randers2";
  s.is_flat_spray = true;
  s.killing_fields = {translation(2, 0), translation(2, 1)};
  s.admissible = [](const Vec&, const Vec& y) { return max_abs(y) > 0.0; };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    x = box_sample(rng, 2, -2.0, 2.0);
    y = random_direction(rng, 2);
  };
  return s;
}

FinslerSpace build_randers2_var(double b0) {
  std::vector<Vec> probes = {Vec{0.0, 0.0}, Vec{1.0, 2.0}, Vec{-1.0, -2.0}};
  auto a = [](auto x, auto* e) {
    e[0] = constant_like(x[0], 1.0);
    e[1] = constant_like(x[0], 0.0);
    e[2] = constant_like(x[0], 0.0);
    e[3] = constant_like(x[0], 1.0);
  };
  auto b = [b0](auto x, auto* e) {
    e[0] = b0 / (1.0 + x[1] * x[1]);
    e[1] = constant_like(x[0], 0.0);
  };
  FinslerSpace s = make_randers(2, a, b, probes);
  s.name = "randers2_var";
  s.killing_fields = {translation(2, 0)};
  s.admissible = [](const Vec&, const Vec& y) { return max_abs(y) > 0.0; };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    x = box_sample(rng, 2, -1.5, 1.5);
    y = random_direction(rng, 2);
  };
  return s;
}

// Axisymmetric optical Randers medium: radial index bump plus an azimuthal
// drift one-form; invariant under z-rotations and z-translations.
FinslerSpace build_randers3_axis(double amp, double beta0) {
  std::vector<Vec> probes = {Vec{0.0, 0.0, 0.0}, Vec{1.0, 1.0, 0.0}, Vec{2.0, 0.0, 1.0}};
  auto a = [amp](auto x, auto* e) {
    using std::exp;
    auto rho2 = x[0] * x[0] + x[1] * x[1];
    auto nidx = 1.0 + amp * exp(-0.5 * rho2);
    auto n2 = nidx * nidx;
    for (int i = 0; i < 9; ++i) e[i] = constant_like(n2, 0.0);
    e[0] = n2;
    e[4] = n2;
    e[8] = n2;
  };
  auto b = [beta0](auto x, auto* e) {
    auto rho2 = x[0] * x[0] + x[1] * x[1];
    auto beta = beta0 / (1.0 + rho2);
    e[0] = -beta * x[1];
    e[1] = beta * x[0];
    e[2] = constant_like(beta, 0.0);
  };
  FinslerSpace s = make_randers(3, a, b, probes);
  s.name = "randers3_axis";
  s.killing_fields = {rotation(3, 0, 1), translation(3, 2)};
  s.admissible = [](const Vec&, const Vec& y) { return max_abs(y) > 0.0; };
  s.sample_admissible = [](std::mt19937_64& rng, Vec& x, Vec& y) {
    x = box_sample(rng, 3, -1.5, 1.5);
    y = random_direction(rng, 3);
  };
  return s;
}

// Weak-field static chart in isotropic-style coordinates: a Riemannian-limit
// arena for the 4D closures.  g = diag(1 + 2 Phi, -(1 - 2 Phi) I3), Phi = -M/r.
FinslerSpace build_schw4_iso(double mass) {
  FinslerSpace s;
  s.n = 4;
  s.signature = Signature::Lorentzian;
  s.is_riemannian = true;
  s.massless_cone_regular = true;

  set_finsler_function(s, [mass](auto x, auto y) {
    using T = std::remove_cvref_t<decltype(x[0])>;
    using std::sqrt;
    T r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    T phi = -mass / sqrt(r2);
    T spatial = y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    return (1.0 + 2.0 * phi) * y[0] * y[0] - (1.0 - 2.0 * phi) * spatial;
  });
  s.riemannian_metric = [mass](const Vec& x, Mat& g, Ten3& dgdx) {
    g = Mat(4);
    dgdx = Ten3(4);
    double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    double r = std::sqrt(r2);
    double phi = -mass / r;
    g(0, 0) = 1.0 + 2.0 * phi;
    for (int i = 1; i < 4; ++i) g(i, i) = -(1.0 - 2.0 * phi);
    for (int k = 1; k < 4; ++k) {
      double dphi = mass * x[k] / (r2 * r);
      dgdx(0, 0, k) = 2.0 * dphi;
      for (int i = 1; i < 4; ++i) dgdx(i, i, k) = 2.0 * dphi;
    }
  };
  s.killing_fields = {translation(4, 0), rotation(4, 1, 2), rotation(4, 1, 3), rotation(4, 2, 3)};
  s.admissible = [mass](const Vec& x, const Vec& y) {
    double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    return r2 > 16.0 * mass * mass && max_abs(y) > 0.0;
  };
  s.sample_admissible = [mass](std::mt19937_64& rng, Vec& x, Vec& y) {
    std::uniform_real_distribution<double> rad(6.0 * mass, 14.0 * mass), t(-1.0, 1.0);
    Vec dir = random_direction(rng, 3);
    x = Vec(4);
    x[0] = t(rng);
    double r = rad(rng);
    for (int i = 0; i < 3; ++i) x[i + 1] = r * dir[i];
    Vec sp = random_direction(rng, 3);
    y = Vec(4);
    y[0] = 1.0;
    std::uniform_real_distribution<double> mag(0.0, 0.25);
    double v = mag(rng);
    for (int i = 0; i < 3; ++i) y[i + 1] = v * sp[i];
  };
  return s;
}

// Lorentzian Randers-type structure L = (sqrt(a(y, y)) + b . y)^2, defined on
// the part of the a-timelike cone where a(y, y) > 0.  `curved` switches the
// base metric between flat Minkowski and the weak-field chart above.
FinslerSpace build_randers4(double mass, double bmag, bool curved) {
  FinslerSpace s;
  s.n = 4;
  s.signature = Signature::Lorentzian;
  s.is_flat_spray = !curved;

  set_finsler_function(s, [mass, bmag, curved](auto x, auto y) {
    using T = std::remove_cvref_t<decltype(x[0])>;
    using std::sqrt;
    T spatial = y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    T ayy = [&]() -> T {
      if (!curved) return y[0] * y[0] - spatial;
      T r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
      T phi = -mass / sqrt(r2);
      return (1.0 + 2.0 * phi) * y[0] * y[0] - (1.0 - 2.0 * phi) * spatial;
    }();
    T root = sqrt(ayy) + bmag * y[3];
    return root * root;
  });

  if (curved) {
    s.killing_fields = {translation(4, 0), rotation(4, 1, 2)};
  } else {
    s.killing_fields = {translation(4, 0), translation(4, 1), translation(4, 2),
                        translation(4, 3), rotation(4, 1, 2)};
  }
  s.admissible = [mass, curved](const Vec& x, const Vec& y) {
    if (max_abs(y) == 0.0) return false;
    if (!curved) return true;
    double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    return r2 > 16.0 * mass * mass;
  };
  s.sample_admissible = [mass, curved](std::mt19937_64& rng, Vec& x, Vec& y) {
    if (curved) {
      std::uniform_real_distribution<double> rad(6.0 * mass, 14.0 * mass), t(-1.0, 1.0);
      Vec dir = random_direction(rng, 3);
      x = Vec(4);
      x[0] = t(rng);
      double r = rad(rng);
      for (int i = 0; i < 3; ++i) x[i + 1] = r * dir[i];
    } else {
      x = box_sample(rng, 4, -2.0, 2.0);
    }
    Vec sp = random_direction(rng, 3);
    y = Vec(4);
    y[0] = 1.0;
    std::uniform_real_distribution<double> mag(0.0, 0.25);
    double v = mag(rng);
    for (int i = 0; i < 3; ++i) y[i + 1] = v * sp[i];
  };
  return s;
}

// Quartic perturbation of a Lorentzian quadratic structure:
// L = a_{mu nu}(x) y^mu y^nu + eps(x) (y^3)^4 / (y^0)^2.  Unlike the
// Randers-type form, its Hessian stays nondegenerate on the null cone, so the
// massless branch is well-posed.  `curved` selects the weak-field base chart.
FinslerSpace build_quartic4(double mass, double eps0, bool curved) {
  FinslerSpace s;
  s.n = 4;
  s.signature = Signature::Lorentzian;
  s.is_flat_spray = !curved;
  s.massless_cone_regular = true;

  set_finsler_function(s, [mass, eps0, curved](auto x, auto y) {
    using T = std::remove_cvref_t<decltype(x[0])>;
    using std::sqrt;
    T spatial = y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    T y3sq = y[3] * y[3];
    T quart = y3sq * y3sq / (y[0] * y[0]);
    if (!curved) return y[0] * y[0] - spatial + eps0 * quart;
    T r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    T phi = -mass / sqrt(r2);
    T eps = eps0 / (1.0 + 0.02 * r2);
    return (1.0 + 2.0 * phi) * y[0] * y[0] - (1.0 - 2.0 * phi) * spatial + eps * quart;
  });

  if (curved) {
    s.killing_fields = {translation(4, 0), rotation(4, 1, 2)};
  } else {
    s.killing_fields = {translation(4, 0), translation(4, 1), translation(4, 2),
                        translation(4, 3), rotation(4, 1, 2)};
  }
  s.admissible = [mass, curved](const Vec& x, const Vec& y) {
    if (std::abs(y[0]) < 1e-6 * max_abs(y)) return false;
    if (!curved) return true;
    double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    return r2 > 16.0 * mass * mass;
  };
  s.sample_admissible = [mass, curved](std::mt19937_64& rng, Vec& x, Vec& y) {
    if (curved) {
      std::uniform_real_distribution<double> rad(6.0 * mass, 14.0 * mass), t(-1.0, 1.0);
      Vec dir = random_direction(rng, 3);
      x = Vec(4);
      x[0] = t(rng);
      double r = rad(rng);
      for (int i = 0; i < 3; ++i) x[i + 1] = r * dir[i];
    } else {
      x = box_sample(rng, 4, -2.0, 2.0);
    }
    Vec sp = random_direction(rng, 3);
    y = Vec(4);
    y[0] = 1.0;
    std::uniform_real_distribution<double> mag(0.0, 0.25);
    double v = mag(rng);
    for (int i = 0; i < 3; ++i) y[i + 1] = v * sp[i];
  };
  return s;
}

}  // namespace

FinslerSpace make_flat(int n, Signature signature) {
  if (n < 2 || n > kMaxDim) throw InputError("make_flat: dimension must be in {2, 3, 4}");
  FinslerSpace s = build_flat(n, signature);
  s.name = "flat" + std::to_string(n) + (signature == Signature::Lorentzian ? "_lorentz" : "");
  return s;
}

std::vector<std::string> catalog_names() {
  return {"flat2",         "flat3",          "flat4",          "sphere2",
          "riem2_diag",    "riem3_medium",   "randers2",       "randers2_var",
          "randers3_axis", "schw4_iso",      "randers4_flat",  "randers4_curved",
          "quartic4_flat", "quartic4_curved"};
}

FinslerSpace make_catalog_space(const std::string& name,
                                const std::map<std::string, double>& params) {
  FinslerSpace s;
  if (name == "flat2") {
    s = build_flat(2, Signature::PositiveDefinite);
  } else if (name == "flat3") {
    s = build_flat(3, Signature::PositiveDefinite);
  } else if (name == "flat4") {
    s = build_flat(4, Signature::Lorentzian);
  } else if (name == "sphere2") {
    s = build_sphere2();
  } else if (name == "riem2_diag") {
    s = build_riem2_diag();
  } else if (name == "riem3_medium") {
    s = build_riem3_medium(param(params, "amplitude", 0.35));
  } else if (name == "randers2") {
    s = build_randers2(param(params, "b", 0.3));
  } else if (name == "randers2_var") {
    s = build_randers2_var(param(params, "b", 0.3));
  } else if (name == "randers3_axis") {
    s = build_randers3_axis(param(params, "amplitude", 0.3), param(params, "beta", 0.25));
  } else if (name == "schw4_iso") {
    s = build_schw4_iso(param(params, "mass", 1.0));
  } else if (name == "randers4_flat") {
    s = build_randers4(0.0, param(params, "b", 0.05), false);
  } else if (name == "randers4_curved") {
    s = build_randers4(param(params, "mass", 1.0), param(params, "b", 0.05), true);
  } else if (name == "quartic4_flat") {
    s = build_quartic4(0.0, param(params, "eps", 0.05), false);
  } else if (name == "quartic4_curved") {
    s = build_quartic4(param(params, "mass", 1.0), param(params, "eps", 0.05), true);
  } else {
    throw ConfigError("unknown catalog space '" + name + "'");
  }
  s.name = name;
  return s;
}

}  // namespace finsler
