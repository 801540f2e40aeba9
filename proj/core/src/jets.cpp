#include "finsler/jets.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

std::string point_string(const Vec& x, const Vec& y) {
  std::ostringstream os;
  os << "x = (";
  for (int i = 0; i < x.n; ++i) os << (i ? ", " : "") << x[i];
  os << "), y = (";
  for (int i = 0; i < y.n; ++i) os << (i ? ", " : "") << y[i];
  os << ")";
  return os.str();
}

}  // namespace

double Jet::partial_exp(const std::array<uint8_t, kMaxDim>& ax,
                        const std::array<uint8_t, kMaxDim>& by) const {
  int idx = shape->index_of(ax, by);
  if (idx < 0) throw InputError("jet entry outside the populated derivative table");
  return coeff[idx] * shape->dfact[idx];
}

double Jet::partial(std::span<const int> x_slots, std::span<const int> y_slots) const {
  std::array<uint8_t, kMaxDim> ax{}, by{};
  for (int s : x_slots) ax[s]++;
  for (int s : y_slots) by[s]++;
  return partial_exp(ax, by);
}

Jet jet_evaluate(const FinslerSpace& space, const Vec& x, const Vec& y,
                 int order_x, int order_y) {
  if (x.n != space.n || y.n != space.n)
    throw InputError("jet_evaluate: point dimension does not match the space");
  if (order_x < 0 || order_x > kMaxOrderX || order_y < 0 || order_y > kMaxOrderY)
    throw InputError("jet_evaluate: requested derivative orders outside the (2, 4) table bounds");
  if (max_abs(y) == 0.0)
    throw InputError("jet_evaluate: zero direction");
  if (space.signature == Signature::PositiveDefinite) {
    double L0 = space.L_value(x, y);
    if (!(L0 > 0.0))
      throw InputError("jet_evaluate: L <= 0 on a positive-definite space at " + point_string(x, y));
  }

  const TaylorShape* shape = TaylorShape::get(space.n, order_x, order_y, kMaxOrderTotal);
  std::vector<TaylorXY> xs, ys;
  xs.reserve(space.n);
  ys.reserve(space.n);
  for (int i = 0; i < space.n; ++i) {
    xs.push_back(TaylorXY::x_variable(shape, i, x[i]));
    ys.push_back(TaylorXY::y_variable(shape, i, y[i]));
  }

  TaylorXY L;
  try {
    L = space.L_series(std::span<const TaylorXY>(xs.data(), xs.size()),
                       std::span<const TaylorXY>(ys.data(), ys.size()));
  } catch (const EvaluationError& e) {
    throw EvaluationError(std::string(e.what()) + " at " + point_string(x, y));
  }

  Jet jet;
  jet.x = x;
  jet.y = y;
  jet.order_x = order_x;
  jet.order_y = order_y;
  jet.shape = shape;
  jet.coeff.resize(shape->count);
  for (int i = 0; i < shape->count; ++i) {
    double c = L.coeff(i);
    if (!std::isfinite(c))
      throw EvaluationError("jet_evaluate: non-finite derivative entry at " + point_string(x, y));
    jet.coeff[i] = c;
  }
  return jet;
}

namespace {

// Central stencils with fourth-order truncation throughout: 5 points for
// first and second derivatives, 7 points for third and fourth (a 5-point
// stencil is only second order there, which cannot reach the 1e-6 agreement
// target at any step size before roundoff takes over).  Weights are kept as
// exact integer numerators over one denominator: rounded fractional weights
// would leave a spurious O(eps) weight sum that the 1/h^k scaling amplifies
// past the agreement target.
struct Stencil {
  int half_width;
  int wnum[7];
  double den;
  int trunc_order;  // error ~ h^trunc_order
};

const Stencil& stencil_for(int deriv_order) {
  static const Stencil s1 = {2, {0, 1, -8, 0, 8, -1, 0}, 12.0, 4};
  static const Stencil s2 = {2, {0, -1, 16, -30, 16, -1, 0}, 12.0, 4};
  static const Stencil s3 = {3, {1, -8, 13, 0, -13, 8, -1}, 8.0, 4};
  static const Stencil s4 = {3, {-1, 12, -39, 56, -39, 12, -1}, 6.0, 4};
  switch (deriv_order) {
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
    default: return s4;
  }
}

struct Axis {
  bool is_x;
  int index;
  int order;
  double h;
};

using LdPoint = std::array<long double, kMaxDim>;

// Recursively composes per-axis stencils in extended precision; `scale`
// accumulates the product of weights / h^order factors.
long double composed_stencil(const FinslerSpace& space, LdPoint x, LdPoint y,
                             std::span<const Axis> axes, int depth, long double scale) {
  const int n = space.n;
  if (depth == static_cast<int>(axes.size())) {
    long double v;
    if (space.L_value_ld) {
      v = space.L_value_ld(std::span<const long double>(x.data(), n),
                           std::span<const long double>(y.data(), n));
    } else {
      Vec xd(n), yd(n);
      for (int i = 0; i < n; ++i) {
        xd[i] = static_cast<double>(x[i]);
        yd[i] = static_cast<double>(y[i]);
      }
      v = space.L_value(xd, yd);
    }
    if (!std::isfinite(static_cast<double>(v)))
      throw EvaluationError("non-finite L in stencil evaluation");
    return scale * v;
  }
  const Axis& ax = axes[depth];
  const Stencil& st = stencil_for(ax.order);
  long double hp = static_cast<long double>(st.den);
  for (int e = 0; e < ax.order; ++e) hp *= ax.h;
  long double sum = 0.0;
  for (int k = -st.half_width; k <= st.half_width; ++k) {
    int w = st.wnum[k + 3];
    if (w == 0) continue;
    LdPoint xs = x, ys = y;
    if (ax.is_x)
      xs[ax.index] += k * static_cast<long double>(ax.h);
    else
      ys[ax.index] += k * static_cast<long double>(ax.h);
    sum += composed_stencil(space, xs, ys, axes, depth + 1, scale * w / hp);
  }
  return sum;
}

// Base step size per total derivative order, balancing truncation against
// roundoff amplification ~ eps / h^order.  The Richardson pair is
// (2 h_base, h_base).
double base_step(int total_order) {
  switch (total_order) {
    case 1: return 5e-4;
    case 2: return 1e-3;
    case 3: return 3e-3;
    case 4: return 5e-3;
    default: return 8e-3;
  }
}

}  // namespace

const JetCheckBucket* JetCheckReport::worst() const {
  const JetCheckBucket* w = nullptr;
  for (const auto& b : buckets)
    if (!w || b.max_rel > w->max_rel) w = &b;
  return w;
}

JetCheckReport jet_check(const FinslerSpace& space, const Vec& x, const Vec& y,
                         uint64_t seed, double threshold) {
  (void)seed;  // reserved for future subsampling of very large tables
  Jet jet = jet_evaluate(space, x, y, kMaxOrderX, kMaxOrderY);

  // Bucket indexing by (|a|, |b|).
  std::vector<JetCheckBucket> buckets;
  auto bucket = [&](int ax, int by) -> JetCheckBucket& {
    for (auto& b : buckets)
      if (b.ax == ax && b.by == by) return b;
    buckets.push_back(JetCheckBucket{ax, by});
    return buckets.back();
  };

  struct EntryResult {
    int mono;
    double analytic, stencil;
  };
  std::vector<EntryResult> results;
  results.reserve(jet.shape->count);

  for (int m = 0; m < jet.shape->count; ++m) {
    const auto& mono = jet.shape->monos[m];
    int total = mono.degx + mono.degy;
    if (total == 0) continue;

    std::vector<Axis> axes;
    for (int i = 0; i < space.n; ++i)
      if (mono.ex[i] > 0)
        axes.push_back(Axis{true, i, mono.ex[i], 0.0});
    for (int i = 0; i < space.n; ++i)
      if (mono.ey[i] > 0)
        axes.push_back(Axis{false, i, mono.ey[i], 0.0});

    double h0 = base_step(total);
    LdPoint x0{}, y0{};
    for (int i = 0; i < space.n; ++i) {
      x0[i] = x[i];
      y0[i] = y[i];
    }
    auto eval_at = [&](double hb) -> double {
      auto ax_scaled = axes;
      for (auto& a : ax_scaled) {
        double comp = a.is_x ? x[a.index] : y[a.index];
        a.h = hb * std::max(1.0, std::abs(comp));
      }
      return static_cast<double>(composed_stencil(space, x0, y0, ax_scaled, 0, 1.0L));
    };
    // All stencils are fourth order; one Richardson level cancels the h^4
    // term.  The highest buckets sit close to the noise/truncation crossover,
    // so they get a second level (grid 2h, sqrt(2) h, h) removing h^6 too.
    auto richardson = [](double fine, double coarse, double r_pow_q) {
      return (r_pow_q * fine - coarse) / (r_pow_q - 1.0);
    };
    double d_stencil;
    if (total >= 4) {
      double d1 = eval_at(2.0 * h0);
      double d2 = eval_at(std::sqrt(2.0) * h0);
      double d3 = eval_at(h0);
      double e1 = richardson(d3, d1, 16.0);  // residual -16/5 b h^6
      double e2 = richardson(d3, d2, 4.0);   // residual  -4/3 b h^6
      double c = (16.0 / 5.0) / (4.0 / 3.0);
      d_stencil = (c * e2 - e1) / (c - 1.0);
    } else {
      d_stencil = richardson(eval_at(h0), eval_at(2.0 * h0), 16.0);
    }

    double d_analytic = jet.coeff[m] * jet.shape->dfact[m];
    results.push_back(EntryResult{m, d_analytic, d_stencil});
    auto& b = bucket(mono.degx, mono.degy);
    b.bucket_scale = std::max(b.bucket_scale, std::abs(d_analytic));
  }

  JetCheckReport report;
  report.buckets = buckets;
  for (const auto& r : results) {
    const auto& mono = jet.shape->monos[r.mono];
    for (auto& b : report.buckets) {
      if (b.ax != mono.degx || b.by != mono.degy) continue;
      double rel = std::abs(r.analytic - r.stencil) / std::max(1.0, b.bucket_scale);
      if (rel > b.max_rel) {
        b.max_rel = rel;
        b.worst_ex = mono.ex;
        b.worst_ey = mono.ey;
        b.worst_analytic = r.analytic;
        b.worst_stencil = r.stencil;
      }
      report.overall = std::max(report.overall, rel);
    }
  }

  if (threshold > 0.0 && report.overall > threshold) {
    const JetCheckBucket* w = report.worst();
    std::ostringstream os;
    os << "jet_check: discrepancy " << report.overall << " above threshold " << threshold
       << " in bucket (|a| = " << w->ax << ", |b| = " << w->by << "), analytic "
       << w->worst_analytic << " vs stencil " << w->worst_stencil << " at " << point_string(x, y);
    throw EvaluationError(os.str());
  }
  return report;
}

}  // namespace finsler
