#include "finsler/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

uint64_t pack_key(const std::array<uint8_t, kMaxDim>& ex, const std::array<uint8_t, kMaxDim>& ey) {
  uint64_t k = 0;
  for (int i = 0; i < kMaxDim; ++i) k = (k << 4) | ex[i];
  for (int i = 0; i < kMaxDim; ++i) k = (k << 4) | ey[i];
  return k;
}

void enumerate_tuples(int n, int max_deg, std::vector<std::array<uint8_t, kMaxDim>>& out) {
  std::array<uint8_t, kMaxDim> cur{};
  // Lexicographic enumeration over exponent tuples with total degree <= max_deg.
  struct Rec {
    int n, max_deg;
    std::vector<std::array<uint8_t, kMaxDim>>* out;
    void go(std::array<uint8_t, kMaxDim>& cur, int axis, int used) {
      if (axis == n) {
        out->push_back(cur);
        return;
      }
      for (int e = 0; e + used <= max_deg; ++e) {
        cur[axis] = static_cast<uint8_t>(e);
        go(cur, axis + 1, used + e);
      }
      cur[axis] = 0;
    }
  } rec{n, max_deg, &out};
  rec.go(cur, 0, 0);
}

double factorial(int k) {
  double f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

struct ShapeRegistry {
  std::mutex mu;
  std::map<std::tuple<int, int, int, int>, std::unique_ptr<TaylorShape>> shapes;
};

ShapeRegistry& registry() {
  static ShapeRegistry r;
  return r;
}

std::unique_ptr<TaylorShape> build_shape(int n, int order_x, int order_y, int cap) {
  auto s = std::make_unique<TaylorShape>();
  s->n = n;
  s->order_x = order_x;
  s->order_y = order_y;
  s->cap = cap;
  s->max_total = std::min(cap, order_x + order_y);

  std::vector<std::array<uint8_t, kMaxDim>> xt, yt;
  enumerate_tuples(n, order_x, xt);
  enumerate_tuples(n, order_y, yt);

  auto deg = [n](const std::array<uint8_t, kMaxDim>& t) {
    int d = 0;
    for (int i = 0; i < n; ++i) d += t[i];
    return d;
  };

  for (const auto& ax : xt) {
    int dx = deg(ax);
    for (const auto& by : yt) {
      int dy = deg(by);
      if (dx + dy > cap) continue;
      TaylorShape::Mono m;
      m.ex = ax;
      m.ey = by;
      m.degx = static_cast<uint8_t>(dx);
      m.degy = static_cast<uint8_t>(dy);
      s->monos.push_back(m);
    }
  }
  // Constant monomial first, then graded by total degree (stable within).
  std::stable_sort(s->monos.begin(), s->monos.end(),
                   [](const TaylorShape::Mono& a, const TaylorShape::Mono& b) {
                     return a.degx + a.degy < b.degx + b.degy;
                   });
  s->count = static_cast<int>(s->monos.size());
  if (s->count > TaylorXY::kMaxCoeffs)
    throw InputError("taylor shape exceeds the compiled coefficient capacity");

  s->lookup_.reserve(s->count);
  for (int i = 0; i < s->count; ++i)
    s->lookup_.emplace_back(pack_key(s->monos[i].ex, s->monos[i].ey), i);
  std::sort(s->lookup_.begin(), s->lookup_.end());

  s->dfact.resize(s->count);
  for (int i = 0; i < s->count; ++i) {
    double f = 1;
    for (int a = 0; a < n; ++a) f *= factorial(s->monos[i].ex[a]) * factorial(s->monos[i].ey[a]);
    s->dfact[i] = f;
  }

  for (int a = 0; a < n; ++a) {
    std::array<uint8_t, kMaxDim> ex{}, ey{};
    if (order_x > 0) {
      ex[a] = 1;
      s->x_seed_[a] = s->index_of(ex, ey);
      ex[a] = 0;
    }
    if (order_y > 0) {
      ey[a] = 1;
      s->y_seed_[a] = s->index_of(ex, ey);
      ey[a] = 0;
    }
  }

  // Multiplication table: all ordered pairs whose product stays in shape.
  for (int i = 0; i < s->count; ++i) {
    const auto& mi = s->monos[i];
    for (int j = 0; j < s->count; ++j) {
      const auto& mj = s->monos[j];
      int dx = mi.degx + mj.degx;
      int dy = mi.degy + mj.degy;
      if (dx > order_x || dy > order_y || dx + dy > cap) continue;
      std::array<uint8_t, kMaxDim> ex{}, ey{};
      for (int a = 0; a < n; ++a) {
        ex[a] = static_cast<uint8_t>(mi.ex[a] + mj.ex[a]);
        ey[a] = static_cast<uint8_t>(mi.ey[a] + mj.ey[a]);
      }
      int k = s->index_of(ex, ey);
      s->triples.push_back(i);
      s->triples.push_back(j);
      s->triples.push_back(k);
    }
  }
  return s;
}

}  // namespace

int TaylorShape::index_of(const std::array<uint8_t, kMaxDim>& ex,
                          const std::array<uint8_t, kMaxDim>& ey) const {
  uint64_t key = pack_key(ex, ey);
  auto it = std::lower_bound(lookup_.begin(), lookup_.end(), key,
                             [](const std::pair<uint64_t, int32_t>& p, uint64_t k) { return p.first < k; });
  if (it == lookup_.end() || it->first != key) return -1;
  return it->second;
}

const TaylorShape* TaylorShape::get(int n, int order_x, int order_y, int cap) {
  auto& reg = registry();
  std::lock_guard<std::mutex> lock(reg.mu);
  auto key = std::make_tuple(n, order_x, order_y, cap);
  auto it = reg.shapes.find(key);
  if (it == reg.shapes.end())
    it = reg.shapes.emplace(key, build_shape(n, order_x, order_y, cap)).first;
  return it->second.get();
}

TaylorXY compose(const TaylorXY& f, std::span<const double> derivs) {
  const TaylorShape* s = f.shape();
  int k_max = std::min<int>(s->max_total, static_cast<int>(derivs.size()) - 1);
  TaylorXY u = f;
  u.set_coeff(0, 0.0);  // nilpotent part
  double fact = factorial(k_max);
  TaylorXY r(s, derivs[k_max] / fact);
  for (int k = k_max - 1; k >= 0; --k) {
    fact /= (k + 1);
    r = r * u;
    r += derivs[k] / fact;
  }
  return r;
}

namespace {

template <class DerivFn>
TaylorXY compose_with(const TaylorXY& f, DerivFn&& g_derivs, const char* name, bool need_positive) {
  double a = f.value();
  if (need_positive && !(a > 0.0))
    throw EvaluationError(std::string(name) + " of a non-positive series value");
  std::array<double, 8> d{};
  int k_max = f.shape()->max_total;
  g_derivs(a, k_max, d.data());
  return compose(f, std::span<const double>(d.data(), static_cast<size_t>(k_max) + 1));
}

}  // namespace

TaylorXY sqrt(const TaylorXY& f) {
  return compose_with(f, [](double a, int k_max, double* d) {
    d[0] = std::sqrt(a);
    double e = 0.5;
    for (int k = 1; k <= k_max; ++k) {
      d[k] = d[k - 1] * e / a;
      e -= 1.0;
    }
  }, "sqrt", true);
}

TaylorXY exp(const TaylorXY& f) {
  return compose_with(f, [](double a, int k_max, double* d) {
    double v = std::exp(a);
    for (int k = 0; k <= k_max; ++k) d[k] = v;
  }, "exp", false);
}

TaylorXY log(const TaylorXY& f) {
  return compose_with(f, [](double a, int k_max, double* d) {
    d[0] = std::log(a);
    double sign = 1.0, fact = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      d[k] = sign * fact / std::pow(a, k);
      fact *= k;
      sign = -sign;
    }
  }, "log", true);
}

TaylorXY sin(const TaylorXY& f) {
  return compose_with(f, [](double a, int k_max, double* d) {
    double sa = std::sin(a), ca = std::cos(a);
    const double cycle[4] = {sa, ca, -sa, -ca};
    for (int k = 0; k <= k_max; ++k) d[k] = cycle[k % 4];
  }, "sin", false);
}

TaylorXY cos(const TaylorXY& f) {
  return compose_with(f, [](double a, int k_max, double* d) {
    double sa = std::sin(a), ca = std::cos(a);
    const double cycle[4] = {ca, -sa, -ca, sa};
    for (int k = 0; k <= k_max; ++k) d[k] = cycle[k % 4];
  }, "cos", false);
}

TaylorXY pow(const TaylorXY& f, double p) {
  return compose_with(f, [p](double a, int k_max, double* d) {
    d[0] = std::pow(a, p);
    double e = p;
    for (int k = 1; k <= k_max; ++k) {
      d[k] = d[k - 1] * e / a;
      e -= 1.0;
    }
  }, "pow", true);
}

TaylorXY reciprocal(const TaylorXY& f) {
  if (f.value() == 0.0) throw EvaluationError("division by a series with zero value");
  return compose_with(f, [](double a, int k_max, double* d) {
    d[0] = 1.0 / a;
    double fact_sign = -1.0;
    for (int k = 1; k <= k_max; ++k) {
      d[k] = fact_sign * factorial(k) / std::pow(a, k + 1);
      fact_sign = -fact_sign;
    }
  }, "reciprocal", false);
}

}  // namespace finsler
