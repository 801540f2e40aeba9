#pragma once

// Small dense linear algebra for chart dimensions n <= 4. Everything is
// stack-allocated with a runtime dimension; storage is row-major.

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>

namespace finsler {

inline constexpr int kMaxDim = 4;

struct Vec {
  int n = 0;
  std::array<double, kMaxDim> a{};

  Vec() = default;
  explicit Vec(int dim) : n(dim) { assert(dim >= 0 && dim <= kMaxDim); }
  Vec(std::initializer_list<double> vals) : n(static_cast<int>(vals.size())) {
    assert(n <= kMaxDim);
    int i = 0;
    for (double v : vals) a[i++] = v;
  }

  double& operator[](int i) { assert(i >= 0 && i < n); return a[i]; }
  double operator[](int i) const { assert(i >= 0 && i < n); return a[i]; }
};

struct Mat {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim> a{};

  Mat() = default;
  explicit Mat(int dim) : n(dim) { assert(dim >= 0 && dim <= kMaxDim); }

  double& operator()(int i, int j) { assert(i >= 0 && i < n && j >= 0 && j < n); return a[i * kMaxDim + j]; }
  double operator()(int i, int j) const { assert(i >= 0 && i < n && j >= 0 && j < n); return a[i * kMaxDim + j]; }

  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Rank-3 and rank-4 tensors over one chart; all slots share the dimension.
struct Ten3 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};
  explicit Ten3(int dim = 0) : n(dim) {}
  double& operator()(int i, int j, int k) { return a[(i * kMaxDim + j) * kMaxDim + k]; }
  double operator()(int i, int j, int k) const { return a[(i * kMaxDim + j) * kMaxDim + k]; }
};

struct Ten4 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> a{};
  explicit Ten4(int dim = 0) : n(dim) {}
  double& operator()(int i, int j, int k, int l) { return a[((i * kMaxDim + j) * kMaxDim + k) * kMaxDim + l]; }
  double operator()(int i, int j, int k, int l) const { return a[((i * kMaxDim + j) * kMaxDim + k) * kMaxDim + l]; }
};

inline Vec operator+(const Vec& u, const Vec& v) {
  assert(u.n == v.n);
  Vec w(u.n);
  for (int i = 0; i < u.n; ++i) w[i] = u[i] + v[i];
  return w;
}
inline Vec operator-(const Vec& u, const Vec& v) {
  assert(u.n == v.n);
  Vec w(u.n);
  for (int i = 0; i < u.n; ++i) w[i] = u[i] - v[i];
  return w;
}
inline Vec operator*(double c, const Vec& v) {
  Vec w(v.n);
  for (int i = 0; i < v.n; ++i) w[i] = c * v[i];
  return w;
}
inline Mat operator+(const Mat& x, const Mat& y) {
  assert(x.n == y.n);
  Mat z(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) z(i, j) = x(i, j) + y(i, j);
  return z;
}
inline Mat operator-(const Mat& x, const Mat& y) {
  assert(x.n == y.n);
  Mat z(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) z(i, j) = x(i, j) - y(i, j);
  return z;
}
inline Mat operator*(double c, const Mat& x) {
  Mat z(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) z(i, j) = c * x(i, j);
  return z;
}

inline double dot(const Vec& u, const Vec& v) {
  assert(u.n == v.n);
  double s = 0;
  for (int i = 0; i < u.n; ++i) s += u[i] * v[i];
  return s;
}

// g-weighted inner product u^i g_ij v^j.
inline double inner(const Mat& g, const Vec& u, const Vec& v) {
  double s = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) s += u[i] * g(i, j) * v[j];
  return s;
}

inline Vec matvec(const Mat& m, const Vec& v) {
  assert(m.n == v.n);
  Vec w(v.n);
  for (int i = 0; i < m.n; ++i) {
    double s = 0;
    for (int j = 0; j < m.n; ++j) s += m(i, j) * v[j];
    w[i] = s;
  }
  return w;
}

inline Mat matmul(const Mat& x, const Mat& y) {
  assert(x.n == y.n);
  Mat z(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      double s = 0;
      for (int k = 0; k < x.n; ++k) s += x(i, k) * y(k, j);
      z(i, j) = s;
    }
  return z;
}

inline Mat transpose(const Mat& m) {
  Mat t(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) t(i, j) = m(j, i);
  return t;
}

inline double max_abs(const Vec& v) {
  double m = 0;
  for (int i = 0; i < v.n; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}
inline double max_abs(const Mat& m) {
  double r = 0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r = std::max(r, std::abs(m(i, j)));
  return r;
}
inline double norm1(const Mat& m) {  // max column sum
  double r = 0;
  for (int j = 0; j < m.n; ++j) {
    double c = 0;
    for (int i = 0; i < m.n; ++i) c += std::abs(m(i, j));
    r = std::max(r, c);
  }
  return r;
}
inline double frobenius(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

// LU decomposition with partial pivoting; factors once, solves many.
struct Lu {
  int n = 0;
  Mat lu;
  std::array<int, kMaxDim> perm{};
  int sign = 1;
  bool singular = false;

  explicit Lu(const Mat& m) : n(m.n), lu(m) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int k = 0; k < n; ++k) {
      int piv = k;
      double best = std::abs(lu(k, k));
      for (int i = k + 1; i < n; ++i) {
        double v = std::abs(lu(i, k));
        if (v > best) { best = v; piv = i; }
      }
      if (best == 0.0) { singular = true; return; }
      if (piv != k) {
        for (int j = 0; j < n; ++j) std::swap(lu.a[piv * kMaxDim + j], lu.a[k * kMaxDim + j]);
        std::swap(perm[piv], perm[k]);
        sign = -sign;
      }
      for (int i = k + 1; i < n; ++i) {
        lu(i, k) /= lu(k, k);
        for (int j = k + 1; j < n; ++j) lu(i, j) -= lu(i, k) * lu(k, j);
      }
    }
  }

  double det() const {
    if (singular) return 0.0;
    double d = sign;
    for (int i = 0; i < n; ++i) d *= lu(i, i);
    return d;
  }

  Vec solve(const Vec& b) const {
    assert(!singular);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
      x[i] /= lu(i, i);
    }
    return x;
  }

  Mat inverse() const {
    Mat inv(n);
    for (int c = 0; c < n; ++c) {
      Vec e(n);
      e[c] = 1.0;
      Vec col = solve(e);
      for (int r = 0; r < n; ++r) inv(r, c) = col[r];
    }
    return inv;
  }
};

inline double det(const Mat& m) { return Lu(m).det(); }

inline Mat inverse(const Mat& m) {
  Lu lu(m);
  assert(!lu.singular);
  return lu.inverse();
}

// Adjugate via cofactors; well-defined for singular input too.
inline Mat adjugate(const Mat& m) {
  const int n = m.n;
  Mat adj(n);
  if (n == 1) { adj(0, 0) = 1.0; return adj; }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      Mat minor(n - 1);
      int mi = 0;
      for (int i = 0; i < n; ++i) {
        if (i == r) continue;
        int mj = 0;
        for (int j = 0; j < n; ++j) {
          if (j == c) continue;
          minor(mi, mj) = m(i, j);
          ++mj;
        }
        ++mi;
      }
      double cof = det(minor);
      if ((r + c) % 2 != 0) cof = -cof;
      adj(c, r) = cof;  // adj = cofactor transpose
    }
  return adj;
}

// Cheap 1-norm condition estimate; infinite when singular.
inline double cond1(const Mat& m) {
  Lu lu(m);
  if (lu.singular) return std::numeric_limits<double>::infinity();
  return norm1(m) * norm1(lu.inverse());
}

// Permutation symbols (no metric weight).
inline int perm_sign3(int i, int j, int k) {
  if (i == j || j == k || i == k) return 0;
  int s = 1;
  if (i > j) { std::swap(i, j); s = -s; }
  if (j > k) { std::swap(j, k); s = -s; }
  if (i > j) { std::swap(i, j); s = -s; }
  return s;
}
inline int perm_sign4(int i, int j, int k, int l) {
  int v[4] = {i, j, k, l};
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      if (v[a] == v[b]) return 0;
  int s = 1;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      if (v[a] > v[b]) { std::swap(v[a], v[b]); s = -s; }
  return s;
}

}  // namespace finsler
