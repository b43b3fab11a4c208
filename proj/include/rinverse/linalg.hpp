#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rinverse/errors.hpp"

namespace rinverse {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec axpy(double alpha, const Vec& x, const Vec& y) {
  Vec r(y);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += alpha * x[i];
  return r;
}

inline Vec scaled(const Vec& x, double alpha) {
  Vec r(x);
  for (double& v : r) v *= alpha;
  return r;
}

inline Vec unit_vector(std::size_t n, std::size_t axis) {
  Vec e(n, 0.0);
  e[axis] = 1.0;
  return e;
}

/// Dense square matrix, row-major.
struct Mat {
  int n = 0;
  std::vector<double> a;  // n*n, a[i*n+j]

  Mat() = default;
  explicit Mat(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

  Vec apply(const Vec& x) const {
    Vec y(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) y[i] += (*this)(i, j) * x[j];
    return y;
  }

  Mat transposed() const {
    Mat t(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vec column(int j) const {
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = (*this)(i, j);
    return c;
  }
};

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int k = 0; k < a.n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < a.n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// max_ij |(A^T A - I)_ij|, the orthogonality defect.
inline double orthogonality_defect(const Mat& a) {
  const Mat g = matmul(a.transposed(), a);
  double d = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) d = std::max(d, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return d;
}

/// Completes the unit vector v to an orthonormal basis {v, w_2, ..., w_n}.
/// Seeds with the standard basis, drops the e_i most collinear with v
/// (largest |<e_i, v>|, smallest i on ties), then runs Gram-Schmidt.
/// Returns the matrix with these vectors as columns, so column 0 is v.
inline Mat complete_orthonormal_basis(const Vec& v) {
  const int n = static_cast<int>(v.size());
  if (std::abs(norm(v) - 1.0) > 1e-12)
    throw NumericError("complete_orthonormal_basis: direction is not a unit vector");

  int drop = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      drop = i;
    }
  }

  std::vector<Vec> basis;
  basis.push_back(v);
  for (int i = 0; i < n; ++i)
    if (i != drop) basis.push_back(unit_vector(n, i));

  // Modified Gram-Schmidt; the seed set is linearly independent by the drop rule.
  for (std::size_t k = 1; k < basis.size(); ++k) {
    for (std::size_t l = 0; l < k; ++l)
      basis[k] = axpy(-dot(basis[l], basis[k]), basis[l], basis[k]);
    const double nk = norm(basis[k]);
    if (nk < 1e-10) throw NumericError("complete_orthonormal_basis: degenerate seed basis");
    basis[k] = scaled(basis[k], 1.0 / nk);
  }

  Mat m(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = basis[static_cast<std::size_t>(j)][i];
  return m;
}

}  // namespace rinverse
