#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "rinverse/linalg.hpp"
#include "rinverse/multi_index.hpp"

namespace rinverse {

using Complex = std::complex<double>;

/// Truncated multivariate Taylor expansion at a real base point.
///
/// Coefficients follow the Taylor convention: the entry at multi-index a
/// stores D^a f(base) / a!. Derivatives are recovered with derivative_value.
/// Coefficients are stored densely in graded-lexicographic order.
class Jet {
 public:
  Jet(std::shared_ptr<const JetLayout> layout, Vec base_point)
      : layout_(std::move(layout)),
        base_(std::move(base_point)),
        coeffs_(layout_->size(), Complex(0.0, 0.0)) {
    if (static_cast<int>(base_.size()) != layout_->dimension())
      throw ShapeError("Jet: base point dimension mismatch");
  }

  static Jet zero(int n, int m, const Vec& base) { return Jet(JetLayout::get(n, m), base); }

  static Jet constant(int n, int m, const Vec& base, Complex value) {
    Jet j(JetLayout::get(n, m), base);
    j.coeffs_[0] = value;
    return j;
  }

  /// Taylor expansion of the coordinate function x_axis.
  static Jet coordinate(int n, int m, const Vec& base, int axis) {
    Jet j(JetLayout::get(n, m), base);
    j.coeffs_[0] = Complex(base.at(axis), 0.0);
    if (m >= 1) j.coeffs_[j.layout_->position(MultiIndex::unit(n, axis))] = Complex(1.0, 0.0);
    return j;
  }

  int dimension() const { return layout_->dimension(); }
  int order() const { return layout_->order(); }
  const Vec& base_point() const { return base_; }
  const JetLayout& layout() const { return *layout_; }
  std::shared_ptr<const JetLayout> layout_ptr() const { return layout_; }

  std::size_t size() const { return coeffs_.size(); }
  Complex& operator[](std::size_t pos) { return coeffs_[pos]; }
  Complex operator[](std::size_t pos) const { return coeffs_[pos]; }

  Complex coeff(const MultiIndex& a) const { return coeffs_[layout_->position(a)]; }
  void set_coeff(const MultiIndex& a, Complex v) { coeffs_[layout_->position(a)] = v; }

  /// Value at the base point (constant term).
  Complex value() const { return coeffs_[0]; }

  /// D^a f(base) = coeff(a) * a!.
  Complex derivative_value(const MultiIndex& a) const { return coeff(a) * a.factorial(); }

  bool same_shape(const Jet& other) const {
    return layout_ == other.layout_ && base_ == other.base_;
  }

 private:
  std::shared_ptr<const JetLayout> layout_;
  Vec base_;
  std::vector<Complex> coeffs_;
};

namespace detail {
inline void require_same_shape(const Jet& a, const Jet& b, const char* op) {
  if (a.layout_ptr() != b.layout_ptr())
    throw ShapeError(std::string(op) + ": dimension or order mismatch");
  if (a.base_point() != b.base_point())
    throw ShapeError(std::string(op) + ": base point mismatch");
}
}  // namespace detail

inline Jet jet_add(const Jet& a, const Jet& b) {
  detail::require_same_shape(a, b, "jet_add");
  Jet r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Jet jet_sub(const Jet& a, const Jet& b) {
  detail::require_same_shape(a, b, "jet_sub");
  Jet r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline Jet jet_scale(const Jet& a, Complex s) {
  Jet r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= s;
  return r;
}

inline Jet jet_neg(const Jet& a) { return jet_scale(a, Complex(-1.0, 0.0)); }

/// Truncated Cauchy product: c_g = sum_{a+b=g} a_a b_b for |g| <= order.
inline Jet jet_mul(const Jet& a, const Jet& b) {
  detail::require_same_shape(a, b, "jet_mul");
  const JetLayout& layout = a.layout();
  Jet r(a.layout_ptr(), a.base_point());
  const std::size_t sz = a.size();
  for (std::size_t i = 0; i < sz; ++i) {
    const Complex ai = a[i];
    if (ai == Complex(0.0, 0.0)) continue;
    for (std::size_t j = 0; j < sz; ++j) {
      const std::size_t k = layout.product_position(i, j);
      if (k == JetLayout::npos) continue;
      r[k] += ai * b[j];
    }
  }
  return r;
}

/// Reduces the order of a jet, keeping coefficients with |a| <= new_order.
inline Jet jet_truncate(const Jet& a, int new_order) {
  if (new_order > a.order()) throw ShapeError("jet_truncate: cannot raise order");
  if (new_order == a.order()) return a;
  Jet r(JetLayout::get(a.dimension(), new_order), a.base_point());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i];  // grlex order is graded
  return r;
}

/// Jet of the partial derivative D_axis f, one order lower.
inline Jet jet_derivative(const Jet& a, int axis) {
  if (a.order() < 1) throw InsufficientOrderError("jet_derivative: order 0 jet");
  Jet r(JetLayout::get(a.dimension(), a.order() - 1), a.base_point());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const MultiIndex& beta = r.layout().index(i);
    r[i] = a.coeff(beta.plus_unit(axis)) * static_cast<double>(beta[axis] + 1);
  }
  return r;
}

/// Jet of the directional derivative sum_j v_j D_j f, one order lower.
inline Jet jet_directional(const Jet& a, const Vec& v) {
  if (static_cast<int>(v.size()) != a.dimension())
    throw ShapeError("jet_directional: direction dimension mismatch");
  Jet r(JetLayout::get(a.dimension(), a.order() - 1), a.base_point());
  for (int j = 0; j < a.dimension(); ++j) {
    if (v[j] == 0.0) continue;
    r = jet_add(r, jet_scale(jet_derivative(a, j), Complex(v[j], 0.0)));
  }
  return r;
}

/// Directional derivative sum_j v_j D_j f at the base point.
inline Complex directional_derivative(const Jet& a, const Vec& v) {
  if (static_cast<int>(v.size()) != a.dimension())
    throw ShapeError("directional_derivative: direction dimension mismatch");
  if (a.order() < 1)
    throw InsufficientOrderError("directional_derivative: jet order must be >= 1");
  Complex s(0.0, 0.0);
  for (int j = 0; j < a.dimension(); ++j) {
    if (v[j] == 0.0) continue;
    s += v[j] * a.coeff(MultiIndex::unit(a.dimension(), j));
  }
  return s;
}

namespace detail {

/// Evaluates sum_k series[k] * (a - a0)^k in the truncated jet algebra.
/// series[k] must be g^(k)(a0)/k! for the kernel g.
inline Jet compose_series(const Jet& a, const std::vector<Complex>& series) {
  Jet w = a;
  w[0] = Complex(0.0, 0.0);  // nilpotent part
  const int m = a.order();
  Jet r = Jet::constant(a.dimension(), m, a.base_point(), series[m]);
  for (int k = m - 1; k >= 0; --k) {
    r = jet_mul(r, w);
    r[0] += series[k];
  }
  return r;
}

}  // namespace detail

enum class Kernel { Exp, Sin, Cos, Recip, Rexp };

inline const char* kernel_name(Kernel k) {
  switch (k) {
    case Kernel::Exp: return "exp";
    case Kernel::Sin: return "sin";
    case Kernel::Cos: return "cos";
    case Kernel::Recip: return "recip";
    case Kernel::Rexp: return "rexp";
  }
  return "?";
}

/// Composition g(a) for a univariate analytic kernel g, truncated at a.order().
///
/// rexp(u) = exp(-1/u) for u > 0 and 0 for u <= 0; it is flat at 0, so the
/// composed jet is exactly zero whenever the constant term is <= 0.
inline Jet jet_compose_univariate(Kernel g, const Jet& a) {
  const int m = a.order();
  const Complex c0 = a.value();
  std::vector<Complex> series(static_cast<std::size_t>(m) + 1);
  switch (g) {
    case Kernel::Exp: {
      const Complex e = std::exp(c0);
      double kfac = 1.0;
      for (int k = 0; k <= m; ++k) {
        if (k > 0) kfac *= k;
        series[k] = e / kfac;
      }
      return detail::compose_series(a, series);
    }
    case Kernel::Sin:
    case Kernel::Cos: {
      const Complex s = std::sin(c0), c = std::cos(c0);
      const Complex cycle[4] = {s, c, -s, -c};
      const int shift = (g == Kernel::Cos) ? 1 : 0;
      double kfac = 1.0;
      for (int k = 0; k <= m; ++k) {
        if (k > 0) kfac *= k;
        series[k] = cycle[(k + shift) % 4] / kfac;
      }
      return detail::compose_series(a, series);
    }
    case Kernel::Recip: {
      if (c0 == Complex(0.0, 0.0))
        throw DomainError("jet_compose_univariate: recip of jet with zero constant term");
      Complex p = 1.0 / c0;
      for (int k = 0; k <= m; ++k) {
        series[k] = (k % 2 == 0) ? p : -p;
        p /= c0;
      }
      return detail::compose_series(a, series);
    }
    case Kernel::Rexp: {
      if (c0.real() <= 0.0) return Jet::zero(a.dimension(), m, a.base_point());
      return jet_compose_univariate(Kernel::Exp,
                                    jet_neg(jet_compose_univariate(Kernel::Recip, a)));
    }
  }
  throw DomainError("jet_compose_univariate: unknown kernel");
}

/// a^k for integer k; negative k goes through recip and needs a nonzero
/// constant term. k = 0 yields the constant jet 1.
inline Jet jet_pow_int(const Jet& a, int k) {
  if (k < 0) return jet_compose_univariate(Kernel::Recip, jet_pow_int(a, -k));
  Jet r = Jet::constant(a.dimension(), a.order(), a.base_point(), Complex(1.0, 0.0));
  Jet p = a;
  int e = k;
  while (e > 0) {
    if (e & 1) r = jet_mul(r, p);
    e >>= 1;
    if (e > 0) p = jet_mul(p, p);
  }
  return r;
}

/// a^s for real s, defined for real constant term >= 0. At 0 the function is
/// only finitely smooth; a non-finite Taylor coefficient raises DomainError.
inline Jet jet_pow_real(const Jet& a, double s) {
  const Complex c0 = a.value();
  if (std::abs(c0.imag()) > 1e-12)
    throw DomainError("jet_pow_real: complex base");
  const double u0 = c0.real();
  if (u0 < 0.0) throw DomainError("jet_pow_real: negative base");
  const int m = a.order();
  std::vector<Complex> series(static_cast<std::size_t>(m) + 1);
  double binom = 1.0;  // binom(s, k)
  for (int k = 0; k <= m; ++k) {
    if (k > 0) binom *= (s - (k - 1)) / k;
    const double coeff = binom * std::pow(u0, s - k);
    if (!std::isfinite(coeff))
      throw DomainError("jet_pow_real: non-finite Taylor coefficient at base 0");
    series[k] = Complex(coeff, 0.0);
  }
  return detail::compose_series(a, series);
}

namespace detail {

/// Monomial coefficients of the C^k smoothstep ramp on [0, 1]:
/// s_k(u) = c * integral_0^u t^k (1-t)^k dt with s_k(1) = 1.
/// Returned as coefficients of u^(k+1), ..., u^(2k+1).
inline std::vector<double> smoothstep_coefficients(int k) {
  std::vector<double> c(static_cast<std::size_t>(k) + 1);
  double binom = 1.0;
  for (int i = 0; i <= k; ++i) {
    if (i > 0) binom *= static_cast<double>(k - i + 1) / i;
    c[i] = (i % 2 == 0 ? 1.0 : -1.0) * binom / (k + 1 + i);
  }
  double total = 0.0;
  for (double v : c) total += v;
  for (double& v : c) v /= total;
  return c;
}

}  // namespace detail

/// C^k polynomial ramp: 0 for u <= 0, 1 for u >= 1, monotone in between.
/// Boundary base points take the flat branch.
inline Jet jet_smoothstep(const Jet& a, int k) {
  if (k < 1) throw DomainError("jet_smoothstep: smoothness must be >= 1");
  const double u0 = a.value().real();
  const int m = a.order();
  if (u0 <= 0.0) return Jet::zero(a.dimension(), m, a.base_point());
  if (u0 >= 1.0) return Jet::constant(a.dimension(), m, a.base_point(), Complex(1.0, 0.0));
  const std::vector<double> c = detail::smoothstep_coefficients(k);
  // Horner over u^(k+1) * (c_0 + c_1 u + ... + c_k u^k)
  Jet poly = Jet::constant(a.dimension(), m, a.base_point(), Complex(c[k], 0.0));
  for (int i = k - 1; i >= 0; --i) {
    poly = jet_mul(poly, a);
    poly[0] += Complex(c[i], 0.0);
  }
  return jet_mul(poly, jet_pow_int(a, k + 1));
}

/// Largest coefficient magnitude difference; shapes must match.
inline double jet_max_diff(const Jet& a, const Jet& b) {
  detail::require_same_shape(a, b, "jet_max_diff");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace rinverse
