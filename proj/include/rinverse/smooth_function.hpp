#pragma once

#include <memory>
#include <vector>

#include "rinverse/quadrature.hpp"
#include "rinverse/transforms.hpp"

namespace rinverse {

namespace detail {

/// Truncated multivariate composition: given the jet of G at q and jets
/// g_1..g_n with constant terms q (the coordinates of an inner map at x),
/// returns the jet of G o g at x. Exact through the shared order because the
/// shifted arguments have zero constant term.
inline Jet compose_jet(const Jet& outer, const std::vector<Jet>& coord_jets) {
  const int n = outer.dimension();
  const int m = outer.order();
  if (static_cast<int>(coord_jets.size()) != n)
    throw ShapeError("compose_jet: coordinate jet count mismatch");
  const Vec& base = coord_jets[0].base_point();

  std::vector<std::vector<Jet>> powers(n);  // powers[i][k] = (g_i - q_i)^k
  for (int i = 0; i < n; ++i) {
    Jet w = coord_jets[i];
    w[0] = Complex(0.0, 0.0);
    powers[i].push_back(Jet::constant(w.dimension(), m, base, Complex(1.0, 0.0)));
    for (int k = 1; k <= m; ++k) powers[i].push_back(jet_mul(powers[i][k - 1], w));
  }

  Jet result = Jet::zero(coord_jets[0].dimension(), m, base);
  for (std::size_t pos = 0; pos < outer.size(); ++pos) {
    const Complex c = outer[pos];
    if (c == Complex(0.0, 0.0)) continue;
    const MultiIndex& alpha = outer.layout().index(pos);
    Jet term = Jet::constant(result.dimension(), m, base, c);
    for (int i = 0; i < n; ++i)
      if (alpha[i] > 0) term = jet_mul(term, powers[i][alpha[i]]);
    result = jet_add(result, term);
  }
  return result;
}

}  // namespace detail

/// A smooth function on R^n that can report its truncated Taylor expansion at
/// any point. Beyond closed-form expressions this covers transport integrals
/// (whose jets follow the derivative-propagation identities below) and
/// compositions with smooth changes of variables, so operator pipelines stay
/// first-class functions.
class SmoothFunction {
 public:
  SmoothFunction() : SmoothFunction(symbolic(cnum(0.0))) {}

  static SmoothFunction symbolic(Expression e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Symbolic;
    n->expr = std::move(e);
    return SmoothFunction(std::move(n));
  }

  /// x -> integral_0^{x_axis} inner(x with x_axis = t) e^{lambda (x_axis - t)} dt.
  static SmoothFunction transport(SmoothFunction inner, int axis, Complex lambda,
                                  QuadratureConfig quad) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Transport;
    n->inner = inner.node_;
    n->axis = axis;
    n->lambda = lambda;
    n->quad = quad;
    return SmoothFunction(std::move(n));
  }

  /// inner o map. Collapses to substitution when inner is symbolic.
  static SmoothFunction pullback(SmoothFunction inner, SmoothMap map) {
    if (map.is_identity()) return inner;
    if (inner.node_->kind == Kind::Symbolic)
      return symbolic(pullback_expression(inner.node_->expr, map));
    if (inner.node_->kind == Kind::Pullback) {
      // (G o M1) o M2 = G o (M2 then M1 applied after): chain applies left to right.
      const SmoothMap combined = SmoothMap::chain({map, inner.node_->map});
      auto n = std::make_shared<Node>();
      n->kind = Kind::Pullback;
      n->inner = inner.node_->inner;
      n->map = combined;
      return SmoothFunction(std::move(n));
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::Pullback;
    n->inner = inner.node_;
    n->map = std::move(map);
    return SmoothFunction(std::move(n));
  }

  static SmoothFunction scaled(SmoothFunction inner, Complex factor) {
    if (inner.node_->kind == Kind::Symbolic)
      return symbolic(mul(cnum(factor), inner.node_->expr));
    auto n = std::make_shared<Node>();
    n->kind = Kind::Scaled;
    n->inner = inner.node_;
    n->scale = factor;
    return SmoothFunction(std::move(n));
  }

  bool is_symbolic() const { return node_->kind == Kind::Symbolic; }
  const Expression& as_expression() const {
    if (!is_symbolic()) throw ConfigError("SmoothFunction: not a symbolic node");
    return node_->expr;
  }

  Complex value(const Vec& x) const { return jet_at(x, 0).value(); }

  Jet jet_at(const Vec& x, int order) const { return jet_node(node_, x, order); }

 private:
  enum class Kind { Symbolic, Transport, Pullback, Scaled };

  struct Node {
    Kind kind;
    Expression expr;               // Symbolic
    std::shared_ptr<const Node> inner;
    int axis = 0;                  // Transport
    Complex lambda{0.0, 0.0};      // Transport
    QuadratureConfig quad;         // Transport
    SmoothMap map;                 // Pullback
    Complex scale{1.0, 0.0};       // Scaled
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit SmoothFunction(NodePtr node) : node_(std::move(node)) {}

  static Jet jet_node(const NodePtr& n, const Vec& x, int order) {
    switch (n->kind) {
      case Kind::Symbolic:
        return n->expr.jet(x, order);
      case Kind::Scaled:
        return jet_scale(jet_node(n->inner, x, order), n->scale);
      case Kind::Pullback: {
        const std::vector<Expression> coords = n->map.coordinate_expressions();
        std::vector<Jet> coord_jets;
        Vec q(coords.size());
        for (std::size_t i = 0; i < coords.size(); ++i) {
          coord_jets.push_back(coords[i].jet(x, order));
          q[i] = coord_jets[i].value().real();
        }
        const Jet inner_jet = jet_node(n->inner, q, order);
        return detail::compose_jet(inner_jet, coord_jets);
      }
      case Kind::Transport:
        return transport_jet_node(n, x, order);
    }
    throw ConfigError("SmoothFunction: unknown node");
  }

  // Jet of the transport integral S at x, assembled from
  //   D^a (S G) = S (D^a G)                             for a_axis = 0,
  //   D_axis^b D^a (S G)
  //     = sum_{l<b} lambda^l D_axis^{b-l-1} D^a G + lambda^b S (D^a G)
  // with the S(D^a G) integrals sharing one adaptive panel subdivision.
  static Jet transport_jet_node(const NodePtr& n, const Vec& x, int order) {
    const int dim = static_cast<int>(x.size());
    const int axis = n->axis;
    if (axis < 0 || axis >= dim) throw ConfigError("transport: axis out of range");
    const double xj = x[axis];
    const Complex lambda = n->lambda;

    const auto layout = JetLayout::get(dim, order);
    const std::size_t sz = layout->size();

    // Fiber integrals of every derivative coefficient of the inner function.
    std::vector<Complex> integrals(sz, Complex(0.0, 0.0));
    if (xj != 0.0) {
      const double lo = std::min(0.0, xj), hi = std::max(0.0, xj);
      const double sign = xj >= 0.0 ? 1.0 : -1.0;
      VectorIntegrand integrand = [&](double t, Complex* out) {
        Vec y(x);
        y[axis] = t;
        const Jet g = jet_node(n->inner, y, order);
        const Complex kernel = std::exp(lambda * (xj - t));
        for (std::size_t i = 0; i < sz; ++i) out[i] = g[i] * kernel;
      };
      integrals = integrate_adaptive(integrand, sz, lo, hi, n->quad);
      for (Complex& v : integrals) v *= sign;
    }

    const Jet at_x = jet_node(n->inner, x, order);

    // lambda^l for l = 0..order by repeated multiplication (exact at 0).
    std::vector<Complex> lambda_pow(static_cast<std::size_t>(order) + 1, Complex(1.0, 0.0));
    for (int l = 1; l <= order; ++l) lambda_pow[l] = lambda_pow[l - 1] * lambda;

    Jet result(layout, x);
    for (std::size_t pos = 0; pos < sz; ++pos) {
      const MultiIndex& gamma = layout->index(pos);
      const int b = gamma[axis];
      std::vector<int> alpha_entries(gamma.entries());
      alpha_entries[axis] = 0;
      const MultiIndex alpha(alpha_entries);

      const Complex fiber_integral =
          alpha.factorial() * integrals[layout->position(alpha)];
      Complex d_gamma;
      if (b == 0) {
        d_gamma = fiber_integral;
      } else {
        Complex boundary(0.0, 0.0);
        for (int l = 0; l < b; ++l)
          boundary += lambda_pow[l] * at_x.derivative_value(alpha.plus_unit(axis, b - l - 1));
        d_gamma = boundary + lambda_pow[b] * fiber_integral;
      }
      result[pos] = d_gamma / gamma.factorial();
    }
    return result;
  }

  NodePtr node_;
};

}  // namespace rinverse
