#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "rinverse/jet.hpp"

namespace rinverse {

/// Adaptive composite Gauss-Legendre configuration. Refinement always bisects
/// the panel with the largest error estimate (leftmost on ties), so results
/// are deterministic.
struct QuadratureConfig {
  int nodes = 8;           // Gauss-Legendre nodes per panel
  int initial_panels = 4;
  double tolerance = 1e-10;  // absolute, summed over panels
  int max_depth = 20;

  QuadratureConfig with_tolerance(double tol) const {
    QuadratureConfig q = *this;
    q.tolerance = tol;
    return q;
  }

  void validate() const {
    if (nodes < 2 || nodes > 64) throw ConfigError("quadrature: nodes must be in [2, 64]");
    if (initial_panels < 1) throw ConfigError("quadrature: initial_panels must be >= 1");
    if (tolerance <= 0.0) throw ConfigError("quadrature: tolerance must be > 0");
    if (max_depth < 1) throw ConfigError("quadrature: max_depth must be >= 1");
  }
};

namespace detail {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Nodes and weights by Newton iteration on the Legendre polynomial.
inline const GaussRule& gauss_rule(int n) {
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace detail

/// Writes `size` components of the integrand at t into out.
using VectorIntegrand = std::function<void(double t, Complex* out)>;

/// Integral of a smooth vector-valued integrand over [a, b], a <= b.
/// All components share one panel subdivision. Throws QuadratureError with
/// the achieved estimate when the tolerance is unreachable at max_depth.
inline std::vector<Complex> integrate_adaptive(const VectorIntegrand& f, std::size_t size,
                                               double a, double b,
                                               const QuadratureConfig& config) {
  config.validate();
  std::vector<Complex> result(size, Complex(0.0, 0.0));
  if (a == b) return result;
  if (a > b) throw NumericError("integrate_adaptive: reversed interval");

  const detail::GaussRule& rule = detail::gauss_rule(config.nodes);
  std::vector<Complex> buffer(size);

  auto gauss_panel = [&](double lo, double hi) {
    std::vector<Complex> sum(size, Complex(0.0, 0.0));
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int k = 0; k < config.nodes; ++k) {
      f(mid + half * rule.nodes[k], buffer.data());
      const double w = half * rule.weights[k];
      for (std::size_t i = 0; i < size; ++i) sum[i] += w * buffer[i];
    }
    return sum;
  };

  struct Panel {
    double lo, hi;
    int depth;
    std::vector<Complex> left, right;  // halved evaluations; their sum is the value
    double err;
  };

  auto make_panel = [&](double lo, double hi, int depth) {
    Panel p{lo, hi, depth, {}, {}, 0.0};
    const std::vector<Complex> coarse = gauss_panel(lo, hi);
    const double mid = 0.5 * (lo + hi);
    p.left = gauss_panel(lo, mid);
    p.right = gauss_panel(mid, hi);
    for (std::size_t i = 0; i < size; ++i)
      p.err = std::max(p.err, std::abs(coarse[i] - (p.left[i] + p.right[i])));
    return p;
  };

  std::vector<Panel> panels;
  for (int k = 0; k < config.initial_panels; ++k) {
    const double lo = a + (b - a) * k / config.initial_panels;
    const double hi = a + (b - a) * (k + 1) / config.initial_panels;
    panels.push_back(make_panel(lo, hi, 0));
  }

  for (;;) {
    double total_err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      total_err += panels[i].err;
      if (panels[i].err > panels[worst].err) worst = i;
    }
    if (total_err <= config.tolerance) break;
    if (panels[worst].depth >= config.max_depth)
      throw QuadratureError("integrate_adaptive: tolerance not reached at max depth; achieved " +
                                detail::format_double(total_err),
                            total_err);
    const Panel split = panels[worst];
    const double mid = 0.5 * (split.lo + split.hi);
    panels[worst] = make_panel(split.lo, mid, split.depth + 1);
    panels.push_back(make_panel(mid, split.hi, split.depth + 1));
  }

  // Deterministic reduction: sorted by left endpoint.
  std::sort(panels.begin(), panels.end(),
            [](const Panel& x, const Panel& y) { return x.lo < y.lo; });
  for (const Panel& p : panels)
    for (std::size_t i = 0; i < size; ++i) result[i] += p.left[i] + p.right[i];
  return result;
}

/// Scalar convenience wrapper.
inline Complex integrate_scalar(const std::function<Complex(double)>& f, double a, double b,
                                const QuadratureConfig& config) {
  auto wrap = [&f](double t, Complex* out) { out[0] = f(t); };
  return integrate_adaptive(wrap, 1, a, b, config)[0];
}

}  // namespace rinverse
