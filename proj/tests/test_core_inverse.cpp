#include <catch2/catch_amalgamated.hpp>

#include "rinverse/core_inverse.hpp"

#include "oracles.hpp"

using namespace rinverse;

namespace {
const QuadratureConfig kQuad;
}

TEST_CASE("transport integral values against closed forms") {
  SECTION("constant input, lambda = 0: the fiber coordinate") {
    for (double xj : {0.0, 0.3, 1.0, -0.5}) {
      const Complex got = transport_apply(cnum(1.0), 0, Complex(0.0, 0.0), Vec{xj, 0.2}, kQuad);
      CHECK(std::abs(got - Complex(xj, 0.0)) < 1e-13);
    }
  }

  SECTION("constant input, lambda = 1, unit fiber: e - 1") {
    const Complex got = transport_apply(cnum(1.0), 0, Complex(1.0, 0.0), Vec{1.0, 0.0}, kQuad);
    CHECK(std::abs(got - Complex(std::exp(1.0) - 1.0, 0.0)) < 1e-12);
  }

  SECTION("exponential input with complex lambda") {
    // integral_0^x e^{mu t} e^{lambda (x - t)} dt = (e^{mu x} - e^{lambda x}) / (mu - lambda)
    const double mu = 2.0, xj = 0.7;
    const Complex lambda(0.0, 1.0);
    const Expression f = exp(mul(cnum(mu), var(1)));
    const Complex expected =
        (std::exp(Complex(mu * xj, 0.0)) - std::exp(lambda * xj)) / (Complex(mu, 0.0) - lambda);
    const Complex got = transport_apply(f, 0, lambda, Vec{xj, 0.0}, kQuad);
    CHECK(std::abs(got - expected) < 1e-12);
  }

  SECTION("linearity") {
    std::mt19937 rng(3);
    const Expression f = mul(exp(var(1)), sin(var(2)));
    const Expression g = add(pow_int(var(1), 2), var(2));
    const Complex a(0.8, -0.1), b(-1.2, 0.4);
    const Expression combo = add(mul(cnum(a), f), mul(cnum(b), g));
    const Complex lambda(0.5, 0.5);
    for (int trial = 0; trial < 6; ++trial) {
      const Vec x = oracles::random_point(rng);
      const Complex lhs = transport_apply(combo, 0, lambda, x, kQuad);
      const Complex rhs = a * transport_apply(f, 0, lambda, x, kQuad) +
                          b * transport_apply(g, 0, lambda, x, kQuad);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("transport jets") {
  SECTION("constant input at lambda 0 is the fiber coordinate jet") {
    const Jet j = transport_jet(cnum(1.0), 0, Complex(0.0, 0.0), Vec{0.4, 0.9}, 1, kQuad);
    CHECK(std::abs(j.value() - Complex(0.4, 0.0)) < 1e-13);
    CHECK(std::abs(j.coeff(MultiIndex({1, 0})) - Complex(1.0, 0.0)) < 1e-13);
    CHECK(std::abs(j.coeff(MultiIndex({0, 1}))) < 1e-13);
  }

  SECTION("first axis derivative reproduces the input plus lambda times the value") {
    std::mt19937 rng(5);
    const std::vector<Expression> corpus = oracles::smooth_corpus();
    const std::vector<Complex> lambdas = {Complex(0.0, 0.0), Complex(1.0, 0.0),
                                          Complex(0.3, -0.8)};
    for (const Complex& lambda : lambdas) {
      for (const Expression& f : corpus) {
        const Vec x = oracles::random_point(rng);
        const Jet j = transport_jet(f, 0, lambda, x, 1, kQuad);
        const Complex dj = j.derivative_value(MultiIndex({1, 0}));
        const Complex expected = f.eval(x) + lambda * j.value();
        CHECK(std::abs(dj - expected) < 1e-11);
      }
    }
  }

  SECTION("all coefficients match the symbolic antiderivative for an exponential") {
    // transport of e^{x1+x2} at lambda = 1/2 equals 2 e^{x2} (e^{x1} - e^{x1/2})
    const Expression f = exp(add(var(1), var(2)));
    const Expression closed =
        mul(cnum(2.0), mul(exp(var(2)), sub(exp(var(1)), exp(mul(cnum(0.5), var(1))))));
    const Vec x{0.4, 0.2};
    const Jet got = transport_jet(f, 0, Complex(0.5, 0.0), x, 3, kQuad);
    const Jet expected = closed.jet(x, 3);
    CHECK(jet_max_diff(got, expected) < 1e-9);
  }

  SECTION("coefficients match finite differences of the scalar transport") {
    const Expression f = exp(add(var(1), var(2)));
    const Complex lambda(0.5, 0.0);
    const Vec x{0.4, 0.2};
    QuadratureConfig tight = kQuad;
    tight.tolerance = 1e-13;
    const Jet j = transport_jet(f, 0, lambda, x, 3, tight);
    auto value = [&](const Vec& p) { return transport_apply(f, 0, lambda, p, tight); };
    for (std::size_t pos = 0; pos < j.size(); ++pos) {
      const MultiIndex& a = j.layout().index(pos);
      if (a.order() > 2) continue;  // the eps/h^2 oracle floor takes over above
      const Complex fd = oracles::finite_difference(value, x, a);
      const double scale = std::max(1.0, std::abs(fd));
      CHECK(std::abs(j.derivative_value(a) - fd) / scale < 1e-5);
    }
  }

  SECTION("derivative propagation identities, all orders up to 2") {
    const std::vector<Expression> corpus = {exp(add(var(1), var(2))),
                                            mul(sin(var(1)), cos(var(2))),
                                            add(pow_int(var(1), 3), mul(var(1), var(2)))};
    const Complex lambda(0.7, 0.3);
    for (const Expression& f : corpus) {
      for (int gx = 0; gx < 3; ++gx) {
        for (int gy = 0; gy < 3; ++gy) {
          const Vec x{-0.4 + 0.4 * gx, -0.4 + 0.4 * gy};
          const Jet t_jet = transport_jet(f, 0, lambda, x, 4, kQuad);
          for (int a2 = 0; a2 <= 2; ++a2) {
            const Expression df = derivative(f, MultiIndex({0, a2}));
            const Complex fiber = transport_apply(df, 0, lambda, x, kQuad);
            // zero axis entry: D^a (S F) = S (D^a F)
            CHECK(std::abs(t_jet.derivative_value(MultiIndex({0, a2})) - fiber) < 1e-9);
            // with axis derivatives: boundary sum plus lambda^b times the integral
            for (int b = 1; b <= 2; ++b) {
              Complex boundary(0.0, 0.0), lpow(1.0, 0.0);
              for (int l = 0; l < b; ++l) {
                CHECK(b - l - 1 >= 0);
                Expression term = df;
                for (int rep = 0; rep < b - l - 1; ++rep) term = term.derivative(0);
                boundary += lpow * term.eval(x);
                lpow *= lambda;
              }
              const Complex rhs = boundary + lpow * fiber;
              CHECK(std::abs(t_jet.derivative_value(MultiIndex({b, a2})) - rhs) < 1e-9);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("flat-level right inverse identity on a grid") {
  const std::vector<Expression> corpus = oracles::smooth_corpus();
  const std::vector<Complex> lambdas = {Complex(0.0, 0.0), Complex(1.0, 0.0),
                                        Complex(2.0, 1.0)};
  const double bound = 5.0 * (kQuad.tolerance + 1e-12);
  for (const Complex& lambda : lambdas) {
    for (const Expression& f : corpus) {
      for (int gx = 0; gx < 4; ++gx) {
        for (int gy = 0; gy < 4; ++gy) {
          const Vec x{-0.7 + 0.45 * gx, -0.7 + 0.45 * gy};
          const Jet j = transport_jet(f, 0, lambda, x, 1, kQuad);
          const Complex residual =
              j.derivative_value(MultiIndex({1, 0})) - lambda * j.value() - f.eval(x);
          CHECK(std::abs(residual) <= bound);
        }
      }
    }
  }
}

TEST_CASE("restriction to clouds") {
  const NormalSetDescriptor d = fixtures::k1_e2();
  const SampleCloud cloud = sample_set(d, 4);

  SECTION("zero restricts to the zero field") {
    const WhitneyJetField field = restrict_field(cnum(0.0), cloud, 2);
    for (const Jet& j : field.jets)
      for (std::size_t pos = 0; pos < j.size(); ++pos) CHECK(j[pos] == Complex(0.0, 0.0));
  }

  SECTION("the first coordinate restricts with unit gradient") {
    const WhitneyJetField field = restrict_field(var(1), cloud, 1);
    for (std::size_t i = 0; i < field.size(); ++i) {
      CHECK(field.jets[i].value() == Complex(cloud.points[i][0], 0.0));
      CHECK(field.jets[i].coeff(MultiIndex({1, 0})) == Complex(1.0, 0.0));
      CHECK(field.jets[i].coeff(MultiIndex({0, 1})) == Complex(0.0, 0.0));
    }
  }

  SECTION("restriction commutes with differentiation via the jet shift") {
    std::mt19937 rng(7);
    for (const Expression& f : oracles::smooth_corpus()) {
      const WhitneyJetField high = restrict_field(f, cloud, 3);
      const WhitneyJetField direct = restrict_field(f.derivative(0), cloud, 2);
      for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK(jet_max_diff(jet_derivative(high.jets[i], 0), direct.jets[i]) < 1e-12);
    }
  }
}

TEST_CASE("cutoff functions are flat on the set and alive outside") {
  const NormalSetDescriptor d = fixtures::k1_e2();
  const double margin = 0.05;
  const CutoffResult cutoff = cutoff_flat(d, margin, 4);
  CHECK_FALSE(cutoff.degenerate);

  SECTION("zero jet near every cloud point") {
    const SampleCloud cloud = sample_set(d, 4);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> offset(-margin * 0.7, margin * 0.7);
    for (const Vec& p : cloud.points) {
      Vec nudged(p);
      nudged[0] += offset(rng) * 0.5;
      nudged[1] += offset(rng) * 0.5;
      const Jet j = cutoff.expr.jet(nudged, 3);
      for (std::size_t pos = 0; pos < j.size(); ++pos) CHECK(j[pos] == Complex(0.0, 0.0));
    }
  }

  SECTION("saturates to one far outside") {
    CHECK(cutoff.expr.eval(Vec{2.0, 2.0}) == Complex(1.0, 0.0));
    CHECK(cutoff.expr.eval(Vec{-1.0, 0.1}) == Complex(1.0, 0.0));
  }

  SECTION("transport along the zero-surface fibers annihilates the cutoff") {
    const SampleCloud cloud = sample_set(d, 4);
    for (const Vec& x : cloud.points) {
      const Complex v = transport_apply(cutoff.expr, 1, Complex(1.0, 0.0), x, kQuad);
      CHECK(std::abs(v) < 1e-12);
    }
  }

  SECTION("full transport jets vanish: flat inputs stay flat") {
    const SampleCloud cloud = sample_set(d, 3);
    for (const Vec& x : cloud.points) {
      const Jet j = transport_jet(cutoff.expr, 1, Complex(0.5, 0.5), x, 3, kQuad);
      for (std::size_t pos = 0; pos < j.size(); ++pos) CHECK(std::abs(j[pos]) < 1e-10);
    }
  }

  SECTION("an oversized margin is flagged as degenerate") {
    const CutoffResult big = cutoff_flat(d, 50.0, 4);
    CHECK(big.degenerate);
  }

  SECTION("parameter validation") {
    CHECK_THROWS_AS(cutoff_flat(d, 0.0, 4), ConfigError);
    CHECK_THROWS_AS(cutoff_flat(d, 0.1, 0), ConfigError);
  }
}
