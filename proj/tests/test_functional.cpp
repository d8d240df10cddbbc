// Tests for the stationary-functional layer: Fourier data types, the singular
// and smooth integral operators, the assembled functional, and its
// derivatives.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "patchbif/fourier.hpp"
#include "patchbif/functional.hpp"
#include "patchbif/linops.hpp"
#include "patchbif/specfun.hpp"
#include "reference_values.hpp"

using namespace patchbif;

namespace {

PatchState annulus(double alpha, double b, int m) {
  return PatchState(alpha, b, FourierCosine(m, {}), FourierCosine(m, {}));
}

std::vector<double> stack_coeffs(const FPair& f) {
  std::vector<double> out = f.F1.coeffs;
  out.insert(out.end(), f.F2.coeffs.begin(), f.F2.coeffs.end());
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> padded(const std::vector<double>& base,
                           const std::vector<double>& dir, double t,
                           std::size_t len) {
  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) out[i] += base[i];
  for (std::size_t i = 0; i < dir.size(); ++i) out[i] += t * dir[i];
  return out;
}

}  // namespace

TEST_CASE("cosine series evaluates values, derivatives, and diagnostics") {
  FourierCosine f(2, {0.3, -0.1, 0.05});
  const double x = 0.7;
  const double want =
      0.3 * std::cos(2 * x) - 0.1 * std::cos(4 * x) + 0.05 * std::cos(6 * x);
  CHECK(f.value(x) == Catch::Approx(want).margin(1e-15));

  const double h = 1e-6;
  const double fd = (f.value(x + h) - f.value(x - h)) / (2 * h);
  CHECK(f.derivative(x) == Catch::Approx(fd).margin(1e-8));

  CHECK(f.truncation() == 3);
  CHECK(f.max_abs_coeff() == Catch::Approx(0.3));
  CHECK(f.tail_magnitude() == Catch::Approx(0.05));
  CHECK_FALSE(f.all_zero());
  CHECK(FourierCosine(3, {0.0, 0.0}).all_zero());
  CHECK(FourierCosine(5, {}).value(1.0) == 0.0);
  CHECK_THROWS_AS(FourierCosine(0, {1.0}), std::domain_error);
}

TEST_CASE("patch states gate admissibility") {
  CHECK_NOTHROW(PatchState(1.0, 0.5, FourierCosine(2, {0.01}),
                           FourierCosine(2, {-0.005})));

  // Parameter ranges.
  CHECK_THROWS_AS(annulus(0.0, 0.5, 2), std::domain_error);
  CHECK_THROWS_AS(annulus(2.0, 0.5, 2), std::domain_error);
  CHECK_THROWS_AS(annulus(1.0, 0.0, 2), std::domain_error);
  CHECK_THROWS_AS(annulus(1.0, 1.0, 2), std::domain_error);

  // Mixed symmetry classes.
  CHECK_THROWS_AS(PatchState(1.0, 0.5, FourierCosine(2, {0.01}),
                             FourierCosine(3, {0.01})),
                  std::domain_error);

  // Inner radius dips through zero while every other gate would pass.
  CHECK_THROWS_AS(PatchState(1.0, 0.2, FourierCosine(2, {}),
                             FourierCosine(2, {-0.25})),
                  std::domain_error);

  // Perturbation exceeds the smallness gate 0.5*(1-b).
  CHECK_THROWS_AS(PatchState(1.0, 0.8, FourierCosine(2, {0.08}),
                             FourierCosine(2, {0.08})),
                  std::domain_error);
}

TEST_CASE("sine projection recovers coefficients and flags off-class content") {
  const int m = 2, J = 3;
  const int n = 8 * J * m;
  const std::vector<double> x = collocation_grid(n);

  std::vector<double> vals(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    vals[i] = 0.5 * std::sin(2 * x[i]) - 0.2 * std::sin(4 * x[i]) +
              0.07 * std::sin(6 * x[i]);
  }
  SineResult s = project_sine(vals, m, J);
  CHECK(s.coeffs[0] == Catch::Approx(0.5).margin(1e-14));
  CHECK(s.coeffs[1] == Catch::Approx(-0.2).margin(1e-14));
  CHECK(s.coeffs[2] == Catch::Approx(0.07).margin(1e-14));
  CHECK(s.cosine_content < 1e-14);
  CHECK(s.off_class_leakage < 1e-14);
  CHECK(s.sup_residual == Catch::Approx(max_abs(vals)));

  for (std::size_t i = 0; i < x.size(); ++i) {
    vals[i] += 1e-7 * std::cos(2 * x[i]) + 1e-8 * std::sin(3 * x[i]);
  }
  s = project_sine(vals, m, J);
  CHECK(s.cosine_content == Catch::Approx(1e-7).epsilon(1e-6));
  CHECK(s.off_class_leakage == Catch::Approx(1e-8).epsilon(1e-6));

  CHECK_THROWS_AS(project_sine(std::vector<double>(8, 0.0), 2, 3),
                  std::domain_error);
  CHECK_THROWS_AS(project_sine(vals, 0, 3), std::domain_error);
  CHECK_THROWS_AS(project_sine(vals, 2, 0), std::domain_error);
}

TEST_CASE("evaluation grids validate their arguments") {
  EvalGrid g = make_eval_grid(1.0, 2, 8);
  CHECK(g.nx == 8 * 8 * 2);
  CHECK(g.x.size() == static_cast<std::size_t>(g.nx));
  CHECK(g.yt.size() == 512);
  CHECK(g.ys.size() == g.ws.size());
  CHECK(g.calpha == Catch::Approx(c_alpha(1.0)));

  CHECK_THROWS_AS(make_eval_grid(0.0, 2, 8), std::domain_error);
  CHECK_THROWS_AS(make_eval_grid(1.0, 0, 8), std::domain_error);
  CHECK_THROWS_AS(make_eval_grid(1.0, 2, 0), std::domain_error);
  CHECK_THROWS_AS(make_eval_grid(1.0, 2, 8, 64), std::domain_error);
  CHECK_THROWS_AS(make_eval_grid(1.0, 2, 8, 0, 32), std::domain_error);
}

TEST_CASE("self-interaction integral vanishes on circles") {
  for (double alpha : {1.0, 1.5}) {
    EvalGrid g = make_eval_grid(alpha, 2, 4);
    for (double c : {1.0, 0.3, 1.7}) {
      const std::vector<double> t1 = eval_T1(c, FourierCosine(2, {}), g);
      INFO("alpha = " << alpha << ", radius = " << c);
      CHECK(max_abs(t1) < 1e-11);
    }
  }
  EvalGrid g = make_eval_grid(1.0, 2, 4);
  CHECK_THROWS_AS(eval_T1(-1.0, FourierCosine(2, {}), g), std::domain_error);
}

TEST_CASE("self-interaction linear response matches the diagonal mode term") {
  // d/de T1(1 + e*cos(nx)) at e = 0 has sine-n coefficient n*theta_n; at
  // e = 0.01 the quadratic remainder is O(1e-4).
  const double alpha = 1.0, eps = 0.01;
  const int n = 2;
  EvalGrid g = make_eval_grid(alpha, n, 4);
  const std::vector<double> t1 = eval_T1(1.0, FourierCosine(n, {eps}), g);
  const double pred = eps * n * theta_n(n, alpha);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    worst = std::max(worst, std::abs(t1[i] - pred * std::sin(n * g.x[i])));
  }
  CHECK(worst < 5e-4);
  CHECK(worst > 1e-8);  // the remainder is genuinely quadratic, not zero
}

TEST_CASE("two-curve integral vanishes on concentric circles and is odd") {
  EvalGrid g = make_eval_grid(1.0, 2, 4);
  const FourierCosine none(2, {});
  CHECK(max_abs(eval_T2(0.5, none, 1.0, none, g)) < 1e-12);
  CHECK(max_abs(eval_T2(1.0, none, 0.5, none, g)) < 1e-12);

  // x -> -x sends the output to its negative.
  const std::vector<double> v =
      eval_T2(0.5, FourierCosine(2, {0.01}), 1.0, none, g);
  const std::size_t n = v.size();
  CHECK(std::abs(v[0]) < 1e-12);
  for (std::size_t i = 1; i < n / 2; ++i) {
    CHECK(v[n - i] == Catch::Approx(-v[i]).margin(1e-12));
  }
}

TEST_CASE("two-curve linear response matches the off-diagonal mode term") {
  // d/de T2(b + e*cos(nx), 1) at e = 0 has sine-n coefficient n*b^2*lambda_n.
  const double alpha = 1.0, b = 0.5, eps = 1e-4;
  const int n = 2;
  EvalGrid g = make_eval_grid(alpha, n, 4);
  const std::vector<double> t2 =
      eval_T2(b, FourierCosine(n, {eps}), 1.0, FourierCosine(n, {}), g);
  const double pred = eps * n * b * b * lambda_n(n, Params{alpha, b});
  double worst = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    worst = std::max(worst, std::abs(t2[i] - pred * std::sin(n * g.x[i])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("stationary functional vanishes on annuli") {
  for (double alpha : {0.5, 1.0, 1.5}) {
    EvalGrid g = make_eval_grid(alpha, 2, 8);
    for (double b : {0.3, 0.5, 0.7, 0.9}) {
      const FPair f = eval_F(annulus(alpha, b, 2), g);
      INFO("alpha = " << alpha << ", b = " << b);
      CHECK(f.F1.sup_residual < 1e-10);
      CHECK(f.F2.sup_residual < 1e-10);
      CHECK(max_abs(f.F1.coeffs) < 1e-12);
      CHECK(max_abs(f.F2.coeffs) < 1e-12);
    }
  }
  EvalGrid g = make_eval_grid(0.25, 2, 8);
  const FPair f = eval_F(annulus(0.25, 0.1, 2), g);
  CHECK(f.F1.sup_residual < 1e-10);
  CHECK(f.F2.sup_residual < 1e-10);
}

TEST_CASE("annulus linearization reproduces the mode matrices") {
  // The derivative at the annulus acts mode-wise as -n * M_n(b): the four
  // matrix entries are read off from the two one-mode directions.
  const struct {
    double b, alpha;
  } cases[] = {{0.5, 1.0}, {0.3, 0.5}, {0.7, 1.5}};
  for (const auto& c : cases) {
    for (int n : {2, 3, 5}) {
      EvalGrid g = make_eval_grid(c.alpha, n, 1, std::max(64, 8 * n));
      const PatchState s = annulus(c.alpha, c.b, n);
      const ModeMatrix mm = mode_matrix(n, Params{c.alpha, c.b});
      INFO("alpha = " << c.alpha << ", b = " << c.b << ", n = " << n);

      const FPair dH =
          eval_DF(s, FourierCosine(n, {1.0}), FourierCosine(n, {}), g);
      CHECK(dH.F1.coeffs[0] == Catch::Approx(-n * mm.m11).margin(1e-8));
      CHECK(dH.F2.coeffs[0] == Catch::Approx(-n * mm.m21).margin(1e-8));

      const FPair dh =
          eval_DF(s, FourierCosine(n, {}), FourierCosine(n, {1.0}), g);
      CHECK(dh.F1.coeffs[0] == Catch::Approx(-n * mm.m12).margin(1e-8));
      CHECK(dh.F2.coeffs[0] == Catch::Approx(-n * mm.m22).margin(1e-8));
    }
  }
}

TEST_CASE("derivative of the linearization in b matches the analytic route") {
  // Central differences over b of the annulus mode coefficients against the
  // closed-form derivative entries built from lambda_n_prime and theta_n.
  const struct {
    int n;
    double b, alpha;
  } cases[] = {{2, 0.5, 0.75}, {3, 0.4, 1.5}};
  for (const auto& c : cases) {
    EvalGrid g = make_eval_grid(c.alpha, c.n, 1, std::max(64, 8 * c.n));
    const FourierCosine e1(c.n, {1.0});
    const FourierCosine zero(c.n, {});
    const double hb = 1e-5;

    auto entries = [&](double b) {
      const PatchState s = annulus(c.alpha, b, c.n);
      const FPair dH = eval_DF(s, e1, zero, g);
      const FPair dh = eval_DF(s, zero, e1, g);
      return std::array<double, 4>{dH.F1.coeffs[0], dh.F1.coeffs[0],
                                   dH.F2.coeffs[0], dh.F2.coeffs[0]};
    };
    const std::array<double, 4> up = entries(c.b + hb);
    const std::array<double, 4> dn = entries(c.b - hb);

    const Params p{c.alpha, c.b};
    const double l1 = lambda_n(1, p), ln = lambda_n(c.n, p);
    const double d1 = lambda_n_prime(1, p), dnn = lambda_n_prime(c.n, p);
    const double th = theta_n(c.n, c.alpha);
    const double d11 = 2.0 * c.b * l1 + c.b * c.b * d1;
    const double d12 = -2.0 * c.b * ln - c.b * c.b * dnn;
    const double d21 = ln + c.b * dnn;
    const double d22 =
        (1.0 - c.alpha) * std::pow(c.b, -c.alpha) * th - l1 - c.b * d1;
    const std::array<double, 4> want = {-c.n * d11, -c.n * d12, -c.n * d21,
                                        -c.n * d22};
    for (int k = 0; k < 4; ++k) {
      const double fd = (up[k] - dn[k]) / (2.0 * hb);
      INFO("alpha = " << c.alpha << ", n = " << c.n << ", entry " << k);
      CHECK(fd == Catch::Approx(want[k]).margin(1e-6 * std::max(1.0, std::abs(want[k]))));
    }
  }
}

TEST_CASE("derivative matches finite differences at perturbed states") {
  const struct {
    double alpha, b;
    std::vector<double> A, a, H, h;
  } cases[] = {
      {0.75, 0.5, {0.01}, {-0.005}, {0.003, -0.001}, {0.002, 0.0005}},
      {1.2, 0.45, {0.01, -0.003}, {0.004, 0.002}, {-0.002, 0.001}, {0.0015, -0.0005}},
  };
  const int m = 2, J = 4;
  for (const auto& c : cases) {
    EvalGrid g = make_eval_grid(c.alpha, m, J);
    const std::size_t len = static_cast<std::size_t>(J);
    const PatchState s(c.alpha, c.b, FourierCosine(m, padded(c.A, {}, 0, len)),
                       FourierCosine(m, padded(c.a, {}, 0, len)));
    const FPair df =
        eval_DF(s, FourierCosine(m, padded(c.H, {}, 0, len)),
                FourierCosine(m, padded(c.h, {}, 0, len)), g);
    const std::vector<double> got = stack_coeffs(df);

    auto f_at = [&](double t) {
      const PatchState st(c.alpha, c.b,
                          FourierCosine(m, padded(c.A, c.H, t, len)),
                          FourierCosine(m, padded(c.a, c.h, t, len)));
      return stack_coeffs(eval_F(st, g));
    };
    auto central = [&](double t) {
      const std::vector<double> p = f_at(t), q = f_at(-t);
      std::vector<double> d(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) d[i] = (p[i] - q[i]) / (2 * t);
      return d;
    };
    const double t0 = 1e-5;
    const std::vector<double> dh = central(t0), dh2 = central(0.5 * t0);
    double scale = std::max(max_abs(got), 1e-10);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double fd = (4.0 * dh2[i] - dh[i]) / 3.0;
      worst = std::max(worst, std::abs(got[i] - fd));
    }
    INFO("alpha = " << c.alpha << ", b = " << c.b);
    CHECK(worst / scale < 1e-6);
  }
}

TEST_CASE("radius derivative: dual route and diagnostics") {
  // Reference values from the independent analytic-in-b derivative route,
  // evaluated on this exact grid at the same state.
  EvalGrid g = make_eval_grid(1.2, 2, 2, 32);
  const PatchState s(1.2, 0.45, FourierCosine(2, {0.01, -0.003}),
                     FourierCosine(2, {0.004, 0.002}));
  const FPair db = eval_dF_db(s, g);
  CHECK(db.F1.coeffs[0] == Catch::Approx(-8.210440351727404e-03).margin(1e-6));
  CHECK(db.F1.coeffs[1] == Catch::Approx(6.865795660348353e-03).margin(1e-6));
  CHECK(db.F2.coeffs[0] == Catch::Approx(-2.613465239189133e-03).margin(1e-6));
  CHECK(db.F2.coeffs[1] == Catch::Approx(8.328843320761836e-03).margin(1e-6));

  // Identical inputs give identical outputs.
  const FPair db2 = eval_dF_db(s, g);
  CHECK(db.F1.coeffs == db2.F1.coeffs);
  CHECK(db.F2.coeffs == db2.F2.coeffs);

  // The functional vanishes on every annulus, so its b-derivative does too.
  EvalGrid ga = make_eval_grid(0.75, 2, 4);
  const FPair da = eval_dF_db(annulus(0.75, 0.5, 2), ga);
  CHECK(max_abs(da.F1.coeffs) < 1e-6);
  CHECK(max_abs(da.F2.coeffs) < 1e-6);
}

TEST_CASE("closed-form kernel integrals match direct quadrature") {
  // Both closed forms reduce to b^{m-1} (alpha/2)_m / m! * 2F1; the first
  // integral carries one extra power of b.
  const int N = 4096;
  for (int m : {1, 2, 4, 8, 16}) {
    for (double b : {0.2, 0.5, 0.8}) {
      for (double alpha : {0.5, 1.0, 1.5}) {
        double i1 = 0.0, i2 = 0.0;
        for (int i = 0; i < N; ++i) {
          const double y = 2.0 * kPi * i / N;
          const double den = 1.0 + b * b - 2.0 * b * std::cos(y);
          i1 += std::cos(m * y) * std::pow(den, -0.5 * alpha);
          i2 += 2.0 * std::sin(y) * std::sin(m * y) *
                std::pow(den, -0.5 * alpha - 1.0);
        }
        i1 /= N;  // (1/2pi) * integral
        i2 *= 0.5 * alpha / (m * N);  // (alpha/2m) * (1/2pi) * integral
        const double fac = pochhammer(0.5 * alpha, m) / std::tgamma(m + 1.0);
        const double f21 =
            hyp2f1(0.5 * alpha, m + 0.5 * alpha, m + 1.0, b * b);
        const double closed = std::pow(b, m - 1) * fac * f21;
        INFO("m = " << m << ", b = " << b << ", alpha = " << alpha);
        // The absolute floor covers summation roundoff: at m = 16, b = 0.2
        // the integral is ~1e-13 while the integrand stays O(1), so no
        // double-precision quadrature can reach relative 1e-9 there.
        CHECK(std::abs(i1 - b * closed) <=
              1e-9 * std::abs(b * closed) + 5e-13);
        CHECK(std::abs(i2 - closed) <= 1e-9 * std::abs(closed) + 5e-13);
      }
    }
  }
}

TEST_CASE("quadrature certification by node doubling") {
  for (double alpha : {0.5, 1.5}) {
    EvalGrid g = make_eval_grid(alpha, 2, 2);
    CHECK(certify_T1(1.0, FourierCosine(2, {0.01, -0.003}), g) < 1e-9);
    CHECK(certify_T2(0.45, FourierCosine(2, {0.004, 0.002}), 1.0,
                     FourierCosine(2, {0.01, -0.003}), g) < 1e-11);
  }
}

TEST_CASE("kernel direction annihilates the linear term") {
  // At b*_2 the one-mode kernel direction kills the linearization, so the
  // functional is quadratically small along it.
  const double alpha = 1.0;
  const double bstar = refvals::kBStar[2][0];
  double ratio = 0.0;
  for (const auto& k : refvals::kKernelRatios) {
    if (k.m == 2 && k.alpha == 1.0) ratio = k.ratio;
  }
  REQUIRE(ratio != 0.0);
  EvalGrid g = make_eval_grid(alpha, 2, 8);
  auto sup_at = [&](double eps) {
    const PatchState s(alpha, bstar, FourierCosine(2, {eps}),
                       FourierCosine(2, {eps * ratio}));
    const FPair f = eval_F(s, g);
    return std::max(f.F1.sup_residual, f.F2.sup_residual);
  };
  const double e4 = sup_at(1e-4);
  const double e5 = sup_at(1e-5);
  CHECK(e4 < 1e-5);
  CHECK(e4 / e5 > 30.0);
  CHECK(e4 / e5 < 300.0);
}
