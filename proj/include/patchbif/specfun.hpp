#pragma once
// Special functions for the annular-patch spectral problem: Gamma, Pochhammer,
// the Gauss hypergeometric series, the azimuthal interaction coefficients
// Lambda_n(b) and Theta_n, and the contiguous-relation identity suite.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "patchbif/errors.hpp"
#include "patchbif/params.hpp"
#include "patchbif/quadrature.hpp"

namespace patchbif {

inline constexpr double kPi = 3.14159265358979323846;

inline bool is_nonpositive_integer(double x) {
  return x <= 0.0 && x == std::floor(x);
}

// Gamma function on the real line minus its poles.
inline double gamma_fn(double x) {
  if (!std::isfinite(x)) throw std::domain_error("gamma_fn: non-finite argument");
  if (is_nonpositive_integer(x)) {
    throw std::domain_error("gamma_fn: pole at nonpositive integer " + std::to_string(x));
  }
  return std::tgamma(x);
}

// Rising factorial (a)_n = a (a+1) ... (a+n-1).
inline double pochhammer(double a, int n) {
  if (n < 0) throw std::domain_error("pochhammer: negative order");
  double r = 1.0;
  for (int k = 0; k < n; ++k) r *= a + k;
  return r;
}

namespace detail {

// Enough for z = 1 - 2e-6 (the closest approach any caller makes); the series
// has positive terms in the production parameter cone, so long compensated
// sums stay accurate.
inline constexpr int kHypMaxTerms = 40000000;

// Power series sum_k (a)_k (b)_k / ((c)_k k!) z^k with compensated summation.
// The truncation criterion accounts for the geometric tail ratio ~ z.
inline double hyp2f1_series(double a, double b, double c, double z) {
  double sum = 1.0, comp = 0.0, term = 1.0;
  const double tail_tol = 1e-17 * (1.0 - z);
  for (int k = 0; k < kHypMaxTerms; ++k) {
    term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
    double y = term - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (std::abs(term) <= tail_tol * std::abs(sum)) return sum;
  }
  throw accuracy_error("hyp2f1: series did not converge, z=" + std::to_string(z));
}

// Value at z = 1 (requires c-a-b > 0): Gamma(c)Gamma(c-a-b)/(Gamma(c-a)Gamma(c-b)).
inline double hyp2f1_at_one(double a, double b, double c) {
  const double s = c - a - b;
  if (!(s > 0.0)) throw std::domain_error("hyp2f1: divergent at z=1 when c-a-b<=0");
  const double ca = c - a, cb = c - b;
  if (ca > 0.0 && cb > 0.0) {
    return std::exp(std::lgamma(c) + std::lgamma(s) - std::lgamma(ca) - std::lgamma(cb));
  }
  return gamma_fn(c) * gamma_fn(s) / (gamma_fn(ca) * gamma_fn(cb));
}

}  // namespace detail

// Gauss hypergeometric function 2F1(a,b;c;z) on z in [0,1].
inline double hyp2f1(double a, double b, double c, double z) {
  if (is_nonpositive_integer(c)) throw std::domain_error("hyp2f1: c is a nonpositive integer");
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("hyp2f1: z outside [0,1]");
  if (z == 1.0) return detail::hyp2f1_at_one(a, b, c);
  return detail::hyp2f1_series(a, b, c, z);
}

// Kernel normalization c_alpha = Gamma(alpha/2) / (2 pi 2^{1-alpha} Gamma(1-alpha/2)).
inline double c_alpha(double alpha) {
  return gamma_fn(alpha / 2.0) /
         (2.0 * kPi * std::pow(2.0, 1.0 - alpha) * gamma_fn(1.0 - alpha / 2.0));
}

namespace detail {

// Lambda prefactor K = Gamma(alpha/2) / (Gamma(1-alpha/2) 2^{1-alpha}) = 2 pi c_alpha.
inline double lambda_prefactor(double alpha) {
  return gamma_fn(alpha / 2.0) / (gamma_fn(1.0 - alpha / 2.0) * std::pow(2.0, 1.0 - alpha));
}

// (alpha/2)_n / n! with a log-space route for large n.
inline double lambda_coeff(int n, double alpha) {
  if (n <= 24) {
    double r = 1.0;
    for (int k = 0; k < n; ++k) r *= (alpha / 2.0 + k) / (k + 1.0);
    return r;
  }
  return std::exp(std::lgamma(alpha / 2.0 + n) - std::lgamma(alpha / 2.0) -
                  std::lgamma(n + 1.0));
}

}  // namespace detail

// Limit value Lambda_n(1), finite only for alpha < 1; evaluated in log space.
inline double lambda_at_one(int n, double alpha) {
  if (n < 1) throw std::domain_error("lambda_at_one: n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("lambda_at_one: finite only for alpha in (0,1)");
  }
  const double lg = std::lgamma(alpha / 2.0 + n) - std::lgamma(alpha / 2.0) +
                    std::lgamma(1.0 - alpha) - std::lgamma(n + 1.0 - alpha / 2.0) -
                    std::lgamma(1.0 - alpha / 2.0);
  return detail::lambda_prefactor(alpha) * std::exp(lg);
}

// Azimuthal interaction coefficient
//   Lambda_n(b) = K (alpha/2)_n / n! b^{n-1} 2F1(alpha/2, n+alpha/2; n+1; b^2).
inline double lambda_n(int n, const Params& p) {
  if (n < 1) throw std::domain_error("lambda_n: n must be >= 1");
  if (p.b == 1.0) return lambda_at_one(n, p.alpha);
  return detail::lambda_prefactor(p.alpha) * detail::lambda_coeff(n, p.alpha) *
         std::pow(p.b, n - 1.0) *
         hyp2f1(p.alpha / 2.0, n + p.alpha / 2.0, n + 1.0, p.b * p.b);
}

// Independent route for Lambda_n(b) through the Euler integral
//   Lambda_n(b) = b^{n-1} / (2^{1-alpha} Gamma(1-alpha/2)^2)
//                 * int_0^1 x^{n-1+alpha/2} (1-x)^{-alpha/2} (1-b^2 x)^{-alpha/2} dx.
// The integral is split at x = 1/2; the fractional endpoint powers at x = 1
// (exponent -alpha/2, or -alpha when b = 1) and x = 0 (exponent n-1+alpha/2)
// are absorbed by the substitutions 1-x = t^kappa and x = s^mu.  Both mapped
// integrals use dyadically graded Gauss-Legendre panels toward the mapped
// endpoint, with per-level subpanel doubling until two consecutive estimates
// agree to quad_tol.
inline double lambda_n_integral(int n, const Params& p, double quad_tol = 1e-10) {
  if (n < 1) throw std::domain_error("lambda_n_integral: n must be >= 1");
  if (!(quad_tol > 0.0)) throw std::domain_error("lambda_n_integral: quad_tol must be > 0");
  const double alpha = p.alpha, b = p.b;
  // Combined power of (1-x) at the right endpoint: alpha/2, plus alpha/2 more at b=1.
  double endpoint_pow = alpha / 2.0;
  if (b == 1.0) {
    if (alpha >= 1.0) {
      throw std::domain_error("lambda_n_integral: divergent at b=1 for alpha >= 1");
    }
    endpoint_pow = alpha;
  }
  const int kappa_raw = static_cast<int>(std::ceil(6.0 / (1.0 - endpoint_pow)));
  const int kappa = kappa_raw > 64 ? 64 : kappa_raw;
  const int mu = 8;
  const double one_minus_b2 = (1.0 - b) * (1.0 + b);

  // Right half x in [1/2, 1]: 1-x = t^kappa, t in (0, (1/2)^{1/kappa}].  The
  // Jacobian and the (1-x) powers are combined into a single exponent of t so
  // the underflow of t^kappa at deep nodes never creates 0 * inf.
  const double t_exponent =
      (b == 1.0) ? kappa * (1.0 - alpha) - 1.0 : kappa * (1.0 - alpha / 2.0) - 1.0;
  auto integrand_t = [&](double t) {
    const double tk = std::pow(t, kappa);
    const double rest = (b == 1.0) ? 1.0 : std::pow(one_minus_b2 + b * b * tk, -alpha / 2.0);
    return kappa * std::pow(t, t_exponent) * std::pow(1.0 - tk, n - 1.0 + alpha / 2.0) * rest;
  };
  // Left half x in [0, 1/2]: x = s^mu, s in (0, (1/2)^{1/mu}].
  const double s_exponent = mu * (n - 1.0 + alpha / 2.0) + mu - 1.0;
  auto integrand_s = [&](double s) {
    const double sm = std::pow(s, mu);
    const double quad_term = (b == 1.0) ? std::pow(1.0 - sm, -alpha)
                                        : std::pow(1.0 - sm, -alpha / 2.0) *
                                              std::pow(one_minus_b2 + b * b * (1.0 - sm), -alpha / 2.0);
    return mu * std::pow(s, s_exponent) * quad_term;
  };

  const int levels = 14;
  auto graded = [&](double upper, int subpanels, auto&& f) {
    std::vector<double> ts, tw;
    for (int j = 0; j < levels; ++j) {
      double hi = upper * std::pow(0.5, j);
      append_uniform(0.5 * hi, hi, subpanels, 16, ts, tw);
    }
    append_panel(0.0, upper * std::pow(0.5, levels), 16, ts, tw);
    double acc = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) acc += tw[i] * f(ts[i]);
    return acc;
  };
  auto estimate = [&](int subpanels) {
    return graded(std::pow(0.5, 1.0 / kappa), subpanels, integrand_t) +
           graded(std::pow(0.5, 1.0 / mu), subpanels, integrand_s);
  };

  double prev = estimate(1);
  for (int subpanels = 2; subpanels <= 64; subpanels *= 2) {
    double cur = estimate(subpanels);
    if (std::abs(cur - prev) <= quad_tol * std::max(std::abs(cur), 1e-300)) {
      const double pref = std::pow(b, n - 1.0) /
                          (std::pow(2.0, 1.0 - alpha) * std::pow(gamma_fn(1.0 - alpha / 2.0), 2));
      return pref * cur;
    }
    prev = cur;
  }
  throw accuracy_error("lambda_n_integral: panel doubling failed to certify tolerance");
}

// Radial interaction coefficient
//   Theta_n = Gamma(1-alpha) / (2^{1-alpha} Gamma(1-alpha/2)^2) * (g_1 - g_n),
//   g_k = Gamma(k+alpha/2) / Gamma(k+1-alpha/2),
// valid for every alpha in (0,2) except alpha = 1, where the analytic
// continuation equals the harmonic form (2/pi) sum_{k=2}^n 1/(2k-1).
inline double theta_n(int n, double alpha) {
  if (n < 1) throw std::domain_error("theta_n: n must be >= 1");
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("theta_n: alpha outside (0,2)");
  if (n == 1) return 0.0;
  if (std::abs(alpha - 1.0) < 1e-12) {
    double s = 0.0;
    for (int k = 2; k <= n; ++k) s += 1.0 / (2.0 * k - 1.0);
    return (2.0 / kPi) * s;
  }
  const double G = gamma_fn(1.0 - alpha) /
                   (std::pow(2.0, 1.0 - alpha) * std::pow(gamma_fn(1.0 - alpha / 2.0), 2));
  // g_k by upward recurrence from g_1 (each factor is exact to one rounding).
  double gk = gamma_fn(1.0 + alpha / 2.0) / gamma_fn(2.0 - alpha / 2.0);
  const double g1 = gk;
  for (int k = 1; k < n; ++k) gk *= (k + alpha / 2.0) / (k + 1.0 - alpha / 2.0);
  return G * (g1 - gk);
}

// d/db Lambda_n(b) through the contiguous-derivative relation:
//   K (alpha/2)_n/n! b^{n-2} [ (n-1) F(alpha/2, n+alpha/2; n+1; b^2)
//       + b^2 alpha (n+alpha/2)/(n+1) F(alpha/2+1, n+alpha/2+1; n+2; b^2) ].
inline double lambda_n_prime(int n, const Params& p) {
  if (n < 1) throw std::domain_error("lambda_n_prime: n must be >= 1");
  if (p.b == 1.0) throw std::domain_error("lambda_n_prime: defined on b in (0,1)");
  const double alpha = p.alpha, b = p.b, z = p.b * p.b;
  const double f1 = hyp2f1(alpha / 2.0, n + alpha / 2.0, n + 1.0, z);
  const double f2 = hyp2f1(alpha / 2.0 + 1.0, n + alpha / 2.0 + 1.0, n + 2.0, z);
  return detail::lambda_prefactor(alpha) * detail::lambda_coeff(n, alpha) *
         std::pow(b, n - 2.0) *
         ((n - 1.0) * f1 + z * alpha * (n + alpha / 2.0) / (n + 1.0) * f2);
}

// Residuals of the six contiguous/derivative relations used by the spectral
// simplifications.  All residuals are absolute values of the left-hand sides.
struct IdentityReport {
  // Order: [0] derivative vs central difference, [1] b-raise, [2] c-raise,
  // [3] b-lower with z-weight, [4] a-raise, [5] a/b exchange.
  std::array<double, 6> residual;
  double max_residual;
};

inline IdentityReport identity_suite(double a, double b, double c, double z) {
  if (!(z >= 0.0 && z <= 0.95)) throw std::domain_error("identity_suite: z outside [0,0.95]");
  auto F = [](double A, double B, double C, double Z) { return hyp2f1(A, B, C, Z); };
  IdentityReport rep{};
  const double h = 1e-6;
  double fd;
  if (z >= h) {
    fd = (F(a, b, c, z + h) - F(a, b, c, z - h)) / (2.0 * h);
  } else {
    fd = (-3.0 * F(a, b, c, z) + 4.0 * F(a, b, c, z + h) - F(a, b, c, z + 2.0 * h)) / (2.0 * h);
  }
  // d/dz F(a,b;c;z) = (ab/c) F(a+1,b+1;c+1;z)
  rep.residual[0] = std::abs(fd - a * b / c * F(a + 1, b + 1, c + 1, z));
  // c F(a,b) - c F(a,b+1) + a z F(a+1,b+1;c+1) = 0
  rep.residual[1] = std::abs(c * F(a, b, c, z) - c * F(a, b + 1, c, z) +
                             a * z * F(a + 1, b + 1, c + 1, z));
  // c F(a,b) - (c-b) F(a,b;c+1) - b F(a,b+1;c+1) = 0
  rep.residual[2] = std::abs(c * F(a, b, c, z) - (c - b) * F(a, b, c + 1, z) -
                             b * F(a, b + 1, c + 1, z));
  // c F(a,b-1) + (a-c) z F(a,b;c+1) + (z-1) c F(a,b) = 0
  rep.residual[3] = std::abs(c * F(a, b - 1, c, z) + (a - c) * z * F(a, b, c + 1, z) +
                             (z - 1.0) * c * F(a, b, c, z));
  // c F(a,b) - c F(a+1,b) + b z F(a+1,b+1;c+1) = 0
  rep.residual[4] = std::abs(c * F(a, b, c, z) - c * F(a + 1, b, c, z) +
                             b * z * F(a + 1, b + 1, c + 1, z));
  // b F(a,b+1) - a F(a+1,b) + (a-b) F(a,b) = 0
  rep.residual[5] = std::abs(b * F(a, b + 1, c, z) - a * F(a + 1, b, c, z) +
                             (a - b) * F(a, b, c, z));
  rep.max_residual = 0.0;
  for (double r : rep.residual) rep.max_residual = std::max(rep.max_residual, r);
  return rep;
}

}  // namespace patchbif
