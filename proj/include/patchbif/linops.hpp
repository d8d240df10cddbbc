#pragma once
// Linearization around the annulus: per-mode 2x2 matrices M_n^alpha(b), their
// determinants Delta_n^alpha(b) through two algebraic routes, the
// quadratic-formula branches Q_±(b,m), the planar-vortex (alpha -> 0) limit
// matrices, large-n asymptotics of Delta, and the transversality vectors.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "patchbif/errors.hpp"
#include "patchbif/params.hpp"
#include "patchbif/specfun.hpp"

namespace patchbif {

struct ModeMatrix {
  int n;
  double m11, m12, m21, m22;
  double det;
  double at_alpha;  // 0 marks the planar-vortex limit matrix
  double at_b;
};

// M_n(b) = [[-Theta_n + b^2 L1, -b^2 Ln], [b Ln, b^{1-alpha} Theta_n - b L1]].
inline ModeMatrix mode_matrix(int n, const Params& p) {
  if (n < 1) throw std::domain_error("mode_matrix: n must be >= 1");
  const double b = p.b;
  const double l1 = lambda_n(1, p);
  const double ln = (n == 1) ? l1 : lambda_n(n, p);
  const double th = theta_n(n, p.alpha);
  ModeMatrix M;
  M.n = n;
  M.m11 = -th + b * b * l1;
  M.m12 = -b * b * ln;
  M.m21 = b * ln;
  M.m22 = std::pow(b, 1.0 - p.alpha) * th - b * l1;
  M.det = M.m11 * M.m22 - M.m12 * M.m21;
  M.at_alpha = p.alpha;
  M.at_b = b;
  return M;
}

// Determinant through the expanded route
//   -b^{1-alpha} Theta_n^2 + Theta_n (b^{3-alpha} + b) L1 + b^3 (Ln^2 - L1^2),
// cross-checked against the 2x2 cofactor route to 1e-12 of the term scale.
inline double delta(int n, const Params& p) {
  if (n < 1) throw std::domain_error("delta: n must be >= 1");
  const double b = p.b, alpha = p.alpha;
  const double l1 = lambda_n(1, p);
  const double ln = (n == 1) ? l1 : lambda_n(n, p);
  const double th = theta_n(n, p.alpha);
  const double t1 = -std::pow(b, 1.0 - alpha) * th * th;
  const double t2 = th * (std::pow(b, 3.0 - alpha) + b) * l1;
  const double t3 = b * b * b * (ln * ln - l1 * l1);
  const double expanded = t1 + t2 + t3;
  const double cofactor = mode_matrix(n, p).det;
  const double scale =
      std::max({std::abs(t1), std::abs(t2), std::abs(b * b * b * l1 * l1), 1e-300});
  if (std::abs(expanded - cofactor) > 1e-12 * scale) {
    throw accuracy_error("delta: algebraic routes disagree at n=" + std::to_string(n));
  }
  return expanded;
}

// The two solutions of Delta_m(b) = 0 viewed as a quadratic in Theta_m:
//   Q_± = [L1 (b + b^{3-alpha}) ± sqrt(L1^2 (b - b^{3-alpha})^2 + 4 b^{4-alpha} Lm^2)]
//         / (2 b^{1-alpha}).
struct QBranches {
  double q_minus;
  double q_plus;
};

inline QBranches q_branches(int m, const Params& p) {
  if (m < 2) throw std::domain_error("q_branches: m must be >= 2");
  const double b = p.b, alpha = p.alpha;
  const double l1 = lambda_n(1, p);
  const double lm = lambda_n(m, p);
  const double u = l1 * (b - std::pow(b, 3.0 - alpha));
  double disc = u * u + 4.0 * std::pow(b, 4.0 - alpha) * lm * lm;
  if (disc < 0.0) {
    // A sum of squares: any negative value beyond rounding noise is impossible.
    if (disc < -1e-14 * std::max(u * u, 1.0)) {
      throw internal_inconsistency("q_branches: negative discriminant");
    }
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  const double base = l1 * (b + std::pow(b, 3.0 - alpha));
  const double denom = 2.0 * std::pow(b, 1.0 - alpha);
  return QBranches{(base - root) / denom, (base + root) / denom};
}

// Planar-vortex limit matrix
//   M_m^0(b) = [[b^2/2 - 1/2 + 1/(2m), -b^{m+1}/(2m)], [b^m/(2m), -b/(2m)]],
// with determinant b(b^2-1)/(4m^2) * sum_{k=0}^{m-1} (b^{2k} - 1) > 0 on (0,1).
inline ModeMatrix euler_matrix(int m, double b) {
  if (m < 2) throw std::domain_error("euler_matrix: m must be >= 2");
  if (!(b > 0.0 && b < 1.0)) throw std::domain_error("euler_matrix: b outside (0,1)");
  ModeMatrix M;
  M.n = m;
  M.m11 = b * b / 2.0 - 0.5 + 1.0 / (2.0 * m);
  M.m12 = -std::pow(b, m + 1.0) / (2.0 * m);
  M.m21 = std::pow(b, static_cast<double>(m)) / (2.0 * m);
  M.m22 = -b / (2.0 * m);
  M.det = M.m11 * M.m22 - M.m12 * M.m21;
  M.at_alpha = 0.0;
  M.at_b = b;
  double telescoped = 0.0;
  for (int k = 0; k < m; ++k) telescoped += std::pow(b, 2.0 * k) - 1.0;
  telescoped *= b * (b * b - 1.0) / (4.0 * m * m);
  if (std::abs(M.det - telescoped) > 1e-14 * std::max(1.0, std::abs(telescoped))) {
    throw accuracy_error("euler_matrix: determinant disagrees with telescoped sum");
  }
  return M;
}

enum class AsymptoticRegime { alpha_lt_1, alpha_eq_1, alpha_gt_1 };

// Leading coefficients of Delta_n(b) as n -> infinity.  Only the coefficients
// the underlying analysis pins completely are populated: mu (alpha < 1), the
// -(log n)^2 b^{1-alpha}/pi^2 law coefficient stored in mu (alpha = 1), and
// p, q (alpha > 1).  Unpopulated fields are 0; the n^{alpha-1} correction for
// alpha < 1 carries an unpinned constant and is rate-checked only.
struct AsymptoticCoefficients {
  double alpha;
  double b;
  double mu;
  double p;
  double q;
  AsymptoticRegime regime;
};

inline AsymptoticCoefficients delta_asymptotics(const Params& p) {
  AsymptoticCoefficients out{p.alpha, p.b, 0.0, 0.0, 0.0, AsymptoticRegime::alpha_eq_1};
  const double b = p.b, alpha = p.alpha;
  if (std::abs(alpha - 1.0) < 1e-12) {
    out.regime = AsymptoticRegime::alpha_eq_1;
    out.mu = -std::pow(b, 1.0 - alpha) / (kPi * kPi);
    return out;
  }
  if (alpha < 1.0) {
    out.regime = AsymptoticRegime::alpha_lt_1;
    const double l1b = lambda_n(1, p);
    const double l11 = lambda_at_one(1, alpha);
    out.mu = (-l11 + b * b * l1b) * (std::pow(b, 1.0 - alpha) * l11 - b * l1b);
    return out;
  }
  out.regime = AsymptoticRegime::alpha_gt_1;
  const double G = gamma_fn(1.0 - alpha) /
                   (std::pow(2.0, 1.0 - alpha) * std::pow(gamma_fn(1.0 - alpha / 2.0), 2));
  out.p = -std::pow(b, 1.0 - alpha) * G * G;
  out.q = -G * b * lambda_n(1, p) * (1.0 + std::pow(b, 2.0 - alpha));
  return out;
}

struct TransversalityData {
  int m;
  double b_star;
  std::array<double, 2> v0;  // kernel generator of M_m(b*)
  std::array<double, 2> w;   // range-complement generator
  std::array<double, 2> w1;  // d/db M_m(b*) applied to v0
  double lambda_prime_1;
  double lambda_prime_m;
};

// Transversality data at a verified root b* of Delta_m.  The derivative
// d/db Lambda_n is taken from the analytic contiguous-series route and
// cross-checked against Richardson-extrapolated central differences; the
// sign pattern of w1 and w is enforced.
inline TransversalityData transversality(int m, double b_star, double alpha) {
  if (m < 2) throw std::domain_error("transversality: m must be >= 2");
  Params p(alpha, b_star);
  const double dscale = theta_n(m, alpha) * std::max(lambda_n(1, p), 1.0);
  if (std::abs(delta(m, p)) > 1e-6 * std::max(dscale, 1.0)) {
    throw std::domain_error("transversality: b_star is not a root of the determinant");
  }
  const double b = b_star;
  const double l1 = lambda_n(1, p);
  const double lm = lambda_n(m, p);
  const double th = theta_n(m, alpha);

  auto dlambda = [&](int n) {
    const double analytic = lambda_n_prime(n, p);
    const double h = 1e-5;
    auto fd = [&](double step) {
      return (lambda_n(n, Params(alpha, b + step)) - lambda_n(n, Params(alpha, b - step))) /
             (2.0 * step);
    };
    const double richardson = (4.0 * fd(h / 2.0) - fd(h)) / 3.0;
    if (std::abs(analytic - richardson) > 1e-7 * std::max(1.0, std::abs(analytic))) {
      throw accuracy_error("transversality: derivative routes disagree for n=" +
                           std::to_string(n));
    }
    return analytic;
  };
  const double dl1 = dlambda(1);
  const double dlm = dlambda(m);

  TransversalityData out;
  out.m = m;
  out.b_star = b_star;
  out.lambda_prime_1 = dl1;
  out.lambda_prime_m = dlm;
  out.v0 = {b * b * lm, b * b * l1 - th};
  out.w = {-th + b * b * l1, b * lm};
  // Entrywise derivative of M_m(b).
  const double d11 = 2.0 * b * l1 + b * b * dl1;
  const double d12 = -2.0 * b * lm - b * b * dlm;
  const double d21 = lm + b * dlm;
  const double d22 = (1.0 - alpha) * std::pow(b, -alpha) * th - l1 - b * dl1;
  out.w1 = {d11 * out.v0[0] + d12 * out.v0[1], d21 * out.v0[0] + d22 * out.v0[1]};

  if (!(out.w1[0] > 0.0 && out.w1[1] > 0.0)) {
    throw invariant_failure("transversality: w1 components are not both positive");
  }
  if (!(out.w[0] * out.w[1] < 0.0)) {
    throw invariant_failure("transversality: w components do not have opposite signs");
  }
  const double cross = out.w1[0] * out.w[1] - out.w1[1] * out.w[0];
  const double nw1 = std::hypot(out.w1[0], out.w1[1]);
  const double nw = std::hypot(out.w[0], out.w[1]);
  if (!(std::abs(cross) / (nw1 * nw) > 1e-6)) {
    throw invariant_failure("transversality: w1 and w are numerically parallel");
  }
  return out;
}

}  // namespace patchbif
