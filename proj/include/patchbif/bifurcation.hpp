#pragma once
// Root location and certification for the per-mode determinant: the radius
// b*_m where Theta_m = Q_+(b,m), certified by a scan-uniqueness check, a
// determinant residual, and the inequality chain at the root.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "patchbif/errors.hpp"
#include "patchbif/linops.hpp"
#include "patchbif/params.hpp"
#include "patchbif/specfun.hpp"

namespace patchbif {

struct BifurcationPoint {
  int m;
  double alpha;
  double b_star;
  double residual;                   // |Delta_m(b_star)| via the expanded route
  double bracket_lo, bracket_hi;     // final bracketing interval
  std::array<double, 2> kernel;      // unit kernel generator of M_m(b_star)
  std::array<bool, 3> certificate;   // Theta_m > b^a L1;  b^a L1 > b^2 L1;  Theta_m > b^2 L1
};

struct BifurcationScan {
  int m;
  double theta_m;
  std::vector<double> grid_b;
  std::vector<double> q_plus;
  std::vector<double> q_minus;
  std::vector<double> j_ratio;  // (Lambda_m / Lambda_1)^2
};

namespace detail {

// Derivative-free bracketing root finder (bisection safeguarded by inverse
// quadratic / secant interpolation) for a continuous f with f(a) f(b) < 0.
// Iterates until the bracket width reaches tol; (a,b) become the final
// bracket and the returned value is the best iterate (smallest |f|), which
// sits many orders of magnitude closer to the root than the bracket width.
template <typename F>
inline double brent_refine(F&& f, double& a, double& b, double fa, double fb, double tol) {
  if (fa * fb > 0.0) throw internal_inconsistency("brent_refine: bracket does not straddle");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double m = 0.5 * (c - b);
    if (fb == 0.0) {
      c = b;  // exact hit: the bracket collapses
      break;
    }
    if (std::abs(m) <= 0.5 * tol) break;
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = m; e = m;  // bisection
    } else {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;  // secant
        q = 1.0 - s;
      } else {
        const double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d; d = p / q;  // accept interpolation
      } else {
        d = m; e = m;
      }
    }
    a = b; fa = fb;
    b += (std::abs(d) > 0.25 * tol) ? d : (m > 0.0 ? 0.25 * tol : -0.25 * tol);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a; fc = fa;
      d = b - a; e = d;
    }
  }
  const double best = b;
  // Report the straddling pair as the bracket.
  if (b > c) { a = c; /* b stays */ } else { a = b; b = c; }
  return best;
}

}  // namespace detail

// Solve Theta_m = Q_+(b,m) for b on (0,1).  A 200-point scan of
// g(b) = Theta_m - Q_+(b,m) on (0.001, 0.999) must show exactly one sign
// change (uniqueness); the bracket is then refined to width <= tol.
inline BifurcationPoint find_b_star(int m, double alpha, double tol = 1e-12) {
  if (m < 2) throw std::domain_error("find_b_star: m must be >= 2");
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("find_b_star: alpha outside (0,2)");
  if (!(tol >= 1e-14)) throw std::domain_error("find_b_star: tol below 1e-14");
  const double theta = theta_n(m, alpha);
  auto g = [&](double b) { return theta - q_branches(m, Params(alpha, b)).q_plus; };

  const int kScan = 200;
  const double lo_end = 0.001, hi_end = 0.999;
  double prev_b = lo_end, prev_g = g(lo_end);
  double blo = 0.0, bhi = 0.0, glo = 0.0, ghi = 0.0;
  int sign_changes = 0;
  for (int i = 1; i < kScan; ++i) {
    const double b = lo_end + (hi_end - lo_end) * i / (kScan - 1.0);
    const double gb = g(b);
    if (prev_g == 0.0 || prev_g * gb < 0.0) {
      ++sign_changes;
      blo = prev_b; bhi = b; glo = prev_g; ghi = gb;
    }
    prev_b = b;
    prev_g = gb;
  }
  if (sign_changes == 0) {
    throw invariant_failure("find_b_star: no sign change of Theta_m - Q_+ on the scan grid (m=" +
                            std::to_string(m) + ", alpha=" + std::to_string(alpha) + ")");
  }
  if (sign_changes > 1) {
    throw invariant_failure("find_b_star: multiple sign changes of Theta_m - Q_+ (m=" +
                            std::to_string(m) + ", alpha=" + std::to_string(alpha) + ")");
  }
  const double best = detail::brent_refine(g, blo, bhi, glo, ghi, tol);

  BifurcationPoint out;
  out.m = m;
  out.alpha = alpha;
  out.b_star = best;
  out.bracket_lo = blo;
  out.bracket_hi = bhi;
  Params p(alpha, out.b_star);
  out.residual = std::abs(delta(m, p));
  const double l1 = lambda_n(1, p);
  const double lm = lambda_n(m, p);
  const double bs = out.b_star;
  out.certificate = {theta > std::pow(bs, alpha) * l1,
                     std::pow(bs, alpha) * l1 > bs * bs * l1,
                     theta > bs * bs * l1};
  std::array<double, 2> v0{bs * bs * lm, bs * bs * l1 - theta};
  const double nv = std::hypot(v0[0], v0[1]);
  out.kernel = {v0[0] / nv, v0[1] / nv};

  // Residual bound scaled by the determinant magnitude proxy on the bracket.
  const double scale = std::max(theta * lambda_n(1, Params(alpha, blo)),
                                theta * lambda_n(1, Params(alpha, bhi)));
  if (!(out.residual <= 1e-12 * scale)) {
    throw invariant_failure("find_b_star: determinant residual exceeds certified bound");
  }
  if (!(bhi - blo <= std::max(tol, 1e-12))) {
    throw invariant_failure("find_b_star: final bracket wider than requested");
  }
  if (!(out.certificate[0] && out.certificate[1] && out.certificate[2])) {
    throw invariant_failure("find_b_star: inequality chain fails at the root");
  }
  return out;
}

// Diagnostic sweep of the quadratic branches across a b-grid.
inline BifurcationScan scan_determinant(int m, double alpha, int grid_size) {
  if (m < 2) throw std::domain_error("scan_determinant: m must be >= 2");
  if (grid_size < 50) throw std::domain_error("scan_determinant: grid_size must be >= 50");
  BifurcationScan scan;
  scan.m = m;
  scan.theta_m = theta_n(m, alpha);
  scan.grid_b.reserve(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    const double b = 0.001 + (0.999 - 0.001) * i / (grid_size - 1.0);
    Params p(alpha, b);
    QBranches q = q_branches(m, p);
    const double l1 = lambda_n(1, p), lm = lambda_n(m, p);
    scan.grid_b.push_back(b);
    scan.q_plus.push_back(q.q_plus);
    scan.q_minus.push_back(q.q_minus);
    scan.j_ratio.push_back((lm / l1) * (lm / l1));
    if (q.q_minus > q.q_plus) {
      throw invariant_failure("scan_determinant: branch ordering violated");
    }
    if (i > 0 && i < grid_size - 1 && !(q.q_minus < scan.theta_m)) {
      throw invariant_failure("scan_determinant: Q_- reaches Theta_m at an interior point");
    }
  }
  return scan;
}

}  // namespace patchbif
