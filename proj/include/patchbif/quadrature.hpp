#pragma once
// Gauss–Legendre quadrature: node/weight generation, composite panel rules,
// and a graded rule for endpoint power singularities on a periodic window.

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "patchbif/errors.hpp"

namespace patchbif {

// Nodes and weights of a q-point Gauss-Legendre rule on [-1,1].
struct GaussLegendre {
  std::vector<double> x;
  std::vector<double> w;
};

namespace detail {

// Newton iteration on the Legendre polynomial from a Chebyshev initial guess.
inline GaussLegendre make_gauss_legendre(int q) {
  if (q < 2 || q > 64) throw std::domain_error("gauss_legendre: order outside [2,64]");
  GaussLegendre rule;
  rule.x.resize(q);
  rule.w.resize(q);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < q; ++i) {
    double x = std::cos(pi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_q(x) and P_q'(x) by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.x[q - 1 - i] = x;
    rule.w[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace detail

// Cached q-point rule on [-1,1].
inline const GaussLegendre& gauss_legendre(int q) {
  static std::map<int, GaussLegendre> cache;
  auto it = cache.find(q);
  if (it == cache.end()) it = cache.emplace(q, detail::make_gauss_legendre(q)).first;
  return it->second;
}

// Append the q-point rule mapped to [lo,hi] to (xs,ws).
inline void append_panel(double lo, double hi, int q, std::vector<double>& xs,
                         std::vector<double>& ws) {
  const GaussLegendre& g = gauss_legendre(q);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (int i = 0; i < q; ++i) {
    xs.push_back(mid + half * g.x[i]);
    ws.push_back(half * g.w[i]);
  }
}

// Append n equal q-point panels covering [lo,hi].
inline void append_uniform(double lo, double hi, int n, int q, std::vector<double>& xs,
                           std::vector<double>& ws) {
  for (int j = 0; j < n; ++j) {
    double a = lo + (hi - lo) * j / n;
    double b = lo + (hi - lo) * (j + 1) / n;
    append_panel(a, b, q, xs, ws);
  }
}

// Append n equal q-point panels for [0,1] in a mapped variable t with
// y = scale * t^kappa, so an endpoint power singularity at y = 0 is absorbed.
// The appended (xs, ws) are in the y variable.
inline void append_power_mapped(double scale, int kappa, int n, int q,
                                std::vector<double>& xs, std::vector<double>& ws) {
  std::vector<double> ts, tw;
  append_uniform(0.0, 1.0, n, q, ts, tw);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double t = ts[i];
    double tpow = std::pow(t, kappa - 1);
    xs.push_back(scale * tpow * t);
    ws.push_back(scale * kappa * tpow * tw[i]);
  }
}

// Quadrature rule over (-pi, pi) \ {0} for integrands with an algebraic
// singularity |y|^{-alpha} at y = 0 that multiplies a smooth 2*pi-periodic
// factor with harmonic content up to index fmax.
//
// Construction, per half-axis: dyadic levels [pi 2^{-k-1}, pi 2^{-k}] for
// k = 0..levels-1, each split into enough q-point panels that no panel spans
// more than ~1.3 periods of the fastest harmonic; the remaining stub
// [0, pi 2^{-levels}] is handled by the power map y = delta t^kappa with
// kappa chosen so the mapped integrand has at least six vanishing derivatives
// at t = 0.  The negative half-axis carries the exactly negated nodes, which
// keeps trigonometric arguments tiny near y = 0 (representing the left half
// as 2*pi - y collapses those nodes to fl(2*pi) and destroys the kernel).
struct SingularRule {
  std::vector<double> y;
  std::vector<double> w;

  SingularRule(double alpha, int fmax, int levels = 10, int q = 16) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("SingularRule: alpha outside (0,2)");
    if (fmax < 1 || levels < 1) throw std::domain_error("SingularRule: bad resolution request");
    const double pi = 3.14159265358979323846;
    std::vector<double> xs, ws;
    for (int k = 0; k < levels; ++k) {
      double hi = pi * std::pow(0.5, k);
      double lo = 0.5 * hi;
      int npan = 2;
      double need = (hi - lo) * fmax / 8.0;  // ~1.3 periods per q=16 panel
      if (need > npan) npan = static_cast<int>(std::ceil(need));
      append_uniform(lo, hi, npan, q, xs, ws);
    }
    double delta = pi * std::pow(0.5, levels);
    int kappa = static_cast<int>(std::ceil(6.0 / (2.0 - alpha)));
    if (kappa > 64) kappa = 64;
    append_power_mapped(delta, kappa, 4, q, xs, ws);
    // Mirror: exact negation of the positive-half nodes.
    y.reserve(2 * xs.size());
    w.reserve(2 * ws.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      y.push_back(xs[i]);
      w.push_back(ws[i]);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      y.push_back(-xs[i]);
      w.push_back(ws[i]);
    }
  }
};

// Equispaced trapezoid nodes/weights on [0, 2*pi) for smooth periodic
// integrands (spectrally accurate).
struct TrapezoidRule {
  std::vector<double> y;
  std::vector<double> w;

  explicit TrapezoidRule(int n) {
    if (n < 4) throw std::domain_error("TrapezoidRule: need at least 4 nodes");
    const double pi = 3.14159265358979323846;
    y.resize(n);
    w.assign(n, 2.0 * pi / n);
    for (int i = 0; i < n; ++i) y[i] = 2.0 * pi * i / n;
  }
};

}  // namespace patchbif
