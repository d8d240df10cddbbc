#pragma once
// patchbif/fourier.hpp — m-fold cosine perturbations of circular patch
// boundaries, admissibility-gated patch states, and the sine-coefficient
// projection used for the image space of the stationary functional.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "patchbif/errors.hpp"
#include "patchbif/specfun.hpp"

namespace patchbif {

// Even 2*pi/m-periodic perturbation f(x) = sum_{j=1..J} coeffs[j-1]*cos(j*m*x).
struct FourierCosine {
  int m_fold = 1;
  std::vector<double> coeffs;

  FourierCosine() = default;

  FourierCosine(int m, std::vector<double> c) : m_fold(m), coeffs(std::move(c)) {
    if (m_fold < 1) {
      throw std::domain_error("FourierCosine: m_fold must be >= 1, got " +
                              std::to_string(m_fold));
    }
  }

  int truncation() const { return static_cast<int>(coeffs.size()); }

  double value(double x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      const double k = static_cast<double>((j + 1) * static_cast<std::size_t>(m_fold));
      acc += coeffs[j] * std::cos(k * x);
    }
    return acc;
  }

  double derivative(double x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      const double k = static_cast<double>((j + 1) * static_cast<std::size_t>(m_fold));
      acc -= k * coeffs[j] * std::sin(k * x);
    }
    return acc;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs) m = std::max(m, std::abs(c));
    return m;
  }

  // Magnitude of the last retained coefficient; the continuation tail gate.
  double tail_magnitude() const {
    return coeffs.empty() ? 0.0 : std::abs(coeffs.back());
  }

  bool all_zero() const {
    for (double c : coeffs) {
      if (c != 0.0) return false;
    }
    return true;
  }
};

// Doubly connected patch: outer boundary radius 1 + R(x), inner b + r(x).
// Construction enforces geometric admissibility (curves nested and positive)
// and the perturbation-smallness gate under which the derivative formulas of
// the functional are class-preserving.
struct PatchState {
  double alpha = 1.0;
  double b = 0.5;
  FourierCosine R_pert;  // outer perturbation
  FourierCosine r_pert;  // inner perturbation

  PatchState() = default;

  PatchState(double alpha_in, double b_in, FourierCosine R, FourierCosine r)
      : alpha(alpha_in), b(b_in), R_pert(std::move(R)), r_pert(std::move(r)) {
    if (!(alpha > 0.0) || !(alpha < 2.0)) {
      throw std::domain_error("PatchState: alpha must lie in (0,2), got " +
                              std::to_string(alpha));
    }
    if (!(b > 0.0) || !(b < 1.0)) {
      throw std::domain_error("PatchState: b must lie in (0,1), got " +
                              std::to_string(b));
    }
    if (R_pert.m_fold != r_pert.m_fold) {
      throw std::domain_error(
          "PatchState: outer and inner perturbations must share one symmetry "
          "class, got m_fold " +
          std::to_string(R_pert.m_fold) + " vs " + std::to_string(r_pert.m_fold));
    }
    const std::size_t max_j =
        std::max(R_pert.coeffs.size(), r_pert.coeffs.size());
    const std::size_t n = std::max<std::size_t>(
        1024, 16 * std::max<std::size_t>(1, max_j) *
                  static_cast<std::size_t>(R_pert.m_fold));
    double min_outer = 1e300;
    double max_inner = -1e300;
    double min_inner = 1e300;
    double sup_R = 0.0;
    double sup_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      const double Rv = R_pert.value(x);
      const double rv = r_pert.value(x);
      min_outer = std::min(min_outer, 1.0 + Rv);
      max_inner = std::max(max_inner, b + rv);
      min_inner = std::min(min_inner, b + rv);
      sup_R = std::max(sup_R, std::abs(Rv));
      sup_r = std::max(sup_r, std::abs(rv));
    }
    if (!(min_inner > 0.0)) {
      throw std::domain_error(
          "PatchState: inner boundary radius must stay positive, min(b+r) = " +
          std::to_string(min_inner));
    }
    if (!(min_outer > max_inner)) {
      throw std::domain_error(
          "PatchState: boundaries touch or cross, min(1+R) = " +
          std::to_string(min_outer) + " vs max(b+r) = " +
          std::to_string(max_inner));
    }
    if (!(sup_R + sup_r < 0.5 * (1.0 - b))) {
      throw std::domain_error(
          "PatchState: perturbation exceeds the smallness gate, |R|+|r| = " +
          std::to_string(sup_R + sup_r) + " vs 0.5*(1-b) = " +
          std::to_string(0.5 * (1.0 - b)));
    }
  }

  int m_fold() const { return R_pert.m_fold; }

  double outer(double x) const { return 1.0 + R_pert.value(x); }
  double inner(double x) const { return b + r_pert.value(x); }
};

// Odd 2*pi/m-periodic image sample: f(x) ~ sum_{j=1..J} coeffs[j-1]*sin(j*m*x),
// with the diagnostics that certify f really lives in that class.
struct SineResult {
  int m_fold = 1;
  std::vector<double> coeffs;
  double sup_residual = 0.0;       // max |f| over the collocation grid
  double cosine_content = 0.0;     // largest even-part projection (should vanish)
  double off_class_leakage = 0.0;  // largest sine projection off the m-fold class
};

// Equispaced collocation nodes x_i = 2*pi*i/n on [0, 2*pi).
inline std::vector<double> collocation_grid(int n) {
  if (n < 2) {
    throw std::domain_error("collocation_grid: need at least 2 nodes, got " +
                            std::to_string(n));
  }
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
  }
  return x;
}

// Discrete projection of grid samples onto sin(j*m*x), j = 1..J, with even-part
// and off-class diagnostics. The grid must resolve every retained mode.
inline SineResult project_sine(const std::vector<double>& values, int m_fold, int J) {
  if (m_fold < 1) {
    throw std::domain_error("project_sine: m_fold must be >= 1, got " +
                            std::to_string(m_fold));
  }
  if (J < 1) {
    throw std::domain_error("project_sine: J must be >= 1, got " +
                            std::to_string(J));
  }
  const std::size_t n = values.size();
  const int kmax = J * m_fold;
  if (n < 4 * static_cast<std::size_t>(kmax + 1)) {
    throw std::domain_error(
        "project_sine: grid of " + std::to_string(n) +
        " points cannot resolve modes up to " + std::to_string(kmax));
  }
  SineResult out;
  out.m_fold = m_fold;
  out.coeffs.assign(static_cast<std::size_t>(J), 0.0);

  double mean = 0.0;
  for (double v : values) {
    mean += v;
    out.sup_residual = std::max(out.sup_residual, std::abs(v));
  }
  mean /= static_cast<double>(n);
  out.cosine_content = std::abs(mean);

  const double step = 2.0 * kPi / static_cast<double>(n);
  for (int k = 1; k <= kmax; ++k) {
    double sk = 0.0;
    double ck = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double kx = static_cast<double>(k) * step * static_cast<double>(i);
      sk += values[i] * std::sin(kx);
      ck += values[i] * std::cos(kx);
    }
    sk *= 2.0 / static_cast<double>(n);
    ck *= 2.0 / static_cast<double>(n);
    out.cosine_content = std::max(out.cosine_content, std::abs(ck));
    if (k % m_fold == 0) {
      out.coeffs[static_cast<std::size_t>(k / m_fold - 1)] = sk;
    } else {
      out.off_class_leakage = std::max(out.off_class_leakage, std::abs(sk));
    }
  }
  return out;
}

}  // namespace patchbif
