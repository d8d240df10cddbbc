#pragma once
// patchbif/continuation.hpp — Newton continuation of the nontrivial m-fold
// stationary branch off the annulus. The amplitude of the outer cos(mx)
// coefficient is pinned and the interior radius b joins the unknowns, which
// keeps the truncated system square and mirrors the local branch structure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "patchbif/bifurcation.hpp"
#include "patchbif/errors.hpp"
#include "patchbif/fourier.hpp"
#include "patchbif/functional.hpp"

namespace patchbif {

struct BranchPoint {
  double amplitude = 0.0;  // pinned cos(mx) coefficient of the outer curve
  PatchState state;
  double residual = 0.0;   // sup of |F| over the collocation grid
  int newton_iters = 0;
  double tail = 0.0;       // magnitude of the last retained coefficient pair
};

struct Branch {
  int m_fold = 2;
  double alpha = 1.0;
  BifurcationPoint origin;
  std::vector<BranchPoint> points;  // ordered by amplitude, smallest first
  std::string warning;              // nonempty if tracing stopped early
};

struct NewtonSettings {
  double tol = 1e-10;   // coefficient-residual convergence target
  int max_iters = 25;
  double sup_tol = 1e-9;     // emitted-point gate on the grid sup of |F|
  double tail_factor = 1e-8; // emitted-point gate: tail <= factor*|amplitude|
};

// Tangent-direction predictor at the bifurcation point, scaled so the outer
// cos(mx) coefficient equals s.
inline PatchState initial_guess(const BifurcationPoint& bp, double s,
                                int J = 16) {
  if (J < 2) {
    throw std::domain_error("initial_guess: J must be >= 2, got " +
                            std::to_string(J));
  }
  if (!(std::abs(s) <= 0.05 * (1.0 - bp.b_star))) {
    throw std::domain_error(
        "initial_guess: amplitude " + std::to_string(s) +
        " exceeds the admissible gate 0.05*(1-b*) = " +
        std::to_string(0.05 * (1.0 - bp.b_star)));
  }
  if (bp.kernel[0] == 0.0) {
    throw internal_inconsistency(
        "initial_guess: kernel has a vanishing outer component");
  }
  const double ratio = bp.kernel[1] / bp.kernel[0];
  std::vector<double> A(static_cast<std::size_t>(J), 0.0);
  std::vector<double> a(static_cast<std::size_t>(J), 0.0);
  A[0] = s;
  a[0] = s * ratio;
  return PatchState(bp.alpha, bp.b_star, FourierCosine(bp.m, std::move(A)),
                    FourierCosine(bp.m, std::move(a)));
}

namespace detail {

// In-place dense solve by Gaussian elimination with partial pivoting; the
// systems here are at most 2J x 2J.
inline std::vector<double> solve_dense(std::vector<double> A,
                                       std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  if (A.size() != n * n) {
    throw internal_inconsistency("solve_dense: shape mismatch");
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(A[perm[k] * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(A[perm[i] * n + k]);
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (!(best > 0.0)) {
      throw nonconvergence_error("solve_dense: singular Jacobian at column " +
                                 std::to_string(k));
    }
    std::swap(perm[k], perm[piv]);
    const double akk = A[perm[k] * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A[perm[i] * n + k] / akk;
      if (f == 0.0) continue;
      A[perm[i] * n + k] = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) {
        A[perm[i] * n + j] -= f * A[perm[k] * n + j];
      }
      rhs[perm[i]] -= f * rhs[perm[k]];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double acc = rhs[perm[k]];
    for (std::size_t j = k + 1; j < n; ++j) acc -= A[perm[k] * n + j] * x[j];
    x[k] = acc / A[perm[k] * n + k];
  }
  return x;
}

// Unknown vector layout: [A_2..A_J, a_1..a_J, b], with A_1 pinned.
inline PatchState unknowns_to_state(const std::vector<double>& u, double pin,
                                    int m, int J, double alpha) {
  std::vector<double> A(static_cast<std::size_t>(J), 0.0);
  std::vector<double> a(static_cast<std::size_t>(J), 0.0);
  A[0] = pin;
  for (int j = 1; j < J; ++j) A[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j - 1)];
  for (int j = 0; j < J; ++j) {
    a[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(J - 1 + j)];
  }
  const double b = u[static_cast<std::size_t>(2 * J - 1)];
  return PatchState(alpha, b, FourierCosine(m, std::move(A)),
                    FourierCosine(m, std::move(a)));
}

inline std::vector<double> state_to_unknowns(const PatchState& s, int J) {
  std::vector<double> u(static_cast<std::size_t>(2 * J), 0.0);
  for (int j = 1; j < J; ++j) {
    u[static_cast<std::size_t>(j - 1)] =
        j < s.R_pert.truncation() ? s.R_pert.coeffs[static_cast<std::size_t>(j)] : 0.0;
  }
  for (int j = 0; j < J; ++j) {
    u[static_cast<std::size_t>(J - 1 + j)] =
        j < s.r_pert.truncation() ? s.r_pert.coeffs[static_cast<std::size_t>(j)] : 0.0;
  }
  u[static_cast<std::size_t>(2 * J - 1)] = s.b;
  return u;
}

inline std::vector<double> residual_vector(const FPair& f) {
  std::vector<double> r = f.F1.coeffs;
  r.insert(r.end(), f.F2.coeffs.begin(), f.F2.coeffs.end());
  return r;
}

}  // namespace detail

// Newton iteration on the pinned system; the Jacobian is assembled
// column-by-column from the explicit boundary derivative plus the
// finite-difference derivative in b.
inline BranchPoint newton_solve(const PatchState& guess, double pin,
                                const EvalGrid& g,
                                NewtonSettings settings = {}) {
  const int m = g.m_fold;
  const int J = g.J;
  if (J < 2) {
    throw std::domain_error("newton_solve: J must be >= 2, got " +
                            std::to_string(J));
  }
  if (guess.m_fold() != m) {
    throw std::domain_error("newton_solve: guess and grid symmetry differ");
  }
  const std::size_t nu = static_cast<std::size_t>(2 * J);

  // state_to_unknowns drops A_1 and unknowns_to_state re-inserts the pin, so
  // the pinned coefficient is enforced by construction.
  std::vector<double> u = detail::state_to_unknowns(guess, J);
  PatchState state = detail::unknowns_to_state(u, pin, m, J, g.alpha);
  FPair f = eval_F(state, g);
  std::vector<double> r = detail::residual_vector(f);
  double rnorm = 0.0;
  for (double v : r) rnorm = std::max(rnorm, std::abs(v));

  std::vector<double> history{rnorm};
  std::vector<bool> full_steps;
  int iters = 0;
  while (rnorm > settings.tol) {
    if (iters >= settings.max_iters) {
      throw nonconvergence_error(
          "newton_solve: no convergence after " +
          std::to_string(settings.max_iters) +
          " iterations, residual " + fmt_sci(rnorm));
    }
    // Jacobian, one column per unknown.
    std::vector<double> Jac(nu * nu, 0.0);
    for (int j = 1; j < J; ++j) {
      std::vector<double> e(static_cast<std::size_t>(j + 1), 0.0);
      e[static_cast<std::size_t>(j)] = 1.0;
      const FPair df = eval_DF(state, FourierCosine(m, e), FourierCosine(m, {}), g);
      const std::vector<double> col = detail::residual_vector(df);
      for (std::size_t i = 0; i < nu; ++i) Jac[i * nu + static_cast<std::size_t>(j - 1)] = col[i];
    }
    for (int j = 0; j < J; ++j) {
      std::vector<double> e(static_cast<std::size_t>(j + 1), 0.0);
      e[static_cast<std::size_t>(j)] = 1.0;
      const FPair df = eval_DF(state, FourierCosine(m, {}), FourierCosine(m, e), g);
      const std::vector<double> col = detail::residual_vector(df);
      for (std::size_t i = 0; i < nu; ++i) Jac[i * nu + static_cast<std::size_t>(J - 1 + j)] = col[i];
    }
    {
      const FPair df = eval_dF_db(state, g);
      const std::vector<double> col = detail::residual_vector(df);
      for (std::size_t i = 0; i < nu; ++i) Jac[i * nu + (nu - 1)] = col[i];
    }

    const std::vector<double> step = detail::solve_dense(std::move(Jac), r);

    // Full step first, halved up to four times if the residual fails to drop.
    // A trial that leaves the admissible set counts as a failed attempt; if
    // every attempt does, the admissibility loss surfaces as-is.
    double t = 1.0;
    bool accepted = false;
    bool full_step = false;
    bool any_admissible = false;
    for (int attempt = 0; attempt < 5; ++attempt) {
      std::vector<double> u_try(nu);
      for (std::size_t i = 0; i < nu; ++i) u_try[i] = u[i] - t * step[i];
      try {
        PatchState s_try = detail::unknowns_to_state(u_try, pin, m, J, g.alpha);
        const FPair f_try = eval_F(s_try, g);
        any_admissible = true;
        std::vector<double> r_try = detail::residual_vector(f_try);
        double rn = 0.0;
        for (double v : r_try) rn = std::max(rn, std::abs(v));
        if (rn < rnorm || rn <= settings.tol) {
          u = std::move(u_try);
          state = std::move(s_try);
          f = f_try;
          r = std::move(r_try);
          rnorm = rn;
          accepted = true;
          full_step = (attempt == 0);
          break;
        }
      } catch (const std::domain_error&) {
        if (attempt == 4 && !any_admissible) throw;
      }
      t *= 0.5;
    }
    ++iters;
    if (!accepted) {
      throw nonconvergence_error(
          "newton_solve: line search stalled at iteration " +
          std::to_string(iters) + ", residual " + fmt_sci(rnorm));
    }
    history.push_back(rnorm);
    full_steps.push_back(full_step);
  }

  // Quadratic-contraction certificate. Damped steps are legitimate outside
  // the quadratic basin (near a strongly bent branch the basin can be much
  // smaller than any fixed residual window), so per-step bounds cannot work.
  // Instead require that a multi-step solve contains at least one undamped
  // step that starts below 1e-3 and contracts superlinearly: a correct
  // Jacobian always produces one on its final approach, while a wrong one
  // converges linearly and never does (a rate-0.5 step satisfies the bound
  // only above 2.5e-3). The 10x allowance absorbs the problem-dependent
  // quadratic constant.
  if (history.size() >= 3) {
    bool certified = false;
    for (std::size_t k = 1; k < history.size() && !certified; ++k) {
      const double prev = history[k - 1];
      certified = full_steps[k - 1] && prev < 1e-3 &&
                  history[k] < 10.0 * std::pow(prev, 1.5);
    }
    if (!certified) {
      std::string msg = "newton_solve: no superlinear step below 1e-3; history:";
      for (double v : history) msg += " " + fmt_sci(v);
      throw invariant_failure(msg);
    }
  }

  BranchPoint out;
  out.amplitude = pin;
  out.state = state;
  out.newton_iters = iters;
  out.residual = std::max(f.F1.sup_residual, f.F2.sup_residual);
  out.tail = std::max(state.R_pert.tail_magnitude(),
                      state.r_pert.tail_magnitude());
  if (pin != 0.0) {
    if (!(out.residual <= settings.sup_tol)) {
      throw invariant_failure("newton_solve: converged coefficients but grid "
                              "residual " + fmt_sci(out.residual) +
                              " exceeds the emission gate");
    }
    if (!(out.tail <= settings.tail_factor * std::abs(pin))) {
      throw invariant_failure(
          "newton_solve: truncation tail " + fmt_sci(out.tail) +
          " too large for amplitude " + fmt_sci(pin) +
          "; raise J");
    }
  }
  return out;
}

// Sequential continuation in the pinned amplitude, secant predictor after two
// converged points. The first point must converge; later failures truncate
// the branch and leave a warning.
inline Branch trace_branch(int m, double alpha,
                           const std::vector<double>& s_values,
                           const EvalGrid& g, NewtonSettings settings = {}) {
  if (g.m_fold != m) {
    throw std::domain_error("trace_branch: grid symmetry class differs");
  }
  for (std::size_t i = 0; i + 1 < s_values.size(); ++i) {
    if (!(s_values[i] < s_values[i + 1])) {
      throw std::domain_error("trace_branch: amplitudes must increase");
    }
  }
  if (!s_values.empty() && !(s_values.front() > 0.0)) {
    throw std::domain_error("trace_branch: amplitudes must be positive");
  }

  Branch br;
  br.m_fold = m;
  br.alpha = alpha;
  br.origin = find_b_star(m, alpha);

  std::vector<std::vector<double>> upts;
  std::vector<double> spts;
  for (std::size_t idx = 0; idx < s_values.size(); ++idx) {
    const double s = s_values[idx];
    PatchState guess = initial_guess(br.origin, s, g.J);
    if (upts.size() >= 2) {
      const std::vector<double>& u1 = upts[upts.size() - 2];
      const std::vector<double>& u2 = upts[upts.size() - 1];
      const double w = (s - spts[spts.size() - 1]) /
                       (spts[spts.size() - 1] - spts[spts.size() - 2]);
      std::vector<double> up(u2.size());
      for (std::size_t i = 0; i < u2.size(); ++i) {
        up[i] = u2[i] + w * (u2[i] - u1[i]);
      }
      guess = detail::unknowns_to_state(up, s, m, g.J, alpha);
    } else if (!upts.empty()) {
      guess = detail::unknowns_to_state(upts.back(), s, m, g.J, alpha);
    }
    try {
      BranchPoint pt = newton_solve(guess, s, g, settings);
      upts.push_back(detail::state_to_unknowns(pt.state, g.J));
      spts.push_back(s);
      br.points.push_back(std::move(pt));
    } catch (const std::exception& e) {
      if (idx == 0) throw;
      br.warning = "stopped at amplitude " + std::to_string(s) + ": " + e.what();
      break;
    }
  }
  return br;
}

// Re-evaluates |F| at a converged point on a grid twice as fine in every
// direction; returns the sup. Certifies stationarity independent of the
// solve grid.
inline double stationarity_check(const BranchPoint& pt, const EvalGrid& g) {
  EvalGrid fine = make_eval_grid(g.alpha, g.m_fold, g.J, 2 * g.nx, 2 * g.trap_n,
                                 g.levels + 1, std::min(g.q + 8, 64));
  const FPair f = eval_F(pt.state, fine);
  return std::max(f.F1.sup_residual, f.F2.sup_residual);
}

}  // namespace patchbif
